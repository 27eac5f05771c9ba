import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mirrornet.env import (
    FLIES, GROUND, PLAYERS, ROUGH, SOLID, STATS, Action, AgentId, WorldConfig, apply_action, decision_view,
    encode, legal_actions, new_world,
)
from mirrornet.oracle import OracleConfig, label, label_batch, load_oracle_config, locate_agents


def state(frog=(3, 4), toad=(10, 5), energy=10, fly_at=(), rough_at=()):
    v = np.zeros(100, dtype=np.int64)
    v[GROUND] = SOLID
    for c in rough_at:
        v[GROUND.start + c] = ROUGH
    for c in fly_at:
        v[FLIES.start + c] = 1
    v[PLAYERS.start + frog[0]] = frog[1]
    v[PLAYERS.start + toad[0]] = toad[1]
    v[STATS] = (energy, 7, 0, 0)
    return v


def test_distressed_frog_jumps():
    assert label(state(frog=(3, 9), energy=0)) is Action.JUMP


def test_distressed_toad_gets_help():
    assert label(state(toad=(10, 9), energy=10)) is Action.HELP


def test_rough_ahead_means_leap():
    assert label(state(energy=5, rough_at=(5,))) is Action.LEAP


def test_default_is_hop():
    assert label(state()) is Action.HOP


def test_fly_refill_respects_ceiling():
    cfg = OracleConfig(refill_ceiling=16)
    assert label(state(energy=16, fly_at=(3,)), cfg) is Action.JUMP
    assert label(state(energy=17, fly_at=(3,)), cfg) is Action.HOP


def test_help_needs_energy():
    cfg = OracleConfig(help_min_energy=2)
    assert label(state(toad=(10, 9), energy=1), cfg) is Action.HOP


def test_leap_needs_two_energy_and_window():
    assert label(state(energy=1, rough_at=(5,))) is Action.HOP
    assert label(state(energy=5, rough_at=(9,)), OracleConfig(leap_lookahead=5)) is Action.HOP
    assert label(state(energy=5, rough_at=(8,)), OracleConfig(leap_lookahead=5)) is Action.LEAP


def test_precedence_fly_beats_help_beats_leap():
    s = state(toad=(10, 9), energy=5, fly_at=(3,), rough_at=(4,))
    assert label(s) is Action.JUMP
    s = state(toad=(10, 9), energy=5, rough_at=(4,))
    assert label(s) is Action.HELP


def test_zeroed_stats_treat_energy_as_unknown():
    s = state(energy=1, rough_at=(5,))
    s[STATS] = 0
    assert label(s) is Action.LEAP


def test_identity_by_elimination():
    # toad shows its hop code, frog shows an agent-agnostic code
    assert locate_agents(state(frog=(12, 7), toad=(4, 5))) == (12, 4)
    assert locate_agents(state(frog=(12, 4), toad=(4, 8))) == (12, 4)


def test_malformed_states_rejected():
    with pytest.raises(ValueError):
        label(np.zeros(100))
    s = state()
    s[PLAYERS.start + 20] = 6
    with pytest.raises(ValueError):
        label(s)
    with pytest.raises(ValueError):
        label_batch(np.stack([state(), s]))


@pytest.mark.parametrize("bad", [dict(refill_ceiling=0), dict(refill_ceiling=21), dict(help_min_energy=0),
                                 dict(leap_lookahead=0), dict(leap_lookahead=6)])
def test_config_ranges(bad):
    with pytest.raises(ValueError):
        OracleConfig(**bad)


def test_load_oracle_config():
    assert load_oracle_config({"leap_lookahead": "3"}) == OracleConfig(leap_lookahead=3)


def test_empty_batch():
    assert label_batch(np.zeros((0, 100))).shape == (0,)


def _rollout_states(seed, steps, cfg=WorldConfig()):
    rng = np.random.default_rng(seed)
    w = new_world(cfg, seed)
    out = []
    for _ in range(steps):
        for who in AgentId:
            w = apply_action(w, who, Action(int(rng.integers(4))) if w.agent(who).energy else Action.JUMP)
        out.append((decision_view(w), encode(decision_view(w))))
    return out


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32), zero=st.booleans(), la=st.integers(1, 5), ceil=st.integers(1, 20))
def test_batch_matches_scalar_and_is_legal(seed, zero, la, ceil):
    cfg = OracleConfig(refill_ceiling=ceil, leap_lookahead=la)
    worlds = _rollout_states(seed, 40)
    x = np.stack([v for _, v in worlds])
    if zero:
        x[:, STATS] = 0
    batch = label_batch(x, cfg)
    assert [int(a) for a in batch] == [int(label(v, cfg)) for v in x]
    for (w, _), a in zip(worlds, batch):
        assert Action(int(a)) in legal_actions(w, AgentId.FROG)
    perm = np.random.default_rng(seed).permutation(len(x))
    assert np.array_equal(label_batch(x[perm], cfg), batch[perm])
