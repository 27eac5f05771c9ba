import math

import numpy as np
import pytest

from mirrornet.dataset import generate
from mirrornet.env import DISTRESSED, FROG_HOP, PLAYERS, STATS, WorldConfig
from mirrornet.neural import forward, init_network
from mirrornet.oracle import OracleConfig
from mirrornet.probes import (
    SCENARIOS, ProbeError, build_scenarios, capture, eligible_rows, read_stats_csv, stats, write_stats_csv,
)


@pytest.fixture(scope="module")
def features():
    ds = generate(3000, WorldConfig(rough_prob=0.05, fly_prob=0.1, scroll_column=26, max_gap=2),
                  OracleConfig(refill_ceiling=20, help_min_energy=1, leap_lookahead=3), seed=2)
    return ds.features


def test_eligible_rows_have_both_agents_mobile(features):
    rows = eligible_rows(features)
    assert len(rows) > 0
    p = features[rows][:, PLAYERS]
    assert ((p != 0).sum(axis=1) == 2).all()
    assert ((p == FROG_HOP).sum(axis=1) == 1).all()
    assert not (p == DISTRESSED).any()


def test_scenarios_differ_only_in_distress_codes(features):
    sc = build_scenarios(features, k=200, seed=1)
    assert len(sc) == 200
    base = sc.states[(0, 0)]
    assert np.array_equal(base, features[sc.source_rows])
    for key in SCENARIOS:
        v = sc.states[key]
        changed = (v != base).sum(axis=1)
        assert (changed == sum(key)).all()
        assert ((v[:, PLAYERS] == DISTRESSED).sum(axis=1) == sum(key)).all()
        assert not v[:, STATS].any()
    frog_cells = np.argmax(base[:, PLAYERS] == FROG_HOP, axis=1)
    assert (sc.states[(1, 0)][np.arange(200), PLAYERS.start + frog_cells] == DISTRESSED).all()
    quad = sc[5]
    assert np.array_equal(quad.base, base[5]) and set(quad.variants) == set(SCENARIOS)


def test_scenarios_deterministic(features):
    a = build_scenarios(features, k=50, seed=9)
    b = build_scenarios(features, k=50, seed=9)
    assert all(np.array_equal(a.states[s], b.states[s]) for s in SCENARIOS)


def test_not_enough_base_states(features):
    with pytest.raises(ProbeError, match="eligible"):
        build_scenarios(features, k=len(features) + 1)
    with pytest.raises(ProbeError):
        build_scenarios(features[:, :50], k=1)


def test_capture_matches_forward(features):
    net = init_network([100, 6, 5, 4], np.random.default_rng(0))
    sc = build_scenarios(features, k=40, seed=0)
    acts = capture(net, sc, chunk=7)
    for key in SCENARIOS:
        probs, hidden = forward(net, sc.states[key].astype(float))
        assert [a.shape for a in acts[key]] == [(40, 6), (40, 5), (40, 4)]
        assert np.allclose(acts[key][0], hidden[0]) and np.allclose(acts[key][2], probs)


def test_stats_layers_and_degenerate_columns():
    rng = np.random.default_rng(0)
    acts = {s: [np.column_stack([rng.random(30), np.zeros(30)]), rng.random((30, 4))] for s in SCENARIOS}
    out = stats(acts)
    assert [(r.layer, r.neuron) for r in out] == [(1, 0), (1, 1), (2, 0), (2, 1), (2, 2), (2, 3)]
    dead = out[1]
    assert dead.degenerate[(0, 0)] and math.isnan(dead.skewness[(1, 1)])
    assert out[0].mean[(0, 1)] == pytest.approx(acts[(0, 1)][0][:, 0].mean())


def test_stats_rejects_missing_scenario():
    with pytest.raises(ProbeError):
        stats({(0, 0): [np.ones((3, 2))]})


def test_stats_csv_round_trip(tmp_path):
    rng = np.random.default_rng(1)
    acts = {s: [np.column_stack([rng.random(20), np.full(20, 0.5)])] for s in SCENARIOS}
    rows = stats(acts)
    path = write_stats_csv(rows, tmp_path / "stats.csv")
    assert "degenerate" in path.read_text()
    back = read_stats_csv(path)
    assert [(r.layer, r.neuron, r.count) for r in back] == [(r.layer, r.neuron, r.count) for r in rows]
    assert back[0].mean == rows[0].mean and back[0].kurtosis == rows[0].kurtosis
    assert back[1].degenerate == rows[1].degenerate
