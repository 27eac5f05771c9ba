"""Rule-based labeller that picks Frog's action for an encoded state.

Rules fire in order; the first match wins:

1. Frog is distressed                                  -> Jump
2. fly over Frog and energy <= ``refill_ceiling``     -> Jump
3. Toad distressed and energy >= ``help_min_energy``  -> Help
4. rough ground within ``leap_lookahead`` cells ahead
   and energy >= 2                                     -> Leap
5. otherwise                                           -> Hop

States are read from Frog's decision perspective, where a mobile Frog shows
its hop code 4 and a distressed one shows 9. Frog's cell is therefore the one
holding 4; failing that, the other cell is the Toad's whenever it holds a code
Frog cannot show (5-8). When that still leaves a tie (both 9, or two activity
codes in a state not taken at Frog's decision point) the rear cell is Frog. Energy is read from cell 96; when the statistics cells are zeroed the
energy is unknown and every energy condition is treated as met.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .env import (
    DISTRESSED,
    FLIES,
    FROG_HOP,
    GROUND,
    MAX_ENERGY,
    PLAYER_CODES,
    PLAYERS,
    ROUGH,
    SOLID,
    STATE_DIM,
    STATS,
    TOAD_HOP,
    WIDTH,
    Action,
    check_state_vector,
)

LEAP_MIN_ENERGY = 2


@dataclass(frozen=True)
class OracleConfig:
    refill_ceiling: int = 16
    help_min_energy: int = 2
    leap_lookahead: int = 5

    def __post_init__(self) -> None:
        if not 0 < self.refill_ceiling <= MAX_ENERGY:
            raise ValueError(f"refill_ceiling must lie in 1..{MAX_ENERGY}, got {self.refill_ceiling}")
        if self.help_min_energy < 1:
            raise ValueError(f"help_min_energy must be >= 1, got {self.help_min_energy}")
        if not 1 <= self.leap_lookahead <= 5:
            raise ValueError(f"leap_lookahead must lie in 1..5, got {self.leap_lookahead}")


def locate_agents(state: np.ndarray) -> tuple[int, int]:
    """Return ``(frog_cell, toad_cell)`` as indices into the 32-cell player layer."""
    players = state[PLAYERS]
    cells = np.flatnonzero(players)
    if len(cells) != 2:
        raise ValueError(f"expected two occupied player cells, found {len(cells)}")
    a, b = int(cells[0]), int(cells[1])
    ca, cb = int(players[a]), int(players[b])
    if ca == cb and ca in (FROG_HOP, TOAD_HOP):
        raise ValueError(f"both player cells carry agent-specific code {ca}")
    if _frog_is_b(ca, cb):
        return b, a
    return a, b


def _frog_is_b(ca, cb):
    """Elementwise: does the front occupied cell belong to Frog?"""
    busy_a = (ca > TOAD_HOP) & (ca < DISTRESSED)
    busy_b = (cb > TOAD_HOP) & (cb < DISTRESSED)
    by_activity = (cb != TOAD_HOP) & busy_a & ~busy_b
    return (cb == FROG_HOP) | ((ca != FROG_HOP) & ((ca == TOAD_HOP) | by_activity))


def label(state, config: OracleConfig = OracleConfig()) -> Action:
    v = check_state_vector(state)
    frog, toad = locate_agents(v)
    players, stats = v[PLAYERS], v[STATS]

    if players[frog] == DISTRESSED:
        return Action.JUMP
    energy = int(stats[0]) if np.any(stats) else None

    def at_least(level: int) -> bool:
        return energy is None or energy >= level

    if v[FLIES][frog] == 1 and (energy is None or energy <= config.refill_ceiling):
        return Action.JUMP
    if players[toad] == DISTRESSED and at_least(config.help_min_energy):
        return Action.HELP
    ahead = v[GROUND][frog + 1 : frog + 1 + config.leap_lookahead]
    if np.any(ahead == ROUGH) and at_least(LEAP_MIN_ENERGY):
        return Action.LEAP
    return Action.HOP


def _validate_batch(x: np.ndarray) -> None:
    if x.ndim != 2 or x.shape[1] != STATE_DIM:
        raise ValueError(f"states must have shape (n, {STATE_DIM}), got {x.shape}")
    bad = ~np.all(np.isin(x[:, GROUND], (SOLID, ROUGH)), axis=1)
    bad |= ~np.all(np.isin(x[:, PLAYERS], sorted(PLAYER_CODES)), axis=1)
    bad |= ~np.all(np.isin(x[:, FLIES], (0, 1)), axis=1)
    bad |= np.count_nonzero(x[:, PLAYERS], axis=1) != 2
    if bad.any():
        i = int(np.argmax(bad))
        try:
            label(x[i])
        except ValueError as exc:
            raise ValueError(f"state {i}: {exc}") from None
        raise ValueError(f"state {i} is malformed")


def label_batch(states, config: OracleConfig = OracleConfig()) -> np.ndarray:
    """Vectorised ``label`` over an ``(n, 100)`` array; returns int8 actions."""
    x = np.asarray(states)
    if x.size == 0:
        return np.zeros(0, dtype=np.int8)
    x = x.astype(np.int64, copy=False)
    _validate_batch(x)
    n = len(x)
    rows = np.arange(n)
    players = x[:, PLAYERS]
    occupied = players != 0
    a = np.argmax(occupied, axis=1)
    b = WIDTH - 1 - np.argmax(occupied[:, ::-1], axis=1)
    ca, cb = players[rows, a], players[rows, b]
    if np.any((ca == cb) & ((ca == FROG_HOP) | (ca == TOAD_HOP))):
        i = int(np.argmax((ca == cb) & ((ca == FROG_HOP) | (ca == TOAD_HOP))))
        raise ValueError(f"state {i}: both player cells carry agent-specific code {ca[i]}")
    swap = _frog_is_b(ca, cb)
    frog = np.where(swap, b, a)
    toad = np.where(swap, a, b)

    stats = x[:, STATS]
    known = np.any(stats != 0, axis=1)
    energy = stats[:, 0]

    def at_least(level: int) -> np.ndarray:
        return ~known | (energy >= level)

    frog_code = players[rows, frog]
    toad_code = players[rows, toad]
    fly = x[:, FLIES][rows, frog] == 1
    ground = x[:, GROUND]
    cols = np.arange(WIDTH)
    window = (cols[None, :] > frog[:, None]) & (cols[None, :] <= frog[:, None] + config.leap_lookahead)
    rough_ahead = np.any(window & (ground == ROUGH), axis=1)

    out = np.full(n, Action.HOP, dtype=np.int8)
    leap = rough_ahead & at_least(LEAP_MIN_ENERGY)
    help_ = (toad_code == DISTRESSED) & at_least(config.help_min_energy)
    jump_fly = fly & (~known | (energy <= config.refill_ceiling))
    # apply in reverse precedence so earlier rules overwrite later ones
    out[leap] = Action.LEAP
    out[help_] = Action.HELP
    out[jump_fly] = Action.JUMP
    out[frog_code == DISTRESSED] = Action.JUMP
    return out


def load_oracle_config(section) -> OracleConfig:
    kwargs = {k: int(section[k]) for k in ("refill_ceiling", "help_min_energy", "leap_lookahead") if k in section}
    return OracleConfig(**kwargs)
