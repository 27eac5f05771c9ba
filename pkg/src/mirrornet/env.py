"""Frog and Toad: a two-agent side-scrolling world with a 100-cell encoding.

Worlds are immutable. ``apply_action`` returns a new ``WorldState``; all
randomness inside the world (terrain scrolled into view, the help-leap coin)
comes from a counter-based stream keyed on ``(rng_seed, rng_counter)`` so a
world value fully determines its future.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

WIDTH = 32
MAX_ENERGY = 20
STATE_DIM = 100

GROUND = slice(0, 32)
PLAYERS = slice(32, 64)
FLIES = slice(64, 96)
STATS = slice(96, 100)

SOLID, ROUGH = 1, 2
FROG_HOP, TOAD_HOP, JUMPING, LEAPING, HELPING, DISTRESSED = 4, 5, 6, 7, 8, 9
PLAYER_CODES = frozenset({0, 4, 5, 6, 7, 8, 9})

HOP_DISTANCE = 1
LEAP_DISTANCE = 5
FLY_ENERGY = 4
HELP_GIFT = 2
HELP_LEAP_PROB = 0.25


class IllegalActionError(ValueError):
    """Raised when an agent attempts an action its state does not allow."""


class AgentId(enum.IntEnum):
    FROG = 0
    TOAD = 1

    @property
    def other(self) -> "AgentId":
        return AgentId(1 - self)


class Action(enum.IntEnum):
    HOP = 0
    JUMP = 1
    LEAP = 2
    HELP = 3


class Activity(enum.Enum):
    HOPPING = "hopping"
    JUMPING = "jumping"
    LEAPING = "leaping"
    HELPING = "helping"
    DISTRESSED = "distressed"
    IDLE = "idle"


_ACTIVITY_CODE = {
    Activity.JUMPING: JUMPING,
    Activity.LEAPING: LEAPING,
    Activity.HELPING: HELPING,
    Activity.DISTRESSED: DISTRESSED,
}
_HOP_CODE = {AgentId.FROG: FROG_HOP, AgentId.TOAD: TOAD_HOP}


def _evolve(obj, **changes):
    """``dataclasses.replace`` for the unvalidated state records, minus the
    per-call field introspection (it dominates the cost of a game step)."""
    return obj.__class__(**{**obj.__dict__, **changes})


@dataclass(frozen=True)
class WorldConfig:
    rough_prob: float = 0.15
    fly_prob: float = 0.15
    rough_run_max: int = 3
    start_energy_min: int = 1
    start_energy_max: int = MAX_ENERGY
    scroll_column: int = WIDTH - 1
    max_gap: int = WIDTH - 1

    def __post_init__(self) -> None:
        for name in ("rough_prob", "fly_prob"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {p}")
        if self.rough_run_max < 1:
            raise ValueError(f"rough_run_max must be >= 1, got {self.rough_run_max}")
        if not 1 <= self.start_energy_min <= self.start_energy_max <= MAX_ENERGY:
            raise ValueError(
                f"start energy range must satisfy 1 <= min <= max <= {MAX_ENERGY}, "
                f"got {self.start_energy_min}..{self.start_energy_max}"
            )
        if not 1 <= self.scroll_column <= WIDTH - 1:
            raise ValueError(f"scroll_column must lie in 1..{WIDTH - 1}, got {self.scroll_column}")
        if not 1 <= self.max_gap <= WIDTH - 1:
            raise ValueError(f"max_gap must lie in 1..{WIDTH - 1}, got {self.max_gap}")


@dataclass(frozen=True)
class AgentState:
    position: int
    energy: int
    score: int = 0
    activity: Activity = Activity.IDLE

    @property
    def distressed(self) -> bool:
        return self.energy == 0


@dataclass(frozen=True)
class WorldState:
    ground: tuple[int, ...]
    flies: tuple[int, ...]
    frog: AgentState
    toad: AgentState
    config: WorldConfig
    rng_seed: int
    rng_counter: int = 0
    scroll_offset: int = 0
    # cells of an unfinished rough run still owed to terrain scrolled in next
    rough_carry: int = 0

    def agent(self, who: AgentId) -> AgentState:
        return self.frog if who is AgentId.FROG else self.toad

    def with_agent(self, who: AgentId, state: AgentState) -> "WorldState":
        if who is AgentId.FROG:
            return _evolve(self, frog=state)
        return _evolve(self, toad=state)


def _stream(world_seed: int, counter: int) -> np.random.Generator:
    return np.random.default_rng((world_seed & 0xFFFFFFFFFFFFFFFF, counter))


def _terrain(rng: np.random.Generator, n: int, config: WorldConfig, carry: int):
    """Generate ``n`` ground and fly cells; returns (ground, flies, carry)."""
    starts = rng.random(n)
    lengths = rng.integers(1, config.rough_run_max + 1, size=n)
    fly_draws = rng.random(n)
    ground = []
    for i in range(n):
        if carry > 0:
            ground.append(ROUGH)
            carry -= 1
        elif starts[i] < config.rough_prob:
            ground.append(ROUGH)
            carry = int(lengths[i]) - 1
        else:
            ground.append(SOLID)
    flies = [1 if u < config.fly_prob else 0 for u in fly_draws]
    return tuple(ground), tuple(flies), carry


def new_world(config: WorldConfig, seed: int) -> WorldState:
    """Build a fresh world; identical ``(config, seed)`` give identical worlds."""
    if not isinstance(config, WorldConfig):
        raise TypeError("config must be a WorldConfig")
    rng = _stream(seed, 0)
    ground, flies, carry = _terrain(rng, WIDTH, config, 0)
    # both agents start inside the band the camera keeps them in
    band = min(config.max_gap, config.scroll_column) + 1
    frog_pos, toad_pos = (config.scroll_column - int(p) for p in rng.choice(band, size=2, replace=False))
    lo, hi = config.start_energy_min, config.start_energy_max
    frog_e, toad_e = (int(e) for e in rng.integers(lo, hi + 1, size=2))
    return WorldState(
        ground=ground,
        flies=flies,
        frog=AgentState(position=frog_pos, energy=frog_e),
        toad=AgentState(position=toad_pos, energy=toad_e),
        config=config,
        rng_seed=int(seed),
        rng_counter=1,
        rough_carry=carry,
    )


def legal_actions(world: WorldState, agent: AgentId) -> frozenset[Action]:
    if world.agent(agent).energy == 0:
        return frozenset({Action.JUMP})
    return frozenset(Action)


def _scroll(world: WorldState, shift: int, rng: np.random.Generator) -> WorldState:
    ground, flies, carry = _terrain(rng, shift, world.config, world.rough_carry)
    return _evolve(
        world,
        ground=world.ground[shift:] + ground,
        flies=world.flies[shift:] + flies,
        frog=_evolve(world.frog, position=world.frog.position - shift),
        toad=_evolve(world.toad, position=world.toad.position - shift),
        scroll_offset=world.scroll_offset + shift,
        rough_carry=carry,
    )


def _advance(world: WorldState, mover: AgentId, distance: int, rng):
    """Move ``mover`` forward, hopping over the partner and scrolling if needed.

    The mover may not get more than ``max_gap`` cells ahead of its partner;
    passing ``scroll_column`` scrolls the screen as far as the partner can
    stay on it. ``rng`` is called for a generator only when new terrain is
    needed. Returns ``(world, progress)`` with progress the number of world
    cells actually gained (0 when stalled).
    """
    config = world.config
    me, other = world.agent(mover), world.agent(mover.other)
    target = me.position + distance
    if target == other.position:
        target += 1
    target = min(target, other.position + config.max_gap)
    if target <= me.position:
        return world, 0
    shift = 0
    if target > config.scroll_column:
        # the partner must stay on screen
        shift = min(target - config.scroll_column, other.position)
    final = min(target - shift, WIDTH - 1)
    if shift:
        world = _scroll(world, shift, rng())
    world = world.with_agent(mover, _evolve(world.agent(mover), position=final))
    return world, final + shift - me.position


def _settle(agent: AgentState, activity: Activity) -> AgentState:
    if agent.energy == 0:
        return _evolve(agent, activity=Activity.DISTRESSED)
    return _evolve(agent, activity=activity)


def apply_action(world: WorldState, agent: AgentId, action: Action) -> WorldState:
    action = Action(action)
    agent = AgentId(agent)
    me = world.agent(agent)
    if action is not Action.JUMP and me.energy == 0:
        raise IllegalActionError(f"{agent.name.lower()} has no energy and can only jump for flies")

    # every action owns one stream position; building the generator is the
    # expensive part, so it only happens when randomness is actually drawn
    seed, counter = world.rng_seed, world.rng_counter
    cache = []

    def rng() -> np.random.Generator:
        if not cache:
            cache.append(_stream(seed, counter))
        return cache[0]

    world = _evolve(world, rng_counter=counter + 1)

    if action is Action.HOP:
        world, progress = _advance(world, agent, HOP_DISTANCE, rng)
        me = world.agent(agent)
        if progress > 0:
            cost = 1 if world.ground[me.position] == ROUGH else 0
            me = _evolve(me, score=me.score + 1, energy=me.energy - cost)
        return world.with_agent(agent, _settle(me, Activity.HOPPING))

    if action is Action.JUMP:
        col = me.position
        if world.flies[col]:
            me = _evolve(me, energy=min(me.energy + FLY_ENERGY, MAX_ENERGY))
            flies = world.flies[:col] + (0,) + world.flies[col + 1 :]
            world = _evolve(world, flies=flies)
        return world.with_agent(agent, _settle(me, Activity.JUMPING))

    if action is Action.LEAP:
        world, _ = _advance(world, agent, LEAP_DISTANCE, rng)
        me = world.agent(agent)
        me = _evolve(me, energy=me.energy - 1)
        return world.with_agent(agent, _settle(me, Activity.LEAPING))

    # HELP
    other_id = agent.other
    world = world.with_agent(agent, _settle(_evolve(me, energy=me.energy - 1), Activity.HELPING))
    them = world.agent(other_id)
    revived = them.energy == 0
    them = _evolve(them, energy=min(them.energy + HELP_GIFT, MAX_ENERGY))
    if revived:
        them = _evolve(them, activity=Activity.IDLE)
    world = world.with_agent(other_id, them)
    if rng().random() < HELP_LEAP_PROB:
        world, _ = _advance(world, other_id, LEAP_DISTANCE, rng)
        world = world.with_agent(other_id, _evolve(world.agent(other_id), activity=Activity.LEAPING))
    return world


def player_code(agent: AgentId, state: AgentState) -> int:
    return _ACTIVITY_CODE.get(state.activity, _HOP_CODE[agent])


def encode_into(world: WorldState, out: np.ndarray, zero_stats: bool = False) -> np.ndarray:
    out[GROUND] = world.ground
    out[PLAYERS] = 0
    out[32 + world.frog.position] = player_code(AgentId.FROG, world.frog)
    out[32 + world.toad.position] = player_code(AgentId.TOAD, world.toad)
    out[FLIES] = world.flies
    if zero_stats:
        out[STATS] = 0
    else:
        out[STATS] = (world.frog.energy, world.toad.energy, world.frog.score, world.toad.score)
    return out


def encode(world: WorldState, zero_stats: bool = False) -> np.ndarray:
    """Return the 100-cell integer state vector for ``world``."""
    return encode_into(world, np.zeros(STATE_DIM, dtype=np.int64), zero_stats)


def check_state_vector(state) -> np.ndarray:
    """Validate a state vector and return it as an integer array.

    Raises ``ValueError`` describing the first violated invariant.
    """
    v = np.asarray(state)
    if v.shape != (STATE_DIM,):
        raise ValueError(f"state vector must have shape ({STATE_DIM},), got {v.shape}")
    cells = v.tolist()
    if not set(cells[GROUND]) <= {SOLID, ROUGH}:
        raise ValueError("ground cells must be 1 (solid) or 2 (rough)")
    players = cells[PLAYERS]
    if not set(players) <= PLAYER_CODES:
        raise ValueError("player cells must be one of 0,4,5,6,7,8,9")
    if len(players) - players.count(0) > 2:
        raise ValueError("at most two player cells may be occupied")
    if not set(cells[FLIES]) <= {0, 1}:
        raise ValueError("fly cells must be 0 or 1")
    return v.astype(np.int64, copy=False)


def load_world_config(section) -> WorldConfig:
    """Build a ``WorldConfig`` from a mapping of strings (e.g. a config section)."""
    kwargs = {}
    for name, cast in (
        ("rough_prob", float),
        ("fly_prob", float),
        ("rough_run_max", int),
        ("start_energy_min", int),
        ("start_energy_max", int),
        ("scroll_column", int),
        ("max_gap", int),
    ):
        if name in section:
            kwargs[name] = cast(section[name])
    return WorldConfig(**kwargs)


def decision_view(world: WorldState, agent: AgentId = AgentId.FROG) -> WorldState:
    """The world as seen when ``agent`` is about to choose its next action.

    A mobile agent is awaiting its move, so it shows its nominal hop code;
    a distressed agent keeps code 9. The partner keeps its current activity.
    """
    me = world.agent(agent)
    if me.energy == 0 or me.activity is Activity.IDLE:
        return world
    return world.with_agent(agent, _evolve(me, activity=Activity.IDLE))
