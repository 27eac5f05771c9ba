"""Labelled game-state datasets: generation by random play, splits, CSV I/O."""
from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .env import (
    STATE_DIM,
    STATS,
    Action,
    AgentId,
    WorldConfig,
    apply_action,
    decision_view,
    encode_into,
    new_world,
)
from .oracle import OracleConfig, label_batch

HORIZON = 256
SHARD_ROWS = 16384
LABEL_SOURCES = ("state", "features")
HEADER = ",".join([f"f{i}" for i in range(STATE_DIM)] + ["label"])


class DatasetError(Exception):
    pass


@dataclass
class Dataset:
    features: np.ndarray  # (n, 100) int8, statistics cells zeroed
    labels: np.ndarray  # (n,) int8 action codes
    meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.features = np.asarray(self.features, dtype=np.int8)
        self.labels = np.asarray(self.labels, dtype=np.int8)
        if self.features.ndim != 2 or self.features.shape[1] != STATE_DIM:
            raise DatasetError(f"features must be (n, {STATE_DIM}), got {self.features.shape}")
        if len(self.labels) != len(self.features):
            raise DatasetError(f"{len(self.features)} feature rows but {len(self.labels)} labels")

    def __len__(self) -> int:
        return len(self.labels)

    def histogram(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=len(Action))

    def subset(self, idx) -> "Dataset":
        return Dataset(self.features[idx], self.labels[idx], dict(self.meta))


def rollout_shard(
    shard: int,
    rows: int,
    seed: int,
    world_config: WorldConfig,
    oracle_config: OracleConfig,
    horizon: int = HORIZON,
    label_source: str = "features",
) -> tuple[np.ndarray, np.ndarray]:
    """Random play for ``rows`` steps; one Frog-decision state per step.

    With ``label_source="features"`` (the default) labels come from the zeroed
    vector the network gets, so every stored row is labelled exactly as the
    oracle labels it. With ``"state"`` they see the full encoding, energies
    included, and identical feature rows can carry different labels.
    Returned features always have the statistics cells zeroed.
    """
    rng = np.random.default_rng([seed & 0xFFFFFFFFFFFFFFFF, shard])
    states = np.zeros((rows, STATE_DIM), dtype=np.int64)
    moves = rng.integers(0, len(Action), size=(rows, 2))
    world = None
    for i in range(rows):
        if i % horizon == 0:
            world = new_world(world_config, int(rng.integers(0, 2**63)))
        for who in (AgentId.FROG, AgentId.TOAD):
            act = Action(int(moves[i, who])) if world.agent(who).energy > 0 else Action.JUMP
            world = apply_action(world, who, act)
        encode_into(decision_view(world), states[i])
    if label_source == "features":
        states[:, STATS] = 0
    labels = label_batch(states, oracle_config)
    states[:, STATS] = 0
    return states.astype(np.int8), labels


def _row_keys(features: np.ndarray) -> list[bytes]:
    """One hashable byte string per row."""
    return np.ascontiguousarray(features).view(np.dtype((np.void, features.shape[1])))[:, 0].tolist()


def generate(
    count: int,
    world_config: WorldConfig,
    oracle_config: OracleConfig,
    seed: int,
    *,
    horizon: int = HORIZON,
    shard_rows: int = SHARD_ROWS,
    workers: int = 1,
    dedup: bool = True,
    max_oversample: float = 4.0,
    label_source: str = "features",
) -> Dataset:
    """Generate ``count`` labelled examples.

    Shards are rolled out independently from ``(seed, shard index)`` and
    concatenated in shard order, so ``workers`` never changes the output.
    Exact duplicate feature rows are dropped while the total number of rolled
    out rows stays below ``max_oversample * count``; past that cap the
    remainder is topped up with duplicates.
    """
    if count < 1:
        raise DatasetError(f"count must be >= 1, got {count}")
    if label_source not in LABEL_SOURCES:
        raise DatasetError(f"label_source must be one of {LABEL_SOURCES}, got {label_source!r}")
    shard_rows = max(1, min(shard_rows, count))
    budget = max(int(math.ceil(max_oversample * count)), count)
    feat_parts, label_parts = [], []
    seen: set[bytes] = set()
    keep: list[int] = []
    rolled = 0
    shard = 0
    pool = ProcessPoolExecutor(workers) if workers > 1 else None
    try:
        while len(keep) < count and rolled < budget:
            batch = list(range(shard, shard + max(1, workers)))
            args = [(s, shard_rows, seed, world_config, oracle_config, horizon, label_source) for s in batch]
            parts = list(pool.map(rollout_shard, *zip(*args))) if pool else [rollout_shard(*a) for a in args]
            shard += len(batch)
            for f, y in parts:
                if dedup:
                    for i, key in enumerate(_row_keys(f), start=rolled):
                        if key not in seen:
                            seen.add(key)
                            keep.append(i)
                else:
                    keep.extend(range(rolled, rolled + len(f)))
                feat_parts.append(f)
                label_parts.append(y)
                rolled += len(f)
    finally:
        if pool:
            pool.shutdown()
    feats = np.concatenate(feat_parts)
    labels = np.concatenate(label_parts)
    keep = np.asarray(keep, dtype=np.int64)
    duplicates = 0
    if len(keep) < count:
        extra = np.setdiff1d(np.arange(len(feats)), keep)[: count - len(keep)]
        duplicates = len(extra)
        keep = np.sort(np.concatenate([keep, extra]))
    keep = keep[:count]
    meta = {
        "count": count,
        "seed": seed,
        "horizon": horizon,
        "label_source": label_source,
        "shard_rows": shard_rows,
        "shards": shard,
        "rolled_out": int(len(feats)),
        "duplicates_kept": int(duplicates),
        "world_config": asdict(world_config),
        "oracle_config": asdict(oracle_config),
    }
    return Dataset(feats[keep], labels[keep], meta)


# --- persistence -------------------------------------------------------------------

def manifest_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.stem + ".manifest.json")


def _csv_bytes(ds: Dataset) -> bytes:
    table = np.concatenate([ds.features, ds.labels[:, None]], axis=1)
    if len(table) and (table.min() < 0 or table.max() > 9):
        lines = [",".join(map(str, row)) for row in table.tolist()]
        return (HEADER + "\n" + "".join(line + "\n" for line in lines)).encode()
    # every value is a single digit: lay out bytes directly
    ncol = table.shape[1]
    out = np.empty((len(table), 2 * ncol), dtype=np.uint8)
    out[:, 0::2] = table + ord("0")
    out[:, 1::2] = ord(",")
    out[:, -1] = ord("\n")
    return (HEADER + "\n").encode() + out.tobytes()


def write_dataset(ds: Dataset, path, extra_meta: dict | None = None) -> Path:
    """Write ``ds`` as CSV plus a ``.manifest.json`` sidecar."""
    path = Path(path)
    meta = {**ds.meta, **(extra_meta or {}), "rows": len(ds), "label_histogram": ds.histogram().tolist()}
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(_csv_bytes(ds))
        manifest_path(path).write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    except OSError as exc:
        raise DatasetError(f"cannot write dataset to {path}: {exc.strerror or exc}") from exc
    return path


def read_dataset(path) -> Dataset:
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise DatasetError(f"cannot read dataset {path}: {exc.strerror or exc}") from exc
    head, _, body = raw.partition(b"\n")
    if head.decode(errors="replace").strip() != HEADER:
        raise DatasetError(f"{path}: unexpected header")
    ncol = STATE_DIM + 1
    if len(body) % (2 * ncol) == 0:
        grid = np.frombuffer(body, dtype=np.uint8).reshape(-1, 2 * ncol)
        if np.all(grid[:, 1:-1:2] == ord(",")) and np.all(grid[:, -1] == ord("\n")):
            table = grid[:, 0::2].astype(np.int16) - ord("0")
            if table.size == 0 or (table.min() >= 0 and table.max() <= 9):
                return _from_table(table, path)
    try:
        table = np.loadtxt(body.decode().splitlines(), delimiter=",", dtype=np.int64, ndmin=2)
    except ValueError as exc:
        raise DatasetError(f"{path}: malformed CSV ({exc})") from exc
    if table.size == 0:
        table = np.zeros((0, ncol), dtype=np.int64)
    if table.shape[1] != ncol:
        raise DatasetError(f"{path}: expected {ncol} columns, got {table.shape[1]}")
    return _from_table(table, path)


def _from_table(table: np.ndarray, path: Path) -> Dataset:
    meta = {}
    mp = manifest_path(path)
    if mp.exists():
        meta = json.loads(mp.read_text())
    return Dataset(table[:, :STATE_DIM], table[:, STATE_DIM], meta)


# --- splitting ---------------------------------------------------------------------

DEFAULT_PROPORTIONS = {Action.HOP: 0.40, Action.JUMP: 0.40, Action.LEAP: 0.10, Action.HELP: 0.10}


@dataclass(frozen=True)
class SplitSpec:
    test_size: int = 100_000
    proportions: dict = field(default_factory=lambda: dict(DEFAULT_PROPORTIONS))

    def __post_init__(self) -> None:
        if self.test_size < 0:
            raise ValueError(f"test_size must be >= 0, got {self.test_size}")
        props = {Action(k): float(v) for k, v in self.proportions.items()}
        object.__setattr__(self, "proportions", props)
        if any(v < 0 for v in props.values()):
            raise ValueError("proportions must be non-negative")
        if abs(sum(props.values()) - 1.0) > 1e-9:
            raise ValueError(f"proportions must sum to 1, got {sum(props.values())}")

    def counts(self) -> dict[Action, int]:
        """Per-label test counts: round down, remainder to Hop."""
        counts = {a: int(math.floor(self.test_size * self.proportions.get(a, 0.0) + 1e-9)) for a in Action}
        counts[Action.HOP] += self.test_size - sum(counts.values())
        return counts


def split(ds: Dataset, spec: SplitSpec, seed: int) -> tuple[Dataset, Dataset]:
    """Partition into (train, test); the test set holds exactly ``spec.counts()``."""
    need = spec.counts()
    have = {a: int(n) for a, n in zip(Action, ds.histogram())}
    deficit = {a.name.lower(): need[a] - have[a] for a in Action if need[a] > have[a]}
    if deficit:
        raise DatasetError(
            "not enough rows for the test split; short by "
            + ", ".join(f"{k}={v}" for k, v in deficit.items())
        )
    rng = np.random.default_rng(seed)
    picks = []
    for a in Action:
        pool = np.flatnonzero(ds.labels == a)
        picks.append(rng.choice(pool, size=need[a], replace=False))
    test_idx = np.sort(np.concatenate(picks)).astype(np.int64)
    mask = np.ones(len(ds), dtype=bool)
    mask[test_idx] = False
    return ds.subset(np.flatnonzero(mask)), ds.subset(test_idx)


def holdout(ds: Dataset, fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    """Random (rest, held-out) partition with ``round(fraction * n)`` held out."""
    if not 0.0 < fraction < 1.0:
        raise ValueError(f"fraction must lie in (0, 1), got {fraction}")
    n_out = max(1, int(round(fraction * len(ds))))
    rng = np.random.default_rng(seed)
    out = np.sort(rng.choice(len(ds), size=n_out, replace=False))
    mask = np.ones(len(ds), dtype=bool)
    mask[out] = False
    return ds.subset(np.flatnonzero(mask)), ds.subset(out)
