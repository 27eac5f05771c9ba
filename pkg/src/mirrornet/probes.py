"""Distress scenarios and per-neuron activation statistics.

Each probe is a matched quadruple: one base state (both agents mobile) and its
three rewrites in which the Frog, the Toad, or both carry the distress code.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .env import DISTRESSED, FROG_HOP, PLAYERS, STATE_DIM, STATS
from .moments import ColumnMoments, column_moments
from .neural import Network, _as_batch, _run

# (frog distressed, toad distressed)
SCENARIOS: tuple[tuple[int, int], ...] = ((0, 0), (1, 0), (0, 1), (1, 1))


def scenario_name(sc) -> str:
    return f"{sc[0]}{sc[1]}"


@dataclass(frozen=True)
class ScenarioQuadruple:
    base: np.ndarray
    variants: dict  # scenario -> state vector


@dataclass(frozen=True)
class ScenarioSet:
    """``k`` matched quadruples stored as one ``(k, 100)`` array per scenario."""

    states: dict  # scenario -> (k, 100) int8 array
    source_rows: np.ndarray  # row index of each base state in the source set

    def __len__(self) -> int:
        return len(self.source_rows)

    def __getitem__(self, i: int) -> ScenarioQuadruple:
        variants = {sc: self.states[sc][i] for sc in SCENARIOS}
        return ScenarioQuadruple(base=variants[(0, 0)], variants=variants)


class ProbeError(ValueError):
    pass


def eligible_rows(features: np.ndarray) -> np.ndarray:
    """Rows with the Frog mobile (its hop code present) and the Toad mobile."""
    players = np.asarray(features)[:, PLAYERS]
    occupied = (players != 0).sum(axis=1)
    frog = (players == FROG_HOP).sum(axis=1)
    distressed = (players == DISTRESSED).any(axis=1)
    return np.flatnonzero((occupied == 2) & (frog == 1) & ~distressed)


def build_scenarios(features, k: int = 10_000, seed: int = 0) -> ScenarioSet:
    """Sample ``k`` eligible base states and derive the four scenario variants."""
    x = np.asarray(features)
    if x.ndim != 2 or x.shape[1] != STATE_DIM:
        raise ProbeError(f"expected an (n, {STATE_DIM}) feature matrix, got {x.shape}")
    if k < 1:
        raise ProbeError(f"k must be >= 1, got {k}")
    pool = eligible_rows(x)
    if len(pool) < k:
        raise ProbeError(f"only {len(pool)} eligible base states (both agents mobile), need {k}")
    rng = np.random.default_rng(seed)
    rows = np.sort(rng.choice(pool, size=k, replace=False))
    base = x[rows].astype(np.int8)
    base[:, STATS] = 0
    players = base[:, PLAYERS]
    frog_cell = np.argmax(players == FROG_HOP, axis=1)
    toad_cell = np.argmax((players != 0) & (players != FROG_HOP), axis=1)
    idx = np.arange(k)
    off = PLAYERS.start
    states = {}
    for df, dt in SCENARIOS:
        v = base.copy()
        if df:
            v[idx, off + frog_cell] = DISTRESSED
        if dt:
            v[idx, off + toad_cell] = DISTRESSED
        states[(df, dt)] = v
    return ScenarioSet(states=states, source_rows=rows)


def capture(net: Network, scenarios: ScenarioSet, chunk: int = 65536) -> dict:
    """Inference-mode activations: ``{scenario: [layer_1, ..., output]}``.

    Each entry is a ``(k, neurons)`` matrix; hidden layers are post-ReLU and
    the last entry holds the softmax outputs.
    """
    if len(scenarios) == 0:
        raise ProbeError("no scenarios to capture")
    out = {}
    for sc in SCENARIOS:
        x, _ = _as_batch(net, scenarios.states[sc])
        parts = []
        for s in range(0, len(x), chunk):
            probs, hidden, _ = _run(net, x[s : s + chunk], None)
            parts.append(hidden + [probs])
        out[sc] = [np.concatenate([p[i] for p in parts]) for i in range(len(parts[0]))]
    return out


@dataclass(frozen=True)
class NeuronStats:
    layer: int  # 1-based; the output layer is len(hidden) + 1
    neuron: int  # 0-based
    count: int
    mean: dict  # scenario -> float
    variance: dict
    skewness: dict  # NaN where degenerate
    kurtosis: dict
    degenerate: dict  # scenario -> bool


def stats(activations: dict) -> list[NeuronStats]:
    """Per-neuron, per-scenario moments of captured activations."""
    missing = [sc for sc in SCENARIOS if sc not in activations]
    if missing:
        raise ProbeError(f"missing scenarios {missing}")
    nlayers = len(activations[(0, 0)])
    per_sc: dict = {}
    for sc in SCENARIOS:
        mats = activations[sc]
        if len(mats) != nlayers:
            raise ProbeError("scenarios disagree on the number of layers")
        for m in mats:
            if np.asarray(m).size == 0:
                raise ProbeError("empty activation matrix")
        per_sc[sc] = [column_moments(m) for m in mats]
    out = []
    for li in range(nlayers):
        width = per_sc[(0, 0)][li].mean.shape[0]
        for j in range(width):
            cm: dict[tuple, ColumnMoments] = {sc: per_sc[sc][li] for sc in SCENARIOS}
            out.append(
                NeuronStats(
                    layer=li + 1,
                    neuron=j,
                    count=cm[(0, 0)].count,
                    mean={sc: float(c.mean[j]) for sc, c in cm.items()},
                    variance={sc: float(c.variance[j]) for sc, c in cm.items()},
                    skewness={sc: float(c.skewness[j]) for sc, c in cm.items()},
                    kurtosis={sc: float(c.kurtosis[j]) for sc, c in cm.items()},
                    degenerate={sc: bool(c.degenerate[j]) for sc, c in cm.items()},
                )
            )
    return out


STATS_FIELDS = ["layer", "neuron", "scenario", "count", "mean", "variance", "skewness", "kurtosis"]


def _fmt(v: float) -> str:
    return "degenerate" if math.isnan(v) else repr(v)


def write_stats_csv(rows: list[NeuronStats], path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(STATS_FIELDS)
        for r in rows:
            for sc in SCENARIOS:
                w.writerow([
                    r.layer, r.neuron, scenario_name(sc), r.count, repr(r.mean[sc]),
                    repr(r.variance[sc]), _fmt(r.skewness[sc]), _fmt(r.kurtosis[sc]),
                ])
    return path


def read_stats_csv(path) -> list[NeuronStats]:
    grouped: dict = {}
    with open(path, newline="") as fh:
        for rec in csv.DictReader(fh):
            key = (int(rec["layer"]), int(rec["neuron"]))
            sc = (int(rec["scenario"][0]), int(rec["scenario"][1]))
            g = grouped.setdefault(key, {"count": int(rec["count"]), "rows": {}})
            g["rows"][sc] = rec
    out = []
    for (layer, neuron), g in sorted(grouped.items()):
        rows = g["rows"]
        if set(rows) != set(SCENARIOS):
            raise ProbeError(f"L{layer}N{neuron}: missing scenario rows")

        def num(field):
            return {sc: float("nan") if rows[sc][field] == "degenerate" else float(rows[sc][field]) for sc in SCENARIOS}

        skew = num("skewness")
        out.append(
            NeuronStats(
                layer=layer, neuron=neuron, count=g["count"], mean=num("mean"), variance=num("variance"),
                skewness=skew, kurtosis=num("kurtosis"),
                degenerate={sc: math.isnan(skew[sc]) for sc in SCENARIOS},
            )
        )
    return out
