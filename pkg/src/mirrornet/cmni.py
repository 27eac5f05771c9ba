"""Mirror-neuron scores (MNS), their sum (MNE) and the per-checkpoint index (CMNI)."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path


@dataclass(frozen=True)
class Thresholds:
    """Cut-offs for naming neurons.

    A candidate responds to both agents' distress: MNS > ``candidate``.
    A differentiator responds strongly to one agent only:
    max(delta) > ``differentiator`` while MNS <= ``candidate``.
    """

    candidate: float = 0.01
    differentiator: float = 0.02

    def __post_init__(self) -> None:
        if not (self.candidate > 0 and self.differentiator > 0):
            raise ValueError("thresholds must be positive")


@dataclass(frozen=True)
class NeuronDelta:
    layer: int
    neuron: int
    mean_none: float
    delta_frog: float
    delta_toad: float
    mns: float
    mean_both: float

    @property
    def key(self) -> tuple[int, int]:
        return (self.layer, self.neuron)

    @property
    def label(self) -> str:
        return f"L{self.layer}N{self.neuron}"


@dataclass(frozen=True)
class CmniReport:
    deltas: list[NeuronDelta]
    mne: float
    n_neurons: int
    cmni: float
    candidates: list[tuple[int, int]] = field(default_factory=list)
    differentiators: list[tuple[int, int]] = field(default_factory=list)
    thresholds: Thresholds = Thresholds()


def neuron_delta(layer: int, neuron: int, mean: dict) -> NeuronDelta:
    """Delta record from the four scenario means ``{(df, dt): mean}``."""
    base = mean[(0, 0)]
    df = mean[(1, 0)] - base
    dt = mean[(0, 1)] - base
    return NeuronDelta(layer, neuron, base, df, dt, min(df, dt), mean[(1, 1)])


def deltas(stats) -> list[NeuronDelta]:
    """Per-neuron deltas from ``NeuronStats`` (or anything with layer/neuron/mean)."""
    out = []
    for s in stats:
        missing = [sc for sc in ((0, 0), (1, 0), (0, 1), (1, 1)) if sc not in s.mean]
        if missing:
            raise ValueError(f"L{s.layer}N{s.neuron}: missing scenarios {missing}")
        out.append(neuron_delta(s.layer, s.neuron, s.mean))
    return out


def is_candidate(d: NeuronDelta, th: Thresholds) -> bool:
    return d.mns > th.candidate


def is_differentiator(d: NeuronDelta, th: Thresholds) -> bool:
    return max(d.delta_frog, d.delta_toad) > th.differentiator and d.mns <= th.candidate


def cmni(neuron_deltas, thresholds: Thresholds = Thresholds(), layer_dims=None) -> CmniReport:
    """Aggregate deltas over every hidden and output neuron.

    ``layer_dims`` (``[inputs, h1, ..., 4]``), when given, is checked against
    the neurons present so that N is exactly the network's non-input count.
    """
    ds = sorted(neuron_deltas, key=lambda d: d.key)
    seen = set()
    for d in ds:
        if d.key in seen:
            raise ValueError(f"duplicate entry for {d.label}")
        seen.add(d.key)
    if layer_dims is not None:
        expected = {(li + 1, j) for li, width in enumerate(layer_dims[1:]) for j in range(width)}
        if seen != expected:
            raise ValueError(
                f"deltas cover {len(seen)} neurons; the network has {len(expected)} hidden and output neurons"
            )
    n = len(ds)
    if n == 0:
        raise ValueError("no neurons to score")
    mne = math.fsum(d.mns for d in ds)
    return CmniReport(
        deltas=ds,
        mne=mne,
        n_neurons=n,
        cmni=mne / n,
        candidates=[d.key for d in ds if is_candidate(d, thresholds)],
        differentiators=[d.key for d in ds if is_differentiator(d, thresholds)],
        thresholds=thresholds,
    )


@dataclass(frozen=True)
class CaseRow:
    layer: int
    neuron: int
    role: str  # "candidate" or "differentiator"
    mns: float
    delta_frog: float
    delta_toad: float
    amplification: float | None  # mean_both / mean_none; None when the baseline is 0


def amplification(d: NeuronDelta) -> float | None:
    return None if d.mean_none == 0 else d.mean_both / d.mean_none


def classify_case(report: CmniReport) -> list[CaseRow]:
    """Candidates then differentiators, each ranked by MNS (highest first)."""
    by_key = {d.key: d for d in report.deltas}
    rows = []
    for role, keys in (("candidate", report.candidates), ("differentiator", report.differentiators)):
        for d in sorted((by_key[k] for k in keys), key=lambda d: (-d.mns, d.key)):
            rows.append(CaseRow(d.layer, d.neuron, role, d.mns, d.delta_frog, d.delta_toad, amplification(d)))
    return rows


# --- export ------------------------------------------------------------------------

DELTA_FIELDS = ["layer", "neuron", "mean_none", "delta_frog", "delta_toad", "mns", "mean_both", "role"]


def _role(report: CmniReport, key) -> str:
    if key in report.candidates:
        return "candidate"
    if key in report.differentiators:
        return "differentiator"
    return ""


def report_to_dict(report: CmniReport) -> dict:
    return {
        "mne": report.mne,
        "n_neurons": report.n_neurons,
        "cmni": report.cmni,
        "thresholds": asdict(report.thresholds),
        "candidates": [list(k) for k in report.candidates],
        "differentiators": [list(k) for k in report.differentiators],
        "deltas": [asdict(d) for d in report.deltas],
    }


def report_from_dict(doc: dict) -> CmniReport:
    return CmniReport(
        deltas=[NeuronDelta(**d) for d in doc["deltas"]],
        mne=float(doc["mne"]),
        n_neurons=int(doc["n_neurons"]),
        cmni=float(doc["cmni"]),
        candidates=[tuple(k) for k in doc["candidates"]],
        differentiators=[tuple(k) for k in doc["differentiators"]],
        thresholds=Thresholds(**doc["thresholds"]),
    )


def write_report(report: CmniReport, json_path, csv_path=None) -> Path:
    json_path = Path(json_path)
    json_path.parent.mkdir(parents=True, exist_ok=True)
    json_path.write_text(json.dumps(report_to_dict(report), indent=2) + "\n")
    if csv_path is not None:
        with open(csv_path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(DELTA_FIELDS)
            for d in report.deltas:
                w.writerow([d.layer, d.neuron, repr(d.mean_none), repr(d.delta_frog), repr(d.delta_toad),
                            repr(d.mns), repr(d.mean_both), _role(report, d.key)])
    return json_path


def read_report(path) -> CmniReport:
    return report_from_dict(json.loads(Path(path).read_text()))
