"""Checkpoint evaluation and consolidated sweep reports."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .env import Action
from .neural import Network, predict

N_ACTIONS = len(Action)
POSITIVE_MAX_LOSS = 0.06
POSITIVE_MIN_CMNI = 0.005
NEGATIVE_MAX_CMNI = 0.0005


@dataclass(frozen=True)
class EvalResult:
    accuracy: float
    confusion: np.ndarray  # (4, 4) int64; rows predicted, columns actual
    precision: np.ndarray  # NaN for a class never predicted
    recall: np.ndarray  # NaN for a class absent from the labels

    @property
    def total(self) -> int:
        return int(self.confusion.sum())


def confusion_matrix(predicted, actual) -> np.ndarray:
    p = np.asarray(predicted, dtype=np.int64)
    a = np.asarray(actual, dtype=np.int64)
    if p.shape != a.shape:
        raise ValueError(f"{len(p)} predictions but {len(a)} labels")
    if p.size and (min(p.min(), a.min()) < 0 or max(p.max(), a.max()) >= N_ACTIONS):
        raise ValueError("action codes must lie in 0..3")
    return np.bincount(p * N_ACTIONS + a, minlength=N_ACTIONS * N_ACTIONS).reshape(N_ACTIONS, N_ACTIONS)


def result_from_predictions(predicted, actual) -> EvalResult:
    cm = confusion_matrix(predicted, actual)
    total = int(cm.sum())
    if total == 0:
        raise ValueError("nothing to evaluate")
    diag = np.diag(cm).astype(np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        precision = np.where(cm.sum(axis=1) > 0, diag / cm.sum(axis=1), np.nan)
        recall = np.where(cm.sum(axis=0) > 0, diag / cm.sum(axis=0), np.nan)
    return EvalResult(int(np.trace(cm)) / total, cm, precision, recall)


def evaluate(net: Network, features, labels) -> EvalResult:
    """Inference-mode argmax predictions scored against ``labels``."""
    x = np.asarray(features)
    if len(x) == 0:
        raise ValueError("test set is empty")
    return result_from_predictions(predict(net, x), labels)


def mirror_flag(val_loss: float, cmni: float) -> str:
    if val_loss < POSITIVE_MAX_LOSS and cmni > POSITIVE_MIN_CMNI:
        return "mirror-positive"
    if cmni < NEGATIVE_MAX_CMNI:
        return "mirror-negative"
    return ""


@dataclass(frozen=True)
class CheckpointScore:
    """CMNI of one checkpoint, keyed by its file name."""

    run: str
    checkpoint: str
    epoch: int
    val_loss: float
    mne: float
    cmni: float


class ReportError(ValueError):
    pass


TABLE_FIELDS = ["run", "learning_rate", "hidden_layers", "neurons_per_layer", "epochs", "val_loss",
                "mns_total", "cmni", "flag", "checkpoint"]
TREND_FIELDS = ["run", "epoch", "val_loss", "cmni", "flag", "checkpoint"]
EVAL_FIELDS = ["checkpoint", "accuracy", "total"] + [
    f"pred_{p.name.lower()}_actual_{a.name.lower()}" for p in Action for a in Action
]


def _write(path: Path, fields, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=fields, lineterminator="\n")
        w.writeheader()
        w.writerows(rows)


def report(sweep_rows, scores, evals: dict, out_dir) -> dict:
    """Write the sweep table, the per-epoch (val_loss, CMNI) trend and evaluations.

    ``sweep_rows`` are sweep manifest rows, ``scores`` a sequence of
    ``CheckpointScore`` and ``evals`` maps checkpoint name to ``EvalResult``.
    Each run's table row describes its best checkpoint (best_checkpoint column).
    Returns the paths written.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    runs = {r["run"]: r for r in sweep_rows}
    unknown = sorted({s.run for s in scores} - set(runs))
    known_ckpts = {s.checkpoint for s in scores}
    unknown += sorted(set(evals) - known_ckpts)
    if unknown:
        raise ReportError("ids without a matching sweep run or scored checkpoint: " + ", ".join(unknown))

    by_ckpt = {s.checkpoint: s for s in scores}
    table = []
    for name, r in runs.items():
        best = r.get("best_checkpoint") or ""
        s = by_ckpt.get(Path(best).name.removesuffix(".ckpt")) if best else None
        table.append({
            "run": name,
            "learning_rate": r.get("learning_rate", ""),
            "hidden_layers": r.get("hidden_layers", ""),
            "neurons_per_layer": r.get("neurons_per_layer", ""),
            "epochs": "" if s is None else s.epoch,
            "val_loss": "" if s is None else f"{s.val_loss:.4f}",
            "mns_total": "" if s is None else f"{s.mne:.5f}",
            "cmni": "" if s is None else f"{s.cmni:.5f}",
            "flag": "" if s is None else mirror_flag(s.val_loss, s.cmni),
            "checkpoint": "" if s is None else s.checkpoint,
        })
    trend = [
        {"run": s.run, "epoch": s.epoch, "val_loss": repr(s.val_loss), "cmni": repr(s.cmni),
         "flag": mirror_flag(s.val_loss, s.cmni), "checkpoint": s.checkpoint}
        for s in sorted(scores, key=lambda s: (s.run, s.epoch))
    ]
    eval_rows = []
    for name in sorted(evals):
        e = evals[name]
        row = {"checkpoint": name, "accuracy": repr(e.accuracy), "total": e.total}
        for p in Action:
            for a in Action:
                row[f"pred_{p.name.lower()}_actual_{a.name.lower()}"] = int(e.confusion[p, a])
        eval_rows.append(row)

    paths = {"table": out / "cmni_table.csv", "trend": out / "cmni_trend.csv", "eval": out / "eval.csv",
             "summary": out / "summary.txt"}
    _write(paths["table"], TABLE_FIELDS, table)
    _write(paths["trend"], TREND_FIELDS, trend)
    _write(paths["eval"], EVAL_FIELDS, eval_rows)
    paths["summary"].write_text(summary_text(table, evals))
    return paths


def summary_text(table, evals: dict) -> str:
    lines = [f"runs: {len(table)}"]
    pos = [r["run"] for r in table if r["flag"] == "mirror-positive"]
    neg = [r["run"] for r in table if r["flag"] == "mirror-negative"]
    lines.append(f"mirror-positive: {len(pos)}")
    lines.append(f"mirror-negative: {len(neg)}")
    for r in table:
        lines.append(f"  {r['run']}: val_loss={r['val_loss'] or '-'} cmni={r['cmni'] or '-'} {r['flag']}".rstrip())
    for name in sorted(evals):
        e = evals[name]
        lines.append(f"eval {name}: accuracy={e.accuracy:.4f} over {e.total} rows")
    return "".join(line + "\n" for line in lines)
