"""Mini-batch training with per-epoch checkpoints, early stopping and sweeps."""
from __future__ import annotations

import csv
import json
import logging
from dataclasses import asdict, dataclass
from datetime import datetime
from pathlib import Path

import numpy as np

from .checkpoint import Checkpoint, Hyperparams, save_checkpoint, utc_now
from .neural import Adam, backward, dropout_masks, init_network, mean_loss

log = logging.getLogger(__name__)

OPTIMIZER = {"name": "adam", "beta1": 0.9, "beta2": 0.999, "eps": 1e-8}


class TrainingDiverged(RuntimeError):
    def __init__(self, epoch: int, batch: int, value: float):
        super().__init__(f"non-finite training loss {value} at epoch {epoch}, batch {batch}")
        self.epoch, self.batch, self.value = epoch, batch, value


class EarlyStopping:
    """Stop once ``patience`` consecutive epochs fail to beat the best loss."""

    def __init__(self, patience: int):
        self.patience = patience
        self.best = np.inf
        self.best_epoch = 0
        self.epoch = 0

    def update(self, val_loss: float) -> bool:
        self.epoch += 1
        if val_loss < self.best:
            self.best, self.best_epoch = val_loss, self.epoch
        return self.epoch - self.best_epoch >= self.patience


def _arrays(data):
    x = np.asarray(data.features, dtype=np.float64)
    y = np.asarray(data.labels, dtype=np.intp)
    if len(x) == 0:
        raise ValueError("dataset is empty")
    return x, y


def train(train_data, val_data, hp: Hyperparams, checkpoint_dir, timestamp: datetime | None = None) -> list[Checkpoint]:
    """Train one configuration, writing a checkpoint after every epoch.

    Returns the checkpoints in epoch order. ``checkpoint_dir/manifest.json``
    lists them and flags the best epoch.
    """
    x, y = _arrays(train_data)
    xv, yv = _arrays(val_data)
    out = Path(checkpoint_dir)
    out.mkdir(parents=True, exist_ok=True)
    created = timestamp or utc_now()

    rng = np.random.default_rng(hp.seed)
    net = init_network(hp.layer_dims, rng)
    opt = Adam(lr=hp.learning_rate, beta1=OPTIMIZER["beta1"], beta2=OPTIMIZER["beta2"], eps=OPTIMIZER["eps"])
    stopper = EarlyStopping(hp.patience)
    history: list[Checkpoint] = []
    paths: list[Path] = []
    n = len(x)
    for epoch in range(1, hp.max_epochs + 1):
        order = rng.permutation(n)
        for b, start in enumerate(range(0, n, hp.batch_size)):
            idx = order[start : start + hp.batch_size]
            masks = dropout_masks(net, hp.dropout_rate, len(idx), rng)
            gw, gb = backward(net, x[idx], y[idx], masks)
            if not all(np.all(np.isfinite(g)) for g in (*gw, *gb)):
                raise TrainingDiverged(epoch, b, float("nan"))
            scale = 1.0 / len(idx)
            opt.step(net.params(), [g * scale for g in (*gw, *gb)])
        val = mean_loss(net, xv, yv)
        if not np.isfinite(val):
            raise TrainingDiverged(epoch, b, val)
        ckpt = Checkpoint(network=net.copy(), hyperparams=hp, epoch=epoch, val_loss=val, created_at=created)
        history.append(ckpt)
        paths.append(save_checkpoint(ckpt, out))
        stop = stopper.update(val)
        log.info("%s epoch %d val_loss %.5f", hp.tag(), epoch, val)
        if stop:
            break

    manifest = {
        "hyperparams": asdict(hp),
        "optimizer": OPTIMIZER,
        "best_epoch": stopper.best_epoch,
        "best_val_loss": stopper.best,
        "checkpoints": [
            {"epoch": c.epoch, "val_loss": c.val_loss, "file": p.name, "best": c.epoch == stopper.best_epoch}
            for c, p in zip(history, paths)
        ],
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    return history


SWEEP_FIELDS = [
    "run", "learning_rate", "hidden_layers", "neurons_per_layer", "batch_size", "dropout_rate",
    "max_epochs", "patience", "seed", "status", "epochs_run", "best_epoch", "best_val_loss",
    "checkpoint_dir", "best_checkpoint", "error",
]


def default_grid(seed: int = 0, max_epochs: int = 50, dropout_rate: float = 0.12) -> list[Hyperparams]:
    """Fifty configurations over the learning-rate and depth/width ranges."""
    shapes = [(1, 10), (1, 11), (1, 15), (1, 17), (2, 9), (2, 11), (2, 17), (3, 10), (3, 11), (3, 17)]
    rates = [4e-6, 5e-6, 1e-5, 2e-5, 5e-5]
    return [
        Hyperparams(
            learning_rate=lr, hidden_layers=nl, neurons_per_layer=nn, batch_size=25,
            dropout_rate=dropout_rate, max_epochs=max_epochs, seed=seed,
        )
        for lr in rates
        for nl, nn in shapes
    ]


def mini_grid(seed: int = 0, max_epochs: int = 50, dropout_rate: float = 0.0) -> list[Hyperparams]:
    """Six desk-scale configurations: three shapes at the two largest learning rates."""
    return [
        Hyperparams(
            learning_rate=lr, hidden_layers=nl, neurons_per_layer=nn, batch_size=25,
            dropout_rate=dropout_rate, max_epochs=max_epochs, seed=seed,
        )
        for lr in (2e-5, 5e-5)
        for nl, nn in ((1, 15), (2, 11), (2, 17))
    ]


def sweep(grid, train_data, val_data, checkpoint_dir, timestamp: datetime | None = None) -> list[dict]:
    """Train every configuration; failures are recorded and the sweep goes on.

    Writes ``sweep_manifest.csv`` under ``checkpoint_dir`` and returns its rows.
    """
    grid = list(grid)
    if not grid:
        raise ValueError("sweep grid is empty")
    root = Path(checkpoint_dir)
    root.mkdir(parents=True, exist_ok=True)
    created = timestamp or utc_now()
    rows = []
    for i, hp in enumerate(grid):
        run = f"run{i:03d}-{hp.tag()}-seed{hp.seed}"
        row = {"run": run, **asdict(hp), "checkpoint_dir": run, "status": "ok", "error": ""}
        try:
            history = train(train_data, val_data, hp, root / run, timestamp=created)
            best = min(history, key=lambda c: (c.val_loss, c.epoch))
            row.update(
                epochs_run=len(history), best_epoch=best.epoch, best_val_loss=repr(best.val_loss),
                best_checkpoint=f"{run}/{best.name}.ckpt",
            )
        except Exception as exc:  # recorded per config; the sweep continues
            log.warning("sweep config %s failed: %s", run, exc)
            row.update(status="failed", error=f"{type(exc).__name__}: {exc}", epochs_run=0,
                       best_epoch="", best_val_loss="", best_checkpoint="")
        rows.append(row)
    with open(root / "sweep_manifest.csv", "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=SWEEP_FIELDS, lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
    return rows
