"""Versioned, lossless checkpoint files.

A checkpoint is a JSON document; floats are written with ``repr`` precision so
``load_checkpoint(save_checkpoint(c)) == c`` holds bit for bit.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .neural import Network

SCHEMA = "mirrornet-checkpoint"
SCHEMA_VERSION = 1
SUFFIX = ".ckpt"
TIMESTAMP_FORMAT = "%Y%m%d-%H%M%S"


class CheckpointError(Exception):
    pass


class CheckpointCorruptError(CheckpointError):
    pass


class CheckpointVersionError(CheckpointError):
    pass


@dataclass(frozen=True)
class Hyperparams:
    learning_rate: float
    hidden_layers: int
    neurons_per_layer: int
    batch_size: int = 25
    dropout_rate: float = 0.0
    max_epochs: int = 50
    patience: int = 10
    seed: int = 0

    def __post_init__(self) -> None:
        if not self.learning_rate > 0:
            raise ValueError(f"learning_rate must be positive, got {self.learning_rate}")
        if not 1 <= self.hidden_layers <= 3:
            raise ValueError(f"hidden_layers must lie in 1..3, got {self.hidden_layers}")
        if not 5 <= self.neurons_per_layer <= 50:
            raise ValueError(f"neurons_per_layer must lie in 5..50, got {self.neurons_per_layer}")
        if not 20 <= self.batch_size <= 25:
            raise ValueError(f"batch_size must lie in 20..25, got {self.batch_size}")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError(f"dropout_rate must lie in [0, 1), got {self.dropout_rate}")
        if self.max_epochs < 1:
            raise ValueError(f"max_epochs must be >= 1, got {self.max_epochs}")
        if self.patience < 1:
            raise ValueError(f"patience must be >= 1, got {self.patience}")

    @property
    def layer_dims(self) -> list[int]:
        return [100] + [self.neurons_per_layer] * self.hidden_layers + [4]

    def tag(self) -> str:
        return (
            f"actrelu_bs{self.batch_size}_dr{self.dropout_rate:g}_ep{self.max_epochs}"
            f"_nl{self.hidden_layers}_nn{self.neurons_per_layer}_lr{self.learning_rate:g}"
        )


@dataclass(frozen=True)
class Checkpoint:
    network: Network
    hyperparams: Hyperparams
    epoch: int
    val_loss: float
    created_at: datetime

    def __post_init__(self) -> None:
        if self.epoch < 1:
            raise ValueError(f"epoch must be >= 1, got {self.epoch}")
        if not np.isfinite(self.val_loss) or self.val_loss < 0:
            raise ValueError(f"val_loss must be finite and non-negative, got {self.val_loss}")

    @property
    def name(self) -> str:
        return checkpoint_name(self.created_at, self.hyperparams, self.epoch, self.val_loss)


def checkpoint_name(created_at: datetime, hp: Hyperparams, epoch: int, val_loss: float) -> str:
    """``checkpoint-<timestamp>-<hyperparameter tag>-epoch<K>-valLoss<V>``"""
    return f"checkpoint-{created_at.strftime(TIMESTAMP_FORMAT)}-{hp.tag()}-epoch{epoch}-valLoss{val_loss:.4f}"


def _to_document(ckpt: Checkpoint) -> dict:
    return {
        "schema": SCHEMA,
        "schema_version": SCHEMA_VERSION,
        "name": ckpt.name,
        "created_at": ckpt.created_at.isoformat(),
        "epoch": ckpt.epoch,
        "val_loss": ckpt.val_loss,
        "hyperparams": asdict(ckpt.hyperparams),
        "layers": [
            {"weight": w.tolist(), "bias": b.tolist()}
            for w, b in zip(ckpt.network.weights, ckpt.network.biases)
        ],
    }


def save_checkpoint(ckpt: Checkpoint, directory) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / (ckpt.name + SUFFIX)
    path.write_text(json.dumps(_to_document(ckpt), separators=(",", ":")) + "\n")
    return path


def load_checkpoint(path) -> Checkpoint:
    path = Path(path)
    try:
        raw = path.read_text()
    except FileNotFoundError:
        raise
    except OSError as exc:
        raise CheckpointCorruptError(f"{path}: unreadable ({exc})") from exc
    try:
        doc = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise CheckpointCorruptError(f"{path}: not a valid checkpoint document ({exc.msg})") from exc
    if not isinstance(doc, dict) or doc.get("schema") != SCHEMA:
        raise CheckpointCorruptError(f"{path}: missing checkpoint schema marker")
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise CheckpointVersionError(
            f"{path}: schema version {doc.get('schema_version')!r}, expected {SCHEMA_VERSION}"
        )
    try:
        weights = [np.array(layer["weight"], dtype=np.float64) for layer in doc["layers"]]
        biases = [np.array(layer["bias"], dtype=np.float64) for layer in doc["layers"]]
        return Checkpoint(
            network=Network(weights, biases),
            hyperparams=Hyperparams(**doc["hyperparams"]),
            epoch=int(doc["epoch"]),
            val_loss=float(doc["val_loss"]),
            created_at=datetime.fromisoformat(doc["created_at"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise CheckpointCorruptError(f"{path}: malformed checkpoint ({exc})") from exc


def utc_now() -> datetime:
    return datetime.now(timezone.utc).replace(microsecond=0, tzinfo=None)
