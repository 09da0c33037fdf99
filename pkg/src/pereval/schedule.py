"""Fine-tuning freeze schedules and checkpoint selection.

Two policies: train the classification head only, or stage in the
transformer group after a fixed number of optimizer steps.  The
convolutional encoder group stays frozen under every policy.  "Iteration"
means optimizer step (one batch), not epoch.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .errors import NoCheckpoints

DEFAULT_STAGE_BOUNDARY = 1000
DEFAULT_LEARNING_RATE = 5e-4
DEFAULT_BATCH_SIZE = 128
DEFAULT_EPOCHS_STAGED = 55
DEFAULT_EPOCHS_FROZEN = 30


class ParamGroup(enum.Enum):
    ENCODER = "encoder"
    TRANSFORMER = "transformer"
    HEAD = "head"


class PolicyKind(enum.Enum):
    FROZEN_HEAD = "frozen_head"
    STAGED_FULL = "staged_full"


@dataclass(frozen=True)
class FinetunePolicy:
    kind: PolicyKind
    stage_boundary: int = DEFAULT_STAGE_BOUNDARY

    def __post_init__(self):
        if self.stage_boundary < 0:
            raise ValueError(f"stage_boundary must be >= 0, got {self.stage_boundary}")

    def to_dict(self) -> dict:
        return {"kind": self.kind.value, "stage_boundary": self.stage_boundary}

    @classmethod
    def from_dict(cls, raw: dict) -> "FinetunePolicy":
        return cls(
            kind=PolicyKind(raw["kind"]),
            stage_boundary=int(raw.get("stage_boundary", DEFAULT_STAGE_BOUNDARY)),
        )


@dataclass(frozen=True)
class Hyperparameters:
    learning_rate: float = DEFAULT_LEARNING_RATE
    batch_size: int = DEFAULT_BATCH_SIZE
    epochs: int = DEFAULT_EPOCHS_STAGED

    def __post_init__(self):
        if self.learning_rate <= 0 or self.batch_size <= 0 or self.epochs <= 0:
            raise ValueError(f"all hyperparameters must be positive: {self}")

    @classmethod
    def for_policy(cls, policy: FinetunePolicy, **overrides) -> "Hyperparameters":
        epochs = (
            DEFAULT_EPOCHS_FROZEN
            if policy.kind is PolicyKind.FROZEN_HEAD
            else DEFAULT_EPOCHS_STAGED
        )
        return cls(**{"epochs": epochs, **overrides})

    def to_dict(self) -> dict:
        return {
            "learning_rate": self.learning_rate,
            "batch_size": self.batch_size,
            "epochs": self.epochs,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "Hyperparameters":
        return cls(
            learning_rate=float(raw.get("learning_rate", DEFAULT_LEARNING_RATE)),
            batch_size=int(raw.get("batch_size", DEFAULT_BATCH_SIZE)),
            epochs=int(raw.get("epochs", DEFAULT_EPOCHS_STAGED)),
        )


def trainable_groups(policy: FinetunePolicy, iteration: int) -> frozenset:
    """Parameter groups receiving updates at a given optimizer step."""
    if iteration < 0:
        raise ValueError(f"iteration must be >= 0, got {iteration}")
    if policy.kind is PolicyKind.FROZEN_HEAD:
        return frozenset({ParamGroup.HEAD})
    if iteration < policy.stage_boundary:
        return frozenset({ParamGroup.HEAD})
    return frozenset({ParamGroup.HEAD, ParamGroup.TRANSFORMER})


def select_checkpoint(history: Sequence[tuple]) -> int:
    """Epoch with the best validation PER; ties go to the earliest epoch."""
    if not history:
        raise NoCheckpoints("no checkpoints recorded")
    best_epoch, _ = min(history, key=lambda row: (row[1], row[0]))
    return best_epoch


def save_config(policy: FinetunePolicy, hyper: Hyperparameters, path) -> None:
    Path(path).write_text(
        json.dumps({"policy": policy.to_dict(), "hyperparameters": hyper.to_dict()},
                   indent=2) + "\n",
        encoding="utf-8",
    )


def load_config(path) -> tuple:
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    return (
        FinetunePolicy.from_dict(raw["policy"]),
        Hyperparameters.from_dict(raw.get("hyperparameters", {})),
    )
