"""Desk-scale trainer wiring the CTC gradient to the freeze schedule.

A three-matrix model stands in for the usual encoder / transformer /
classification-head split: two tanh layers feed a linear head whose
log-softmax rows form the posteriorgram.  Synthetic utterances are runs
of noisy one-hot frames, so a frame-synchronous classifier can reach
zero error and anything the schedule gets wrong shows up as PER.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from .core import PhonemeSequence
from .ctc import nll_and_gradient_from_logits
from .decode import collapse
from .errors import DivergenceDetected
from .metrics import align, corpus_per
from .schedule import (
    FinetunePolicy,
    Hyperparameters,
    ParamGroup,
    PolicyKind,
    trainable_groups,
)


@dataclass(frozen=True)
class SyntheticTask:
    """Generator settings; everything is deterministic given the seed."""

    seed: int = 0
    num_utterances: int = 160
    feature_dim: int = 16
    hidden_dim: int = 8
    num_phonemes: int = 5
    min_labels: int = 3
    max_labels: int = 8
    min_frames_per_label: int = 2
    max_frames_per_label: int = 4
    noise_std: float = 0.1

    def __post_init__(self):
        if self.num_phonemes > self.feature_dim:
            raise ValueError("need num_phonemes <= feature_dim for one-hot features")
        if not 1 <= self.min_labels <= self.max_labels:
            raise ValueError("bad label-length range")
        if not 1 <= self.min_frames_per_label <= self.max_frames_per_label:
            raise ValueError("bad frames-per-label range")

    @property
    def num_classes(self) -> int:
        return self.num_phonemes + 1

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "num_utterances": self.num_utterances,
            "feature_dim": self.feature_dim,
            "hidden_dim": self.hidden_dim,
            "num_phonemes": self.num_phonemes,
            "min_labels": self.min_labels,
            "max_labels": self.max_labels,
            "min_frames_per_label": self.min_frames_per_label,
            "max_frames_per_label": self.max_frames_per_label,
            "noise_std": self.noise_std,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "SyntheticTask":
        return cls(**{k: raw[k] for k in cls().to_dict() if k in raw})


def generate_synthetic(task: SyntheticTask) -> list:
    """Utterances as (features, reference) pairs.

    Labels avoid immediate repetition so the target never needs a
    separating blank and stays reachable for a per-frame classifier.
    """
    rng = np.random.default_rng(task.seed)
    out = []
    for _ in range(task.num_utterances):
        length = int(rng.integers(task.min_labels, task.max_labels + 1))
        labels = []
        for _ in range(length):
            lab = int(rng.integers(1, task.num_classes))
            while labels and lab == labels[-1]:
                lab = int(rng.integers(1, task.num_classes))
            labels.append(lab)
        frames = []
        for lab in labels:
            run = int(rng.integers(task.min_frames_per_label, task.max_frames_per_label + 1))
            feat = np.zeros((run, task.feature_dim))
            feat[:, lab - 1] = 1.0
            feat += task.noise_std * rng.normal(size=feat.shape)
            frames.append(feat)
        features = np.concatenate(frames, axis=0)
        out.append((features, PhonemeSequence(tuple(labels), task.num_classes)))
    return out


@dataclass(frozen=True)
class ToyModel:
    encoder_weights: np.ndarray  # feature_dim x hidden_dim, group ENCODER
    mid_weights: np.ndarray      # hidden_dim x hidden_dim, group TRANSFORMER
    head_weights: np.ndarray     # hidden_dim x num_classes, group HEAD

    @classmethod
    def init(cls, task: SyntheticTask, seed: int = 0) -> "ToyModel":
        rng = np.random.default_rng(seed)
        def layer(fan_in, fan_out):
            return rng.normal(0.0, 1.0 / np.sqrt(fan_in), size=(fan_in, fan_out))
        return cls(
            encoder_weights=layer(task.feature_dim, task.hidden_dim),
            mid_weights=layer(task.hidden_dim, task.hidden_dim),
            head_weights=layer(task.hidden_dim, task.num_classes),
        )

    def forward(self, features: np.ndarray) -> tuple:
        """Returns (h1, h2, logits); hidden states are kept for backprop."""
        h1 = np.tanh(features @ self.encoder_weights)
        h2 = np.tanh(h1 @ self.mid_weights)
        return h1, h2, h2 @ self.head_weights

    def logits(self, features: np.ndarray) -> np.ndarray:
        return self.forward(features)[2]

    def weights(self, group: ParamGroup) -> np.ndarray:
        return {
            ParamGroup.ENCODER: self.encoder_weights,
            ParamGroup.TRANSFORMER: self.mid_weights,
            ParamGroup.HEAD: self.head_weights,
        }[group]


def utterance_gradients(model: ToyModel, features: np.ndarray,
                        reference: PhonemeSequence) -> tuple:
    """CTC loss and gradients for each weight matrix on one utterance."""
    h1, h2, logits = model.forward(features)
    if not np.isfinite(logits).all():
        raise DivergenceDetected("non-finite logits in the forward pass")
    nll, d_logits = nll_and_gradient_from_logits(logits, reference.labels)
    g_head = h2.T @ d_logits
    d_h2 = (d_logits @ model.head_weights.T) * (1.0 - h2 * h2)
    g_mid = h1.T @ d_h2
    d_h1 = (d_h2 @ model.mid_weights.T) * (1.0 - h1 * h1)
    g_enc = features.T @ d_h1
    return nll, {
        ParamGroup.ENCODER: g_enc,
        ParamGroup.TRANSFORMER: g_mid,
        ParamGroup.HEAD: g_head,
    }


def greedy_per(model: ToyModel, data: Sequence) -> float:
    """Corpus PER of per-frame argmax decoding against the references."""
    ops = []
    for features, reference in data:
        hyp = collapse(np.argmax(model.logits(features), axis=1))
        ops.append(align(reference.labels, hyp))
    return corpus_per(ops)


@dataclass(frozen=True)
class EpochStats:
    epoch: int
    train_loss: float
    val_per: float


def train(
    model: ToyModel,
    train_data: Sequence,
    val_data: Sequence,
    policy: FinetunePolicy,
    hyper: Hyperparameters,
    shuffle_seed: int = 0,
    step_callback: Optional[Callable] = None,
) -> tuple:
    """Plain gradient descent under the freeze schedule.

    The step counter runs across epochs; weight matrices outside
    ``trainable_groups(policy, step)`` are left untouched (the same array
    objects survive the step).  ``step_callback(step, model)`` fires after
    each update when given.  Returns (model, [EpochStats per epoch]).
    """
    rng = np.random.default_rng(shuffle_seed)
    step = 0
    history = []
    n = len(train_data)
    for epoch in range(1, hyper.epochs + 1):
        order = rng.permutation(n)
        epoch_loss = 0.0
        for start in range(0, n, hyper.batch_size):
            batch = [train_data[i] for i in order[start:start + hyper.batch_size]]
            total = {g: 0.0 for g in ParamGroup}
            loss = 0.0
            for features, reference in batch:
                nll, grads = utterance_gradients(model, features, reference)
                loss += nll
                for g in ParamGroup:
                    total[g] = total[g] + grads[g]
            loss /= len(batch)
            if not np.isfinite(loss):
                raise DivergenceDetected(f"loss is {loss} at step {step}")
            updates = {}
            for g in trainable_groups(policy, step):
                updates[g] = model.weights(g) - hyper.learning_rate * total[g] / len(batch)
            model = replace(
                model,
                encoder_weights=updates.get(ParamGroup.ENCODER, model.encoder_weights),
                mid_weights=updates.get(ParamGroup.TRANSFORMER, model.mid_weights),
                head_weights=updates.get(ParamGroup.HEAD, model.head_weights),
            )
            if step_callback is not None:
                step_callback(step, model)
            epoch_loss += loss * len(batch)
            step += 1
        history.append(EpochStats(epoch, epoch_loss / n, greedy_per(model, val_data)))
    return model, history


def write_history_csv(history: Sequence[EpochStats], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "loss", "val_per"])
        for row in history:
            writer.writerow([row.epoch, f"{row.train_loss:.6f}", f"{row.val_per:.4f}"])


def validation_task(task: SyntheticTask, size: int = 40) -> SyntheticTask:
    """Held-out split: same generator settings, shifted seed."""
    return replace(task, seed=task.seed + 1, num_utterances=size)


def default_toy_setup() -> tuple:
    """Task, policy, and hyperparameters sized so a staged run crosses the
    1000-step boundary with room left to converge (40 steps/epoch)."""
    task = SyntheticTask()
    policy = FinetunePolicy(kind=PolicyKind.STAGED_FULL)
    hyper = Hyperparameters(learning_rate=0.3, batch_size=4, epochs=55)
    return task, policy, hyper


def load_train_config(path) -> tuple:
    """CLI config: JSON object with task/policy/hyperparameters sections."""
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    default_task, default_policy, default_hyper = default_toy_setup()
    task = SyntheticTask.from_dict(raw["task"]) if "task" in raw else default_task
    policy = (
        FinetunePolicy.from_dict(raw["policy"]) if "policy" in raw else default_policy
    )
    hyper = (
        Hyperparameters.from_dict(raw["hyperparameters"])
        if "hyperparameters" in raw
        else default_hyper
    )
    return task, policy, hyper
