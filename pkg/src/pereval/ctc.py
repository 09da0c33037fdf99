"""CTC negative log-likelihood, exact gradient, and an enumeration oracle.

The loss sums, over every frame-label path that collapses to the target,
the product of per-frame class probabilities.  The recursion runs over the
blank-interleaved extended target in the log domain throughout.

Gradients are taken with respect to pre-softmax logits.  A posteriorgram
stores normalized log-probabilities, which are exactly the log-softmax of
any logits that produce them, so ``grad = softmax(logits) - occupancy``
applies unchanged; to convert to a gradient w.r.t. the log-probabilities
themselves, note d nll / d logp[t, v] = -occupancy[t, v].
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .core import BLANK_INDEX, LogPosteriorGram, PhonemeSequence
from .errors import InfeasibleTarget, InvalidLabel, OracleTooLarge

NEG_INF = -np.inf

BRUTEFORCE_MAX_PATHS = 10**7


@dataclass(frozen=True)
class CtcLoss:
    """Loss value in nats; +inf marks an infeasible target."""

    nll: float
    per_frame_gradient: Optional[np.ndarray] = None


def min_frames_required(labels: Sequence[int]) -> int:
    """Shortest path length that can emit ``labels``: one frame per label
    plus a separating blank for each adjacent equal pair."""
    repeats = sum(1 for a, b in zip(labels, labels[1:]) if a == b)
    return len(labels) + repeats


def _check_labels(labels: Sequence[int], num_classes: int) -> None:
    for lab in labels:
        if not 0 < lab < num_classes:
            raise InvalidLabel(
                f"target label {lab} invalid for {num_classes} classes"
            )


def _extended(labels: Sequence[int]) -> np.ndarray:
    """Blank-interleaved target: [b, l1, b, l2, ..., b]."""
    ext = np.full(2 * len(labels) + 1, BLANK_INDEX, dtype=np.int64)
    ext[1::2] = labels
    return ext


def _skip_mask(ext: np.ndarray) -> np.ndarray:
    """skip[s] is True when the s-2 -> s transition is allowed."""
    mask = np.zeros(len(ext), dtype=bool)
    if len(ext) > 2:
        mask[2:] = (ext[2:] != BLANK_INDEX) & (ext[2:] != ext[:-2])
    return mask


def _shift(row: np.ndarray, by: int) -> np.ndarray:
    out = np.full_like(row, NEG_INF)
    out[by:] = row[:-by] if by else row
    return out


def _logaddexp3(a, b, c):
    return np.logaddexp(np.logaddexp(a, b), c)


def _forward(logp: np.ndarray, ext: np.ndarray, skip: np.ndarray) -> np.ndarray:
    """Alpha lattice, shape (T, S); alpha[t, s] includes the emission at t."""
    T = logp.shape[0]
    S = len(ext)
    alpha = np.full((T, S), NEG_INF)
    alpha[0, 0] = logp[0, ext[0]]
    if S > 1:
        alpha[0, 1] = logp[0, ext[1]]
    for t in range(1, T):
        prev = alpha[t - 1]
        skipped = np.where(skip, _shift(prev, 2), NEG_INF)
        alpha[t] = _logaddexp3(prev, _shift(prev, 1), skipped) + logp[t, ext]
    return alpha


def _backward(logp: np.ndarray, ext: np.ndarray, skip: np.ndarray) -> np.ndarray:
    """Beta lattice, shape (T, S); beta[t, s] covers emissions t+1..T."""
    T = logp.shape[0]
    S = len(ext)
    beta = np.full((T, S), NEG_INF)
    beta[T - 1, S - 1] = 0.0
    if S > 1:
        beta[T - 1, S - 2] = 0.0
    for t in range(T - 2, -1, -1):
        nxt = beta[t + 1] + logp[t + 1, ext]
        stay = nxt
        advance = np.full(S, NEG_INF)
        advance[:-1] = nxt[1:]
        jump = np.full(S, NEG_INF)
        if S > 2:
            # s -> s+2 is legal exactly where the forward skip lands on s+2.
            jump[:-2] = np.where(skip[2:], nxt[2:], NEG_INF)
        beta[t] = _logaddexp3(stay, advance, jump)
    return beta


def _nll_from_log_probs(logp: np.ndarray, labels: Sequence[int]) -> float:
    """Forward pass only; ``logp`` is a float64 T x V matrix."""
    T = logp.shape[0]
    if T == 0:
        return 0.0 if len(labels) == 0 else np.inf
    if min_frames_required(labels) > T:
        return np.inf
    ext = _extended(labels)
    alpha = _forward(logp, ext, _skip_mask(ext))
    tail = alpha[T - 1, -1]
    if len(ext) > 1:
        tail = np.logaddexp(tail, alpha[T - 1, -2])
    return float(-tail)


def ctc_nll(gram: LogPosteriorGram, target: PhonemeSequence) -> CtcLoss:
    """Negative log-likelihood of ``target`` under ``gram``.

    Infeasible targets (too few frames, or zero path mass) yield +inf
    rather than an error, so the loss stays total for scoring.
    """
    _check_labels(target.labels, gram.classes)
    logp = gram.data.astype(np.float64)
    nll = _nll_from_log_probs(logp, target.labels)
    # row-normalization slack can push total mass a hair above one
    return CtcLoss(nll=max(nll, 0.0))


def _check_logits(logits: np.ndarray) -> None:
    # -inf marks a zero-probability class and is legal; NaN and +inf are not.
    if np.isnan(logits).any() or np.isposinf(logits).any():
        raise ValueError("logits must not contain NaN or +inf")
    if logits.shape[0] and np.isneginf(logits).all(axis=1).any():
        raise ValueError("a logit row assigns zero probability to every class")


def nll_from_logits(logits: np.ndarray, labels: Sequence[int]) -> float:
    """Loss for an unnormalized float64 logit matrix (forward pass only)."""
    logits = np.asarray(logits, dtype=np.float64)
    _check_labels(labels, logits.shape[1])
    _check_logits(logits)
    if logits.shape[0] == 0:
        return 0.0 if len(labels) == 0 else np.inf
    logp = logits - _logsumexp_rows(logits)[:, None]
    return _nll_from_log_probs(logp, labels)


def nll_and_gradient_from_logits(
    logits: np.ndarray, labels: Sequence[int]
) -> tuple[float, np.ndarray]:
    """Loss and d nll / d logit for an unnormalized float64 logit matrix.

    This is the entry point trainers use; ``ctc_gradient`` wraps it for
    already-normalized posteriorgrams.
    """
    logits = np.asarray(logits, dtype=np.float64)
    T, V = logits.shape
    _check_labels(labels, V)
    _check_logits(logits)
    logp = logits - _logsumexp_rows(logits)[:, None]
    if T == 0:
        if len(labels) == 0:
            return 0.0, np.zeros((0, V))
        raise InfeasibleTarget("cannot emit a non-empty target in zero frames")
    if min_frames_required(labels) > T:
        raise InfeasibleTarget(
            f"target needs at least {min_frames_required(labels)} frames, gram has {T}"
        )
    ext = _extended(labels)
    skip = _skip_mask(ext)
    alpha = _forward(logp, ext, skip)
    log_mass = alpha[T - 1, -1]
    if len(ext) > 1:
        log_mass = np.logaddexp(log_mass, alpha[T - 1, -2])
    if not np.isfinite(log_mass):
        raise InfeasibleTarget("target has zero path mass under this gram")
    beta = _backward(logp, ext, skip)
    # occupancy[t, v]: posterior probability of emitting v at frame t.
    post = np.exp(alpha + beta - log_mass)
    occupancy = np.zeros((T, V))
    np.add.at(occupancy, (slice(None), ext), post)
    grad = np.exp(logp) - occupancy
    return float(-log_mass), grad


def ctc_gradient(gram: LogPosteriorGram, target: PhonemeSequence) -> np.ndarray:
    """d nll / d logit as a T x V float64 matrix; rows sum to zero."""
    _, grad = nll_and_gradient_from_logits(
        gram.data.astype(np.float64), target.labels
    )
    return grad


def collapse_path(path: Sequence[int]) -> tuple[int, ...]:
    """Merge consecutive duplicates, then drop blanks."""
    out = []
    prev = None
    for lab in path:
        if lab != prev and lab != BLANK_INDEX:
            out.append(lab)
        prev = lab
    return tuple(out)


def ctc_nll_bruteforce(gram: LogPosteriorGram, target: PhonemeSequence) -> float:
    """Exact loss by enumerating every frame-label path.

    Linear-domain probabilities accumulated with compensated summation;
    guarded to V**T <= 10**7 paths.
    """
    T, V = gram.frames, gram.classes
    if V**T > BRUTEFORCE_MAX_PATHS:
        raise OracleTooLarge(f"{V}**{T} paths exceeds {BRUTEFORCE_MAX_PATHS}")
    _check_labels(target.labels, V)
    wanted = tuple(target.labels)
    probs = np.exp(gram.data.astype(np.float64))
    total = 0.0
    comp = 0.0
    for path in itertools.product(range(V), repeat=T):
        if collapse_path(path) != wanted:
            continue
        p = 1.0
        for t, lab in enumerate(path):
            p *= probs[t, lab]
        # Kahan step.
        y = p - comp
        s = total + y
        comp = (s - total) - y
        total = s
    if total <= 0.0:
        return np.inf
    return float(-np.log(total))


def _logsumexp_rows(x: np.ndarray) -> np.ndarray:
    m = np.max(x, axis=1)
    return np.log(np.sum(np.exp(x - m[:, None]), axis=1)) + m
