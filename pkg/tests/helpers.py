"""Shared builders for the test suite."""

import functools

import numpy as np

from pereval.core import LogPosteriorGram, PhonemeSequence, gram_from_probs


def random_gram(rng, frames, classes) -> LogPosteriorGram:
    """Random normalized posteriorgram; rows drawn from a flat Dirichlet."""
    if frames == 0:
        return LogPosteriorGram(np.zeros((0, classes), dtype=np.float32))
    return gram_from_probs(rng.dirichlet(np.ones(classes), size=frames))


def random_target(rng, max_len, classes) -> PhonemeSequence:
    length = int(rng.integers(0, max_len + 1))
    return PhonemeSequence(tuple(int(rng.integers(1, classes)) for _ in range(length)), classes)


def recursive_edit_distance(ref, hyp) -> int:
    """Independent oracle: the textbook recursion, memoized for speed."""

    @functools.cache
    def dist(i, j):
        if i == 0:
            return j
        if j == 0:
            return i
        sub = 0 if ref[i - 1] == hyp[j - 1] else 1
        return min(dist(i - 1, j - 1) + sub, dist(i - 1, j) + 1, dist(i, j - 1) + 1)

    return dist(len(ref), len(hyp))


def fd_gradient(logits, labels, h=1e-5):
    """Central finite differences of the CTC loss w.r.t. each logit."""
    from pereval.ctc import nll_from_logits

    logits = np.asarray(logits, dtype=np.float64)
    grad = np.zeros_like(logits)
    for t in range(logits.shape[0]):
        for v in range(logits.shape[1]):
            up = logits.copy()
            down = logits.copy()
            up[t, v] += h
            down[t, v] -= h
            grad[t, v] = (nll_from_logits(up, labels) - nll_from_logits(down, labels)) / (2 * h)
    return grad


def tone_noise_mixture(target_db, seed=0, seconds=4.0, rate=16000, noise_rms=0.01):
    """Tone bursts (50% duty cycle) over white noise.

    The tone amplitude is chosen so the active-frame power sits at
    ``target_db`` above the noise-floor power, which is exactly the ratio
    the percentile estimator reads off.
    """
    rng = np.random.default_rng(seed)
    n = int(seconds * rate)
    t = np.arange(n) / rate
    noise = rng.normal(0.0, noise_rms, size=n)
    ratio = 10.0 ** (target_db / 10.0)
    amp = np.sqrt(max(2.0 * (ratio - 1.0), 0.0)) * noise_rms
    gate = ((t // 0.050).astype(int) % 2) == 0
    return noise + amp * np.sin(2 * np.pi * 1000.0 * t) * gate
