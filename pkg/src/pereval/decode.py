"""Greedy and prefix beam-search decoding over log posteriorgrams.

Beam search is the standard CTC prefix search without a language model:
each surviving prefix tracks blank-ending and non-blank-ending log mass
separately so that repeated labels are accounted correctly.  All
tie-breaking is lexicographic by label indices, making every decode
deterministic.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import BLANK_INDEX, LogPosteriorGram, PhonemeSequence
from .errors import InvalidLabel, InvalidWidth, OracleTooLarge

NEG_INF = -np.inf

DEFAULT_BEAM_WIDTH = 10

EXHAUSTIVE_MAX_PATHS = 10**6


@dataclass(frozen=True)
class Beam:
    """Search state: surviving prefixes with separate blank/non-blank mass.

    Entries are (prefix, log mass ending in blank, log mass ending in the
    prefix's last label), ranked by descending total mass with lexicographic
    tie-breaking.  At most ``width`` entries survive each step.
    """

    width: int
    entries: tuple[tuple[tuple[int, ...], float, float], ...]

    def __post_init__(self):
        if self.width < 1:
            raise InvalidWidth(f"beam width must be >= 1, got {self.width}")
        if len(self.entries) > self.width:
            raise InvalidWidth(
                f"{len(self.entries)} entries exceed beam width {self.width}"
            )
        prefixes = [prefix for prefix, _, _ in self.entries]
        if len(set(prefixes)) != len(prefixes):
            raise InvalidWidth("beam prefixes must be unique")

    @classmethod
    def initial(cls, width: int) -> "Beam":
        return cls(width=width, entries=(((), 0.0, NEG_INF),))

    def step(self, log_probs_row: np.ndarray) -> "Beam":
        """Advance one frame: extend by blank/repeat/new-label, merge
        identical prefixes, prune to the beam width."""
        row = log_probs_row
        nxt: dict[tuple[int, ...], list[float]] = {}
        for prefix, p_b, p_nb in self.entries:
            total = np.logaddexp(p_b, p_nb)
            # stay on this prefix via a blank frame
            _merge(nxt, prefix, blank=total + row[BLANK_INDEX])
            if prefix:
                # repeat the final label: only non-blank-ending paths merge
                _merge(nxt, prefix, nonblank=p_nb + row[prefix[-1]])
            for c in range(1, len(row)):
                extended = prefix + (c,)
                if prefix and c == prefix[-1]:
                    # same label again needs a blank in between
                    _merge(nxt, extended, nonblank=p_b + row[c])
                else:
                    _merge(nxt, extended, nonblank=total + row[c])
        ranked = _top(nxt.items(), self.width)
        return Beam(
            width=self.width,
            entries=tuple((prefix, pb, pnb) for prefix, (pb, pnb) in ranked),
        )

    def ranked_totals(self) -> list[tuple[tuple[int, ...], float]]:
        return [
            (prefix, float(np.logaddexp(p_b, p_nb)))
            for prefix, p_b, p_nb in self.entries
        ]


def collapse(frame_labels: Sequence[int], num_classes: int | None = None) -> tuple[int, ...]:
    """CTC collapse: merge consecutive duplicates, then remove blanks."""
    if num_classes is not None:
        for lab in frame_labels:
            if not 0 <= lab < num_classes:
                raise InvalidLabel(f"label {lab} out of range for {num_classes} classes")
    out = []
    prev = None
    for lab in frame_labels:
        if lab != prev and lab != BLANK_INDEX:
            out.append(int(lab))
        prev = lab
    return tuple(out)


def greedy_decode(gram: LogPosteriorGram) -> PhonemeSequence:
    """Collapse of the per-frame argmax path; ties pick the lowest index."""
    if gram.frames == 0:
        return PhonemeSequence((), gram.classes)
    path = np.argmax(gram.data, axis=1)
    return PhonemeSequence(collapse(path), gram.classes)


def greedy_path_logprob(gram: LogPosteriorGram) -> float:
    """Joint log-probability of the per-frame argmax path itself."""
    if gram.frames == 0:
        return 0.0
    return float(np.sum(np.max(gram.data.astype(np.float64), axis=1)))


def beam_decode(
    gram: LogPosteriorGram, width: int = DEFAULT_BEAM_WIDTH
) -> list[tuple[PhonemeSequence, float]]:
    """Prefix beam search; returns prefixes sorted by descending log mass.

    Scores are pure acoustic CTC mass (no language model, no length
    bonus).  Prefixes never contain the blank label.
    """
    beam = Beam.initial(width)
    logp = gram.data.astype(np.float64)
    for t in range(gram.frames):
        beam = beam.step(logp[t])
    return [
        (PhonemeSequence(prefix, gram.classes), total)
        for prefix, total in beam.ranked_totals()
    ]


def _merge(table, prefix, blank=None, nonblank=None):
    entry = table.get(prefix)
    if entry is None:
        entry = table[prefix] = [NEG_INF, NEG_INF]
    if blank is not None:
        entry[0] = np.logaddexp(entry[0], blank)
    if nonblank is not None:
        entry[1] = np.logaddexp(entry[1], nonblank)


def _top(items, width):
    """Best ``width`` prefixes by total mass; ties resolve lexicographically."""
    ranked = sorted(items, key=lambda kv: (-np.logaddexp(kv[1][0], kv[1][1]), kv[0]))
    return ranked[:width]


def exhaustive_decode(gram: LogPosteriorGram) -> tuple[PhonemeSequence, float]:
    """Max-probability collapsed sequence by full path enumeration.

    Aggregates linear-domain mass per collapsed sequence; argmax ties
    break lexicographically.  Guarded to V**T <= 10**6 paths.
    """
    T, V = gram.frames, gram.classes
    if V**T > EXHAUSTIVE_MAX_PATHS:
        raise OracleTooLarge(f"{V}**{T} paths exceeds {EXHAUSTIVE_MAX_PATHS}")
    masses = sequence_masses(gram)
    best = min(masses.items(), key=lambda kv: (-kv[1], kv[0]))
    return PhonemeSequence(best[0], V), float(np.log(best[1]))


def sequence_masses(gram: LogPosteriorGram) -> dict[tuple[int, ...], float]:
    """Total linear-domain path mass of every collapsed sequence."""
    T, V = gram.frames, gram.classes
    if V**T > EXHAUSTIVE_MAX_PATHS:
        raise OracleTooLarge(f"{V}**{T} paths exceeds {EXHAUSTIVE_MAX_PATHS}")
    probs = np.exp(gram.data.astype(np.float64))
    masses: dict[tuple[int, ...], float] = {}
    for path in itertools.product(range(V), repeat=T):
        p = 1.0
        for t, lab in enumerate(path):
            p *= probs[t, lab]
        key = collapse(path)
        masses[key] = masses.get(key, 0.0) + p
    return masses
