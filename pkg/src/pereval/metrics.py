"""Levenshtein alignment and phoneme error rate.

The edit-distance split into substitutions/insertions/deletions is not
unique among minimal alignments, so ``align`` fixes a canonical one:
minimize total edits, then maximize hits.  That choice is deterministic
and symmetric (swapping the operands swaps insertions with deletions and
preserves substitutions), which a directional backtrace preference is not.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

from .errors import EmptyCorpus, EmptyReference


@dataclass(frozen=True)
class AlignmentOps:
    """Error counts from one reference/hypothesis alignment."""

    substitutions: int
    insertions: int
    deletions: int
    hits: int
    ref_len: int

    def __post_init__(self):
        counts = (self.substitutions, self.insertions, self.deletions,
                  self.hits, self.ref_len)
        if any(c < 0 for c in counts):
            raise ValueError(f"negative alignment count in {self}")
        if self.hits + self.substitutions + self.deletions != self.ref_len:
            raise ValueError(
                f"hits + substitutions + deletions must equal ref_len: {self}"
            )

    @property
    def errors(self) -> int:
        return self.substitutions + self.insertions + self.deletions

    def __add__(self, other: "AlignmentOps") -> "AlignmentOps":
        return AlignmentOps(
            self.substitutions + other.substitutions,
            self.insertions + other.insertions,
            self.deletions + other.deletions,
            self.hits + other.hits,
            self.ref_len + other.ref_len,
        )


def _labels(seq) -> tuple:
    return tuple(getattr(seq, "labels", seq))


def align(ref, hyp) -> AlignmentOps:
    """Minimal-edit alignment with unit costs.

    Accepts phoneme sequences or any plain sequences of hashable tokens.
    """
    r = _labels(ref)
    h = _labels(hyp)
    n, m = len(r), len(h)
    # Each cell holds (edit cost, -hits); lexicographic min is optimal for
    # both components because costs add along alignment paths.
    prev = [(j, 0) for j in range(m + 1)]
    for i in range(1, n + 1):
        cur = [(i, 0)]
        for j in range(1, m + 1):
            if r[i - 1] == h[j - 1]:
                diag = (prev[j - 1][0], prev[j - 1][1] - 1)
            else:
                diag = (prev[j - 1][0] + 1, prev[j - 1][1])
            dele = (prev[j][0] + 1, prev[j][1])
            ins = (cur[j - 1][0] + 1, cur[j - 1][1])
            cur.append(min(diag, dele, ins))
        prev = cur
    cost, neg_hits = prev[m]
    hits = -neg_hits
    # With cost and hits fixed, the split is forced: every ref token is a
    # hit, substitution, or deletion, and likewise for hyp with insertions.
    subs = n + m - cost - 2 * hits
    dels = n - hits - subs
    inss = m - hits - subs
    return AlignmentOps(subs, inss, dels, hits, n)


def per(ops: AlignmentOps) -> float:
    """100 * (S + I + D) / ref_len; exceeds 100 when insertions dominate."""
    if ops.ref_len == 0:
        raise EmptyReference("reference is empty; PER undefined")
    return 100.0 * ops.errors / ops.ref_len


def corpus_per(ops_list: Iterable[AlignmentOps]) -> float:
    """Pooled (micro-averaged) PER over a corpus of alignments."""
    total_errors = 0
    total_ref = 0
    for ops in ops_list:
        total_errors += ops.errors
        total_ref += ops.ref_len
    if total_ref == 0:
        raise EmptyCorpus("no reference phonemes to score")
    return 100.0 * total_errors / total_ref
