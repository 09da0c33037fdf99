"""Core domain types: phoneme inventory, posteriorgrams, sequences, utterances.

All types are immutable after construction and safe to share between
concurrent workers.
"""

from __future__ import annotations

import importlib.resources
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import (
    BadTask,
    DuplicateSymbol,
    FormatError,
    InvalidLabel,
    ManifestError,
    MissingBlank,
    NotNormalized,
)

BLANK_SYMBOL = "<blank>"
BLANK_INDEX = 0

# Reading tasks offered by the platform: isolated words, sentences,
# word lists, pseudoword lists.
TASKS = ("W", "S", "WL", "PWL")

# Row log-mass must be within this distance of 0 (i.e. sum to one).
ROW_NORMALIZATION_TOL = 1e-4
# Log-probabilities may exceed 0 by at most this much (float32 slack).
LOG_PROB_UPPER_TOL = 1e-6

_PGRM_MAGIC = b"PGRM"
_PGRM_VERSION = 1
_PGRM_HEADER = struct.Struct("<4sIII")


@dataclass(frozen=True)
class PhonemeInventory:
    """Closed label set: blank at index 0 followed by phoneme symbols."""

    symbols: tuple[str, ...]

    def __post_init__(self):
        if len(self.symbols) < 2:
            raise MissingBlank("inventory needs the blank plus at least one phoneme")
        if self.symbols[0] != BLANK_SYMBOL:
            raise MissingBlank(f"first symbol must be {BLANK_SYMBOL!r}, got {self.symbols[0]!r}")
        seen = set()
        for sym in self.symbols:
            if sym in seen:
                raise DuplicateSymbol(f"symbol {sym!r} appears more than once")
            seen.add(sym)
        object.__setattr__(self, "_index", {s: i for i, s in enumerate(self.symbols)})

    @property
    def size(self) -> int:
        return len(self.symbols)

    @property
    def blank_index(self) -> int:
        return BLANK_INDEX

    def index_of(self, symbol: str) -> int:
        try:
            return self._index[symbol]
        except KeyError:
            raise InvalidLabel(f"unknown phoneme symbol {symbol!r}") from None

    def symbol_of(self, index: int) -> str:
        if not 0 <= index < self.size:
            raise InvalidLabel(f"index {index} out of range for inventory of size {self.size}")
        return self.symbols[index]

    def to_indices(self, symbols: Sequence[str]) -> "PhonemeSequence":
        return PhonemeSequence(tuple(self.index_of(s) for s in symbols), self.size)

    def to_symbols(self, seq: "PhonemeSequence") -> list[str]:
        return [self.symbols[i] for i in seq.labels]


def load_inventory(path) -> PhonemeInventory:
    """Load an inventory file: UTF-8, one symbol per line, `<blank>` first."""
    text = Path(path).read_text(encoding="utf-8")
    lines = [ln for ln in text.split("\n") if ln != ""]
    if not lines or lines[0] != BLANK_SYMBOL:
        raise MissingBlank(f"{path}: first line must be {BLANK_SYMBOL!r}")
    return PhonemeInventory(tuple(lines))


def save_inventory(inventory: PhonemeInventory, path) -> None:
    Path(path).write_text("\n".join(inventory.symbols) + "\n", encoding="utf-8")


def french_inventory() -> PhonemeInventory:
    """The shipped 35-class French inventory (blank + 34 phonemes)."""
    ref = importlib.resources.files("pereval.data").joinpath("french_phonemes.txt")
    lines = [ln for ln in ref.read_text(encoding="utf-8").split("\n") if ln != ""]
    return PhonemeInventory(tuple(lines))


@dataclass(frozen=True)
class PhonemeSequence:
    """Blank-free sequence of inventory indices (a reference or hypothesis)."""

    labels: tuple[int, ...]
    num_classes: int

    def __post_init__(self):
        for lab in self.labels:
            if not isinstance(lab, (int, np.integer)):
                raise InvalidLabel(f"label {lab!r} is not an integer index")
            if lab == BLANK_INDEX:
                raise InvalidLabel("phoneme sequences must not contain the blank index")
            if not 0 <= lab < self.num_classes:
                raise InvalidLabel(
                    f"label {lab} out of range for {self.num_classes} classes"
                )
        object.__setattr__(self, "labels", tuple(int(lab) for lab in self.labels))

    def __len__(self) -> int:
        return len(self.labels)

    def __iter__(self):
        return iter(self.labels)


@dataclass(frozen=True)
class LogPosteriorGram:
    """T x V matrix of per-frame natural-log class probabilities (float32)."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float32)
        if arr.ndim != 2:
            raise FormatError(f"posteriorgram must be 2-D, got shape {arr.shape}")
        if arr.shape[1] < 2:
            raise FormatError("posteriorgram needs at least blank plus one class")
        if arr.shape[0] > 0:
            if not np.all(np.isfinite(arr) | (arr == -np.inf)):
                raise NotNormalized("posteriorgram contains NaN or +inf entries")
            if np.any(arr > LOG_PROB_UPPER_TOL):
                raise NotNormalized("log-probabilities must not exceed 0")
            row_mass = _logsumexp_rows(arr.astype(np.float64))
            bad = np.abs(row_mass) > ROW_NORMALIZATION_TOL
            if np.any(bad):
                t = int(np.nonzero(bad)[0][0])
                raise NotNormalized(
                    f"row {t} has log-mass {row_mass[t]:.6g}, outside "
                    f"+/-{ROW_NORMALIZATION_TOL}"
                )
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @property
    def frames(self) -> int:
        return self.data.shape[0]

    @property
    def classes(self) -> int:
        return self.data.shape[1]


def _logsumexp_rows(logp: np.ndarray) -> np.ndarray:
    # Handles all -inf rows without warnings.
    m = np.max(logp, axis=1, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    return np.log(np.sum(np.exp(logp - m), axis=1)) + m[:, 0]


def gram_from_probs(probs) -> LogPosteriorGram:
    """Build a gram from linear-domain probabilities (rows must sum to 1)."""
    probs = np.asarray(probs, dtype=np.float64)
    with np.errstate(divide="ignore"):
        return LogPosteriorGram(np.log(probs).astype(np.float32))


def write_posteriorgram(gram: LogPosteriorGram, path) -> None:
    """Write the PGRM binary format (little-endian, float32, row-major)."""
    header = _PGRM_HEADER.pack(_PGRM_MAGIC, _PGRM_VERSION, gram.frames, gram.classes)
    payload = np.ascontiguousarray(gram.data, dtype="<f4").tobytes()
    Path(path).write_bytes(header + payload)


def read_posteriorgram(path) -> LogPosteriorGram:
    """Read a PGRM file; validates header, payload size, and normalization."""
    raw = Path(path).read_bytes()
    if len(raw) < _PGRM_HEADER.size:
        raise FormatError(f"{path}: file shorter than PGRM header")
    magic, version, frames, classes = _PGRM_HEADER.unpack_from(raw)
    if magic != _PGRM_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    if version != _PGRM_VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    expected = _PGRM_HEADER.size + 4 * frames * classes
    if len(raw) != expected:
        raise FormatError(
            f"{path}: payload is {len(raw) - _PGRM_HEADER.size} bytes, "
            f"expected {expected - _PGRM_HEADER.size}"
        )
    data = np.frombuffer(raw, dtype="<f4", offset=_PGRM_HEADER.size)
    return LogPosteriorGram(data.reshape(frames, classes).copy())


@dataclass(frozen=True)
class Utterance:
    """One manifest record."""

    id: str
    posterior_path: Path
    reference: PhonemeSequence
    task: str
    snr_db: Optional[float] = None
    word_correct_flags: Optional[tuple[bool, ...]] = None

    def __post_init__(self):
        if not self.id:
            raise ManifestError("utterance id must be non-empty")
        if self.task not in TASKS:
            raise BadTask(f"task must be one of {TASKS}, got {self.task!r}")
