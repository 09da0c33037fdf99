"""Manifest loading, transcript cleaning, and dictionary phonetization.

Cleaning follows the usual two-stage recipe for conversational child-speech
transcripts: utterances carrying corpus control labels are dropped whole,
then marker tokens (filled pauses, bracketed non-speech events, truncated
words, parenthesized unintelligible stretches) are deleted from what
remains.  The marker syntax is corpus-specific, so every pattern class is
configurable and individually switchable.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

from .core import PhonemeInventory, PhonemeSequence, TASKS, Utterance
from .errors import (
    BadTask,
    DuplicateId,
    ManifestError,
    MissingSnr,
    UnknownSymbol,
)
from .snr import noise_band

DEFAULT_DISCARD_LABELS = frozenset({"DISCARD", "SILENCE", "NO_SIGNAL"})
DEFAULT_FILLED_PAUSES = frozenset({"UM", "UH"})

PATTERN_CLASSES = ("filled_pause", "non_speech_event", "truncated_word", "unintelligible")


@dataclass(frozen=True)
class CleaningRules:
    discard_labels: frozenset = DEFAULT_DISCARD_LABELS
    filled_pauses: frozenset = DEFAULT_FILLED_PAUSES
    enabled: frozenset = frozenset(PATTERN_CLASSES)
    # Reject hook for corpus-specific transcription-error conventions:
    # any token matching one of these regexes discards the utterance.
    reject_patterns: tuple = ()

    def __post_init__(self):
        if not self.discard_labels:
            raise ValueError("discard_labels must be non-empty")
        unknown = set(self.enabled) - set(PATTERN_CLASSES)
        if unknown:
            raise ValueError(f"unknown pattern classes: {sorted(unknown)}")

    @classmethod
    def from_json(cls, path) -> "CleaningRules":
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
        enabled = set(PATTERN_CLASSES)
        for name, flag in raw.get("enabled", {}).items():
            if not flag:
                enabled.discard(name)
            else:
                enabled.add(name)
        return cls(
            discard_labels=frozenset(raw.get("discard_labels", DEFAULT_DISCARD_LABELS)),
            filled_pauses=frozenset(
                t.casefold() for t in raw.get("filled_pauses", DEFAULT_FILLED_PAUSES)
            ),
            enabled=frozenset(enabled),
            reject_patterns=tuple(raw.get("reject_patterns", ())),
        )


@dataclass(frozen=True)
class CleanDecision:
    """Keep (with the cleaned tokens) or discard the whole utterance."""

    tokens: Optional[tuple] = None
    discard_reason: Optional[str] = None

    @property
    def kept(self) -> bool:
        return self.tokens is not None


def _is_filled_pause(tok: str, rules: CleaningRules) -> bool:
    return tok.casefold() in {p.casefold() for p in rules.filled_pauses}


def _is_non_speech_event(tok: str) -> bool:
    return len(tok) >= 2 and tok.startswith("<") and tok.endswith(">")


def _is_truncated_word(tok: str) -> bool:
    return len(tok) >= 2 and tok.endswith("-")


def _is_unintelligible(tok: str) -> bool:
    return len(tok) >= 2 and tok.startswith("(") and tok.endswith(")")


def clean_transcript(raw_tokens: Sequence[str], rules: CleaningRules) -> CleanDecision:
    """Apply discard labels, then delete marker tokens; never raises."""
    for tok in raw_tokens:
        if tok in rules.discard_labels:
            return CleanDecision(discard_reason=f"discard_label:{tok}")
        for pattern in rules.reject_patterns:
            if re.search(pattern, tok):
                return CleanDecision(discard_reason=f"rejected:{tok}")
    kept = []
    for tok in raw_tokens:
        if "filled_pause" in rules.enabled and _is_filled_pause(tok, rules):
            continue
        if "non_speech_event" in rules.enabled and _is_non_speech_event(tok):
            continue
        if "truncated_word" in rules.enabled and _is_truncated_word(tok):
            continue
        if "unintelligible" in rules.enabled and _is_unintelligible(tok):
            continue
        kept.append(tok)
    if not kept:
        return CleanDecision(discard_reason="empty_after_cleaning")
    return CleanDecision(tokens=tuple(kept))


@dataclass(frozen=True)
class Lexicon:
    """word -> pronunciation variants; lookups are case-folded."""

    entries: dict
    num_classes: int

    def pronunciations(self, word: str) -> tuple:
        return self.entries.get(word.casefold(), ())


def load_lexicon(path, inventory: PhonemeInventory) -> Lexicon:
    entries: dict = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        if "\t" not in line:
            raise ManifestError(f"{path}:{lineno}: expected word<TAB>phonemes")
        word, pron = line.split("\t", 1)
        symbols = pron.split()
        if not symbols:
            raise ManifestError(f"{path}:{lineno}: empty pronunciation for {word!r}")
        try:
            seq = inventory.to_indices(symbols)
        except Exception as exc:
            raise UnknownSymbol(f"{path}:{lineno}: {exc}") from None
        entries.setdefault(word.casefold(), []).append(seq)
    return Lexicon(
        entries={w: tuple(v) for w, v in entries.items()},
        num_classes=inventory.size,
    )


@dataclass(frozen=True)
class PhonetizeResult:
    phonemes: Optional[PhonemeSequence] = None
    oov: tuple = ()

    @property
    def ok(self) -> bool:
        return self.phonemes is not None


def phonetize(words: Sequence[str], lexicon: Lexicon) -> PhonetizeResult:
    """Concatenate first-listed pronunciations; OOV words route to manual
    transcription instead of guessing."""
    oov = [w for w in words if not lexicon.pronunciations(w)]
    if oov:
        return PhonetizeResult(oov=tuple(oov))
    labels = []
    for w in words:
        labels.extend(lexicon.pronunciations(w)[0].labels)
    return PhonetizeResult(phonemes=PhonemeSequence(tuple(labels), lexicon.num_classes))


def load_manifest(path, inventory: PhonemeInventory) -> list[Utterance]:
    """Read a JSONL manifest; paths resolve relative to the manifest."""
    base = Path(path).parent
    utterances = []
    seen_ids = set()
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ManifestError(f"{path}:{lineno}: bad JSON: {exc}") from None
        for key in ("id", "posterior", "ref", "task"):
            if key not in rec:
                raise ManifestError(f"{path}:{lineno}: missing key {key!r}")
        if rec["task"] not in TASKS:
            raise BadTask(f"{path}:{lineno}: task must be one of {TASKS}, got {rec['task']!r}")
        if rec["id"] in seen_ids:
            raise DuplicateId(f"{path}:{lineno}: duplicate id {rec['id']!r}")
        seen_ids.add(rec["id"])
        try:
            ref = inventory.to_indices(rec["ref"])
        except Exception as exc:
            raise UnknownSymbol(f"{path}:{lineno}: {exc}") from None
        flags = rec.get("word_correct")
        utterances.append(
            Utterance(
                id=rec["id"],
                posterior_path=base / rec["posterior"],
                reference=ref,
                task=rec["task"],
                snr_db=rec.get("snr_db"),
                word_correct_flags=tuple(bool(f) for f in flags) if flags is not None else None,
            )
        )
    return utterances


def stratify(utterances: Sequence[Utterance], key: str) -> dict:
    """Partition utterances by reading task or by noise band."""
    if key not in ("task", "noise_band"):
        raise ValueError(f"stratify key must be 'task' or 'noise_band', got {key!r}")
    strata: dict = {}
    for utt in utterances:
        if key == "task":
            stratum = utt.task
        else:
            if utt.snr_db is None:
                raise MissingSnr(f"utterance {utt.id!r} has no snr_db")
            stratum = noise_band(utt.snr_db)
        strata.setdefault(stratum, []).append(utt)
    return strata
