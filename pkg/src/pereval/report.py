"""Corpus-level evaluation: decode, score, and stratified PER tables.

Rendering follows the usual reporting shape for this task: one pooled
number, a per-reading-task row, and a per-noise-band row, all printed to
one decimal.  Optional figures show the same strata as bar charts.
"""

from __future__ import annotations

import concurrent.futures
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

from .core import LogPosteriorGram, PhonemeInventory, Utterance, read_posteriorgram
from .decode import DEFAULT_BEAM_WIDTH, beam_decode, greedy_decode
from .errors import EmptyCorpus, InvalidWidth, PerEvalError
from .metrics import AlignmentOps, align
from .snr import noise_band

TASK_ORDER = ("S", "W", "WL", "PWL")
BAND_ORDER = ("low", "medium", "high")

CSV_HEADER = "stratum,per,utterances,ref_len"


@dataclass(frozen=True)
class DecoderConfig:
    kind: str  # "greedy" or "beam"
    width: Optional[int] = None

    def __post_init__(self):
        if self.kind not in ("greedy", "beam"):
            raise ValueError(f"decoder kind must be 'greedy' or 'beam', got {self.kind!r}")
        if self.kind == "beam":
            if self.width is None:
                object.__setattr__(self, "width", DEFAULT_BEAM_WIDTH)
            elif self.width < 1:
                raise InvalidWidth(f"beam width must be >= 1, got {self.width}")

    def label(self) -> str:
        if self.kind == "greedy":
            return "greedy"
        return f"beam(width={self.width})"

    def to_dict(self) -> dict:
        return {"kind": self.kind, "width": self.width}

    @classmethod
    def from_dict(cls, raw: dict) -> "DecoderConfig":
        return cls(kind=raw["kind"], width=raw.get("width"))


@dataclass(frozen=True)
class StratumStats:
    """Pooled alignment counts for one stratum."""

    utterances: int = 0
    substitutions: int = 0
    insertions: int = 0
    deletions: int = 0
    hits: int = 0
    ref_len: int = 0

    @classmethod
    def from_ops(cls, ops_list: Sequence[AlignmentOps]) -> "StratumStats":
        stats = cls()
        for ops in ops_list:
            stats = stats.add(ops)
        return stats

    def add(self, ops: AlignmentOps) -> "StratumStats":
        return StratumStats(
            self.utterances + 1,
            self.substitutions + ops.substitutions,
            self.insertions + ops.insertions,
            self.deletions + ops.deletions,
            self.hits + ops.hits,
            self.ref_len + ops.ref_len,
        )

    @property
    def errors(self) -> int:
        return self.substitutions + self.insertions + self.deletions

    @property
    def per(self) -> Optional[float]:
        if self.ref_len == 0:
            return None
        return 100.0 * self.errors / self.ref_len

    def to_dict(self) -> dict:
        return {
            "utterances": self.utterances,
            "substitutions": self.substitutions,
            "insertions": self.insertions,
            "deletions": self.deletions,
            "hits": self.hits,
            "ref_len": self.ref_len,
            "per": self.per,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "StratumStats":
        return cls(
            utterances=raw["utterances"],
            substitutions=raw["substitutions"],
            insertions=raw["insertions"],
            deletions=raw["deletions"],
            hits=raw["hits"],
            ref_len=raw["ref_len"],
        )


@dataclass(frozen=True)
class EvalReport:
    decoder: DecoderConfig
    overall: StratumStats
    by_task: dict = field(default_factory=dict)
    by_band: dict = field(default_factory=dict)
    missing_snr: int = 0
    failures: tuple = ()

    def to_dict(self) -> dict:
        return {
            "decoder": self.decoder.to_dict(),
            "overall": self.overall.to_dict(),
            "by_task": {k: v.to_dict() for k, v in self.by_task.items()},
            "by_band": {k: v.to_dict() for k, v in self.by_band.items()},
            "missing_snr": self.missing_snr,
            "failures": [list(f) for f in self.failures],
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "EvalReport":
        return cls(
            decoder=DecoderConfig.from_dict(raw["decoder"]),
            overall=StratumStats.from_dict(raw["overall"]),
            by_task={k: StratumStats.from_dict(v) for k, v in raw["by_task"].items()},
            by_band={k: StratumStats.from_dict(v) for k, v in raw["by_band"].items()},
            missing_snr=raw["missing_snr"],
            failures=tuple((f[0], f[1]) for f in raw["failures"]),
        )


def decode_top1(gram: LogPosteriorGram, decoder: DecoderConfig):
    if decoder.kind == "greedy":
        return greedy_decode(gram)
    return beam_decode(gram, decoder.width)[0][0]


def _score_utterance(utt: Utterance, inventory: PhonemeInventory,
                     decoder: DecoderConfig) -> AlignmentOps:
    gram = read_posteriorgram(utt.posterior_path)
    if gram.classes != inventory.size:
        raise PerEvalError(
            f"posteriorgram has {gram.classes} classes, inventory has {inventory.size}"
        )
    hyp = decode_top1(gram, decoder)
    return align(utt.reference, hyp)


def evaluate(
    utterances: Sequence[Utterance],
    inventory: PhonemeInventory,
    decoder: DecoderConfig,
    jobs: int = 1,
) -> EvalReport:
    """Decode and score every utterance, pooling counts per stratum.

    Per-utterance failures are collected, not raised; callers decide how
    to surface a partial report.  Output is independent of ``jobs``
    because results are reduced in utterance-id order.
    """
    if not utterances:
        raise EmptyCorpus("manifest contains no utterances")
    ordered = sorted(utterances, key=lambda u: u.id)

    def work(utt):
        try:
            return utt, _score_utterance(utt, inventory, decoder), None
        except (PerEvalError, OSError) as exc:
            return utt, None, f"{type(exc).__name__}: {exc}"

    if jobs > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(work, ordered))
    else:
        results = [work(u) for u in ordered]

    overall = StratumStats()
    by_task: dict = {}
    by_band: dict = {}
    missing_snr = 0
    failures = []
    for utt, ops, error in results:
        if error is not None:
            failures.append((utt.id, error))
            continue
        overall = overall.add(ops)
        by_task[utt.task] = by_task.get(utt.task, StratumStats()).add(ops)
        if utt.snr_db is None:
            missing_snr += 1
        else:
            band = noise_band(utt.snr_db).value
            by_band[band] = by_band.get(band, StratumStats()).add(ops)
    return EvalReport(
        decoder=decoder,
        overall=overall,
        by_task=by_task,
        by_band=by_band,
        missing_snr=missing_snr,
        failures=tuple(failures),
    )


def _fmt(per: Optional[float]) -> str:
    return "n/a" if per is None else f"{per:.1f}"


def render_text(report: EvalReport) -> str:
    lines = [f"decoder: {report.decoder.label()}"]
    lines.append(
        f"overall {_fmt(report.overall.per)}  "
        f"(utterances {report.overall.utterances}, ref_len {report.overall.ref_len})"
    )
    tasks = [t for t in TASK_ORDER if t in report.by_task]
    if tasks:
        row = " | ".join(f"{t} {_fmt(report.by_task[t].per)}" for t in tasks)
        lines.append(f"by task: {row}")
    bands = [b for b in BAND_ORDER if b in report.by_band]
    if bands:
        row = " | ".join(f"{b} {_fmt(report.by_band[b].per)}" for b in bands)
        lines.append(f"by band: {row}")
    if report.missing_snr:
        lines.append(f"skipped (no SNR): {report.missing_snr}")
    if report.failures:
        lines.append(f"failures: {len(report.failures)}")
        for utt_id, message in report.failures:
            lines.append(f"  {utt_id}: {message}")
    return "\n".join(lines) + "\n"


def render_json(report: EvalReport) -> str:
    return json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n"


def render_csv(report: EvalReport) -> str:
    rows = [CSV_HEADER]

    def cell(per):
        return "" if per is None else f"{per:.1f}"

    rows.append(
        f"overall,{cell(report.overall.per)},{report.overall.utterances},{report.overall.ref_len}"
    )
    for t in TASK_ORDER:
        if t in report.by_task:
            s = report.by_task[t]
            rows.append(f"task:{t},{cell(s.per)},{s.utterances},{s.ref_len}")
    for b in BAND_ORDER:
        if b in report.by_band:
            s = report.by_band[b]
            rows.append(f"band:{b},{cell(s.per)},{s.utterances},{s.ref_len}")
    return "\n".join(rows) + "\n"


def render(report: EvalReport, fmt: str) -> bytes:
    if fmt == "text":
        return render_text(report).encode("utf-8")
    if fmt == "json":
        return render_json(report).encode("utf-8")
    if fmt == "csv":
        return render_csv(report).encode("utf-8")
    raise ValueError(f"unknown report format {fmt!r}")


def render_figures(report: EvalReport, out_dir) -> list:
    """Bar charts of PER by task and by band, written as PNG files."""
    import matplotlib

    matplotlib.use("Agg", force=True)
    import matplotlib.pyplot as plt

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    groups = [
        ("per_by_task.png", "Reading task", TASK_ORDER, report.by_task),
        ("per_by_band.png", "Noise band", BAND_ORDER, report.by_band),
    ]
    for filename, xlabel, order, table in groups:
        keys = [k for k in order if k in table and table[k].per is not None]
        if not keys:
            continue
        values = [table[k].per for k in keys]
        fig, ax = plt.subplots(figsize=(4.8, 3.2))
        ax.bar(keys, values, color="#4878a8")
        if report.overall.per is not None:
            ax.axhline(report.overall.per, color="#b04030", linestyle="--",
                       linewidth=1, label=f"overall {report.overall.per:.1f}")
            ax.legend(frameon=False)
        ax.set_xlabel(xlabel)
        ax.set_ylabel("PER (%)")
        ax.set_title(f"decoder: {report.decoder.label()}")
        fig.tight_layout()
        path = out_dir / filename
        fig.savefig(path, dpi=150)
        plt.close(fig)
        written.append(path)
    return written
