import json

import numpy as np
import pytest

from pereval.core import (
    PhonemeInventory,
    Utterance,
    gram_from_probs,
    write_posteriorgram,
)
from pereval.errors import EmptyCorpus
from pereval.report import (
    CSV_HEADER,
    DecoderConfig,
    EvalReport,
    StratumStats,
    evaluate,
    render,
    render_figures,
    render_text,
)

INV = PhonemeInventory(("<blank>", "a", "b"))
GREEDY = DecoderConfig(kind="greedy")
BEAM10 = DecoderConfig(kind="beam")


def peaked_gram(path_labels, classes=3, peak=0.95):
    rows = []
    for lab in path_labels:
        row = np.full(classes, (1.0 - peak) / (classes - 1))
        row[lab] = peak
        rows.append(row / row.sum())
    return gram_from_probs(np.array(rows).reshape(len(path_labels), classes))


@pytest.fixture
def manifest_dir(tmp_path):
    # u1 decodes to "a b" (ref "a b": 0 errors / 2)
    # u2 decodes to "a"   (ref "a b": 1 deletion / 2)
    # u3 decodes to ""    (ref "a":   1 deletion / 1)
    write_posteriorgram(peaked_gram([1, 0, 2]), tmp_path / "u1.pgrm")
    write_posteriorgram(peaked_gram([1, 1, 0]), tmp_path / "u2.pgrm")
    write_posteriorgram(peaked_gram([0, 0]), tmp_path / "u3.pgrm")
    return tmp_path


def make_utts(base, with_snr=True):
    def utt(uid, fname, ref, task, snr):
        return Utterance(
            id=uid, posterior_path=base / fname, reference=INV.to_indices(ref),
            task=task, snr_db=snr if with_snr else None,
        )

    return [
        utt("u1", "u1.pgrm", ["a", "b"], "S", 30.0),
        utt("u2", "u2.pgrm", ["a", "b"], "W", 21.0),
        utt("u3", "u3.pgrm", ["a"], "PWL", None),
    ]


class TestEvaluate:
    def test_overall_matches_hand_pooled_value(self, manifest_dir):
        report = evaluate(make_utts(manifest_dir), INV, GREEDY)
        # 2 errors over 5 reference phonemes
        assert report.overall.per == pytest.approx(40.0)
        assert report.overall.utterances == 3

    def test_empty_manifest(self):
        with pytest.raises(EmptyCorpus):
            evaluate([], INV, GREEDY)

    def test_task_strata_pool_to_overall(self, manifest_dir):
        report = evaluate(make_utts(manifest_dir), INV, GREEDY)
        assert sum(s.errors for s in report.by_task.values()) == report.overall.errors
        assert sum(s.ref_len for s in report.by_task.values()) == report.overall.ref_len
        assert sum(s.utterances for s in report.by_task.values()) == report.overall.utterances

    def test_band_strata_skip_missing_snr(self, manifest_dir):
        report = evaluate(make_utts(manifest_dir), INV, GREEDY)
        assert report.missing_snr == 1
        assert set(report.by_band) == {"low", "medium"}
        banded = sum(s.utterances for s in report.by_band.values())
        assert banded + report.missing_snr == report.overall.utterances

    def test_failures_collected_not_raised(self, manifest_dir):
        utts = make_utts(manifest_dir) + [
            Utterance(id="u4", posterior_path=manifest_dir / "missing.pgrm",
                      reference=INV.to_indices(["a"]), task="W"),
        ]
        report = evaluate(utts, INV, GREEDY)
        assert len(report.failures) == 1
        assert report.failures[0][0] == "u4"
        assert report.overall.utterances == 3  # failed one excluded

    def test_class_count_mismatch_is_failure(self, manifest_dir, tmp_path):
        write_posteriorgram(peaked_gram([1], classes=4), tmp_path / "wide.pgrm")
        utts = [
            Utterance(id="w", posterior_path=tmp_path / "wide.pgrm",
                      reference=INV.to_indices(["a"]), task="W"),
        ]
        report = evaluate(utts, INV, GREEDY)
        assert len(report.failures) == 1

    def test_jobs_do_not_change_result(self, manifest_dir):
        utts = make_utts(manifest_dir)
        sequential = evaluate(utts, INV, GREEDY, jobs=1)
        threaded = evaluate(utts, INV, GREEDY, jobs=8)
        assert sequential == threaded

    def test_beam_decoder_recorded(self, manifest_dir):
        report = evaluate(make_utts(manifest_dir), INV, BEAM10)
        assert report.decoder.label() == "beam(width=10)"


class TestRendering:
    def test_one_decimal_rounding(self):
        report = EvalReport(
            decoder=GREEDY,
            overall=StratumStats(1, 260999, 0, 0, 739001, 1000000),
        )
        assert report.overall.per == pytest.approx(26.0999)
        assert "overall 26.1" in render_text(report)

    def test_task_row_format(self):
        report = EvalReport(
            decoder=BEAM10,
            overall=StratumStats(4, 1031, 0, 0, 2969, 4000),
            by_task={
                "S": StratumStats(1, 164, 0, 0, 836, 1000),
                "W": StratumStats(1, 255, 0, 0, 745, 1000),
                "WL": StratumStats(1, 283, 0, 0, 717, 1000),
                "PWL": StratumStats(1, 329, 0, 0, 671, 1000),
            },
        )
        assert "by task: S 16.4 | W 25.5 | WL 28.3 | PWL 32.9" in render_text(report)

    def test_json_round_trips(self, manifest_dir):
        report = evaluate(make_utts(manifest_dir), INV, BEAM10)
        raw = render(report, "json").decode("utf-8")
        assert EvalReport.from_dict(json.loads(raw)) == report

    def test_csv_header_and_rows(self, manifest_dir):
        report = evaluate(make_utts(manifest_dir), INV, GREEDY)
        lines = render(report, "csv").decode("utf-8").splitlines()
        assert lines[0] == CSV_HEADER
        assert lines[1].startswith("overall,")
        assert any(line.startswith("task:S,") for line in lines)
        assert any(line.startswith("band:low,") for line in lines)

    def test_unknown_format_rejected(self, manifest_dir):
        report = evaluate(make_utts(manifest_dir), INV, GREEDY)
        with pytest.raises(ValueError):
            render(report, "xml")

    def test_render_deterministic(self, manifest_dir):
        utts = make_utts(manifest_dir)
        a = render(evaluate(utts, INV, BEAM10), "text")
        b = render(evaluate(utts, INV, BEAM10), "text")
        assert a == b

    def test_empty_ref_stratum_renders_na(self):
        report = EvalReport(
            decoder=GREEDY,
            overall=StratumStats(1, 0, 2, 0, 0, 0),
        )
        assert "overall n/a" in render_text(report)


class TestFigures:
    def test_figures_written(self, manifest_dir, tmp_path):
        report = evaluate(make_utts(manifest_dir), INV, GREEDY)
        out = tmp_path / "figs"
        written = render_figures(report, out)
        names = sorted(p.name for p in written)
        assert names == ["per_by_band.png", "per_by_task.png"]
        assert all(p.stat().st_size > 0 for p in written)

    def test_no_band_data_skips_band_figure(self, manifest_dir, tmp_path):
        report = evaluate(make_utts(manifest_dir, with_snr=False), INV, GREEDY)
        written = render_figures(report, tmp_path / "figs")
        assert [p.name for p in written] == ["per_by_task.png"]
