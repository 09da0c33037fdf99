import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pereval.core import PhonemeInventory
from pereval.corpus import (
    CleaningRules,
    clean_transcript,
    load_lexicon,
    load_manifest,
    phonetize,
    stratify,
)
from pereval.errors import (
    BadTask,
    DuplicateId,
    ManifestError,
    MissingSnr,
    UnknownSymbol,
)
from pereval.snr import NoiseBand


@pytest.fixture
def rules():
    return CleaningRules()


@pytest.fixture
def inventory():
    return PhonemeInventory(("<blank>", "ʃ", "a", "j", "ɛ̃"))


@pytest.fixture
def lexicon(tmp_path, inventory):
    path = tmp_path / "lex.txt"
    path.write_text("chat\tʃ a\nchien\tʃ j ɛ̃\nchat\tʃ a a\n", encoding="utf-8")
    return load_lexicon(path, inventory)


class TestCleaning:
    def test_discard_label_drops_utterance(self, rules):
        decision = clean_transcript(["THE", "DISCARD", "CELL"], rules)
        assert not decision.kept
        assert "DISCARD" in decision.discard_reason

    def test_each_marker_class_deleted(self, rules):
        decision = clean_transcript(
            ["UM", "THE", "<breath>", "CELL-", "(XX)", "WALL"], rules
        )
        assert decision.kept
        assert decision.tokens == ("THE", "WALL")

    def test_empty_input_discarded(self, rules):
        assert not clean_transcript([], rules).kept

    def test_all_deleted_discarded(self, rules):
        decision = clean_transcript(["UM", "<cough>", "(unintelligible)"], rules)
        assert not decision.kept
        assert decision.discard_reason == "empty_after_cleaning"

    def test_filled_pause_case_insensitive(self, rules):
        assert clean_transcript(["um", "WALL"], rules).tokens == ("WALL",)

    def test_disabled_class_keeps_tokens(self):
        rules = CleaningRules(enabled=frozenset({"filled_pause"}))
        decision = clean_transcript(["<breath>", "WALL"], rules)
        assert decision.tokens == ("<breath>", "WALL")

    def test_reject_pattern_hook(self):
        rules = CleaningRules(reject_patterns=(r"\d",))
        assert not clean_transcript(["WALL", "C3LL"], rules).kept

    def test_lone_hyphen_not_truncation(self, rules):
        assert clean_transcript(["A", "-"], rules).tokens == ("A", "-")

    @settings(max_examples=300)
    @given(
        st.lists(
            st.sampled_from(
                ["THE", "WALL", "UM", "uh", "<breath>", "CELL-", "(XX)", "A", "IS"]
            ),
            max_size=10,
        )
    )
    def test_cleaning_idempotent(self, tokens):
        rules = CleaningRules()
        first = clean_transcript(tokens, rules)
        if first.kept:
            second = clean_transcript(list(first.tokens), rules)
            assert second.kept
            assert second.tokens == first.tokens

    def test_rules_from_json(self, tmp_path):
        path = tmp_path / "rules.json"
        path.write_text(
            json.dumps(
                {
                    "discard_labels": ["SILENCE"],
                    "filled_pauses": ["ER"],
                    "enabled": {"truncated_word": False},
                    "reject_patterns": ["\\*"],
                }
            )
        )
        rules = CleaningRules.from_json(path)
        assert rules.discard_labels == frozenset({"SILENCE"})
        assert "truncated_word" not in rules.enabled
        assert clean_transcript(["CELL-"], rules).tokens == ("CELL-",)
        assert not clean_transcript(["x*y"], rules).kept

    def test_empty_discard_labels_rejected(self):
        with pytest.raises(ValueError):
            CleaningRules(discard_labels=frozenset())


class TestPhonetize:
    def test_single_lookup(self, lexicon, inventory):
        result = phonetize(["chat"], lexicon)
        assert result.ok
        assert inventory.to_symbols(result.phonemes) == ["ʃ", "a"]

    def test_oov_routes_to_manual(self, lexicon):
        result = phonetize(["chat", "blorp"], lexicon)
        assert not result.ok
        assert result.oov == ("blorp",)

    def test_first_pronunciation_wins(self, lexicon, inventory):
        # "chat" has two variants; the first-listed one is used.
        result = phonetize(["chat"], lexicon)
        assert inventory.to_symbols(result.phonemes) == ["ʃ", "a"]

    def test_concatenation_preserves_order_and_length(self, lexicon):
        result = phonetize(["chat", "chien"], lexicon)
        assert len(result.phonemes) == 5

    def test_lookup_case_folded(self, lexicon):
        assert phonetize(["CHAT"], lexicon).ok

    def test_unknown_symbol_in_lexicon(self, tmp_path, inventory):
        path = tmp_path / "bad.txt"
        path.write_text("dog\td o g\n")
        with pytest.raises(UnknownSymbol):
            load_lexicon(path, inventory)

    def test_empty_pronunciation_rejected(self, tmp_path, inventory):
        path = tmp_path / "bad.txt"
        path.write_text("dog\t\n")
        with pytest.raises(ManifestError):
            load_lexicon(path, inventory)


class TestManifest:
    def _write(self, tmp_path, records):
        path = tmp_path / "man.jsonl"
        path.write_text("\n".join(json.dumps(r) for r in records))
        return path

    def test_valid_two_lines(self, tmp_path, inventory):
        path = self._write(
            tmp_path,
            [
                {"id": "u1", "posterior": "u1.pgrm", "ref": ["ʃ", "a"], "task": "W"},
                {"id": "u2", "posterior": "u2.pgrm", "ref": ["a"], "task": "S",
                 "snr_db": 12.5, "word_correct": [True]},
            ],
        )
        utts = load_manifest(path, inventory)
        assert len(utts) == 2
        assert utts[0].posterior_path == tmp_path / "u1.pgrm"
        assert utts[1].snr_db == 12.5
        assert utts[1].word_correct_flags == (True,)

    def test_bad_task(self, tmp_path, inventory):
        path = self._write(
            tmp_path, [{"id": "u1", "posterior": "p", "ref": [], "task": "X"}]
        )
        with pytest.raises(BadTask):
            load_manifest(path, inventory)

    def test_unknown_symbol(self, tmp_path, inventory):
        path = self._write(
            tmp_path, [{"id": "u1", "posterior": "p", "ref": ["zz"], "task": "W"}]
        )
        with pytest.raises(UnknownSymbol):
            load_manifest(path, inventory)

    def test_duplicate_id(self, tmp_path, inventory):
        rec = {"id": "u1", "posterior": "p", "ref": [], "task": "W"}
        path = self._write(tmp_path, [rec, rec])
        with pytest.raises(DuplicateId):
            load_manifest(path, inventory)

    def test_missing_key(self, tmp_path, inventory):
        path = self._write(tmp_path, [{"id": "u1", "ref": [], "task": "W"}])
        with pytest.raises(ManifestError):
            load_manifest(path, inventory)

    def test_bad_json_line(self, tmp_path, inventory):
        path = tmp_path / "man.jsonl"
        path.write_text("{not json}\n")
        with pytest.raises(ManifestError):
            load_manifest(path, inventory)


class TestStratify:
    def _utts(self, tmp_path, inventory, specs):
        records = [
            {"id": f"u{i}", "posterior": "p", "ref": ["a"], "task": task,
             **({"snr_db": snr} if snr is not None else {})}
            for i, (task, snr) in enumerate(specs)
        ]
        path = tmp_path / "man.jsonl"
        path.write_text("\n".join(json.dumps(r) for r in records))
        return load_manifest(path, inventory)

    def test_by_task(self, tmp_path, inventory):
        utts = self._utts(tmp_path, inventory, [("W", None), ("S", None), ("W", None)])
        strata = stratify(utts, "task")
        assert sorted(strata) == ["S", "W"]
        assert len(strata["W"]) == 2
        assert len(strata["S"]) == 1

    def test_by_noise_band(self, tmp_path, inventory):
        utts = self._utts(tmp_path, inventory, [("W", 30.0), ("W", 21.0), ("W", 5.0)])
        strata = stratify(utts, "noise_band")
        assert {k: len(v) for k, v in strata.items()} == {
            NoiseBand.LOW: 1, NoiseBand.MEDIUM: 1, NoiseBand.HIGH: 1,
        }

    def test_missing_snr(self, tmp_path, inventory):
        utts = self._utts(tmp_path, inventory, [("W", 30.0), ("W", None)])
        with pytest.raises(MissingSnr):
            stratify(utts, "noise_band")

    def test_partition_is_exhaustive_and_disjoint(self, tmp_path, inventory):
        utts = self._utts(
            tmp_path, inventory,
            [("W", None), ("S", None), ("WL", None), ("PWL", None), ("W", None)],
        )
        strata = stratify(utts, "task")
        assert sum(len(v) for v in strata.values()) == len(utts)
        seen = [u.id for group in strata.values() for u in group]
        assert len(seen) == len(set(seen))

    def test_unknown_key(self, tmp_path, inventory):
        utts = self._utts(tmp_path, inventory, [("W", None)])
        with pytest.raises(ValueError):
            stratify(utts, "speaker")
