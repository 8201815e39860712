import warnings

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from seqtag.corpus import (
    Dataset,
    EntitySpan,
    Sentence,
    TagScheme,
    Token,
    extract_entities,
    parse_conll,
    repair_bio,
    split_train_valid,
    tags_from_entities,
    write_conll,
)
from seqtag.errors import ParseError, TagValidationError

DRUG_SCHEME = TagScheme(("drug", "brand", "group", "drug_n"))
CLINICAL_SCHEME = TagScheme(("problem", "test", "treatment"))


class TestTagScheme:
    def test_alphabet_size_and_order(self):
        scheme = TagScheme(("a", "b"))
        assert scheme.tags == ("O", "B-a", "I-a", "B-b", "I-b")
        assert len(scheme) == 2 * 2 + 1
        assert scheme.index["O"] == 0

    def test_indices_are_dense_and_stable(self):
        assert list(DRUG_SCHEME.index.values()) == list(range(len(DRUG_SCHEME)))
        assert DRUG_SCHEME.tags == TagScheme(("drug", "brand", "group", "drug_n")).tags

    def test_rejects_duplicates_and_empty(self):
        with pytest.raises(ValueError):
            TagScheme(("x", "x"))
        with pytest.raises(ValueError):
            TagScheme(())


class TestParseConll:
    def test_single_token_sentence(self):
        data = parse_conll("Felbatol\tB-brand\n\n", DRUG_SCHEME)
        assert len(data) == 1
        assert len(data[0]) == 1
        assert data[0].tokens[0] == Token("Felbatol", "B-brand")

    def test_empty_input(self):
        assert len(parse_conll("", DRUG_SCHEME)) == 0

    def test_surface_with_spaces_is_a_parse_error(self):
        with pytest.raises(ParseError) as err:
            parse_conll("x y z\tO", DRUG_SCHEME)
        assert err.value.line == 1

    def test_wrong_column_count(self):
        with pytest.raises(ParseError) as err:
            parse_conll("a\tO\nb\tO\textra\tmore\n", DRUG_SCHEME)
        assert err.value.line == 2

    def test_unknown_tag_names_the_tag(self):
        with pytest.raises(TagValidationError, match="B-vitamin"):
            parse_conll("a\tB-vitamin\n", DRUG_SCHEME)

    def test_no_trailing_blank_line(self):
        data = parse_conll("a\tO\nb\tB-drug", DRUG_SCHEME)
        assert len(data) == 1
        assert data[0].surfaces == ["a", "b"]

    def test_three_column_predictions(self):
        data = parse_conll("aspirin\tB-drug\tO\n", DRUG_SCHEME)
        tok = data[0].tokens[0]
        assert tok.gold_tag == "B-drug"
        assert tok.pred_tag == "O"

    def test_unlabeled_single_column(self):
        data = parse_conll("aspirin\ndaily\n", DRUG_SCHEME)
        assert data[0].gold_tags == [None, None]

    def test_accepts_line_iterable(self):
        data = parse_conll(["a\tO\n", "\n", "b\tB-drug\n"], DRUG_SCHEME)
        assert len(data) == 2

    def test_invalid_gold_bio_warns_but_parses(self):
        with pytest.warns(UserWarning, match="does not continue"):
            data = parse_conll("a\tB-drug\nb\tI-brand\n", DRUG_SCHEME)
        assert data[0].gold_tags == ["B-drug", "I-brand"]


class TestWriteRoundTrip:
    def test_round_trip_two_columns(self):
        text = "He\tO\ntook\tO\nFelbatol\tB-brand\n\ndaily\tO\n\n"
        data = parse_conll(text, DRUG_SCHEME)
        assert write_conll(data) == text
        assert parse_conll(write_conll(data), DRUG_SCHEME) == data

    def test_round_trip_three_columns(self):
        text = "a\tB-drug\tB-drug\nb\tI-drug\tO\n\n"
        data = parse_conll(text, DRUG_SCHEME)
        assert parse_conll(write_conll(data), DRUG_SCHEME) == data

    def test_rejects_mixed_tag_presence(self):
        mixed = Dataset((Sentence((Token("a", "O"), Token("b"))),))
        with pytest.raises(ValueError):
            write_conll(mixed)


def tag_sequences(scheme: TagScheme):
    return st.lists(st.sampled_from(scheme.tags), min_size=1, max_size=12)


class TestRepairBio:
    def test_i_after_o_becomes_b(self):
        assert repair_bio(["O", "I-drug"]) == ["O", "B-drug"]

    def test_valid_sequence_unchanged(self):
        assert repair_bio(["B-drug", "I-drug"]) == ["B-drug", "I-drug"]

    def test_sentence_initial_i_becomes_b(self):
        assert repair_bio(["I-test"]) == ["B-test"]

    def test_class_switch_becomes_b(self):
        assert repair_bio(["B-drug", "I-brand"]) == ["B-drug", "B-brand"]

    def test_cascading_continuation_is_kept(self):
        assert repair_bio(["O", "I-drug", "I-drug"]) == ["O", "B-drug", "I-drug"]

    def test_length_preserved(self):
        tags = ["I-drug", "O", "I-brand", "B-group", "I-group"]
        assert len(repair_bio(tags)) == len(tags)

    @given(tag_sequences(DRUG_SCHEME))
    def test_idempotent(self, tags):
        once = repair_bio(tags)
        assert repair_bio(once) == once

    @given(tag_sequences(DRUG_SCHEME))
    def test_repaired_sequences_have_no_dangling_i(self, tags):
        repaired = repair_bio(tags)
        extract_entities(repaired)  # must not raise


class TestExtractEntities:
    def test_multiword_entity(self):
        tags = ["B-problem", "I-problem", "I-problem", "I-problem"]
        assert extract_entities(tags) == [EntitySpan(0, 4, "problem")]

    def test_all_outside(self):
        assert extract_entities(["O", "O", "O"]) == []

    def test_adjacent_b_tags_are_singletons(self):
        assert extract_entities(["B-drug", "B-drug"]) == [
            EntitySpan(0, 1, "drug"),
            EntitySpan(1, 2, "drug"),
        ]

    def test_entity_at_sentence_end(self):
        assert extract_entities(["O", "B-drug", "I-drug"]) == [EntitySpan(1, 3, "drug")]

    def test_unrepaired_sequence_raises(self):
        with pytest.raises(TagValidationError):
            extract_entities(["O", "I-drug"])
        with pytest.raises(TagValidationError):
            extract_entities(["B-drug", "I-brand"])

    @given(tag_sequences(CLINICAL_SCHEME))
    @settings(max_examples=200)
    def test_retagging_round_trips_through_repair(self, tags):
        repaired = repair_bio(tags)
        spans = extract_entities(repaired)
        assert sorted(spans) == spans  # ordered by start, non-overlapping
        for a, b in zip(spans, spans[1:]):
            assert a.end <= b.start
        assert tags_from_entities(len(repaired), spans) == repaired


class TestSplitTrainValid:
    def _toy(self, n):
        return Dataset(tuple(Sentence((Token(f"w{i}", "O"),)) for i in range(n)))

    def test_sizes_are_ceil(self):
        train, valid = split_train_valid(self._toy(10), 0.7, seed=1)
        assert (len(train), len(valid)) == (7, 3)

    def test_deterministic(self):
        data = self._toy(20)
        a = split_train_valid(data, 0.7, seed=9)
        b = split_train_valid(data, 0.7, seed=9)
        assert a == b

    def test_partition_recombines_to_input(self):
        data = self._toy(13)
        train, valid = split_train_valid(data, 0.4, seed=3)
        combined = sorted(s.tokens[0].surface for s in (*train, *valid))
        assert combined == sorted(s.tokens[0].surface for s in data)
        assert len(train) + len(valid) == len(data)

    def test_ratio_out_of_range(self):
        for ratio in (0.0, 1.0, -0.1, 1.5):
            with pytest.raises(ValueError):
                split_train_valid(self._toy(4), ratio, seed=0)


def test_gold_warning_not_raised_for_valid_data():
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        parse_conll("a\tB-drug\nb\tI-drug\nc\tO\n", DRUG_SCHEME)
