import numpy as np
import pytest

from jmie.corpus import (
    BIO_TAGS,
    CONCEPT_TYPES,
    ConceptSpan,
    OverlappingSpans,
    bio_to_spans,
    spans_to_bio,
)


def test_single_span():
    tags = spans_to_bio(4, [ConceptSpan(0, 1, 2, "problem")])
    assert tags == ("O", "B-problem", "I-problem", "O")


def test_no_spans():
    assert spans_to_bio(3, []) == ("O", "O", "O")


def test_adjacent_spans_keep_separate_b_tags():
    spans = [ConceptSpan(0, 0, 0, "test"), ConceptSpan(0, 1, 2, "problem")]
    assert spans_to_bio(4, spans) == ("B-test", "B-problem", "I-problem", "O")


def test_overlap_rejected():
    with pytest.raises(OverlappingSpans):
        spans_to_bio(4, [ConceptSpan(0, 0, 2, "test"), ConceptSpan(0, 2, 3, "problem")])


def test_spans_round_trip():
    tags = ("O", "B-problem", "I-problem", "O")
    assert bio_to_spans(tags) == [ConceptSpan(0, 1, 2, "problem")]


def test_orphan_inside_repaired_to_begin():
    assert bio_to_spans(("I-test", "O")) == [ConceptSpan(0, 0, 0, "test")]


def test_type_switch_inside_run_starts_new_span():
    spans = bio_to_spans(("B-problem", "I-test", "I-test"))
    assert spans == [ConceptSpan(0, 0, 0, "problem"), ConceptSpan(0, 1, 2, "test")]


def random_span_set(rng, sentence_len):
    """Non-overlapping typed spans over a sentence, in left-to-right order."""
    spans = []
    pos = 0
    while pos < sentence_len:
        if rng.random() < 0.4:
            length = int(rng.integers(1, min(4, sentence_len - pos) + 1))
            ctype = CONCEPT_TYPES[int(rng.integers(3))]
            spans.append(ConceptSpan(0, pos, pos + length - 1, ctype))
            pos += length
        else:
            pos += 1
    return spans


def test_round_trip_identity_1000_random_span_sets():
    rng = np.random.default_rng(12345)
    for _ in range(1000):
        n = int(rng.integers(1, 13))
        spans = random_span_set(rng, n)
        assert bio_to_spans(spans_to_bio(n, spans)) == spans


def test_invalid_bio_always_repairs_to_valid_spans():
    rng = np.random.default_rng(99)
    for _ in range(500):
        n = int(rng.integers(1, 10))
        tags = tuple(BIO_TAGS[int(i)] for i in rng.integers(0, len(BIO_TAGS), size=n))
        spans = bio_to_spans(tags)
        # repaired output is a valid, non-overlapping span list
        seen = set()
        for s in spans:
            assert 0 <= s.start_tok <= s.end_tok < n
            for i in range(s.start_tok, s.end_tok + 1):
                assert i not in seen
                seen.add(i)
        # and survives a clean round trip of its own
        assert bio_to_spans(spans_to_bio(n, spans)) == spans
