"""Conversion between concept spans and BIO tag sequences.

``spans_to_bio`` and ``bio_to_spans`` are mutually inverse on valid input.
``bio_to_spans`` is total: it accepts arbitrary tag sequences from an
unconstrained decoder and repairs an orphan ``I-t`` (one that does not
continue a ``t`` span) by treating it as ``B-t``.
"""

from __future__ import annotations

from .types import BIO_TAGS, ConceptSpan, OverlappingSpans


def spans_to_bio(sentence_len: int, concepts) -> tuple:
    """Tag a sentence of ``sentence_len`` tokens with B/I/O labels."""
    tags = ["O"] * sentence_len
    occupied = [False] * sentence_len
    for c in concepts:
        if c.end_tok >= sentence_len:
            raise IndexError(f"span {c} exceeds sentence length {sentence_len}")
        if any(occupied[c.start_tok : c.end_tok + 1]):
            raise OverlappingSpans(f"span {c} overlaps a previous span")
        tags[c.start_tok] = f"B-{c.ctype}"
        for i in range(c.start_tok + 1, c.end_tok + 1):
            tags[i] = f"I-{c.ctype}"
        for i in range(c.start_tok, c.end_tok + 1):
            occupied[i] = True
    return tuple(tags)


def bio_to_spans(tags, sent_index: int = 0) -> list:
    """Extract concept spans from a (possibly invalid) BIO tag sequence."""
    spans = []
    start = None
    ctype = None
    for i, tag in enumerate(tags):
        if tag not in BIO_TAGS:
            raise ValueError(f"unknown tag {tag!r}")
        if tag == "O":
            if start is not None:
                spans.append(ConceptSpan(sent_index, start, i - 1, ctype))
                start, ctype = None, None
            continue
        prefix, ttype = tag.split("-", 1)
        if prefix == "B" or ctype != ttype:
            # B always opens a span; an orphan I-t is repaired to B-t.
            if start is not None:
                spans.append(ConceptSpan(sent_index, start, i - 1, ctype))
            start, ctype = i, ttype
    if start is not None:
        spans.append(ConceptSpan(sent_index, start, len(tags) - 1, ctype))
    return spans
