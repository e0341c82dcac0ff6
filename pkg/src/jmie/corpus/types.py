"""Core annotation types for i2b2-style clinical reports.

A document is a list of whitespace-tokenized sentences plus three annotation
layers: concept spans (problem/treatment/test), assertion labels on problem
concepts, and directed relation triples between concepts of one sentence.
All containers are immutable after construction and safe to share across
threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field

CONCEPT_TYPES = ("problem", "treatment", "test")

ASSERTION_LABELS = (
    "present",
    "absent",
    "possible",
    "conditional",
    "hypothetical",
    "associated_with_someone_else",
)

RELATION_LABELS = ("TrIP", "TrWP", "TrCP", "TrAP", "TrNAP", "TeRP", "TeCP", "PIP")

NOLINK = "nolink"

# (subject type, object type) required for each gold relation label.
RELATION_CATEGORIES = {
    "TrIP": ("treatment", "problem"),
    "TrWP": ("treatment", "problem"),
    "TrCP": ("treatment", "problem"),
    "TrAP": ("treatment", "problem"),
    "TrNAP": ("treatment", "problem"),
    "TeRP": ("test", "problem"),
    "TeCP": ("test", "problem"),
    "PIP": ("problem", "problem"),
}

BIO_TAGS = (
    "O",
    "B-problem",
    "I-problem",
    "B-treatment",
    "I-treatment",
    "B-test",
    "I-test",
)

TAG_TO_ID = {tag: i for i, tag in enumerate(BIO_TAGS)}


class AnnotationError(ValueError):
    """Base class for invalid annotation structures."""


class IndexOutOfRange(AnnotationError):
    pass


class OverlappingSpans(AnnotationError):
    pass


@dataclass(frozen=True)
class Token:
    """One whitespace-delimited token addressed by (sentence, position)."""

    text: str
    sent_index: int
    tok_index: int

    def __post_init__(self):
        if not self.text or any(c.isspace() for c in self.text):
            raise AnnotationError(f"token text must be non-empty, no whitespace: {self.text!r}")


@dataclass(frozen=True, order=True)
class ConceptSpan:
    """Contiguous token span with a concept type; end_tok is inclusive.

    The rightmost token (end_tok) is the span's head token.
    """

    sent_index: int
    start_tok: int
    end_tok: int
    ctype: str = field(compare=True)

    def __post_init__(self):
        if self.ctype not in CONCEPT_TYPES:
            raise AnnotationError(f"unknown concept type {self.ctype!r}")
        if not (0 <= self.start_tok <= self.end_tok):
            raise IndexOutOfRange(f"bad span offsets {self.start_tok}..{self.end_tok}")

    @property
    def head_tok(self) -> int:
        return self.end_tok

    def overlaps(self, other: "ConceptSpan") -> bool:
        return (
            self.sent_index == other.sent_index
            and self.start_tok <= other.end_tok
            and other.start_tok <= self.end_tok
        )


@dataclass(frozen=True)
class AssertionLabel:
    """Assertion status attached to a problem concept."""

    concept: ConceptSpan
    label: str

    def __post_init__(self):
        if self.label not in ASSERTION_LABELS:
            raise AnnotationError(f"unknown assertion label {self.label!r}")
        if self.concept.ctype != "problem":
            raise AnnotationError(
                f"assertion on non-problem concept {self.concept.ctype!r} at "
                f"{self.concept.sent_index}:{self.concept.start_tok}"
            )


@dataclass(frozen=True)
class RelationTriple:
    """Directed relation between two concepts of the same sentence.

    Gold data additionally satisfies the label/category pairing in
    RELATION_CATEGORIES; decoded triples may violate it (they score as FP).
    """

    subject: ConceptSpan
    label: str
    object: ConceptSpan

    def __post_init__(self):
        if self.label not in RELATION_LABELS:
            raise AnnotationError(f"unknown relation label {self.label!r}")
        if self.subject.sent_index != self.object.sent_index:
            raise AnnotationError("relation endpoints must share a sentence")
        if self.subject == self.object:
            raise AnnotationError("relation subject equals object")

    def category_ok(self) -> bool:
        return RELATION_CATEGORIES[self.label] == (self.subject.ctype, self.object.ctype)


@dataclass(frozen=True)
class AnnotatedDocument:
    """Tokenized report with gold (or predicted) annotations.

    Structural invariants (checked here): annotation indices in range, spans
    non-overlapping, assertions only on problem concepts, assertion/relation
    concepts drawn from the concept list. Gold-only invariants (exactly one
    assertion per problem, relation category validity) are enforced by
    ``validate_gold``, which the parser applies at ingestion.
    """

    doc_id: str
    sentences: tuple
    concepts: tuple = ()
    assertions: tuple = ()
    relations: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "sentences", tuple(tuple(s) for s in self.sentences))
        object.__setattr__(self, "concepts", tuple(self.concepts))
        object.__setattr__(self, "assertions", tuple(self.assertions))
        object.__setattr__(self, "relations", tuple(self.relations))
        for si, sent in enumerate(self.sentences):
            for ti, text in enumerate(sent):
                Token(text, si, ti)  # validates token invariants
        concept_set = set()
        by_sentence: dict[int, list[ConceptSpan]] = {}
        for c in self.concepts:
            if c.sent_index >= len(self.sentences) or c.end_tok >= len(self.sentences[c.sent_index]):
                raise IndexOutOfRange(f"{self.doc_id}: concept {c} out of range")
            for prev in by_sentence.get(c.sent_index, ()):
                if c.overlaps(prev):
                    raise OverlappingSpans(f"{self.doc_id}: {c} overlaps {prev}")
            by_sentence.setdefault(c.sent_index, []).append(c)
            concept_set.add(c)
        for a in self.assertions:
            if a.concept not in concept_set:
                raise AnnotationError(f"{self.doc_id}: assertion on unknown concept {a.concept}")
        for r in self.relations:
            if r.subject not in concept_set or r.object not in concept_set:
                raise AnnotationError(f"{self.doc_id}: relation endpoint not in concept list")

    def validate_gold(self) -> None:
        """Check the gold-data-only invariants; raise AnnotationError on failure."""
        counts: dict[ConceptSpan, int] = {}
        for a in self.assertions:
            counts[a.concept] = counts.get(a.concept, 0) + 1
        for c in self.concepts:
            if c.ctype == "problem" and counts.get(c, 0) != 1:
                raise AnnotationError(
                    f"{self.doc_id}: problem concept {c} carries {counts.get(c, 0)} assertions"
                )
        for r in self.relations:
            if not r.category_ok():
                raise AnnotationError(
                    f"{self.doc_id}: relation {r.label} on "
                    f"({r.subject.ctype}, {r.object.ctype}) violates the i2b2 scheme"
                )

    def tokens(self):
        """Iterate Token objects in document order."""
        for si, sent in enumerate(self.sentences):
            for ti, text in enumerate(sent):
                yield Token(text, si, ti)

    def sentence_concepts(self, sent_index: int) -> list:
        return [c for c in self.concepts if c.sent_index == sent_index]

    def stats(self) -> dict:
        return {
            "documents": 1,
            "concepts": len(self.concepts),
            "assertions": len(self.assertions),
            "relations": len(self.relations),
        }


def corpus_stats(documents) -> dict:
    """Aggregate Table-1-style counts over a corpus."""
    totals = {"documents": 0, "concepts": 0, "assertions": 0, "relations": 0}
    for doc in documents:
        totals["documents"] += 1
        totals["concepts"] += len(doc.concepts)
        totals["assertions"] += len(doc.assertions)
        totals["relations"] += len(doc.relations)
    return totals
