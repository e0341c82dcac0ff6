"""Deterministic synthetic corpora for desk-scale verification.

Surface tokens fully determine the gold annotations, so a correct learner can
approach perfect F1:

  * a trigger token from ``problem_tokens``/``treatment_tokens``/``test_tokens``
    is always a concept of that type;
  * ``modifier_token`` occurs only directly before a problem trigger and joins
    it into a two-token span (the trigger stays the rightmost head);
  * an assertion-marker token occurs only directly before a problem span and
    fixes its assertion; unmarked problems are "present";
  * a relation-marker token occurs only between the subject and object heads
    of its template's relation; concept pairs without a marker are unrelated.

The generator is part of the shipped library (not test-only code) because the
acceptance experiments build on it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .types import (
    ASSERTION_LABELS,
    RELATION_CATEGORIES,
    RELATION_LABELS,
    AnnotatedDocument,
    AssertionLabel,
    ConceptSpan,
    RelationTriple,
)


class InvalidSpec(ValueError):
    pass


@dataclass(frozen=True)
class RelationTemplate:
    """One surface pattern ``<subject> <marker> <object>`` emitting a relation."""

    marker: str
    label: str

    def __post_init__(self):
        if self.label not in RELATION_LABELS:
            raise InvalidSpec(f"unknown relation label {self.label!r}")


@dataclass(frozen=True)
class SynthSpec:
    n_sentences: int = 200
    sentences_per_doc: int = 10
    filler_vocab: tuple = (
        "pt", "was", "seen", "in", "clinic", "today", "and",
        "remains", "stable", "on", "followup", "exam",
    )
    problem_tokens: tuple = ("painA", "painB", "painC", "painD", "painE", "painF")
    treatment_tokens: tuple = ("rxA", "rxB", "rxC", "rxD", "rxE", "rxF")
    test_tokens: tuple = ("labA", "labB", "labC", "labD", "labE", "labF")
    modifier_token: str = "severe"
    modifier_rate: float = 0.35
    assertion_markers: tuple = (("no", "absent"), ("possible", "possible"))
    assertion_marker_rate: float = 0.4
    relation_templates: tuple = (
        RelationTemplate("for", "TrAP"),
        RelationTemplate("revealed", "TeRP"),
        RelationTemplate("causing", "PIP"),
    )
    min_fillers: int = 1
    max_fillers: int = 4

    def validate(self) -> None:
        if self.n_sentences <= 0 or self.sentences_per_doc <= 0:
            raise InvalidSpec("n_sentences and sentences_per_doc must be positive")
        if not self.filler_vocab:
            raise InvalidSpec("filler vocabulary is empty")
        if not (self.problem_tokens and self.treatment_tokens and self.test_tokens):
            raise InvalidSpec("every concept type needs at least one trigger token")
        if not (0 <= self.min_fillers <= self.max_fillers):
            raise InvalidSpec("bad filler range")
        for marker, label in self.assertion_markers:
            if label not in ASSERTION_LABELS:
                raise InvalidSpec(f"unknown assertion label {label!r}")
        special = [self.modifier_token]
        special += [m for m, _ in self.assertion_markers]
        special += [t.marker for t in self.relation_templates]
        pools = (
            set(self.filler_vocab),
            set(self.problem_tokens),
            set(self.treatment_tokens),
            set(self.test_tokens),
            set(special),
        )
        seen = set()
        for pool in pools:
            if pool & seen:
                raise InvalidSpec(f"token roles overlap: {sorted(pool & seen)}")
            seen |= pool


def _trigger_pool(spec: SynthSpec, ctype: str):
    return {
        "problem": spec.problem_tokens,
        "treatment": spec.treatment_tokens,
        "test": spec.test_tokens,
    }[ctype]


class _SentenceBuilder:
    def __init__(self, spec: SynthSpec, rng: np.random.Generator, sent_index: int):
        self.spec = spec
        self.rng = rng
        self.sent_index = sent_index
        self.tokens: list[str] = []
        self.concepts: list[ConceptSpan] = []
        self.assertions: list[AssertionLabel] = []
        self.relations: list[RelationTriple] = []

    def fillers(self, force: bool = False):
        spec = self.spec
        lo = max(spec.min_fillers, 1) if force else spec.min_fillers
        n = int(self.rng.integers(lo, spec.max_fillers + 1))
        for _ in range(n):
            self.tokens.append(str(self.rng.choice(spec.filler_vocab)))

    def concept(self, ctype: str, marked: bool | None = None) -> ConceptSpan:
        spec, rng = self.spec, self.rng
        marker_label = None
        if marked is None:
            marked = rng.random() < spec.assertion_marker_rate
        if ctype == "problem" and spec.assertion_markers and marked:
            marker, marker_label = spec.assertion_markers[int(rng.integers(len(spec.assertion_markers)))]
            self.tokens.append(marker)
        start = len(self.tokens)
        if ctype == "problem" and rng.random() < spec.modifier_rate:
            self.tokens.append(spec.modifier_token)
        self.tokens.append(str(rng.choice(_trigger_pool(spec, ctype))))
        span = ConceptSpan(self.sent_index, start, len(self.tokens) - 1, ctype)
        self.concepts.append(span)
        if ctype == "problem":
            self.assertions.append(AssertionLabel(span, marker_label or "present"))
        return span

    def relation(self, template: RelationTemplate):
        subj_type, obj_type = RELATION_CATEGORIES[template.label]
        subj = self.concept(subj_type)
        self.tokens.append(template.marker)
        obj = self.concept(obj_type)
        self.relations.append(RelationTriple(subj, template.label, obj))


def generate_synthetic_corpus(spec: SynthSpec, seed: int) -> list[AnnotatedDocument]:
    """Generate a corpus of ``spec.n_sentences`` sentences; fixed seed, fixed bytes."""
    spec.validate()
    rng = np.random.default_rng(seed)
    # the hardest distinctions are deliberately over-represented: unrelated
    # concept pairs (relation negatives) and a marked problem followed by an
    # unmarked one (assertion markers bind to the adjacent span only)
    templates = ["filler", "problem", "other_concept", "two_concepts", "two_concepts", "marked_pair"]
    if spec.relation_templates:
        templates += ["relation", "relation"]

    docs = []
    sent_global = 0
    doc_count = -(-spec.n_sentences // spec.sentences_per_doc)
    for d in range(doc_count):
        n_sent = min(spec.sentences_per_doc, spec.n_sentences - sent_global)
        sentences, concepts, assertions, relations = [], [], [], []
        for si in range(n_sent):
            b = _SentenceBuilder(spec, rng, si)
            kind = templates[int(rng.integers(len(templates)))]
            b.fillers(force=True)
            if kind == "problem":
                b.concept("problem")
            elif kind == "other_concept":
                b.concept(str(rng.choice(["treatment", "test"])))
            elif kind == "two_concepts":
                # unrelated pair: no relation marker between them
                b.concept(str(rng.choice(["treatment", "test", "problem"])))
                b.fillers(force=True)
                b.concept(str(rng.choice(["problem", "treatment", "test"])))
            elif kind == "marked_pair":
                # a marked problem, then an unmarked one further on
                b.concept("problem", marked=True)
                b.fillers(force=True)
                b.concept("problem", marked=False)
            elif kind == "relation":
                idx = int(rng.integers(len(spec.relation_templates)))
                b.relation(spec.relation_templates[idx])
            b.fillers()
            sentences.append(tuple(b.tokens))
            concepts += b.concepts
            assertions += b.assertions
            relations += b.relations
            sent_global += 1
        docs.append(
            AnnotatedDocument(f"synth-{d:04d}", sentences, concepts, assertions, relations)
        )
    for doc in docs:
        doc.validate_gold()
    return docs


def inject_concept_noise(documents, rate: float, seed: int) -> list[AnnotatedDocument]:
    """Flip the concept type of ``rate`` of all concepts, repairing dependents.

    Relation annotations stay intact: flips are drawn from concepts that
    participate in no relation (at a rate adjusted so the expected flip count
    is still ``rate`` of all concepts), because any endpoint flip would
    invalidate its relation's category. Flipped trigger tokens still degrade
    the tagger on every occurrence, so stage-1 errors propagate at inference.
    Assertions follow their concept: dropped when it stops being a problem,
    "present" added when it becomes one.
    """
    documents = list(documents)
    rng = np.random.default_rng(seed)
    involved = {
        (doc.doc_id, endpoint)
        for doc in documents
        for r in doc.relations
        for endpoint in (r.subject, r.object)
    }
    total = sum(len(doc.concepts) for doc in documents)
    eligible = sum(
        1 for doc in documents for c in doc.concepts if (doc.doc_id, c) not in involved
    )
    if total == 0 or eligible == 0:
        return documents
    adjusted = min(1.0, rate * total / eligible)
    out = []
    for doc in documents:
        mapping = {}
        for c in doc.concepts:
            if (doc.doc_id, c) not in involved and rng.random() < adjusted:
                others = [t for t in ("problem", "treatment", "test") if t != c.ctype]
                new_type = others[int(rng.integers(len(others)))]
                mapping[c] = ConceptSpan(c.sent_index, c.start_tok, c.end_tok, new_type)
            else:
                mapping[c] = c
        concepts = [mapping[c] for c in doc.concepts]
        assertions = [
            AssertionLabel(mapping[a.concept], a.label)
            for a in doc.assertions
            if mapping[a.concept].ctype == "problem"
        ]
        asserted = {a.concept for a in assertions}
        for c in concepts:
            if c.ctype == "problem" and c not in asserted:
                assertions.append(AssertionLabel(c, "present"))
        relations = [
            RelationTriple(mapping[r.subject], r.label, mapping[r.object])
            for r in doc.relations
        ]
        noisy = AnnotatedDocument(doc.doc_id, doc.sentences, concepts, assertions, relations)
        noisy.validate_gold()
        out.append(noisy)
    return out
