"""Micro-F1 scoring for the three stages.

Matching is exact (strict): a concept prediction counts iff span boundaries
and type match a gold concept; an assertion additionally needs the assertion
label; a relation needs both spans (boundaries, direction per annotation
order) and the relation label. Counts are micro-aggregated over the corpus
and duplicate predictions are deduplicated before scoring.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

STAGES = ("concept", "assertion", "relation")


class CorpusMismatch(ValueError):
    pass


@dataclass(frozen=True)
class StageScore:
    tp: int
    fp: int
    fn: int

    @property
    def defined(self) -> bool:
        return (self.tp + self.fp + self.fn) > 0

    @property
    def precision(self) -> float:
        return self.tp / (self.tp + self.fp) if (self.tp + self.fp) else 0.0

    @property
    def recall(self) -> float:
        return self.tp / (self.tp + self.fn) if (self.tp + self.fn) else 0.0

    @property
    def f1(self) -> float:
        p, r = self.precision, self.recall
        return 2 * p * r / (p + r) if (p + r) else 0.0


def _score_sets(gold: set, pred: set) -> StageScore:
    return StageScore(tp=len(gold & pred), fp=len(pred - gold), fn=len(gold - pred))


def _concept_keys(docs) -> set:
    return {
        (d.doc_id, c.sent_index, c.start_tok, c.end_tok, c.ctype)
        for d in docs
        for c in d.concepts
    }


def _assertion_keys(docs) -> set:
    return {
        (d.doc_id, a.concept.sent_index, a.concept.start_tok, a.concept.end_tok,
         a.concept.ctype, a.label)
        for d in docs
        for a in d.assertions
    }


def _relation_keys(docs) -> set:
    return {
        (d.doc_id, r.subject.sent_index, r.subject.start_tok, r.subject.end_tok,
         r.label, r.object.start_tok, r.object.end_tok)
        for d in docs
        for r in d.relations
    }


def score_concepts(gold_docs, pred_docs) -> StageScore:
    return _score_sets(_concept_keys(gold_docs), _concept_keys(pred_docs))


def score_assertions(gold_docs, pred_docs) -> StageScore:
    return _score_sets(_assertion_keys(gold_docs), _assertion_keys(pred_docs))


def score_relations(gold_docs, pred_docs) -> StageScore:
    return _score_sets(_relation_keys(gold_docs), _relation_keys(pred_docs))


@dataclass(frozen=True)
class EvalReport:
    protocol: str  # "joint" or "independent"
    concept: StageScore
    assertion: StageScore
    relation: StageScore

    def stage(self, name: str) -> StageScore:
        return getattr(self, name)

    def mean_f1(self) -> float:
        return sum(self.stage(s).f1 for s in STAGES) / len(STAGES)

    def to_dict(self) -> dict:
        out = {"protocol": self.protocol}
        for name in STAGES:
            s = self.stage(name)
            out[name] = {
                "tp": s.tp,
                "fp": s.fp,
                "fn": s.fn,
                "precision": s.precision,
                "recall": s.recall,
                "f1": s.f1,
                "defined": s.defined,
            }
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, data: dict) -> "EvalReport":
        stages = {
            name: StageScore(data[name]["tp"], data[name]["fp"], data[name]["fn"])
            for name in STAGES
        }
        return cls(protocol=data["protocol"], **stages)

    @classmethod
    def from_json(cls, text: str) -> "EvalReport":
        return cls.from_dict(json.loads(text))

    def format_table(self) -> str:
        lines = [
            f"protocol: {self.protocol}",
            f"{'stage':<10}{'P':>7}{'R':>7}{'F1':>7}{'TP':>7}{'FP':>7}{'FN':>7}",
        ]
        for name in STAGES:
            s = self.stage(name)
            f1 = f"{100 * s.f1:.1f}" if s.defined else "undef"
            lines.append(
                f"{name:<10}{100 * s.precision:>7.1f}{100 * s.recall:>7.1f}{f1:>7}"
                f"{s.tp:>7}{s.fp:>7}{s.fn:>7}"
            )
        return "\n".join(lines) + "\n"


def evaluate(pred_docs, gold_docs, protocol: str = "joint") -> EvalReport:
    """Score system outputs against gold; document id sets must coincide."""
    gold_ids = sorted(d.doc_id for d in gold_docs)
    pred_ids = sorted(d.doc_id for d in pred_docs)
    if gold_ids != pred_ids:
        raise CorpusMismatch(f"gold ids {gold_ids[:3]}... != pred ids {pred_ids[:3]}...")
    return EvalReport(
        protocol=protocol,
        concept=score_concepts(gold_docs, pred_docs),
        assertion=score_assertions(gold_docs, pred_docs),
        relation=score_relations(gold_docs, pred_docs),
    )


def compare_reports(a: EvalReport, b: EvalReport) -> str:
    """Signed one-decimal F1 deltas (a - b) per stage, e.g. '+3.1'."""
    lines = []
    for name in STAGES:
        delta = 100 * (a.stage(name).f1 - b.stage(name).f1)
        lines.append(f"{name:<10}{delta:+.1f}")
    return "\n".join(lines) + "\n"


def average_reports(reports) -> dict:
    """Arithmetic mean of per-stage F1s over runs, percentages at 1 decimal."""
    reports = list(reports)
    if not reports:
        raise ValueError("no reports to average")
    out = {"protocol": reports[0].protocol, "runs": len(reports)}
    for name in STAGES:
        mean = sum(r.stage(name).f1 for r in reports) / len(reports)
        out[name] = round(100 * mean, 1)
    return out
