"""Independent three-model pipeline baseline.

Each stage owns its parameters (nothing is shared): a concept model identical
in architecture to the joint model's first stage, an assertion classifier
over span representations, and a relation classifier over span-pair
representations with a nolink class. A multi-token concept is represented by
the element-wise sum of its token vectors, not the rightmost head. The
assertion and relation models train on gold upstream annotations; at
prediction time each stage consumes the previous stage's system output
unless gold injection is requested.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .corpus import (
    CONCEPT_TYPES,
    AnnotatedDocument,
    AssertionLabel,
    ConceptSpan,
    RelationTriple,
    bio_to_spans,
)
from .corpus.types import BIO_TAGS
from .decoders.crf import CrfParams, crf_nll, emissions, viterbi_from_emissions
from .decoders.joint import (
    ASSERTION_TO_ID,
    ASSERTION_VOCAB,
    NONE_ASSERTION_ID,
)
from .decoders.relation import NOLINK_ID, RELATION_VOCAB
from .encoder import SentenceEncoder
from .evaluation import EvalReport, score_assertions, score_concepts, score_relations
from .nninit import embedding_init, xavier_uniform

CTYPE_TO_ID = {t: i for i, t in enumerate(CONCEPT_TYPES)}


@dataclass
class FeedForward:
    """Single-hidden-layer classifier (tanh), the baseline's stage-2/3 head."""

    w1: ad.Tensor
    b1: ad.Tensor
    w2: ad.Tensor
    b2: ad.Tensor

    @classmethod
    def init(cls, rng, input_dim: int, hidden: int, n_out: int, prefix: str) -> "FeedForward":
        return cls(
            w1=xavier_uniform(rng, input_dim, hidden, name=f"{prefix}.w1"),
            b1=ad.parameter(np.zeros(hidden), name=f"{prefix}.b1"),
            w2=xavier_uniform(rng, hidden, n_out, name=f"{prefix}.w2"),
            b2=ad.parameter(np.zeros(n_out), name=f"{prefix}.b2"),
        )

    def __call__(self, x: ad.Tensor) -> ad.Tensor:
        h = ad.tanh(ad.add(ad.matmul(x, self.w1), self.b1))
        return ad.add(ad.matmul(h, self.w2), self.b2)

    def named_params(self, prefix: str) -> dict:
        return {
            f"{prefix}.w1": self.w1,
            f"{prefix}.b1": self.b1,
            f"{prefix}.w2": self.w2,
            f"{prefix}.b2": self.b2,
        }


def span_representation(x: ad.Tensor, span: ConceptSpan) -> ad.Tensor:
    """Element-wise sum of the span's token vectors, as a (1, D) row."""
    width = span.end_tok - span.start_tok + 1
    rows = ad.narrow(x, 0, span.start_tok, width)
    return ad.reshape(ad.tsum(rows, axis=0), (1, x.data.shape[1]))


class ConceptStageModel:
    """Encoder + CRF trained on the concept objective alone."""

    def __init__(self, encoder: SentenceEncoder, rng: np.random.Generator):
        self.encoder = encoder
        self.crf = CrfParams.init(rng, encoder.output_dim)

    def named_params(self) -> dict:
        params = dict(self.encoder.named_params())
        params.update(self.crf.named_params())
        return params

    def batch_loss(self, examples, train=False, seed=0, step=0) -> ad.Tensor:
        total = ad.constant(np.zeros(()))
        for serial, ex in enumerate(examples):
            x = self.encoder.encode(
                ex.tokens, doc_id=ex.doc_id, sent_index=ex.sent_index,
                train=train, dropout_key=(seed, step, serial),
            )
            total = ad.add(total, crf_nll(x, ex.tag_ids, self.crf))
        return ad.scale(total, 1.0 / len(examples))

    def predict_spans(self, tokens, doc_id, sent_index, constrain_bio=True):
        x = self.encoder.encode(tokens, doc_id=doc_id, sent_index=sent_index, train=False)
        emis = emissions(x, self.crf).data
        tag_ids = viterbi_from_emissions(emis, self.crf, constrain_bio=constrain_bio)
        tags = tuple(BIO_TAGS[t] for t in tag_ids)
        return [ConceptSpan(sent_index, s.start_tok, s.end_tok, s.ctype) for s in bio_to_spans(tags)]


class AssertionStageModel:
    """Classifier over [span sum ; concept-type embedding] for problem spans."""

    def __init__(self, encoder: SentenceEncoder, rng, type_emb_dim: int = 32, hidden: int = 128):
        self.encoder = encoder
        self.type_emb = embedding_init(rng, len(CONCEPT_TYPES), type_emb_dim, name="ast.type_emb")
        self.ff = FeedForward.init(
            rng, encoder.output_dim + type_emb_dim, hidden, len(ASSERTION_VOCAB) - 1, "ast.ff"
        )

    def named_params(self) -> dict:
        params = dict(self.encoder.named_params())
        params["ast.type_emb"] = self.type_emb
        params.update(self.ff.named_params("ast.ff"))
        return params

    def _logits(self, x: ad.Tensor, spans) -> ad.Tensor:
        reps = [span_representation(x, s) for s in spans]
        types = ad.embedding_lookup(
            self.type_emb, np.array([CTYPE_TO_ID[s.ctype] for s in spans], dtype=np.intp)
        )
        feats = ad.concat([ad.concat(reps, axis=0) if len(reps) > 1 else reps[0], types], axis=1)
        return self.ff(feats)

    def batch_loss(self, examples, train=False, seed=0, step=0) -> ad.Tensor:
        blocks, targets = [], []
        for serial, ex in enumerate(examples):
            head_to_id = dict(zip(ex.heads.tolist(), ex.head_assertions.tolist()))
            problems = [s for s in ex.spans if s.ctype == "problem" and s.head_tok in head_to_id]
            if not problems:
                continue
            x = self.encoder.encode(
                ex.tokens, doc_id=ex.doc_id, sent_index=ex.sent_index,
                train=train, dropout_key=(seed, step, serial),
            )
            blocks.append(self._logits(x, problems))
            targets += [head_to_id[s.head_tok] for s in problems]
        if not blocks:
            return ad.constant(np.zeros(()))
        logits = blocks[0] if len(blocks) == 1 else ad.concat(blocks, axis=0)
        return ad.cross_entropy(logits, np.array(targets, dtype=np.intp))

    def predict(self, tokens, doc_id, sent_index, spans) -> list:
        problems = [s for s in spans if s.ctype == "problem"]
        if not problems:
            return []
        x = self.encoder.encode(tokens, doc_id=doc_id, sent_index=sent_index, train=False)
        picks = self._logits(x, problems).data.argmax(axis=1)
        return [AssertionLabel(s, ASSERTION_VOCAB[p]) for s, p in zip(problems, picks)]


class RelationStageModel:
    """Pair classifier over two span representations plus type and assertion
    embeddings; nolink is an ordinary output class."""

    def __init__(self, encoder: SentenceEncoder, rng, type_emb_dim: int = 32,
                 assertion_emb_dim: int = 32, hidden: int = 128):
        self.encoder = encoder
        self.type_emb = embedding_init(rng, len(CONCEPT_TYPES), type_emb_dim, name="rel.type_emb")
        self.assertion_emb = embedding_init(
            rng, len(ASSERTION_VOCAB), assertion_emb_dim, name="rel.assertion_emb"
        )
        pair_dim = 2 * (encoder.output_dim + type_emb_dim + assertion_emb_dim)
        self.ff = FeedForward.init(rng, pair_dim, hidden, len(RELATION_VOCAB), "rel.ff")

    def named_params(self) -> dict:
        params = dict(self.encoder.named_params())
        params["rel.type_emb"] = self.type_emb
        params["rel.assertion_emb"] = self.assertion_emb
        params.update(self.ff.named_params("rel.ff"))
        return params

    def _ordered_pairs(self, spans):
        return [(a, b) for a in spans for b in spans if a != b]

    def batch_loss(self, examples, train=False, seed=0, step=0) -> ad.Tensor:
        blocks, targets = [], []
        for serial, ex in enumerate(examples):
            if len(ex.spans) < 2:
                continue
            head_to_span = {s.head_tok: s for s in ex.spans}
            gold = {
                (head_to_span[subj], head_to_span[obj]): label
                for obj, subj, label in ex.gold_cells
            }
            assertion_ids = self._gold_assertion_ids(ex)
            x = self.encoder.encode(
                ex.tokens, doc_id=ex.doc_id, sent_index=ex.sent_index,
                train=train, dropout_key=(seed, step, serial),
            )
            blocks.append(self.ff(self._pair_features_matrix(x, ex.spans, assertion_ids)))
            targets += [gold.get((a, b), NOLINK_ID) for a, b in self._ordered_pairs(ex.spans)]
        if not blocks:
            return ad.constant(np.zeros(()))
        logits = blocks[0] if len(blocks) == 1 else ad.concat(blocks, axis=0)
        return ad.cross_entropy(logits, np.array(targets, dtype=np.intp))

    def _pair_features_matrix(self, x, spans, assertion_ids):
        # identical featurization for training and prediction
        reps = {s: span_representation(x, s) for s in spans}
        rows = []
        for a, b in self._ordered_pairs(spans):
            meta = ad.embedding_lookup(
                self.type_emb,
                np.array([CTYPE_TO_ID[a.ctype], CTYPE_TO_ID[b.ctype]], dtype=np.intp),
            )
            asserts = ad.embedding_lookup(
                self.assertion_emb,
                np.array([assertion_ids[a], assertion_ids[b]], dtype=np.intp),
            )
            meta_row = ad.reshape(meta, (1, 2 * self.type_emb.data.shape[1]))
            assert_row = ad.reshape(asserts, (1, 2 * self.assertion_emb.data.shape[1]))
            rows.append(ad.concat([reps[a], reps[b], meta_row, assert_row], axis=1))
        return ad.concat(rows, axis=0) if len(rows) > 1 else rows[0]

    @staticmethod
    def _gold_assertion_ids(ex) -> dict:
        head_to_id = dict(zip(ex.heads.tolist(), ex.head_assertions.tolist()))
        return {
            s: head_to_id.get(s.head_tok, NONE_ASSERTION_ID) if s.ctype == "problem"
            else NONE_ASSERTION_ID
            for s in ex.spans
        }

    def predict(self, tokens, doc_id, sent_index, spans, assertions) -> list:
        if len(spans) < 2:
            return []
        assertion_ids = {
            s: ASSERTION_TO_ID[label] for s, label in assertions.items()
        }
        for s in spans:
            assertion_ids.setdefault(s, NONE_ASSERTION_ID)
        x = self.encoder.encode(tokens, doc_id=doc_id, sent_index=sent_index, train=False)
        logits = self.ff(self._pair_features_matrix(x, spans, assertion_ids)).data
        triples = []
        for (a, b), row in zip(self._ordered_pairs(spans), logits):
            pick = int(row.argmax())
            if pick != NOLINK_ID:
                triples.append(RelationTriple(a, RELATION_VOCAB[pick], b))
        return triples


@dataclass
class PipelineModels:
    concept: ConceptStageModel
    assertion: AssertionStageModel
    relation: RelationStageModel

    def stage_models(self) -> dict:
        return {"concept": self.concept, "assertion": self.assertion, "relation": self.relation}


def predict_pipeline(models: PipelineModels, documents, inject_gold=frozenset()) -> list:
    """Run the three stages in sequence over whole documents.

    ``inject_gold`` may contain "concept" and/or "assertion"; an injected
    stage's inputs are replaced by the reference annotations (the
    independent-evaluation pathway). Injecting assertions implies injecting
    concepts, since stage 3 consumes both.
    """
    inject_gold = set(inject_gold)
    if "assertion" in inject_gold:
        inject_gold.add("concept")
    out = []
    for doc in documents:
        concepts, assertions, relations = [], [], []
        for si, tokens in enumerate(doc.sentences):
            if not tokens:
                continue
            if "concept" in inject_gold:
                spans = list(doc.sentence_concepts(si))
            else:
                spans = models.concept.predict_spans(tokens, doc.doc_id, si)
            if "assertion" in inject_gold:
                by_span = {a.concept: a.label for a in doc.assertions}
                sent_assertions = [
                    AssertionLabel(s, by_span[s])
                    for s in spans
                    if s.ctype == "problem" and s in by_span
                ]
            else:
                sent_assertions = models.assertion.predict(tokens, doc.doc_id, si, spans)
            assertion_map = {a.concept: a.label for a in sent_assertions}
            sent_relations = models.relation.predict(
                tokens, doc.doc_id, si, spans, assertion_map
            )
            concepts += spans
            assertions += sent_assertions
            relations += sent_relations
        out.append(AnnotatedDocument(doc.doc_id, doc.sentences, concepts, assertions, relations))
    return out


def evaluate_pipeline_independent(models: PipelineModels, documents) -> EvalReport:
    """Per-stage scores with reference inputs at each stage (Table-4 pathway)."""
    stage1 = predict_pipeline(models, documents)
    stage2 = predict_pipeline(models, documents, inject_gold={"concept"})
    stage3 = predict_pipeline(models, documents, inject_gold={"concept", "assertion"})
    return EvalReport(
        protocol="independent",
        concept=score_concepts(documents, stage1),
        assertion=score_assertions(documents, stage2),
        relation=score_relations(documents, stage3),
    )
