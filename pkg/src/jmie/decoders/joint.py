"""Joint three-stage model: shared encoder, CRF tagger, assertion and
relation heads, trained with the additive objective

    l_total = l_concept + l_assertion + l_relation

All three stage losses live in one computation graph, so a single backward
pass updates the shared encoder. Teacher forcing (the default during
training) feeds gold tags and assertions to the downstream label embeddings;
with it off, Viterbi/argmax predictions are fed instead while supervision
targets stay gold.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import autodiff as ad
from ..corpus import (
    ASSERTION_LABELS,
    TAG_TO_ID,
    AnnotatedDocument,
    AssertionLabel,
    RelationTriple,
    bio_to_spans,
    spans_to_bio,
)
from ..corpus.types import BIO_TAGS
from ..encoder import SentenceEncoder
from ..nninit import embedding_init
from .assertion import AssertionParams, assertion_logits
from .crf import CrfParams, crf_nll, emissions, viterbi_from_emissions
from .relation import (
    NOLINK_ID,
    RELATION_VOCAB,
    RelationParams,
    decode_relations,
    pair_scores,
    relation_features,
    relation_loss_sigmoid,
    relation_loss_softmax,
)

ASSERTION_VOCAB = ASSERTION_LABELS + ("none",)
NONE_ASSERTION_ID = len(ASSERTION_VOCAB) - 1
ASSERTION_TO_ID = {label: i for i, label in enumerate(ASSERTION_VOCAB)}
RELATION_TO_ID = {label: i for i, label in enumerate(RELATION_VOCAB)}


@dataclass(frozen=True)
class SentenceExample:
    """One sentence with id-encoded gold structure, ready for the model."""

    doc_id: str
    sent_index: int
    tokens: tuple
    tag_ids: np.ndarray  # (n,) gold BIO tag ids
    heads: np.ndarray  # gold problem head token indices, ascending
    head_assertions: np.ndarray  # gold assertion id per head
    token_assertions: np.ndarray  # (n,) AE row per token ("none" off heads)
    gold_cells: tuple  # (object head, subject head, relation id) per triple
    spans: tuple = ()  # gold ConceptSpans of this sentence (pipeline baseline)


def prepare_examples(documents) -> list:
    examples = []
    for doc in documents:
        assertion_by_span = {a.concept: a.label for a in doc.assertions}
        for si, tokens in enumerate(doc.sentences):
            if not tokens:
                continue
            spans = doc.sentence_concepts(si)
            tags = spans_to_bio(len(tokens), spans)
            tag_ids = np.array([TAG_TO_ID[t] for t in tags], dtype=np.intp)
            heads = []
            head_assertions = []
            token_assertions = np.full(len(tokens), NONE_ASSERTION_ID, dtype=np.intp)
            for span in spans:
                if span.ctype != "problem":
                    continue
                label = assertion_by_span.get(span)
                if label is None:
                    continue
                heads.append(span.head_tok)
                head_assertions.append(ASSERTION_TO_ID[label])
                token_assertions[span.head_tok] = ASSERTION_TO_ID[label]
            order = np.argsort(heads) if heads else []
            cells = tuple(
                (r.object.head_tok, r.subject.head_tok, RELATION_TO_ID[r.label])
                for r in doc.relations
                if r.subject.sent_index == si
            )
            examples.append(
                SentenceExample(
                    doc_id=doc.doc_id,
                    sent_index=si,
                    tokens=tuple(tokens),
                    tag_ids=tag_ids,
                    heads=np.array(heads, dtype=np.intp)[order] if heads else np.empty(0, dtype=np.intp),
                    head_assertions=np.array(head_assertions, dtype=np.intp)[order]
                    if heads
                    else np.empty(0, dtype=np.intp),
                    token_assertions=token_assertions,
                    gold_cells=cells,
                    spans=tuple(spans),
                )
            )
    return examples


@dataclass
class JointLoss:
    l_concept: ad.Tensor
    l_assertion: ad.Tensor
    l_relation: ad.Tensor
    l_total: ad.Tensor

    def values(self) -> dict:
        return {
            "concept": self.l_concept.item(),
            "assertion": self.l_assertion.item(),
            "relation": self.l_relation.item(),
            "total": self.l_total.item(),
        }


class JointModel:
    def __init__(
        self,
        encoder: SentenceEncoder,
        rng: np.random.Generator,
        concept_emb_dim: int = 32,
        assertion_emb_dim: int = 32,
        relation_hidden: int = 128,
        relation_mode: str = "softmax",
    ):
        d = encoder.output_dim
        self.encoder = encoder
        self.crf = CrfParams.init(rng, d)
        self.concept_emb = embedding_init(rng, len(BIO_TAGS), concept_emb_dim, name="emb.concept")
        self.assertion_emb = embedding_init(
            rng, len(ASSERTION_VOCAB), assertion_emb_dim, name="emb.assertion"
        )
        self.assertion = AssertionParams.init(rng, d + concept_emb_dim)
        self.relation = RelationParams.init(
            rng, d + concept_emb_dim + assertion_emb_dim, relation_hidden
        )
        self.relation_mode = relation_mode

    def named_params(self) -> dict:
        params = dict(self.encoder.named_params())
        params.update(self.crf.named_params())
        params["emb.concept"] = self.concept_emb
        params["emb.assertion"] = self.assertion_emb
        params.update(self.assertion.named_params())
        params.update(self.relation.named_params())
        return params

    # ------------------------------------------------------------- training

    def _sentence_terms(self, ex: SentenceExample, train, key, teacher_forcing, stages):
        """Per-sentence loss pieces; one shared encoder pass feeds all stages."""
        x = self.encoder.encode(
            ex.tokens, doc_id=ex.doc_id, sent_index=ex.sent_index, train=train, dropout_key=key
        )
        terms = {}
        emis = emissions(x, self.crf)
        if "concept" in stages:
            terms["concept"] = crf_nll(x, ex.tag_ids, self.crf)
        if teacher_forcing:
            tag_ids, token_assertions = ex.tag_ids, ex.token_assertions
        else:
            tag_ids = np.array(viterbi_from_emissions(emis.data, self.crf, constrain_bio=True))
            token_assertions = self._predicted_token_assertions(x, tag_ids)
        if "assertion" in stages and ex.heads.size:
            logits = assertion_logits(x, tag_ids, ex.heads, self.concept_emb, self.assertion)
            terms["assertion"] = (logits, ex.head_assertions)
        if "relation" in stages:
            feats = relation_features(
                x, tag_ids, token_assertions, self.concept_emb, self.assertion_emb
            )
            grids = pair_scores(feats, self.relation)
            n = len(ex.tokens)
            if self.relation_mode == "softmax":
                terms["relation"] = (relation_loss_softmax(grids, ex.gold_cells), n)
            else:
                terms["relation"] = (relation_loss_sigmoid(grids, ex.gold_cells), n * n * NOLINK_ID)
        return terms

    def batch_loss(
        self,
        examples,
        train: bool = False,
        seed: int = 0,
        step: int = 0,
        teacher_forcing: bool = True,
        stages=("concept", "assertion", "relation"),
    ) -> JointLoss:
        """Joint loss over a batch of sentences.

        Stage normalization: concept is the mean sentence NLL, assertion the
        mean cross-entropy over every gold head in the batch, relation the
        mean over every token (softmax) or scored cell (sigmoid).
        """
        if not examples:
            raise ValueError("empty batch")
        zero = ad.constant(np.zeros(()))
        concept_sum = zero
        assertion_logit_blocks = []
        assertion_targets = []
        relation_sum = zero
        relation_weight = 0
        for serial, ex in enumerate(examples):
            terms = self._sentence_terms(
                ex, train, (seed, step, serial), teacher_forcing, stages
            )
            if "concept" in terms:
                concept_sum = ad.add(concept_sum, terms["concept"])
            if "assertion" in terms:
                logits, targets = terms["assertion"]
                assertion_logit_blocks.append(logits)
                assertion_targets.append(targets)
            if "relation" in terms:
                loss, weight = terms["relation"]
                relation_sum = ad.add(relation_sum, ad.scale(loss, weight))
                relation_weight += weight
        l_concept = ad.scale(concept_sum, 1.0 / len(examples)) if "concept" in stages else zero
        if assertion_logit_blocks:
            all_logits = (
                assertion_logit_blocks[0]
                if len(assertion_logit_blocks) == 1
                else ad.concat(assertion_logit_blocks, axis=0)
            )
            l_assertion = ad.cross_entropy(all_logits, np.concatenate(assertion_targets))
        else:
            l_assertion = zero
        l_relation = (
            ad.scale(relation_sum, 1.0 / relation_weight) if relation_weight else zero
        )
        l_total = ad.add(ad.add(l_concept, l_assertion), l_relation)
        return JointLoss(l_concept, l_assertion, l_relation, l_total)

    # ------------------------------------------------------------ inference

    def _predicted_token_assertions(self, x, tag_ids) -> np.ndarray:
        """Argmax assertion at each predicted problem head, none elsewhere."""
        n = x.data.shape[0]
        token_assertions = np.full(n, NONE_ASSERTION_ID, dtype=np.intp)
        tags = tuple(BIO_TAGS[t] for t in tag_ids)
        heads = np.array(
            [s.head_tok for s in bio_to_spans(tags) if s.ctype == "problem"], dtype=np.intp
        )
        if heads.size:
            logits = assertion_logits(x, tag_ids, heads, self.concept_emb, self.assertion)
            token_assertions[heads] = logits.data.argmax(axis=1)
        return token_assertions

    def predict_sentence(self, tokens, doc_id: str, sent_index: int, constrain_bio: bool = True):
        """Decode one sentence into (spans, assertions, triples, debug dict)."""
        x = self.encoder.encode(tokens, doc_id=doc_id, sent_index=sent_index, train=False)
        emis = emissions(x, self.crf)
        tag_ids = np.array(viterbi_from_emissions(emis.data, self.crf, constrain_bio=constrain_bio))
        tags = tuple(BIO_TAGS[t] for t in tag_ids)
        spans = [
            type(s)(sent_index, s.start_tok, s.end_tok, s.ctype) for s in bio_to_spans(tags)
        ]
        head_to_span = {s.head_tok: s for s in spans}

        assertions = []
        token_assertions = np.full(len(tokens), NONE_ASSERTION_ID, dtype=np.intp)
        problem_heads = np.array(
            [s.head_tok for s in spans if s.ctype == "problem"], dtype=np.intp
        )
        if problem_heads.size:
            logits = assertion_logits(
                x, tag_ids, problem_heads, self.concept_emb, self.assertion
            )
            picks = logits.data.argmax(axis=1)
            for head, pick in zip(problem_heads, picks):
                assertions.append(AssertionLabel(head_to_span[head], ASSERTION_VOCAB[pick]))
                token_assertions[head] = pick

        feats = relation_features(
            x, tag_ids, token_assertions, self.concept_emb, self.assertion_emb
        )
        grids = pair_scores(feats, self.relation)
        grids_data = [g.data for g in grids]
        triples = []
        for obj_head, subj_head, label_id in decode_relations(grids_data, self.relation_mode):
            subj = head_to_span.get(subj_head)
            obj = head_to_span.get(obj_head)
            if subj is None or obj is None or subj == obj:
                continue
            triples.append(RelationTriple(subj, RELATION_VOCAB[label_id], obj))
        debug = {
            "tag_scores": emis.data.tolist(),
            "tags": [BIO_TAGS[t] for t in tag_ids],
            "relation_scores": [g.tolist() for g in grids_data],
        }
        return spans, assertions, triples, debug

    def predict_document(self, doc: AnnotatedDocument, constrain_bio: bool = True, debug_sink=None):
        """End-to-end prediction; returns a document carrying system annotations."""
        concepts, assertions, relations = [], [], []
        for si, tokens in enumerate(doc.sentences):
            if not tokens:
                continue
            spans, sent_assertions, triples, debug = self.predict_sentence(
                tokens, doc.doc_id, si, constrain_bio=constrain_bio
            )
            concepts += spans
            assertions += sent_assertions
            relations += triples
            if debug_sink is not None:
                debug_sink({"doc_id": doc.doc_id, "sent_index": si, **debug})
        return AnnotatedDocument(doc.doc_id, doc.sentences, concepts, assertions, relations)
