"""Relation decoder: multi-head token selection over (head, label) cells.

Token features are [X_i ; CE(tag_i) ; AE(assertion_i or none)]. The scorer
for "token i selects head j with relation k" is the additive form

    s(j, k, i) = u_k^T tanh(U f_j + V f_i)

with one score vector u_k per relation (nolink included, index last).

softmax mode (the default): per token i, one distribution over the admissible
cells {(j, k): k != nolink} plus the designated (i, nolink) self cell; the
gold cell of a token heading a relation (subj, r, obj) with object head i is
(subject head, r), and unrelated tokens target (i, nolink). sigmoid mode
scores every (i, j, k != nolink) cell independently with threshold 0.5,
which permits multiple heads per token.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .. import autodiff as ad
from ..corpus import NOLINK, RELATION_LABELS
from ..nninit import xavier_uniform

logger = logging.getLogger("jmie.decoders")

RELATION_VOCAB = RELATION_LABELS + (NOLINK,)
NOLINK_ID = len(RELATION_VOCAB) - 1
REL_MODES = ("softmax", "sigmoid")


class FeatureDimMismatch(ValueError):
    pass


@dataclass
class RelationParams:
    u: ad.Tensor  # (F, m) head-side projection
    v: ad.Tensor  # (F, m) dependent-side projection
    w: ad.Tensor  # (m, K) one score column per relation, nolink last

    @classmethod
    def init(cls, rng: np.random.Generator, feature_dim: int, hidden: int = 128) -> "RelationParams":
        return cls(
            u=xavier_uniform(rng, feature_dim, hidden, name="relation.u"),
            v=xavier_uniform(rng, feature_dim, hidden, name="relation.v"),
            w=xavier_uniform(rng, hidden, len(RELATION_VOCAB), name="relation.w"),
        )

    @property
    def feature_dim(self) -> int:
        return self.u.data.shape[0]

    def named_params(self, prefix: str = "relation") -> dict:
        return {f"{prefix}.u": self.u, f"{prefix}.v": self.v, f"{prefix}.w": self.w}


def relation_features(
    x: ad.Tensor,
    tag_ids: np.ndarray,
    assertion_ids: np.ndarray,
    concept_emb: ad.Tensor,
    assertion_emb: ad.Tensor,
) -> ad.Tensor:
    """(n, F) rows: [X_i ; CE(tag_i) ; AE(assertion_i)]."""
    ce = ad.embedding_lookup(concept_emb, np.asarray(tag_ids, dtype=np.intp))
    ae = ad.embedding_lookup(assertion_emb, np.asarray(assertion_ids, dtype=np.intp))
    return ad.concat([x, ce, ae], axis=1)


def pair_scores(feats: ad.Tensor, params: RelationParams):
    """Per-token score matrices; entry [i] is the (n, K) grid over (j, k)."""
    if feats.data.shape[1] != params.feature_dim:
        raise FeatureDimMismatch(
            f"feature dim {feats.data.shape[1]} != scorer dim {params.feature_dim}"
        )
    n = feats.data.shape[0]
    m = params.u.data.shape[1]
    p = ad.matmul(feats, params.u)  # head-side, (n, m)
    q = ad.matmul(feats, params.v)  # dependent-side, (n, m)
    grids = []
    for i in range(n):
        q_i = ad.reshape(ad.narrow(q, 0, i, 1), (m,))
        h_i = ad.tanh(ad.add(p, q_i))
        grids.append(ad.matmul(h_i, params.w))  # (n, K)
    return grids


def admissible_mask(n: int, i: int) -> np.ndarray:
    """Cells a token may select: every (j, k != nolink) plus (i, nolink)."""
    mask = np.ones((n, len(RELATION_VOCAB)))
    mask[:, NOLINK_ID] = 0.0
    mask[i, NOLINK_ID] = 1.0
    return mask.reshape(-1)


def softmax_targets(n: int, gold_cells) -> np.ndarray:
    """Flattened gold cell per token; tokens heading several relations keep
    the lexicographically smallest (j, k) cell, with a logged count."""
    k = len(RELATION_VOCAB)
    targets = np.arange(n) * k + NOLINK_ID  # default: own nolink cell
    best: dict[int, tuple] = {}
    dropped = 0
    for obj_head, subj_head, label_id in gold_cells:
        cell = (subj_head, label_id)
        if obj_head in best and best[obj_head] != cell:
            dropped += 1
            best[obj_head] = min(best[obj_head], cell)
        else:
            best[obj_head] = cell
    if dropped:
        logger.info("softmax mode: %d extra gold head cells collapsed", dropped)
    for obj_head, (subj_head, label_id) in best.items():
        targets[obj_head] = subj_head * k + label_id
    return targets


def relation_loss_softmax(grids, gold_cells) -> ad.Tensor:
    """Mean cross-entropy over tokens; one admissible-cell softmax per token."""
    n = len(grids)
    k = len(RELATION_VOCAB)
    rows = ad.concat([ad.reshape(g, (1, n * k)) for g in grids], axis=0)
    mask = np.stack([admissible_mask(n, i) for i in range(n)])
    return ad.cross_entropy(rows, softmax_targets(n, gold_cells), class_mask=mask)


def relation_loss_sigmoid(grids, gold_cells) -> ad.Tensor:
    """Mean binary cross-entropy over every (i, j, k != nolink) cell."""
    n = len(grids)
    rows = ad.concat(
        [ad.reshape(ad.narrow(g, 1, 0, NOLINK_ID), (1, n * NOLINK_ID)) for g in grids], axis=0
    )
    targets = np.zeros((n, n * NOLINK_ID))
    for obj_head, subj_head, label_id in gold_cells:
        targets[obj_head, subj_head * NOLINK_ID + label_id] = 1.0
    return ad.bce_with_logits(rows, targets)


def decode_relations(grids_data, mode: str = "softmax"):
    """Extract (obj_head, subj_head, label_id) picks from raw score grids.

    Self cells with a real label never yield a pair (a concept cannot relate
    to itself); softmax ties break lexicographically by (j, k).
    """
    if mode not in REL_MODES:
        raise ValueError(f"unknown relation mode {mode!r}")
    n = len(grids_data)
    picks = []
    for i, grid in enumerate(grids_data):
        if mode == "softmax":
            flat = np.where(admissible_mask(n, i) > 0, grid.reshape(-1), -np.inf)
            cell = int(flat.argmax())
            j, k = divmod(cell, len(RELATION_VOCAB))
            if k != NOLINK_ID and j != i:
                picks.append((i, j, k))
        else:
            for j in range(n):
                if j == i:
                    continue
                for k in range(NOLINK_ID):
                    if grid[j, k] > 0.0:  # sigmoid(s) > 0.5
                        picks.append((i, j, k))
    return picks
