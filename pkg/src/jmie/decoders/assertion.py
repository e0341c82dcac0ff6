"""Assertion decoder: a softmax classifier at each problem head token.

The input of head token i is [X_i ; CE(tag_i)], the token's contextual row
concatenated with the embedding of its concept tag (gold under teacher
forcing, predicted at inference).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import autodiff as ad
from ..corpus import ASSERTION_LABELS
from ..nninit import xavier_uniform


class HeadOutOfRange(IndexError):
    pass


@dataclass
class AssertionParams:
    w: ad.Tensor  # (D + e_c, 6)
    b: ad.Tensor  # (6,)

    @classmethod
    def init(cls, rng: np.random.Generator, input_dim: int) -> "AssertionParams":
        return cls(
            w=xavier_uniform(rng, input_dim, len(ASSERTION_LABELS), name="assertion.w"),
            b=ad.parameter(np.zeros(len(ASSERTION_LABELS)), name="assertion.b"),
        )

    def named_params(self, prefix: str = "assertion") -> dict:
        return {f"{prefix}.w": self.w, f"{prefix}.b": self.b}


def assertion_logits(
    x: ad.Tensor,
    tag_ids: np.ndarray,
    heads: np.ndarray,
    concept_emb: ad.Tensor,
    params: AssertionParams,
) -> ad.Tensor:
    """(H, 6) logits for the given head token indices."""
    heads = np.asarray(heads, dtype=np.intp)
    n = x.data.shape[0]
    if heads.size and (heads.min() < 0 or heads.max() >= n):
        raise HeadOutOfRange(f"head index outside sentence of length {n}")
    rows = ad.embedding_lookup(x, heads)
    ce_rows = ad.embedding_lookup(concept_emb, np.asarray(tag_ids, dtype=np.intp)[heads])
    feats = ad.concat([rows, ce_rows], axis=1)
    return ad.add(ad.matmul(feats, params.w), params.b)


def assertion_loss(logits: ad.Tensor, gold_ids: np.ndarray) -> ad.Tensor:
    """Mean cross-entropy over heads; callers skip this when there are none."""
    return ad.cross_entropy(logits, gold_ids)
