"""Linear-chain CRF over BIO tags: scoring, forward algorithm, Viterbi.

The sequence score is start[y0] + sum_i emit(i, y_i) + sum_i A[y_{i-1}, y_i]
+ stop[y_n]; the training loss is log-partition minus gold score, with the
partition computed by the forward algorithm in log space. Hard BIO
constraints are applied at decode time only.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import autodiff as ad
from ..corpus import BIO_TAGS
from ..nninit import xavier_uniform


class LengthMismatch(ValueError):
    pass


@dataclass
class CrfParams:
    emit_w: ad.Tensor  # (D, T)
    emit_b: ad.Tensor  # (T,)
    trans: ad.Tensor  # (T, T): trans[i, j] scores i -> j
    start: ad.Tensor  # (T,)
    stop: ad.Tensor  # (T,)

    @classmethod
    def init(cls, rng: np.random.Generator, input_dim: int, n_tags: int = len(BIO_TAGS)) -> "CrfParams":
        return cls(
            emit_w=xavier_uniform(rng, input_dim, n_tags, name="crf.emit_w"),
            emit_b=ad.parameter(np.zeros(n_tags), name="crf.emit_b"),
            trans=ad.parameter(np.zeros((n_tags, n_tags)), name="crf.trans"),
            start=ad.parameter(np.zeros(n_tags), name="crf.start"),
            stop=ad.parameter(np.zeros(n_tags), name="crf.stop"),
        )

    @property
    def n_tags(self) -> int:
        return self.emit_b.data.shape[0]

    def named_params(self, prefix: str = "crf") -> dict:
        return {
            f"{prefix}.emit_w": self.emit_w,
            f"{prefix}.emit_b": self.emit_b,
            f"{prefix}.trans": self.trans,
            f"{prefix}.start": self.start,
            f"{prefix}.stop": self.stop,
        }


def emissions(x: ad.Tensor, params: CrfParams) -> ad.Tensor:
    """Per-position tag scores, (n, T)."""
    return ad.add(ad.matmul(x, params.emit_w), params.emit_b)


def _check_len(emis: ad.Tensor, tag_ids) -> np.ndarray:
    tags = np.asarray(tag_ids, dtype=np.intp)
    if tags.ndim != 1 or tags.shape[0] != emis.data.shape[0]:
        raise LengthMismatch(f"{tags.shape[0] if tags.ndim == 1 else tags.shape} tags for "
                             f"{emis.data.shape[0]} positions")
    return tags


def sequence_score_from_emissions(emis: ad.Tensor, tag_ids, params: CrfParams) -> ad.Tensor:
    tags = _check_len(emis, tag_ids)
    n, t = emis.data.shape
    pick = np.zeros((n, t))
    pick[np.arange(n), tags] = 1.0
    first = np.zeros(t)
    first[tags[0]] = 1.0
    last = np.zeros(t)
    last[tags[-1]] = 1.0
    score = ad.tsum(ad.mul(emis, ad.constant(pick)))
    score = ad.add(score, ad.tsum(ad.mul(params.start, ad.constant(first))))
    score = ad.add(score, ad.tsum(ad.mul(params.stop, ad.constant(last))))
    if n > 1:
        counts = np.zeros((t, t))
        np.add.at(counts, (tags[:-1], tags[1:]), 1.0)
        score = ad.add(score, ad.tsum(ad.mul(params.trans, ad.constant(counts))))
    return score


def log_partition_from_emissions(emis: ad.Tensor, params: CrfParams) -> ad.Tensor:
    n, t = emis.data.shape
    trans_t = ad.transpose(params.trans)  # (j, i) = score i -> j
    alpha = ad.add(params.start, ad.reshape(ad.narrow(emis, 0, 0, 1), (t,)))
    for pos in range(1, n):
        scores = ad.add(trans_t, alpha)  # row j: alpha[i] + trans[i, j]
        alpha = ad.add(ad.logsumexp(scores, axis=1), ad.reshape(ad.narrow(emis, 0, pos, 1), (t,)))
    return ad.logsumexp(ad.add(alpha, params.stop), axis=0)


def crf_sequence_score(x: ad.Tensor, tag_ids, params: CrfParams) -> ad.Tensor:
    return sequence_score_from_emissions(emissions(x, params), tag_ids, params)


def crf_log_partition(x: ad.Tensor, params: CrfParams) -> ad.Tensor:
    return log_partition_from_emissions(emissions(x, params), params)


def crf_nll(x: ad.Tensor, tag_ids, params: CrfParams) -> ad.Tensor:
    emis = emissions(x, params)
    return ad.sub(
        log_partition_from_emissions(emis, params),
        sequence_score_from_emissions(emis, tag_ids, params),
    )


def bio_constraints(tags=BIO_TAGS):
    """(start_ok, trans_ok) boolean masks for hard BIO decoding."""
    t = len(tags)
    start_ok = np.array([not tag.startswith("I-") for tag in tags])
    trans_ok = np.ones((t, t), dtype=bool)
    for j, tag in enumerate(tags):
        if not tag.startswith("I-"):
            continue
        ttype = tag.split("-", 1)[1]
        for i, prev in enumerate(tags):
            trans_ok[i, j] = prev in (f"B-{ttype}", f"I-{ttype}")
    return start_ok, trans_ok


_BIO_START_OK, _BIO_TRANS_OK = bio_constraints()


def viterbi_decode(x: ad.Tensor, params: CrfParams, constrain_bio: bool = False) -> list:
    """Argmax tag-id sequence; ties resolve to the lowest tag index."""
    emis = emissions(x, params).data
    return viterbi_from_emissions(emis, params, constrain_bio)


def viterbi_from_emissions(emis: np.ndarray, params: CrfParams, constrain_bio: bool = False) -> list:
    n, t = emis.shape
    trans = params.trans.data.copy()
    start = params.start.data.copy()
    if constrain_bio:
        start = np.where(_BIO_START_OK[:t], start, -np.inf)
        trans = np.where(_BIO_TRANS_OK[:t, :t], trans, -np.inf)
    delta = start + emis[0]
    back = np.zeros((n, t), dtype=np.intp)
    for pos in range(1, n):
        scores = delta[:, None] + trans  # (i, j)
        back[pos] = scores.argmax(axis=0)  # first max <=> lowest prev index
        delta = scores.max(axis=0) + emis[pos]
    delta = delta + params.stop.data
    best = int(delta.argmax())
    path = [best]
    for pos in range(n - 1, 0, -1):
        best = int(back[pos, best])
        path.append(best)
    path.reverse()
    return path
