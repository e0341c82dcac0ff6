"""Bidirectional LSTM over a sentence of row-vector token inputs."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import autodiff as ad
from ..nninit import xavier_uniform

# gate order inside the stacked 4h dimension
_GATES = ("input", "forget", "cell", "output")


@dataclass
class LstmDirection:
    wx: ad.Tensor  # (input_dim, 4h)
    wh: ad.Tensor  # (h, 4h)
    b: ad.Tensor  # (4h,)


@dataclass
class BiLstmParams:
    input_dim: int
    hidden_dim: int
    forward: LstmDirection
    backward: LstmDirection

    @classmethod
    def init(cls, rng: np.random.Generator, input_dim: int, hidden_dim: int) -> "BiLstmParams":
        def direction(tag):
            b = np.zeros(4 * hidden_dim)
            b[hidden_dim : 2 * hidden_dim] = 1.0  # forget-gate bias
            return LstmDirection(
                wx=xavier_uniform(rng, input_dim, 4 * hidden_dim, name=f"lstm.{tag}.wx"),
                wh=xavier_uniform(rng, hidden_dim, 4 * hidden_dim, name=f"lstm.{tag}.wh"),
                b=ad.parameter(b, name=f"lstm.{tag}.b"),
            )

        return cls(input_dim, hidden_dim, direction("fwd"), direction("bwd"))

    @property
    def output_dim(self) -> int:
        return 2 * self.hidden_dim

    def named_params(self, prefix: str = "lstm") -> dict:
        out = {}
        for tag, d in (("fwd", self.forward), ("bwd", self.backward)):
            out[f"{prefix}.{tag}.wx"] = d.wx
            out[f"{prefix}.{tag}.wh"] = d.wh
            out[f"{prefix}.{tag}.b"] = d.b
        return out


def _run_direction(x: ad.Tensor, d: LstmDirection, hidden: int, reverse: bool) -> list:
    n = x.data.shape[0]
    h = ad.constant(np.zeros((1, hidden)))
    c = ad.constant(np.zeros((1, hidden)))
    outputs: list = [None] * n
    order = range(n - 1, -1, -1) if reverse else range(n)
    for t in order:
        x_t = ad.narrow(x, 0, t, 1)
        z = ad.add(ad.add(ad.matmul(x_t, d.wx), ad.matmul(h, d.wh)), d.b)
        i = ad.sigmoid(ad.narrow(z, 1, 0, hidden))
        f = ad.sigmoid(ad.narrow(z, 1, hidden, hidden))
        g = ad.tanh(ad.narrow(z, 1, 2 * hidden, hidden))
        o = ad.sigmoid(ad.narrow(z, 1, 3 * hidden, hidden))
        c = ad.add(ad.mul(f, c), ad.mul(i, g))
        h = ad.mul(o, ad.tanh(c))
        outputs[t] = h
    return outputs


def bilstm_forward(x: ad.Tensor, params: BiLstmParams) -> ad.Tensor:
    """Encode (n, input_dim) rows into (n, 2h): [forward ; backward] states."""
    if x.data.shape[1] != params.input_dim:
        raise ad.ShapeMismatch(f"lstm input dim {x.data.shape[1]} != {params.input_dim}")
    fwd = _run_direction(x, params.forward, params.hidden_dim, reverse=False)
    bwd = _run_direction(x, params.backward, params.hidden_dim, reverse=True)
    rows = [ad.concat([f, b], axis=1) for f, b in zip(fwd, bwd)]
    return rows[0] if len(rows) == 1 else ad.concat(rows, axis=0)
