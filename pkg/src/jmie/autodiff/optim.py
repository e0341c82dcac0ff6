"""AdamW with decoupled weight decay.

The decay is applied directly to the parameter (p <- p - lr*wd*p) before the
bias-corrected Adam update term, so decay strength is independent of the
adaptive step size.
"""

from __future__ import annotations

import numpy as np


class NonFiniteGradient(ArithmeticError):
    pass


class AdamW:
    def __init__(self, params: dict, lr: float = 1e-3, betas=(0.9, 0.999),
                 eps: float = 1e-8, weight_decay: float = 0.0):
        self.params = dict(params)
        self.lr = lr
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.weight_decay = weight_decay
        self.t = 0
        self.m = {name: np.zeros_like(p.data) for name, p in self.params.items()}
        self.v = {name: np.zeros_like(p.data) for name, p in self.params.items()}

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.grad = None

    def step(self) -> None:
        self.t += 1
        bc1 = 1.0 - self.beta1 ** self.t
        bc2 = 1.0 - self.beta2 ** self.t
        for name, p in self.params.items():
            g = p.grad
            if g is None:
                continue
            if not np.all(np.isfinite(g)):
                raise NonFiniteGradient(f"non-finite gradient for {name!r}")
            if self.weight_decay:
                p.data -= self.lr * self.weight_decay * p.data
            m = self.m[name]
            v = self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p.data -= self.lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)


def adamw_step(params: dict, state: AdamW | None = None, **kwargs) -> AdamW:
    """One optimizer step over ``params`` (name -> Tensor with .grad set).

    Returns the state object; pass it back for subsequent steps.
    """
    if state is None:
        state = AdamW(params, **kwargs)
    state.step()
    return state
