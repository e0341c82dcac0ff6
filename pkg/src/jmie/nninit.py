"""Seeded parameter initializers shared by the encoder and decoder heads."""

from __future__ import annotations

import numpy as np

from .autodiff import Tensor, parameter


def xavier_uniform(rng: np.random.Generator, fan_in: int, fan_out: int, name: str | None = None) -> Tensor:
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return parameter(rng.uniform(-bound, bound, size=(fan_in, fan_out)), name=name)


def zeros(shape, name: str | None = None) -> Tensor:
    return parameter(np.zeros(shape), name=name)


def embedding_init(rng: np.random.Generator, rows: int, dim: int, name: str | None = None) -> Tensor:
    return parameter(rng.uniform(-0.1, 0.1, size=(rows, dim)), name=name)
