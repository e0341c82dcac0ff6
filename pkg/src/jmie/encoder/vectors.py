"""Trainable word-embedding tables and GloVe-style vector files."""

from __future__ import annotations

import numpy as np

from ..autodiff import Tensor, parameter

UNK = "<unk>"
PAD = "<pad>"


class RaggedLine(ValueError):
    pass


class EmptyFile(ValueError):
    pass


class EmbeddingTable:
    """token -> row lookup over a trainable (V, d) matrix.

    Every lookup resolves: out-of-vocabulary tokens map to the ``<unk>`` row.
    The ``<pad>`` row is pinned at zero and excluded from gradient updates.
    """

    def __init__(self, vocab: dict, matrix: Tensor):
        if UNK not in vocab or PAD not in vocab:
            raise ValueError("vocabulary must contain <unk> and <pad>")
        if matrix.data.shape[0] != len(vocab):
            raise ValueError("matrix rows != vocabulary size")
        self.vocab = dict(vocab)
        self.matrix = matrix

    @property
    def dim(self) -> int:
        return self.matrix.data.shape[1]

    @property
    def pad_id(self) -> int:
        return self.vocab[PAD]

    def lookup_ids(self, tokens) -> np.ndarray:
        unk = self.vocab[UNK]
        return np.array([self.vocab.get(t, unk) for t in tokens], dtype=np.intp)

    def zero_pad_grad(self) -> None:
        if self.matrix.grad is not None:
            self.matrix.grad[self.pad_id] = 0.0

    @classmethod
    def from_corpus(cls, documents, dim: int, rng: np.random.Generator) -> "EmbeddingTable":
        """Random-init table over the corpus vocabulary (sorted for determinism)."""
        words = sorted({tok for doc in documents for sent in doc.sentences for tok in sent})
        vocab = {w: i for i, w in enumerate(words)}
        vocab[UNK] = len(vocab)
        vocab[PAD] = len(vocab)
        matrix = rng.uniform(-0.1, 0.1, size=(len(vocab), dim))
        matrix[vocab[PAD]] = 0.0
        return cls(vocab, parameter(matrix, name="embeddings"))


def load_word_vectors(path: str) -> EmbeddingTable:
    """Read a text vector file (``token v1 ... vd`` per line).

    The dimensionality is inferred from the first line; values are parsed as
    float32 and widened to float64. ``<unk>`` is initialized to the mean of
    all loaded rows and ``<pad>`` to zeros.
    """
    vocab: dict[str, int] = {}
    rows = []
    dim = None
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            parts = line.rstrip("\n").split(" ")
            if len(parts) < 2:
                raise RaggedLine(f"{path}:{lineno}: no vector values")
            token, values = parts[0], parts[1:]
            if dim is None:
                dim = len(values)
            elif len(values) != dim:
                raise RaggedLine(f"{path}:{lineno}: expected {dim} values, got {len(values)}")
            vocab[token] = len(rows)
            rows.append(np.array(values, dtype=np.float32))
    if not rows:
        raise EmptyFile(f"{path}: no vectors")
    stacked = np.stack(rows).astype(np.float64)
    unk = stacked.mean(axis=0, keepdims=True)
    pad = np.zeros((1, dim))
    vocab[UNK] = len(rows)
    vocab[PAD] = len(rows) + 1
    matrix = np.concatenate([stacked, unk, pad], axis=0)
    return EmbeddingTable(vocab, parameter(matrix, name="embeddings"))
