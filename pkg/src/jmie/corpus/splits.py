"""Document-level train/dev splitting."""

from __future__ import annotations

import numpy as np


class TooFewDocuments(ValueError):
    pass


def split_train_dev(documents, fraction: float = 0.10, seed: int = 0):
    """Deterministically hold out ``round(fraction * N)`` documents as dev.

    The split is by document, never by sentence; identical (corpus, seed)
    always yields the identical partition.
    """
    docs = list(documents)
    if len(docs) < 10:
        raise TooFewDocuments(f"need at least 10 documents, got {len(docs)}")
    n_dev = int(round(fraction * len(docs)))
    order = np.random.default_rng(seed).permutation(len(docs))
    dev_ids = set(order[:n_dev])
    train = [d for i, d in enumerate(docs) if i not in dev_ids]
    dev = [d for i, d in enumerate(docs) if i in dev_ids]
    return train, dev
