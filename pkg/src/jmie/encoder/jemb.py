"""JEMB1 precomputed-embedding files.

Layout (little-endian): magic b"JEMB1", version u32, dim u32, doc count u32;
per doc: id length u16 + UTF-8 id, sentence count u32; per sentence:
token count u32, then n x d float32 row-major.
"""

from __future__ import annotations

import struct

import numpy as np

MAGIC = b"JEMB1"
VERSION = 1


class BadMagic(ValueError):
    pass


class MissingEmbeddingEntry(KeyError):
    pass


class TokenCountMismatch(ValueError):
    pass


class PrecomputedEmbeddings:
    """Per-(doc_id, sent_index) contextual token matrices."""

    def __init__(self, dim: int, entries: dict):
        self.dim = dim
        self._entries = dict(entries)

    def __len__(self) -> int:
        return len(self._entries)

    def get(self, doc_id: str, sent_index: int, expected_len: int | None = None) -> np.ndarray:
        key = (doc_id, sent_index)
        if key not in self._entries:
            raise MissingEmbeddingEntry(f"no embedding entry for {doc_id!r} sentence {sent_index}")
        mat = self._entries[key]
        if expected_len is not None and mat.shape[0] != expected_len:
            raise TokenCountMismatch(
                f"{doc_id!r} sentence {sent_index}: file has {mat.shape[0]} tokens, "
                f"corpus has {expected_len}"
            )
        return mat

    def check_against(self, documents) -> None:
        """Cross-check token counts for every sentence of the given corpus."""
        for doc in documents:
            for si, sent in enumerate(doc.sentences):
                self.get(doc.doc_id, si, expected_len=len(sent))


def write_jemb(path: str, dim: int, docs: dict) -> None:
    """Write ``doc_id -> [sentence matrices]`` (each n_i x dim, row-major)."""
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<III", VERSION, dim, len(docs)))
        for doc_id, sentences in docs.items():
            encoded = doc_id.encode("utf-8")
            f.write(struct.pack("<H", len(encoded)))
            f.write(encoded)
            f.write(struct.pack("<I", len(sentences)))
            for mat in sentences:
                mat = np.asarray(mat)
                if mat.ndim != 2 or mat.shape[1] != dim:
                    raise ValueError(f"sentence matrix shape {mat.shape} != (n, {dim})")
                f.write(struct.pack("<I", mat.shape[0]))
                f.write(np.ascontiguousarray(mat, dtype="<f4").tobytes())


def load_precomputed(path: str) -> PrecomputedEmbeddings:
    with open(path, "rb") as f:
        blob = f.read()
    if blob[: len(MAGIC)] != MAGIC:
        raise BadMagic(f"{path}: bad magic {blob[:5]!r}")
    off = len(MAGIC)
    version, dim, doc_count = struct.unpack_from("<III", blob, off)
    off += 12
    if version != VERSION:
        raise BadMagic(f"{path}: unsupported version {version}")
    entries = {}
    for _ in range(doc_count):
        (id_len,) = struct.unpack_from("<H", blob, off)
        off += 2
        doc_id = blob[off : off + id_len].decode("utf-8")
        off += id_len
        (sent_count,) = struct.unpack_from("<I", blob, off)
        off += 4
        for si in range(sent_count):
            (n,) = struct.unpack_from("<I", blob, off)
            off += 4
            mat = np.frombuffer(blob, dtype="<f4", count=n * dim, offset=off).reshape(n, dim)
            off += 4 * n * dim
            entries[(doc_id, si)] = mat.astype(np.float64)
    if off != len(blob):
        raise BadMagic(f"{path}: {len(blob) - off} trailing bytes")
    return PrecomputedEmbeddings(dim, entries)
