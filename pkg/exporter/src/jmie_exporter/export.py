"""Export frozen transformer hidden states as JEMB1 files.

The corpus side of the interface is the text format (UTF-8, one sentence per
line, single-space tokens); the model side is any transformers checkpoint
that yields per-piece hidden states. Piece vectors are pooled per whitespace
token (first / mean / last piece; last mirrors the consumer's rightmost-head
convention) in float64 before the float32 narrowing the file format applies,
so mean pooling over identical pieces reproduces the piece vector exactly.

JEMB1 layout (little-endian): magic b"JEMB1", version u32, dim u32, doc count
u32; per doc: id length u16 + UTF-8 id, sentence count u32; per sentence:
token count u32, then n x d float32 row-major.
"""

from __future__ import annotations

import os
import struct

import numpy as np

from .align import align_sentence

MAGIC = b"JEMB1"
VERSION = 1
POOLINGS = ("first", "mean", "last")


class ModelLoadError(RuntimeError):
    pass


def read_corpus_texts(corpus_dir: str) -> list:
    """(doc_id, sentences) pairs; accepts the txt/ layout or flat .txt files."""
    root = corpus_dir
    txt_dir = os.path.join(corpus_dir, "txt")
    if os.path.isdir(txt_dir):
        root = txt_dir
    docs = []
    for name in sorted(os.listdir(root)):
        if not name.endswith(".txt"):
            continue
        with open(os.path.join(root, name), "r", encoding="utf-8") as f:
            sentences = [tuple(line.split()) for line in f.read().split("\n")[:-1]]
        docs.append((name[: -len(".txt")], sentences))
    if not docs:
        raise FileNotFoundError(f"no .txt documents under {corpus_dir}")
    return docs


def pool_pieces(piece_matrix: np.ndarray, mode: str) -> np.ndarray:
    """Collapse (k, d) piece vectors to one row; computed in float64."""
    if mode not in POOLINGS:
        raise ValueError(f"unknown pooling {mode!r}")
    mat = np.asarray(piece_matrix, dtype=np.float64)
    if mode == "first":
        return mat[0]
    if mode == "last":
        return mat[-1]
    return mat.mean(axis=0)


def load_model(model_id: str):
    try:
        import torch
        from transformers import AutoModel, AutoTokenizer

        tokenizer = AutoTokenizer.from_pretrained(model_id)
        model = AutoModel.from_pretrained(model_id)
    except Exception as exc:
        raise ModelLoadError(f"cannot load {model_id!r}: {exc}") from exc
    model.eval()
    torch.set_num_threads(1)  # keeps re-exports byte-identical
    return tokenizer, model


def encode_document(tokenizer, model, sentences, pooling: str, layer: int) -> list:
    """One pooled (n, d) float64 matrix per non-empty-aware sentence."""
    import torch

    matrices = []
    for tokens in sentences:
        if not tokens:
            matrices.append(np.zeros((0, model.config.hidden_size)))
            continue
        encoding, groups = align_sentence(tokenizer, tokens)
        with torch.no_grad():
            out = model(**encoding, output_hidden_states=True)
        hidden = out.hidden_states[layer][0].numpy()  # (pieces, d)
        rows = [pool_pieces(hidden[group], pooling) for group in groups]
        matrices.append(np.stack(rows))
    return matrices


def write_jemb(path: str, dim: int, docs: dict) -> None:
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
                f.write(struct.pack("<I", mat.shape[0]))
                f.write(np.ascontiguousarray(mat, dtype="<f4").tobytes())


def export(corpus_dir: str, model_id: str, out_path: str,
           pooling: str = "last", layer: int = -1) -> dict:
    """Export the whole corpus; returns {doc_id: sentence count} written."""
    if pooling not in POOLINGS:
        raise ValueError(f"unknown pooling {pooling!r}")
    docs = read_corpus_texts(corpus_dir)
    tokenizer, model = load_model(model_id)
    payload = {}
    for doc_id, sentences in docs:
        payload[doc_id] = encode_document(tokenizer, model, sentences, pooling, layer)
    write_jemb(out_path, model.config.hidden_size, payload)
    return {doc_id: len(sentences) for doc_id, sentences in payload.items()}
