"""Sentence encoders: trainable embeddings+BiLSTM, precomputed vectors, or both."""

from __future__ import annotations

from .. import autodiff as ad
from .jemb import PrecomputedEmbeddings
from .lstm import BiLstmParams, bilstm_forward
from .vectors import EmbeddingTable

MODES = ("trainable_lstm", "precomputed", "precomputed+lstm")


class DimensionMismatch(ValueError):
    pass


class SentenceEncoder:
    """Produces the (n, D) contextual matrix consumed by all three decoders.

    Modes:
      trainable_lstm    embedding table (trainable) -> BiLSTM, D = 2h
      precomputed       file matrix passed through unchanged, D = file dim
      precomputed+lstm  frozen file matrix -> trainable BiLSTM, D = 2h
    """

    def __init__(
        self,
        mode: str,
        table: EmbeddingTable | None = None,
        lstm: BiLstmParams | None = None,
        precomputed: PrecomputedEmbeddings | None = None,
        dropout: float = 0.1,
        freeze_embeddings: bool = False,
    ):
        if mode not in MODES:
            raise ValueError(f"unknown encoder mode {mode!r}")
        self.mode = mode
        self.table = table
        self.lstm = lstm
        self.precomputed = precomputed
        self.dropout = dropout
        self.freeze_embeddings = freeze_embeddings
        if mode == "trainable_lstm":
            if table is None or lstm is None:
                raise ValueError("trainable_lstm needs an embedding table and LSTM params")
            if lstm.input_dim != table.dim:
                raise DimensionMismatch(f"lstm input {lstm.input_dim} != table dim {table.dim}")
        elif mode == "precomputed":
            if precomputed is None:
                raise ValueError("precomputed mode needs an embedding file")
        else:
            if precomputed is None or lstm is None:
                raise ValueError("precomputed+lstm needs an embedding file and LSTM params")
            if lstm.input_dim != precomputed.dim:
                raise DimensionMismatch(
                    f"lstm input {lstm.input_dim} != file dim {precomputed.dim}"
                )

    @property
    def output_dim(self) -> int:
        if self.mode == "precomputed":
            return self.precomputed.dim
        return self.lstm.output_dim

    def named_params(self) -> dict:
        params = {}
        if self.mode == "trainable_lstm" and not self.freeze_embeddings:
            params["embeddings"] = self.table.matrix
        if self.lstm is not None:
            params.update(self.lstm.named_params())
        return params

    def encode(
        self,
        tokens,
        doc_id: str | None = None,
        sent_index: int | None = None,
        train: bool = False,
        dropout_key: tuple = (0, 0, 0),
    ) -> ad.Tensor:
        """Encode one sentence; row i represents token i."""
        n = len(tokens)
        if n == 0:
            raise ValueError("cannot encode an empty sentence")
        if self.mode == "trainable_lstm":
            ids = self.table.lookup_ids(tokens)
            inputs = ad.embedding_lookup(self.table.matrix, ids)
            x = bilstm_forward(inputs, self.lstm)
        else:
            mat = self.precomputed.get(doc_id, sent_index, expected_len=n)
            inputs = ad.constant(mat)
            x = inputs if self.mode == "precomputed" else bilstm_forward(inputs, self.lstm)
        return ad.dropout(x, self.dropout, train=train, key=dropout_key)
