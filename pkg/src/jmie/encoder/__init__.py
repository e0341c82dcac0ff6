from .vectors import PAD, UNK, EmbeddingTable, EmptyFile, RaggedLine, load_word_vectors
from .jemb import (
    BadMagic,
    MissingEmbeddingEntry,
    PrecomputedEmbeddings,
    TokenCountMismatch,
    load_precomputed,
    write_jemb,
)
from .lstm import BiLstmParams, LstmDirection, bilstm_forward
from .encode import MODES, DimensionMismatch, SentenceEncoder
