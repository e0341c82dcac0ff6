from .align import TokenizerAlignmentFailure, align_sentence, alignment_from_word_ids
from .export import (
    POOLINGS,
    ModelLoadError,
    encode_document,
    export,
    pool_pieces,
    read_corpus_texts,
    write_jemb,
)
