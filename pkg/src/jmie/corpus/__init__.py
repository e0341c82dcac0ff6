from .types import (
    ASSERTION_LABELS,
    BIO_TAGS,
    CONCEPT_TYPES,
    NOLINK,
    RELATION_CATEGORIES,
    RELATION_LABELS,
    TAG_TO_ID,
    AnnotatedDocument,
    AnnotationError,
    AssertionLabel,
    ConceptSpan,
    IndexOutOfRange,
    OverlappingSpans,
    RelationTriple,
    Token,
    corpus_stats,
)
from .bio import bio_to_spans, spans_to_bio
from .annotations import (
    ConceptTextMismatch,
    DanglingAnnotation,
    MalformedLine,
    ParseError,
    load_corpus_dir,
    load_document,
    parse_document,
    save_corpus_dir,
    serialize_document,
)
from .splits import TooFewDocuments, split_train_dev
from .synth import (
    InvalidSpec,
    RelationTemplate,
    SynthSpec,
    generate_synthetic_corpus,
    inject_concept_noise,
)
