from .crf import (
    CrfParams,
    LengthMismatch,
    bio_constraints,
    crf_log_partition,
    crf_nll,
    crf_sequence_score,
    emissions,
    log_partition_from_emissions,
    sequence_score_from_emissions,
    viterbi_decode,
    viterbi_from_emissions,
)
from .assertion import AssertionParams, HeadOutOfRange, assertion_logits, assertion_loss
from .relation import (
    NOLINK_ID,
    RELATION_VOCAB,
    REL_MODES,
    FeatureDimMismatch,
    RelationParams,
    admissible_mask,
    decode_relations,
    pair_scores,
    relation_features,
    relation_loss_sigmoid,
    relation_loss_softmax,
)
from .joint import (
    ASSERTION_TO_ID,
    ASSERTION_VOCAB,
    NONE_ASSERTION_ID,
    RELATION_TO_ID,
    JointLoss,
    JointModel,
    SentenceExample,
    prepare_examples,
)
