from .tensor import (
    NonFiniteValue,
    NonScalarLoss,
    ShapeMismatch,
    Tape,
    Tensor,
    active_tape,
    backward,
    constant,
    debug_checks_enabled,
    parameter,
    set_debug_checks,
)
from .ops import (
    add,
    bce_with_logits,
    concat,
    cross_entropy,
    dropout,
    embedding_lookup,
    flip,
    log_softmax,
    logsumexp,
    matmul,
    mean,
    mul,
    narrow,
    reshape,
    scale,
    sigmoid,
    softmax,
    sub,
    tanh,
    transpose,
    tsum,
)
from .optim import AdamW, NonFiniteGradient, adamw_step
from .checkpoint import BadCheckpoint, load_checkpoint, save_checkpoint
