"""
Numeric core: tensors with a gradient tape, attention, layer normalization
and the Adam optimizer.
"""

from numcore.tensor import (
    Tensor, backward, concat, embedding, dropout, exp, get_default_dtype, log,
    log_softmax, matmul, no_grad, parameter, precision, relu, set_default_dtype,
    softmax,
)
from numcore.functional import check_finite, layer_norm, nll_loss, scaled_dot_attention
from numcore.optim import OptimizerState, adam_step, lr_schedule
