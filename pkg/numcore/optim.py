"""
Adam with bias correction and an inverse-square-root warmup schedule.
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from errors import DimensionError, DomainError
from numcore.functional import check_finite

# Set up logging
logging.basicConfig(level=logging.INFO, format='%(asctime)s - %(name)s - %(levelname)s - %(message)s')
logger = logging.getLogger(__name__)

LR_MODES = ("inverse-sqrt", "fixed")


@dataclass
class OptimizerState:
    """
    Mutable Adam state.

    Attributes:
        peak_lr (float): maximum learning rate (reached at the end of warmup)
        warmup_steps (int): number of linear warmup steps
        mode (str): "inverse-sqrt" or "fixed"
        step (int): number of updates applied so far
        first_moment (list of numpy.ndarray): per-parameter m
        second_moment (list of numpy.ndarray): per-parameter v
    """
    peak_lr: float = 7e-4
    warmup_steps: int = 4000
    mode: str = "inverse-sqrt"
    step: int = 0
    first_moment: list = field(default_factory=list)
    second_moment: list = field(default_factory=list)

    def __post_init__(self):
        if self.mode not in LR_MODES:
            raise DomainError(f"Unknown learning-rate mode {self.mode!r}")
        if self.warmup_steps < 1:
            raise DomainError("warmup_steps must be positive")


def lr_schedule(step, state):
    """
    Learning rate for a 1-based update index.

    inverse-sqrt: peak_lr * min(step / warmup, sqrt(warmup / step))
    fixed: peak_lr

    Raises:
        DomainError: step < 1
    """
    if step < 1:
        raise DomainError(f"Learning-rate schedule is defined for step >= 1, got {step}")
    if state.mode == "fixed":
        return state.peak_lr
    warmup = state.warmup_steps
    return state.peak_lr * min(step / warmup, math.sqrt(warmup / step))


def adam_step(params, grads, state, beta1=0.9, beta2=0.98, eps=1e-9):
    """
    Apply one Adam update in place.

    Args:
        params (list of Tensor): parameters, updated in place
        grads (list of numpy.ndarray or None): gradients aligned with params;
            None is treated as zero
        state (OptimizerState): updated in place
        beta1, beta2, eps (float): Adam constants

    Returns:
        float: learning rate used for this step

    Raises:
        DimensionError: a gradient does not match its parameter
        NumericError: a gradient contains NaN or infinity
    """
    if len(params) != len(grads):
        raise DimensionError(f"{len(params)} parameters but {len(grads)} gradients")
    if not state.first_moment:
        state.first_moment = [np.zeros_like(p.data) for p in params]
        state.second_moment = [np.zeros_like(p.data) for p in params]

    for p, g in zip(params, grads):
        if g is not None and g.shape != p.shape:
            raise DimensionError(f"Gradient shape {g.shape} differs from parameter {p.shape}")
        if g is not None:
            check_finite(g, f"gradient of {p.name or 'parameter'}")

    step = state.step + 1
    lr = lr_schedule(step, state)
    correction1 = 1.0 - beta1 ** step
    correction2 = 1.0 - beta2 ** step

    for p, g, m, v in zip(params, grads, state.first_moment, state.second_moment):
        if g is None:
            g = np.zeros_like(p.data)
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        m_hat = m / correction1
        v_hat = v / correction2
        p.data -= (lr * m_hat / (np.sqrt(v_hat) + eps)).astype(p.data.dtype)

    state.step = step
    return lr
