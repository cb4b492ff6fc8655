"""
Attention and normalization primitives built on the tensor tape.
"""

import logging
import math

import numpy as np

from errors import DegenerateMaskError, DimensionError, NumericError
from numcore.tensor import Tensor, _result, as_tensor, matmul, softmax, transpose

# Set up logging
logging.basicConfig(level=logging.INFO, format='%(asctime)s - %(name)s - %(levelname)s - %(message)s')
logger = logging.getLogger(__name__)


def scaled_dot_attention(Q, K, V, mask=None):
    """
    softmax(Q K^T / sqrt(d_k)) V over the last two axes.

    Leading axes broadcast, so the same call serves single matrices and
    (batch, heads, length, width) stacks.

    Args:
        Q (Tensor): queries, shape (..., m, d_k)
        K (Tensor): keys, shape (..., n, d_k)
        V (Tensor): values, shape (..., n, d_v)
        mask (array-like of bool, optional): True where query i may attend
            to key j; broadcastable to (..., m, n)

    Returns:
        Tensor: shape (..., m, d_v); each row is a convex combination of V rows

    Raises:
        DimensionError: incompatible shapes
        DegenerateMaskError: some query row admits no key
    """
    Q, K, V = as_tensor(Q), as_tensor(K), as_tensor(V)
    if Q.ndim < 2 or K.ndim < 2 or V.ndim < 2:
        raise DimensionError("Attention operands must be at least 2-D")
    if Q.shape[-1] != K.shape[-1]:
        raise DimensionError(f"Query width {Q.shape[-1]} differs from key width {K.shape[-1]}")
    if K.shape[-2] != V.shape[-2]:
        raise DimensionError(f"{K.shape[-2]} keys but {V.shape[-2]} values")

    d_k = Q.shape[-1]
    scores = matmul(Q, transpose(K, _swap_last(K.ndim))) * (1.0 / math.sqrt(d_k))

    if mask is not None:
        mask = np.asarray(mask, dtype=bool)
        try:
            np.broadcast_shapes(mask.shape, scores.shape)
        except ValueError as exc:
            raise DimensionError(f"Mask shape {mask.shape} does not fit scores {scores.shape}") from exc
        if mask.ndim == 0 or mask.shape[-1] != scores.shape[-1]:
            raise DimensionError(f"Mask must span all {scores.shape[-1]} keys")
        if (~mask).all(axis=-1).any():
            raise DegenerateMaskError("Attention mask has a query row with no admissible key")
        scores = scores + np.where(mask, 0.0, -np.inf).astype(scores.data.dtype)

    weights = softmax(scores, axis=-1)
    return matmul(weights, V)


def _swap_last(ndim):
    axes = list(range(ndim))
    axes[-1], axes[-2] = axes[-2], axes[-1]
    return tuple(axes)


def layer_norm(x, gain, bias, eps=1e-6):
    """
    Normalize the last axis to zero mean and unit variance, then scale and shift.

    Args:
        x (Tensor): input of shape (..., d)
        gain (Tensor): shape (d,)
        bias (Tensor): shape (d,)
        eps (float): variance floor added before the square root

    Returns:
        Tensor: same shape as x
    """
    x, gain, bias = as_tensor(x), as_tensor(gain), as_tensor(bias)
    if x.ndim == 0 or x.shape[-1] == 0:
        raise DimensionError("layer_norm needs a non-empty last axis")
    if gain.shape != (x.shape[-1],) or bias.shape != (x.shape[-1],):
        raise DimensionError(f"gain/bias must have shape ({x.shape[-1]},)")
    if eps < 0:
        raise NumericError(f"eps must be non-negative, got {eps}")

    width = x.shape[-1]
    centered = x.data - x.data.mean(axis=-1, keepdims=True)
    variance = (centered * centered).mean(axis=-1, keepdims=True)
    if np.any(variance + eps <= 0):
        raise NumericError("layer_norm on a constant row with eps = 0")
    inv_std = 1.0 / np.sqrt(variance + eps)
    normalized = centered * inv_std
    out = normalized * gain.data + bias.data

    def backward(g):
        grad_norm = g * gain.data
        grad_x = (inv_std / width) * (
            width * grad_norm
            - grad_norm.sum(axis=-1, keepdims=True)
            - normalized * (grad_norm * normalized).sum(axis=-1, keepdims=True)
        )
        reduce_axes = tuple(range(x.ndim - 1))
        grad_gain = (g * normalized).sum(axis=reduce_axes)
        grad_bias = g.sum(axis=reduce_axes)
        return grad_x, grad_gain, grad_bias

    return _result(out, (x, gain, bias), backward)


def nll_loss(log_probs, targets, weights, label_smoothing=0.0):
    """
    Summed negative log-likelihood of integer targets.

    Args:
        log_probs (Tensor): shape (..., V), log-normalized
        targets (array-like of int): shape (...)
        weights (array-like of float): shape (...), 0 drops a position
        label_smoothing (float): mass spread uniformly over the vocabulary

    Returns:
        Tensor: scalar, sum over positions of weight * loss
    """
    targets = np.asarray(targets, dtype=np.int64)
    weights = np.asarray(weights, dtype=log_probs.data.dtype)
    vocab = log_probs.shape[-1]
    one_hot = np.zeros(log_probs.shape, dtype=log_probs.data.dtype)
    np.put_along_axis(one_hot, targets[..., None], 1.0, axis=-1)
    target_dist = (1.0 - label_smoothing) * one_hot + label_smoothing / vocab
    per_position = -(log_probs * target_dist).sum(axis=-1)
    return (per_position * weights).sum()


def check_finite(tensor, what="tensor"):
    data = tensor.data if isinstance(tensor, Tensor) else np.asarray(tensor)
    if not np.all(np.isfinite(data)):
        raise NumericError(f"Non-finite values in {what}")
    return tensor
