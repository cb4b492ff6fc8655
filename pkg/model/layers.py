"""
Transformer building blocks on top of numcore.

Parameters live in a flat dict of named tensors; each block function takes
that dict and the block's name prefix.
"""

import logging
import math

import numpy as np

from numcore import (
    Tensor, dropout, layer_norm, matmul, parameter, relu, scaled_dot_attention,
)

# Set up logging
logging.basicConfig(level=logging.INFO, format='%(asctime)s - %(name)s - %(levelname)s - %(message)s')
logger = logging.getLogger(__name__)


# ----- initializers -----

def xavier(rng, fan_in, fan_out):
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


def attention_params(rng, d_model, prefix):
    return {
        f"{prefix}.{name}": parameter(xavier(rng, d_model, d_model), name=f"{prefix}.{name}")
        for name in ("wq", "wk", "wv", "wo")
    }


def norm_params(d_model, prefix):
    return {
        f"{prefix}.g": parameter(np.ones(d_model), name=f"{prefix}.g"),
        f"{prefix}.b": parameter(np.zeros(d_model), name=f"{prefix}.b"),
    }


def ffn_params(rng, d_model, d_ff, prefix):
    return {
        f"{prefix}.w1": parameter(xavier(rng, d_model, d_ff), name=f"{prefix}.w1"),
        f"{prefix}.b1": parameter(np.zeros(d_ff), name=f"{prefix}.b1"),
        f"{prefix}.w2": parameter(xavier(rng, d_ff, d_model), name=f"{prefix}.w2"),
        f"{prefix}.b2": parameter(np.zeros(d_model), name=f"{prefix}.b2"),
    }


def embedding_params(rng, vocab_size, d_model, name):
    return {name: parameter(rng.normal(0.0, d_model ** -0.5, size=(vocab_size, d_model)), name=name)}


def sinusoidal_positions(length, d_model):
    """Fixed sine/cosine position table of shape (length, d_model)."""
    positions = np.arange(length)[:, None]
    rates = np.exp(-math.log(10000.0) * (np.arange(0, d_model, 2) / d_model))
    table = np.zeros((length, d_model))
    table[:, 0::2] = np.sin(positions * rates)
    table[:, 1::2] = np.cos(positions * rates[: d_model // 2])
    return table


# ----- masks -----

def causal_mask(length):
    return np.tril(np.ones((length, length), dtype=bool))


def attention_mask(key_mask, query_length, causal):
    """
    Combine a key-validity mask with an optional causal pattern.

    Args:
        key_mask (numpy.ndarray): (batch, keys) True for real tokens
        query_length (int): number of queries
        causal (bool): restrict query i to keys j <= i

    Returns:
        numpy.ndarray: (batch, 1, queries, keys) boolean mask
    """
    mask = key_mask[:, None, None, :]
    if causal:
        return mask & causal_mask(query_length)[None, None, :, :]
    return np.broadcast_to(mask, (key_mask.shape[0], 1, query_length, key_mask.shape[1]))


# ----- sublayers -----

def normalize(params, prefix, x, eps):
    return layer_norm(x, params[f"{prefix}.g"], params[f"{prefix}.b"], eps)


def multi_head_attention(params, prefix, query, memory, mask, heads):
    """
    Multi-head scaled dot-product attention without projection biases.

    Args:
        params (dict): parameter tensors
        prefix (str): block name prefix
        query (Tensor): (batch, Lq, d_model)
        memory (Tensor): (batch or 1, Lk, d_model)
        mask (numpy.ndarray): (batch or 1, 1, Lq, Lk)
        heads (int): number of heads

    Returns:
        Tensor: (batch, Lq, d_model)
    """
    batch, q_len, width = query.shape
    mem_batch, k_len, _ = memory.shape
    head_width = width // heads

    q = matmul(query, params[f"{prefix}.wq"]).reshape(batch, q_len, heads, head_width).transpose(0, 2, 1, 3)
    k = matmul(memory, params[f"{prefix}.wk"]).reshape(mem_batch, k_len, heads, head_width).transpose(0, 2, 1, 3)
    v = matmul(memory, params[f"{prefix}.wv"]).reshape(mem_batch, k_len, heads, head_width).transpose(0, 2, 1, 3)

    context = scaled_dot_attention(q, k, v, mask)
    context = context.transpose(0, 2, 1, 3).reshape(batch, q_len, width)
    return matmul(context, params[f"{prefix}.wo"])


def feed_forward(params, prefix, x):
    hidden = relu(matmul(x, params[f"{prefix}.w1"]) + params[f"{prefix}.b1"])
    return matmul(hidden, params[f"{prefix}.w2"]) + params[f"{prefix}.b2"]


def residual(x, branch, rate, rng, training):
    return x + dropout(branch, rate, rng, training)


def constant(array):
    return Tensor(array)
