"""
Dense tensors with a reverse-mode gradient tape.

Every operation that touches a tensor requiring gradients records its parents
and a closure mapping the output gradient to parent gradients. `backward`
walks that record in reverse topological order.

Gradient policy: `backward` ADDS into the `.grad` of leaf tensors. Calling it
twice without `zero_grad` re-accumulates; this is the fixed policy.
"""

import logging
from contextlib import contextmanager

import numpy as np

from errors import DimensionError, NumericError, TapeError

# Set up logging
logging.basicConfig(level=logging.INFO, format='%(asctime)s - %(name)s - %(levelname)s - %(message)s')
logger = logging.getLogger(__name__)

_DEFAULT_DTYPE = np.float64
_GRAD_ENABLED = True


def set_default_dtype(dtype):
    """
    Select the floating point precision for newly created tensors.

    Args:
        dtype: numpy.float64 (tests, gradient checks) or numpy.float32 (training)
    """
    global _DEFAULT_DTYPE
    dtype = np.dtype(dtype).type
    if dtype not in (np.float32, np.float64):
        raise ValueError(f"Unsupported dtype {dtype}")
    _DEFAULT_DTYPE = dtype
    logger.debug(f"Default tensor dtype set to {np.dtype(dtype).name}")


def get_default_dtype():
    return _DEFAULT_DTYPE


@contextmanager
def precision(dtype):
    """Temporarily switch the default dtype."""
    previous = _DEFAULT_DTYPE
    set_default_dtype(dtype)
    try:
        yield
    finally:
        set_default_dtype(previous)


@contextmanager
def no_grad():
    """Run operations without recording them on the tape."""
    global _GRAD_ENABLED
    previous = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = previous


def _unbroadcast(grad, shape):
    # Sum out the axes numpy broadcasting added or stretched.
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, extent in enumerate(shape):
        if extent == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


class Tensor:
    """
    A dense array of real values that can take part in differentiation.

    Attributes:
        data (numpy.ndarray): stored values
        requires_grad (bool): whether gradients flow to this tensor
        grad (numpy.ndarray or None): accumulated gradient of a leaf tensor
        name (str or None): parameter name, for diagnostics
    """

    __slots__ = ("data", "requires_grad", "grad", "name", "_parents", "_backward")

    def __init__(self, data, requires_grad=False, name=None):
        if isinstance(data, Tensor):
            data = data.data
        array = np.asarray(data)
        if array.dtype.kind != "f" or array.dtype.type != _DEFAULT_DTYPE:
            array = array.astype(_DEFAULT_DTYPE)
        self.data = array
        self.requires_grad = bool(requires_grad)
        self.grad = None
        self.name = name
        self._parents = ()
        self._backward = None

    # ----- bookkeeping -----

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    def numpy(self):
        return self.data

    def item(self):
        if self.data.size != 1:
            raise DimensionError(f"item() needs a single value, tensor has shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def zero_grad(self):
        self.grad = None

    def detach(self):
        return Tensor(self.data.copy())

    def __repr__(self):
        label = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}{label}, requires_grad={self.requires_grad})"

    # ----- operator sugar -----

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(as_tensor(other), self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, other)

    def __neg__(self):
        return neg(self)

    def __pow__(self, exponent):
        return power(self, exponent)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, index):
        return getitem(self, index)

    def sum(self, axis=None, keepdims=False):
        return tensor_sum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        return mean(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, *axes):
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        return transpose(self, axes or None)


def as_tensor(value):
    return value if isinstance(value, Tensor) else Tensor(value)


def _result(data, parents, backward):
    """Wrap an op result and record it on the tape when needed."""
    out = Tensor(data)
    if _GRAD_ENABLED and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = parents
        out._backward = backward
    return out


# ----- elementwise arithmetic -----

def add(a, b):
    a, b = as_tensor(a), as_tensor(b)

    def backward(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return _result(a.data + b.data, (a, b), backward)


def sub(a, b):
    a, b = as_tensor(a), as_tensor(b)

    def backward(g):
        return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)

    return _result(a.data - b.data, (a, b), backward)


def mul(a, b):
    a, b = as_tensor(a), as_tensor(b)

    def backward(g):
        return _unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)

    return _result(a.data * b.data, (a, b), backward)


def div(a, b):
    a, b = as_tensor(a), as_tensor(b)

    def backward(g):
        grad_a = _unbroadcast(g / b.data, a.shape)
        grad_b = _unbroadcast(-g * a.data / (b.data * b.data), b.shape)
        return grad_a, grad_b

    return _result(a.data / b.data, (a, b), backward)


def neg(a):
    def backward(g):
        return (-g,)

    return _result(-a.data, (a,), backward)


def power(a, exponent):
    exponent = float(exponent)

    def backward(g):
        return (g * exponent * np.power(a.data, exponent - 1.0),)

    return _result(np.power(a.data, exponent), (a,), backward)


def exp(a):
    out_data = np.exp(a.data)

    def backward(g):
        return (g * out_data,)

    return _result(out_data, (a,), backward)


def log(a):
    def backward(g):
        return (g / a.data,)

    return _result(np.log(a.data), (a,), backward)


def relu(a):
    active = a.data > 0

    def backward(g):
        return (g * active,)

    return _result(np.where(active, a.data, 0.0).astype(a.data.dtype), (a,), backward)


# ----- reductions and shape plumbing -----

def tensor_sum(a, axis=None, keepdims=False):
    def backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, a.shape).copy(),)

    return _result(a.data.sum(axis=axis, keepdims=keepdims), (a,), backward)


def mean(a, axis=None, keepdims=False):
    count = a.data.size if axis is None else np.prod([a.shape[i] for i in np.atleast_1d(axis)])
    return tensor_sum(a, axis=axis, keepdims=keepdims) * (1.0 / float(count))


def reshape(a, shape):
    def backward(g):
        return (g.reshape(a.shape),)

    return _result(a.data.reshape(shape), (a,), backward)


def transpose(a, axes=None):
    inverse = None if axes is None else tuple(np.argsort(axes))

    def backward(g):
        return (np.transpose(g, inverse),)

    return _result(np.transpose(a.data, axes), (a,), backward)


def getitem(a, index):
    def backward(g):
        full = np.zeros_like(a.data)
        np.add.at(full, index, g)
        return (full,)

    return _result(a.data[index], (a,), backward)


def concat(tensors, axis=0):
    tensors = [as_tensor(t) for t in tensors]
    sizes = [t.shape[axis] for t in tensors]
    cuts = np.cumsum(sizes)[:-1]

    def backward(g):
        return tuple(np.split(g, cuts, axis=axis))

    return _result(np.concatenate([t.data for t in tensors], axis=axis), tuple(tensors), backward)


def matmul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2:
        raise DimensionError(f"matmul needs at least 2-D operands, got {a.shape} and {b.shape}")
    if a.shape[-1] != b.shape[-2]:
        raise DimensionError(f"matmul shape mismatch: {a.shape} @ {b.shape}")

    def backward(g):
        grad_a = np.matmul(g, np.swapaxes(b.data, -1, -2))
        grad_b = np.matmul(np.swapaxes(a.data, -1, -2), g)
        return _unbroadcast(grad_a, a.shape), _unbroadcast(grad_b, b.shape)

    return _result(np.matmul(a.data, b.data), (a, b), backward)


def embedding(weight, ids):
    """
    Gather rows of `weight` for integer ids of any shape.

    Args:
        weight (Tensor): matrix of shape (vocab, width)
        ids (array-like of int): row indices

    Returns:
        Tensor: shape ids.shape + (width,)
    """
    ids = np.asarray(ids, dtype=np.int64)
    if ids.size and (ids.min() < 0 or ids.max() >= weight.shape[0]):
        raise DimensionError(f"Embedding ids out of range for vocabulary of {weight.shape[0]}")

    def backward(g):
        full = np.zeros_like(weight.data)
        np.add.at(full, ids.reshape(-1), g.reshape(-1, weight.shape[1]))
        return (full,)

    return _result(weight.data[ids], (weight,), backward)


def dropout(a, rate, rng, training=True):
    if not training or rate <= 0.0:
        return a
    keep = (rng.random(a.shape) >= rate) / (1.0 - rate)
    keep = keep.astype(a.data.dtype)

    def backward(g):
        return (g * keep,)

    return _result(a.data * keep, (a,), backward)


# ----- softmax family -----

def softmax(a, axis=-1):
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out_data = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        inner = (g * out_data).sum(axis=axis, keepdims=True)
        return (out_data * (g - inner),)

    return _result(out_data, (a,), backward)


def log_softmax(a, axis=-1):
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=axis, keepdims=True))
    out_data = shifted - log_norm

    def backward(g):
        probs = np.exp(out_data)
        return (g - probs * g.sum(axis=axis, keepdims=True),)

    return _result(out_data, (a,), backward)


# ----- the tape -----

def _topological_order(root):
    order = []
    state = {}
    stack = [(root, False)]
    while stack:
        node, finished = stack.pop()
        key = id(node)
        if finished:
            state[key] = 2
            order.append(node)
            continue
        seen = state.get(key)
        if seen == 2:
            continue
        if seen == 1:
            raise TapeError("Cycle detected in the gradient tape")
        state[key] = 1
        stack.append((node, True))
        for parent in node._parents:
            if parent.requires_grad and state.get(id(parent)) != 2:
                stack.append((parent, False))
    return order


def backward(loss):
    """
    Populate `.grad` on every leaf tensor the scalar `loss` depends on.

    Args:
        loss (Tensor): single-valued tensor produced by recorded operations

    Raises:
        TapeError: loss is not scalar, not differentiable, or the tape has a cycle
        NumericError: a gradient came out non-finite
    """
    if loss.size != 1:
        raise TapeError(f"backward() needs a scalar loss, got shape {loss.shape}")
    if not loss.requires_grad:
        raise TapeError("Loss does not depend on any tensor that requires gradients")

    order = _topological_order(loss)
    grads = {id(loss): np.ones_like(loss.data)}
    for node in reversed(order):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        if node._backward is None:
            if not np.all(np.isfinite(g)):
                raise NumericError(f"Non-finite gradient for {node!r}")
            node.grad = g.copy() if node.grad is None else node.grad + g
            continue
        for parent, parent_grad in zip(node._parents, node._backward(g)):
            if parent_grad is None or not parent.requires_grad:
                continue
            key = id(parent)
            grads[key] = grads[key] + parent_grad if key in grads else parent_grad


def parameter(data, name=None):
    """Create a leaf tensor that requires gradients."""
    return Tensor(data, requires_grad=True, name=name)
