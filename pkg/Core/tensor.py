# ============================================================================
# tensor.py - Dense float64 tensors with tape-based reverse-mode autodiff
#
# Every differentiable computation in LosaTAL goes through the Function
# subclasses below. An op is recorded on the active Tape only when a tape is
# active and at least one input requires grad, so a forward pass whose inputs
# are all frozen leaves the tape empty. Tape.node_count is the memory-audit
# unit used by the training audit and the memory report.
# ============================================================================

from __future__ import annotations

import math
import threading
from contextlib import contextmanager

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from Core.errors import ContractError, DimensionError

DTYPE = np.float64


class Tensor:
    def __init__(self, data, requires_grad=False):
        self.data = np.asarray(data, dtype=DTYPE)
        if any(extent < 1 for extent in self.data.shape):
            raise DimensionError(f"Tensor extents must be positive, got shape {self.data.shape}")
        self.requires_grad = bool(requires_grad)
        self.grad = None
        self.node_id = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    def item(self):
        return float(self.data.reshape(-1)[0])

    def numpy(self):
        return self.data

    def detach(self):
        return Tensor(self.data, requires_grad=False)

    def __repr__(self):
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}{flag})"

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return scale(self, other)
        return mul(self, other)

    def __rmul__(self, other):
        return self.__mul__(other)

    def __truediv__(self, other):
        if isinstance(other, (int, float)):
            return scale(self, 1.0 / other)
        return div(self, other)

    def __neg__(self):
        return scale(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)


def as_tensor(value):
    if isinstance(value, Tensor):
        return value
    return Tensor(value, requires_grad=False)


def parameter(data):
    return Tensor(np.array(data, dtype=DTYPE), requires_grad=True)


# ----------------------------------------------------------------------------
# Tape
# ----------------------------------------------------------------------------

class TapeNode:
    __slots__ = ("node_id", "fn", "inputs", "output")

    def __init__(self, node_id, fn, inputs, output):
        self.node_id = node_id
        self.fn = fn
        self.inputs = inputs
        self.output = output

    @property
    def op(self):
        return self.fn.name

    @property
    def input_ids(self):
        return tuple(t.node_id for t in self.inputs)


class Tape:
    # Ordered record of differentiable ops for one forward pass. Nodes are
    # appended as ops execute, so inputs always precede the nodes using them.
    def __init__(self):
        self.nodes = []

    @property
    def node_count(self):
        return len(self.nodes)

    @property
    def activation_floats(self):
        return int(sum(node.output.size for node in self.nodes))

    def count_by_op(self):
        counts = {}
        for node in self.nodes:
            counts[node.op] = counts.get(node.op, 0) + 1
        return counts

    def owns(self, tensor):
        nid = tensor.node_id
        return nid is not None and nid < len(self.nodes) and self.nodes[nid].output is tensor

    def record(self, fn, inputs, output):
        output.node_id = len(self.nodes)
        self.nodes.append(TapeNode(output.node_id, fn, inputs, output))

    def __enter__(self):
        _tape_stack().append(self)
        return self

    def __exit__(self, exc_type, exc, tb):
        _tape_stack().pop()
        return False


_local = threading.local()


def _tape_stack():
    stack = getattr(_local, "stack", None)
    if stack is None:
        stack = _local.stack = []
    return stack


def active_tape():
    stack = _tape_stack()
    return stack[-1] if stack else None


@contextmanager
def no_recording():
    # Ops inside this block never reach a tape, whatever their inputs require.
    stack = _tape_stack()
    stack.append(None)
    try:
        yield
    finally:
        stack.pop()


def backward(loss, tape):
    if loss.size != 1:
        raise ContractError(f"backward needs a scalar loss, got shape {loss.shape}")
    if not tape.owns(loss):
        raise ContractError("loss is not an output of the given tape")

    pending = {loss.node_id: np.ones_like(loss.data)}
    for node in reversed(tape.nodes[: loss.node_id + 1]):
        grad = pending.pop(node.node_id, None)
        if grad is None:
            continue
        _accumulate(node.output, grad)
        input_grads = node.fn.backward(grad)
        for inp, g in zip(node.inputs, input_grads):
            if g is None or not inp.requires_grad:
                continue
            if tape.owns(inp):
                prev = pending.get(inp.node_id)
                pending[inp.node_id] = g if prev is None else prev + g
            else:
                _accumulate(inp, g)

    # Tensors on the tape that the loss never reached still get a (zero) buffer.
    for node in tape.nodes:
        for t in node.inputs + (node.output,):
            if t.requires_grad and t.grad is None:
                t.grad = np.zeros_like(t.data)


def _accumulate(tensor, grad):
    grad = np.asarray(grad, dtype=DTYPE).reshape(tensor.shape)
    tensor.grad = grad.copy() if tensor.grad is None else tensor.grad + grad


def zero_grad(tensors):
    for t in tensors:
        t.grad = None


# ----------------------------------------------------------------------------
# Function base
# ----------------------------------------------------------------------------

class Function:
    name = "function"

    def __init__(self, **params):
        self.params = params
        self.saved = ()

    def forward(self, *arrays):
        raise NotImplementedError

    def backward(self, grad):
        raise NotImplementedError

    @classmethod
    def apply(cls, *inputs, **params):
        tensors = tuple(as_tensor(x) for x in inputs)
        fn = cls(**params)
        out = Tensor(fn.forward(*(t.data for t in tensors)))
        tape = active_tape()
        if tape is not None and any(t.requires_grad for t in tensors):
            out.requires_grad = True
            tape.record(fn, tensors, out)
        return out


def _unbroadcast(grad, shape):
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, extent in enumerate(shape):
        if extent == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad.reshape(shape)


def _check_broadcast(a, b, op):
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise DimensionError(f"{op}: shapes {a.shape} and {b.shape} do not broadcast") from None


# ----------------------------------------------------------------------------
# Elementwise
# ----------------------------------------------------------------------------

class Add(Function):
    name = "add"

    def forward(self, a, b):
        _check_broadcast(a, b, self.name)
        self.saved = (a.shape, b.shape)
        return a + b

    def backward(self, grad):
        sa, sb = self.saved
        return _unbroadcast(grad, sa), _unbroadcast(grad, sb)


class Sub(Function):
    name = "sub"

    def forward(self, a, b):
        _check_broadcast(a, b, self.name)
        self.saved = (a.shape, b.shape)
        return a - b

    def backward(self, grad):
        sa, sb = self.saved
        return _unbroadcast(grad, sa), _unbroadcast(-grad, sb)


class Mul(Function):
    name = "mul"

    def forward(self, a, b):
        _check_broadcast(a, b, self.name)
        self.saved = (a, b)
        return a * b

    def backward(self, grad):
        a, b = self.saved
        return _unbroadcast(grad * b, a.shape), _unbroadcast(grad * a, b.shape)


class Div(Function):
    name = "div"

    def forward(self, a, b):
        _check_broadcast(a, b, self.name)
        self.saved = (a, b)
        return a / b

    def backward(self, grad):
        a, b = self.saved
        return _unbroadcast(grad / b, a.shape), _unbroadcast(-grad * a / (b * b), b.shape)


class Scale(Function):
    name = "scale"

    def forward(self, x):
        return x * self.params["factor"]

    def backward(self, grad):
        return (grad * self.params["factor"],)


class Minimum(Function):
    name = "minimum"

    def forward(self, a, b):
        _check_broadcast(a, b, self.name)
        self.saved = (a, b)
        return np.minimum(a, b)

    def backward(self, grad):
        a, b = self.saved
        take_a = a <= b
        return _unbroadcast(grad * take_a, a.shape), _unbroadcast(grad * ~take_a, b.shape)


class Sigmoid(Function):
    name = "sigmoid"

    def forward(self, x):
        y = _sigmoid(x)
        self.saved = (y,)
        return y

    def backward(self, grad):
        (y,) = self.saved
        return (grad * y * (1.0 - y),)


class Softplus(Function):
    name = "softplus"

    def forward(self, x):
        self.saved = (x,)
        return np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))

    def backward(self, grad):
        (x,) = self.saved
        return (grad * _sigmoid(x),)


_GELU_C = math.sqrt(2.0 / math.pi)


class GELU(Function):
    # tanh approximation; smooth everywhere, which keeps finite differences clean
    name = "gelu"

    def forward(self, x):
        inner = _GELU_C * (x + 0.044715 * x ** 3)
        t = np.tanh(inner)
        self.saved = (x, t)
        return 0.5 * x * (1.0 + t)

    def backward(self, grad):
        x, t = self.saved
        d_inner = _GELU_C * (1.0 + 3 * 0.044715 * x ** 2)
        return (grad * (0.5 * (1.0 + t) + 0.5 * x * (1.0 - t ** 2) * d_inner),)


class BCEWithLogits(Function):
    # Elementwise sigmoid cross-entropy; targets are constants and get no grad.
    name = "bce_with_logits"

    def forward(self, logits, targets):
        if logits.shape != targets.shape:
            raise DimensionError(f"bce_with_logits: logits {logits.shape} vs targets {targets.shape}")
        self.saved = (logits, targets)
        return np.maximum(logits, 0.0) - logits * targets + np.log1p(np.exp(-np.abs(logits)))

    def backward(self, grad):
        logits, targets = self.saved
        return grad * (_sigmoid(logits) - targets), None


def _sigmoid(x):
    return np.exp(-np.logaddexp(0.0, -x))


# ----------------------------------------------------------------------------
# Shape ops
# ----------------------------------------------------------------------------

class Reshape(Function):
    name = "reshape"

    def forward(self, x):
        shape = tuple(self.params["shape"])
        if int(np.prod(shape)) != x.size:
            raise DimensionError(f"reshape: cannot view {x.shape} as {shape}")
        self.saved = (x.shape,)
        return x.reshape(shape)

    def backward(self, grad):
        return (grad.reshape(self.saved[0]),)


class Transpose(Function):
    name = "transpose"

    def forward(self, x):
        axes = tuple(self.params["axes"])
        if sorted(axes) != list(range(x.ndim)):
            raise DimensionError(f"transpose: axes {axes} invalid for shape {x.shape}")
        return np.transpose(x, axes)

    def backward(self, grad):
        return (np.transpose(grad, np.argsort(self.params["axes"])),)


class Concat(Function):
    name = "concat"

    def forward(self, *xs):
        axis = self.params["axis"]
        ref = xs[0].shape
        for x in xs[1:]:
            if x.ndim != len(ref) or any(x.shape[d] != ref[d] for d in range(len(ref)) if d != axis % len(ref)):
                raise DimensionError(f"concat: shapes {ref} and {x.shape} differ off axis {axis}")
        self.saved = ([x.shape[axis] for x in xs],)
        return np.concatenate(xs, axis=axis)

    def backward(self, grad):
        sizes = self.saved[0]
        edges = np.cumsum(sizes)[:-1]
        return tuple(np.split(grad, edges, axis=self.params["axis"]))


class SliceAxis(Function):
    name = "slice"

    def forward(self, x):
        axis, start, stop = self.params["axis"], self.params["start"], self.params["stop"]
        if not 0 <= start < stop <= x.shape[axis]:
            raise DimensionError(f"slice: [{start}, {stop}) out of range for axis {axis} of {x.shape}")
        self.saved = (x.shape,)
        index = [slice(None)] * x.ndim
        index[axis] = slice(start, stop)
        self.params["index"] = tuple(index)
        return x[self.params["index"]]

    def backward(self, grad):
        out = np.zeros(self.saved[0], dtype=DTYPE)
        out[self.params["index"]] = grad
        return (out,)


class IndexRows(Function):
    name = "index_rows"

    def forward(self, x):
        rows = np.asarray(self.params["rows"], dtype=np.int64)
        if rows.size and (rows.min() < 0 or rows.max() >= x.shape[0]):
            raise DimensionError(f"index_rows: rows out of range for shape {x.shape}")
        self.saved = (x.shape, rows)
        return x[rows]

    def backward(self, grad):
        shape, rows = self.saved
        out = np.zeros(shape, dtype=DTYPE)
        np.add.at(out, rows, grad)
        return (out,)


# ----------------------------------------------------------------------------
# Reductions
# ----------------------------------------------------------------------------

class Sum(Function):
    name = "sum"

    def forward(self, x):
        axis, keepdims = self.params.get("axis"), self.params.get("keepdims", False)
        self.saved = (x.shape,)
        return np.asarray(np.sum(x, axis=axis, keepdims=keepdims))

    def backward(self, grad):
        (shape,) = self.saved
        return (_expand_reduced(grad, shape, self.params.get("axis"), self.params.get("keepdims", False)),)


class Mean(Function):
    name = "mean"

    def forward(self, x):
        axis, keepdims = self.params.get("axis"), self.params.get("keepdims", False)
        self.saved = (x.shape,)
        return np.asarray(np.mean(x, axis=axis, keepdims=keepdims))

    def backward(self, grad):
        (shape,) = self.saved
        axis = self.params.get("axis")
        axes = range(len(shape)) if axis is None else np.atleast_1d(axis)
        count = int(np.prod([shape[a] for a in axes]))
        return (_expand_reduced(grad, shape, axis, self.params.get("keepdims", False)) / count,)


def _expand_reduced(grad, shape, axis, keepdims):
    if axis is None:
        return np.broadcast_to(grad.reshape([1] * len(shape)), shape).copy()
    axes = [a % len(shape) for a in np.atleast_1d(axis)]
    if not keepdims:
        for a in sorted(axes):
            grad = np.expand_dims(grad, a)
    return np.broadcast_to(grad, shape).copy()


# ----------------------------------------------------------------------------
# Linear algebra and layers
# ----------------------------------------------------------------------------

class MatMul(Function):
    name = "matmul"

    def forward(self, a, b):
        if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
            raise DimensionError(f"matmul: shapes {a.shape} and {b.shape} are not aligned")
        self.saved = (a, b)
        return np.matmul(a, b)

    def backward(self, grad):
        a, b = self.saved
        ga = np.matmul(grad, np.swapaxes(b, -1, -2))
        gb = np.matmul(np.swapaxes(a, -1, -2), grad)
        return _unbroadcast(ga, a.shape), _unbroadcast(gb, b.shape)


class Linear(Function):
    # x @ W + b over the last axis of x; x may carry any leading dims.
    name = "linear"

    def forward(self, x, w, b=None):
        if w.ndim != 2 or x.shape[-1] != w.shape[0]:
            raise DimensionError(f"linear: input {x.shape} does not match weight {w.shape}")
        if b is not None and b.shape != (w.shape[1],):
            raise DimensionError(f"linear: bias {b.shape} does not match weight {w.shape}")
        self.saved = (x, w, b is not None)
        out = x @ w
        return out + b if b is not None else out

    def backward(self, grad):
        x, w, has_bias = self.saved
        g2 = grad.reshape(-1, w.shape[1])
        gw = x.reshape(-1, w.shape[0]).T @ g2
        gx = grad @ w.T
        if has_bias:
            return gx, gw, g2.sum(axis=0)
        return gx, gw


class LayerNorm(Function):
    name = "layer_norm"

    def forward(self, x, gamma, beta):
        if gamma.shape != (x.shape[-1],) or beta.shape != (x.shape[-1],):
            raise DimensionError(f"layer_norm: affine {gamma.shape} does not match input {x.shape}")
        eps = self.params.get("eps", 1e-5)
        mu = x.mean(axis=-1, keepdims=True)
        var = x.var(axis=-1, keepdims=True)
        inv = 1.0 / np.sqrt(var + eps)
        xhat = (x - mu) * inv
        self.saved = (xhat, inv, gamma)
        return xhat * gamma + beta

    def backward(self, grad):
        xhat, inv, gamma = self.saved
        gxhat = grad * gamma
        gx = inv * (gxhat - gxhat.mean(axis=-1, keepdims=True)
                    - xhat * (gxhat * xhat).mean(axis=-1, keepdims=True))
        lead = tuple(range(grad.ndim - 1))
        return gx, (grad * xhat).sum(axis=lead), grad.sum(axis=lead)


class SoftmaxRows(Function):
    # Softmax over the last axis, stabilized by subtracting the row max.
    name = "softmax_rows"

    def forward(self, x):
        shifted = x - x.max(axis=-1, keepdims=True)
        e = np.exp(shifted)
        y = e / e.sum(axis=-1, keepdims=True)
        self.saved = (y,)
        return y

    def backward(self, grad):
        (y,) = self.saved
        return (y * (grad - (grad * y).sum(axis=-1, keepdims=True)),)


# ----------------------------------------------------------------------------
# Convolutions (same padding, odd kernels, stride 1)
# ----------------------------------------------------------------------------

def _check_odd(kernel, op):
    for k in kernel:
        if k % 2 != 1:
            raise DimensionError(f"{op}: kernel extents must be odd, got {tuple(kernel)}")


class Conv1d(Function):
    # x: [L, Cin], w: [k, Cin, Cout], b: [Cout]
    name = "conv1d"

    def forward(self, x, w, b=None):
        if x.ndim != 2 or w.ndim != 3 or x.shape[1] != w.shape[1]:
            raise DimensionError(f"conv1d: input {x.shape} does not match kernel {w.shape}")
        _check_odd(w.shape[:1], self.name)
        p = w.shape[0] // 2
        cols = sliding_window_view(np.pad(x, ((p, p), (0, 0))), w.shape[0], axis=0)  # [L, Cin, k]
        self.saved = (cols, w, b is not None)
        out = np.tensordot(cols, w, axes=([2, 1], [0, 1]))
        return out + b if b is not None else out

    def backward(self, grad):
        cols, w, has_bias = self.saved
        p = w.shape[0] // 2
        gw = np.tensordot(cols, grad, axes=([0], [0])).transpose(1, 0, 2)
        gcols = sliding_window_view(np.pad(grad, ((p, p), (0, 0))), w.shape[0], axis=0)  # [L, Cout, k]
        gx = np.tensordot(gcols, w[::-1], axes=([2, 1], [0, 2]))
        if has_bias:
            return gx, gw, grad.sum(axis=0)
        return gx, gw


class Conv2d(Function):
    # Channels-last: x: [B, H, W, Cin], w: [kh, kw, Cin, Cout], b: [Cout]
    name = "conv2d"

    def forward(self, x, w, b=None):
        if x.ndim != 4 or w.ndim != 4 or x.shape[3] != w.shape[2]:
            raise DimensionError(f"conv2d: input {x.shape} does not match kernel {w.shape}")
        _check_odd(w.shape[:2], self.name)
        ph, pw = w.shape[0] // 2, w.shape[1] // 2
        xp = np.pad(x, ((0, 0), (ph, ph), (pw, pw), (0, 0)))
        cols = sliding_window_view(xp, w.shape[:2], axis=(1, 2))  # [B, H, W, Cin, kh, kw]
        self.saved = (cols, w, b is not None)
        out = np.tensordot(cols, w, axes=([4, 5, 3], [0, 1, 2]))
        return out + b if b is not None else out

    def backward(self, grad):
        cols, w, has_bias = self.saved
        ph, pw = w.shape[0] // 2, w.shape[1] // 2
        gw = np.tensordot(cols, grad, axes=([0, 1, 2], [0, 1, 2])).transpose(1, 2, 0, 3)
        gp = np.pad(grad, ((0, 0), (ph, ph), (pw, pw), (0, 0)))
        gcols = sliding_window_view(gp, w.shape[:2], axis=(1, 2))  # [B, H, W, Cout, kh, kw]
        gx = np.tensordot(gcols, w[::-1, ::-1], axes=([4, 5, 3], [0, 1, 3]))
        if has_bias:
            return gx, gw, grad.sum(axis=(0, 1, 2))
        return gx, gw


class DepthwiseConv2d(Function):
    # Channels-last, one kernel per channel: x: [B, H, W, C], w: [kh, kw, C], b: [C]
    name = "depthwise_conv2d"

    def forward(self, x, w, b=None):
        if x.ndim != 4 or w.ndim != 3 or x.shape[3] != w.shape[2]:
            raise DimensionError(f"depthwise_conv2d: input {x.shape} does not match kernel {w.shape}")
        _check_odd(w.shape[:2], self.name)
        ph, pw = w.shape[0] // 2, w.shape[1] // 2
        xp = np.pad(x, ((0, 0), (ph, ph), (pw, pw), (0, 0)))
        cols = sliding_window_view(xp, w.shape[:2], axis=(1, 2))  # [B, H, W, C, kh, kw]
        self.saved = (cols, w, b is not None)
        out = np.einsum("bhwcij,ijc->bhwc", cols, w)
        return out + b if b is not None else out

    def backward(self, grad):
        cols, w, has_bias = self.saved
        ph, pw = w.shape[0] // 2, w.shape[1] // 2
        gw = np.einsum("bhwcij,bhwc->ijc", cols, grad)
        gp = np.pad(grad, ((0, 0), (ph, ph), (pw, pw), (0, 0)))
        gcols = sliding_window_view(gp, w.shape[:2], axis=(1, 2))
        gx = np.einsum("bhwcij,ijc->bhwc", gcols, w[::-1, ::-1])
        if has_bias:
            return gx, gw, grad.sum(axis=(0, 1, 2))
        return gx, gw


# ----------------------------------------------------------------------------
# Functional API
# ----------------------------------------------------------------------------

def add(a, b):
    return Add.apply(a, b)


def sub(a, b):
    return Sub.apply(a, b)


def mul(a, b):
    return Mul.apply(a, b)


def div(a, b):
    return Div.apply(a, b)


def scale(x, factor):
    return Scale.apply(x, factor=float(factor))


def minimum(a, b):
    return Minimum.apply(a, b)


def sigmoid(x):
    return Sigmoid.apply(x)


def softplus(x):
    return Softplus.apply(x)


def gelu(x):
    return GELU.apply(x)


def bce_with_logits(logits, targets):
    return BCEWithLogits.apply(logits, targets)


def reshape(x, shape):
    return Reshape.apply(x, shape=tuple(shape))


def transpose(x, axes):
    return Transpose.apply(x, axes=tuple(axes))


def concat(tensors, axis=0):
    if not tensors:
        raise ContractError("concat needs at least one tensor")
    if len(tensors) == 1:
        return as_tensor(tensors[0])
    return Concat.apply(*tensors, axis=axis)


def slice_axis(x, start, stop, axis=0):
    return SliceAxis.apply(x, axis=axis, start=int(start), stop=int(stop))


def split(x, sizes, axis=0):
    x = as_tensor(x)
    if sum(sizes) != x.shape[axis]:
        raise DimensionError(f"split: sizes {list(sizes)} do not cover axis {axis} of {x.shape}")
    pieces, start = [], 0
    for size in sizes:
        pieces.append(slice_axis(x, start, start + size, axis=axis))
        start += size
    return pieces


def index_rows(x, rows):
    return IndexRows.apply(x, rows=np.asarray(rows, dtype=np.int64))


def reduce_sum(x, axis=None, keepdims=False):
    return Sum.apply(x, axis=axis, keepdims=keepdims)


def mean(x, axis=None, keepdims=False):
    return Mean.apply(x, axis=axis, keepdims=keepdims)


def matmul(a, b):
    return MatMul.apply(a, b)


def linear(x, w, b=None):
    if b is None:
        return Linear.apply(x, w)
    return Linear.apply(x, w, b)


def layer_norm(x, gamma, beta, eps=1e-5):
    return LayerNorm.apply(x, gamma, beta, eps=eps)


def softmax_rows(x):
    x = as_tensor(x)
    if x.ndim < 1 or x.shape[-1] < 1:
        raise DimensionError(f"softmax_rows: needs at least one column, got {x.shape}")
    return SoftmaxRows.apply(x)


def conv1d(x, w, b=None):
    return Conv1d.apply(x, w) if b is None else Conv1d.apply(x, w, b)


def conv2d(x, w, b=None):
    return Conv2d.apply(x, w) if b is None else Conv2d.apply(x, w, b)


def depthwise_conv2d(x, w, b=None):
    return DepthwiseConv2d.apply(x, w) if b is None else DepthwiseConv2d.apply(x, w, b)


FUNCTIONS = {
    cls.name: cls
    for cls in (Add, Sub, Mul, Div, Scale, Minimum, Sigmoid, Softplus, GELU, BCEWithLogits,
                Reshape, Transpose, Concat, SliceAxis, IndexRows, Sum, Mean, MatMul, Linear,
                LayerNorm, SoftmaxRows, Conv1d, Conv2d, DepthwiseConv2d)
}
