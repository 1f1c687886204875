"""Dense float64 tensor kernel with hand-written reverse-mode gradients.

Every differentiable op computes its forward value with numpy and, when a
:class:`Tape` is active and one of its inputs requires a gradient, appends a
record holding a closure that maps the upstream gradient to input gradients.
``Tape.backward`` walks that linear record in reverse.
"""

import contextvars
import logging
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import GraphError, NonFiniteError, ShapeError

logger = logging.getLogger(__name__)

_ACTIVE_TAPE = contextvars.ContextVar("spiketsa_active_tape", default=None)


class Tensor:
    """Read-only float64 array with an optional gradient buffer."""

    __slots__ = ("value", "grad", "requires_grad", "name")

    def __init__(self, value, requires_grad=False, name=None):
        array = np.array(value, dtype=np.float64)
        if not np.all(np.isfinite(array)):
            label = f" '{name}'" if name else ""
            raise NonFiniteError(f"Tensor{label} contains NaN or Inf values")
        array.flags.writeable = False
        self.value = array
        self.grad = None
        self.requires_grad = requires_grad
        self.name = name

    @classmethod
    def _wrap(cls, array, requires_grad=False):
        # Internal results skip the copy and the finiteness scan.
        tensor = cls.__new__(cls)
        array = np.asarray(array, dtype=np.float64)
        if array.flags.writeable and array.base is None:
            array.flags.writeable = False
        tensor.value = array
        tensor.grad = None
        tensor.requires_grad = requires_grad
        tensor.name = None
        return tensor

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.value.shape

    @property
    def ndim(self) -> int:
        return self.value.ndim

    @property
    def size(self) -> int:
        return self.value.size

    def numpy(self) -> np.ndarray:
        return self.value

    def __repr__(self):
        label = f"name={self.name!r}, " if self.name else ""
        return f"Tensor({label}shape={self.shape}, requires_grad={self.requires_grad})"


class Parameter(Tensor):
    """A named, learnable tensor; the optimizer replaces its value between steps."""

    __slots__ = ()

    def __init__(self, value, name):
        super().__init__(value, requires_grad=True, name=name)

    def assign(self, value):
        """Replace the value with an array of identical shape."""
        array = np.array(value, dtype=np.float64)
        if array.shape != self.shape:
            raise ShapeError(f"Parameter '{self.name}' has shape {self.shape}, got {array.shape}")
        if not np.all(np.isfinite(array)):
            raise NonFiniteError(f"Parameter '{self.name}' update contains NaN or Inf values")
        array.flags.writeable = False
        self.value = array

    def __repr__(self):
        return f"Parameter(name={self.name!r}, shape={self.shape})"


def as_tensor(value) -> Tensor:
    """Return ``value`` unchanged if it is a Tensor, else a constant Tensor."""
    if isinstance(value, Tensor):
        return value
    return Tensor(value)


class _Record:
    __slots__ = ("op", "output", "inputs", "backward_fn")

    def __init__(self, op, output, inputs, backward_fn):
        self.op = op
        self.output = output
        self.inputs = inputs
        self.backward_fn = backward_fn


class Tape:
    """Linear record of the ops executed during one forward pass.

    Use as a context manager; the tape is active for the current thread or
    context only, so independent samples may be evaluated concurrently on
    separate tapes.
    """

    def __init__(self):
        self._records: List[_Record] = []
        self._token = None

    def __enter__(self):
        self._token = _ACTIVE_TAPE.set(self)
        return self

    def __exit__(self, exc_type, exc, tb):
        _ACTIVE_TAPE.reset(self._token)
        self._token = None
        return False

    def __len__(self):
        return len(self._records)

    @property
    def ops(self) -> List[str]:
        return [record.op for record in self._records]

    def record(self, op: str, output: Tensor, inputs: Sequence[Tensor], backward_fn: Callable):
        self._records.append(_Record(op, output, tuple(inputs), backward_fn))

    def backward(self, output: Tensor, grad) -> Dict[Tensor, np.ndarray]:
        """Propagate ``grad`` from ``output`` back to every leaf that requires a gradient.

        Leaf gradients are accumulated into ``leaf.grad`` and returned keyed by leaf.
        """
        grad = np.asarray(grad, dtype=np.float64)
        if grad.shape != output.shape:
            raise ShapeError(f"Upstream gradient shape {grad.shape} does not match output {output.shape}")
        if not any(record.output is output for record in self._records):
            raise GraphError("backward called for a tensor that no recorded forward pass produced")

        pending = {id(output): grad}
        seen = {id(output): output}
        for record in reversed(self._records):
            upstream = pending.pop(id(record.output), None)
            if upstream is None:
                continue
            for tensor, input_grad in zip(record.inputs, record.backward_fn(upstream)):
                if input_grad is None or not tensor.requires_grad:
                    continue
                key = id(tensor)
                seen[key] = tensor
                if key in pending:
                    pending[key] = pending[key] + input_grad
                else:
                    pending[key] = input_grad

        leaves = {}
        for key, leaf_grad in pending.items():
            leaf = seen[key]
            leaf.grad = leaf_grad if leaf.grad is None else leaf.grad + leaf_grad
            leaves[leaf] = leaf_grad
        return leaves


def active_tape() -> Optional[Tape]:
    return _ACTIVE_TAPE.get()


def emit(op: str, value, inputs: Sequence[Tensor], backward_fn: Callable) -> Tensor:
    """Wrap an op result and record it on the active tape when a gradient is needed."""
    requires_grad = any(tensor.requires_grad for tensor in inputs)
    output = Tensor._wrap(value, requires_grad)
    tape = _ACTIVE_TAPE.get()
    if tape is not None and requires_grad:
        tape.record(op, output, inputs, backward_fn)
    return output


def _require_same_shape(op, a, b):
    if a.shape != b.shape:
        raise ShapeError(f"{op}: shapes {a.shape} and {b.shape} differ")


# --- FFT -------------------------------------------------------------------

def is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


def next_power_of_two(n: int) -> int:
    if n < 1:
        raise ShapeError(f"length must be positive, got {n}")
    return 1 << (n - 1).bit_length()


def _bit_reversal(n):
    levels = n.bit_length() - 1
    index = np.arange(n)
    reversed_index = np.zeros(n, dtype=np.intp)
    for bit in range(levels):
        reversed_index |= ((index >> bit) & 1) << (levels - 1 - bit)
    return reversed_index


def _radix2(values, sign):
    n = values.shape[-1]
    lead = values.shape[:-1]
    out = values[..., _bit_reversal(n)].astype(np.complex128)
    size = 2
    while size <= n:
        half = size // 2
        twiddle = np.exp(sign * 2j * np.pi * np.arange(half) / size)
        blocks = out.reshape(lead + (n // size, size))
        even = blocks[..., :half]
        odd = blocks[..., half:] * twiddle
        out = np.concatenate((even + odd, even - odd), axis=-1).reshape(lead + (n,))
        size *= 2
    return out


def fft1d(x, inverse=False, axis=-1) -> np.ndarray:
    """Radix-2 decimation-in-time DFT along ``axis``.

    The forward transform is unnormalized; the inverse applies 1/N. Both return
    a complex128 array. The length along ``axis`` must be a power of two.
    """
    values = np.asarray(x)
    if values.ndim == 0:
        raise ShapeError("fft1d needs at least one axis")
    n = values.shape[axis]
    if not is_power_of_two(n):
        raise ShapeError(f"fft1d length must be a power of two, got {n}")
    moved = np.moveaxis(values, axis, -1)
    spectrum = _radix2(moved, +1 if inverse else -1)
    if inverse:
        spectrum = spectrum / n
    return np.moveaxis(spectrum, -1, axis)


def fft_features(x: Tensor) -> Tensor:
    """FFT along the leading axis, re-encoded as [real | imag] along the trailing axis."""
    x = as_tensor(x)
    if x.ndim < 2:
        raise ShapeError(f"fft_features expects at least 2 axes, got shape {x.shape}")
    spectrum = fft1d(x.value, axis=0)
    value = np.concatenate((spectrum.real, spectrum.imag), axis=-1)
    width = x.shape[-1]

    def backward(g):
        g_real, g_imag = g[..., :width], g[..., width:]
        return (fft1d(g_real, axis=0).real + fft1d(g_imag, axis=0).imag,)

    return emit("fft_features", value, (x,), backward)


# --- elementwise and shape ops ---------------------------------------------

def add(a: Tensor, b: Tensor) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _require_same_shape("add", a, b)
    return emit("add", a.value + b.value, (a, b), lambda g: (g, g))


def sub(a: Tensor, b: Tensor) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _require_same_shape("sub", a, b)
    return emit("sub", a.value - b.value, (a, b), lambda g: (g, -g))


def mul(a: Tensor, b: Tensor) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _require_same_shape("mul", a, b)
    av, bv = a.value, b.value
    return emit("mul", av * bv, (a, b), lambda g: (g * bv, g * av))


def scale(x: Tensor, factor: float) -> Tensor:
    x = as_tensor(x)
    factor = float(factor)
    return emit("scale", x.value * factor, (x,), lambda g: (g * factor,))


def exp(x: Tensor) -> Tensor:
    x = as_tensor(x)
    value = np.exp(x.value)
    return emit("exp", value, (x,), lambda g: (g * value,))


def relu(x: Tensor) -> Tensor:
    """Elementwise max(0, x)."""
    x = as_tensor(x)
    mask = x.value > 0
    return emit("relu", np.where(mask, x.value, 0.0), (x,), lambda g: (g * mask,))


def mean(x: Tensor, axis=None, keepdims=False) -> Tensor:
    x = as_tensor(x)
    axes = tuple(range(x.ndim)) if axis is None else tuple(int(a) % x.ndim for a in np.atleast_1d(axis))
    count = int(np.prod([x.shape[a] for a in axes])) if axes else 1
    value = x.value.mean(axis=axes, keepdims=keepdims)
    shape = x.shape

    def backward(g):
        g = g if keepdims else np.expand_dims(g, axes)
        return (np.broadcast_to(g / count, shape).copy(),)

    return emit("mean", value, (x,), backward)


def reshape(x: Tensor, shape) -> Tensor:
    x = as_tensor(x)
    original = x.shape
    try:
        value = x.value.reshape(shape)
    except ValueError as e:
        raise ShapeError(f"cannot reshape {original} to {shape}: {e}")
    return emit("reshape", value, (x,), lambda g: (g.reshape(original),))


def transpose(x: Tensor, axes: Sequence[int]) -> Tensor:
    x = as_tensor(x)
    axes = tuple(axes)
    inverse = tuple(np.argsort(axes))
    return emit("transpose", np.transpose(x.value, axes), (x,), lambda g: (np.transpose(g, inverse),))


def pad_leading(x: Tensor, length: int) -> Tensor:
    """Zero-pad the leading axis up to ``length``."""
    x = as_tensor(x)
    n = x.shape[0]
    if length < n:
        raise ShapeError(f"cannot pad leading axis of {n} down to {length}")
    if length == n:
        return x
    widths = [(0, length - n)] + [(0, 0)] * (x.ndim - 1)
    return emit("pad_leading", np.pad(x.value, widths), (x,), lambda g: (g[:n],))


def repeat_leading(x: Tensor, count: int) -> Tensor:
    """Stack ``count`` copies of ``x`` along a new leading axis."""
    x = as_tensor(x)
    if count < 1:
        raise ShapeError(f"repeat count must be at least 1, got {count}")
    value = np.broadcast_to(x.value, (count,) + x.shape).copy()
    return emit("repeat_leading", value, (x,), lambda g: (g.sum(axis=0),))


def stack(tensors: Sequence[Tensor], axis=0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    for t in tensors[1:]:
        _require_same_shape("stack", tensors[0], t)
    value = np.stack([t.value for t in tensors], axis=axis)

    def backward(g):
        return tuple(np.take(g, i, axis=axis) for i in range(len(tensors)))

    return emit("stack", value, tensors, backward)


def take(x: Tensor, index: int, axis=-1) -> Tensor:
    x = as_tensor(x)
    shape = x.shape
    ax = axis % x.ndim

    def backward(g):
        full = np.zeros(shape)
        selector = [slice(None)] * len(shape)
        selector[ax] = index
        full[tuple(selector)] = g
        return (full,)

    return emit("take", np.take(x.value, index, axis=ax), (x,), backward)


def mul_along(x: Tensor, weights: Tensor, axis: int) -> Tensor:
    """Multiply ``x`` by a vector broadcast along ``axis``."""
    x, weights = as_tensor(x), as_tensor(weights)
    ax = axis % x.ndim
    if weights.shape != (x.shape[ax],):
        raise ShapeError(f"mul_along: weights {weights.shape} do not match axis {ax} of {x.shape}")
    view = [1] * x.ndim
    view[ax] = x.shape[ax]
    w = weights.value.reshape(view)
    other = tuple(a for a in range(x.ndim) if a != ax)

    def backward(g):
        return g * w, (g * x.value).sum(axis=other)

    return emit("mul_along", x.value * w, (x, weights), backward)


# --- neural-network ops ----------------------------------------------------

def softmax(x: Tensor, axis=-1) -> Tensor:
    """Numerically stable softmax along ``axis``."""
    x = as_tensor(x)
    if x.ndim == 0 or not -x.ndim <= axis < x.ndim:
        raise ShapeError(f"softmax axis {axis} invalid for shape {x.shape}")
    shifted = x.value - x.value.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    value = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        return (value * (g - (g * value).sum(axis=axis, keepdims=True)),)

    return emit("softmax", value, (x,), backward)


def linear(x: Tensor, weight: Tensor, bias: Optional[Tensor] = None) -> Tensor:
    """Affine map along the trailing axis: x @ weight.T + bias."""
    x, weight = as_tensor(x), as_tensor(weight)
    if weight.ndim != 2:
        raise ShapeError(f"linear weight must be 2-D, got {weight.shape}")
    d_out, d_in = weight.shape
    if x.ndim == 0 or x.shape[-1] != d_in:
        raise ShapeError(f"linear: input trailing dim {x.shape[-1:] or ()} does not match weight in-dim {d_in}")
    value = x.value @ weight.value.T
    inputs = [x, weight]
    if bias is not None:
        bias = as_tensor(bias)
        if bias.shape != (d_out,):
            raise ShapeError(f"linear bias shape {bias.shape} does not match out-dim {d_out}")
        value = value + bias.value
        inputs.append(bias)

    def backward(g):
        flat_g = g.reshape(-1, d_out)
        grads = [g @ weight.value, flat_g.T @ x.value.reshape(-1, d_in)]
        if bias is not None:
            grads.append(flat_g.sum(axis=0))
        return grads

    return emit("linear", value, inputs, backward)


def _output_extent(size, window, stride, padding, op):
    if stride < 1:
        raise ShapeError(f"{op}: stride must be positive, got {stride}")
    extent = (size + 2 * padding - window) // stride + 1
    if size + 2 * padding < window or extent < 1:
        raise ShapeError(f"{op}: window {window} does not fit extent {size} with padding {padding}")
    return extent


def conv2d(x: Tensor, kernels: Tensor, bias: Optional[Tensor] = None, stride=1, padding=0) -> Tensor:
    """2-D cross-correlation of B x C x H x W input with K x C x kh x kw kernels."""
    x, kernels = as_tensor(x), as_tensor(kernels)
    if x.ndim != 4 or kernels.ndim != 4:
        raise ShapeError(f"conv2d expects 4-D input and kernels, got {x.shape} and {kernels.shape}")
    batch, channels, height, width = x.shape
    n_kernels, k_channels, kh, kw = kernels.shape
    if channels != k_channels:
        raise ShapeError(f"conv2d: input has {channels} channels, kernels expect {k_channels}")
    out_h = _output_extent(height, kh, stride, padding, "conv2d")
    out_w = _output_extent(width, kw, stride, padding, "conv2d")
    padded = np.pad(x.value, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    h_stop = stride * (out_h - 1) + 1
    w_stop = stride * (out_w - 1) + 1

    value = np.zeros((batch, out_h, out_w, n_kernels))
    for u in range(kh):
        for v in range(kw):
            patch = padded[:, :, u:u + h_stop:stride, v:v + w_stop:stride]
            value += np.tensordot(patch, kernels.value[:, :, u, v], axes=([1], [1]))
    value = value.transpose(0, 3, 1, 2)
    inputs = [x, kernels]
    if bias is not None:
        bias = as_tensor(bias)
        if bias.shape != (n_kernels,):
            raise ShapeError(f"conv2d bias shape {bias.shape} does not match {n_kernels} kernels")
        value = value + bias.value[None, :, None, None]
        inputs.append(bias)

    def backward(g):
        grad_padded = np.zeros_like(padded)
        grad_kernels = np.zeros(kernels.shape)
        for u in range(kh):
            for v in range(kw):
                patch = padded[:, :, u:u + h_stop:stride, v:v + w_stop:stride]
                grad_kernels[:, :, u, v] = np.tensordot(g, patch, axes=([0, 2, 3], [0, 2, 3]))
                grad_padded[:, :, u:u + h_stop:stride, v:v + w_stop:stride] += np.tensordot(
                    g, kernels.value[:, :, u, v], axes=([1], [0])
                ).transpose(0, 3, 1, 2)
        grad_x = grad_padded[:, :, padding:padding + height, padding:padding + width]
        grads = [grad_x, grad_kernels]
        if bias is not None:
            grads.append(g.sum(axis=(0, 2, 3)))
        return grads

    return emit("conv2d", value, inputs, backward)


def avg_pool2d(x: Tensor, window: int, stride: Optional[int] = None) -> Tensor:
    """Mean over each window of the two trailing axes."""
    x = as_tensor(x)
    stride = window if stride is None else stride
    if x.ndim < 2:
        raise ShapeError(f"avg_pool2d expects at least 2 axes, got {x.shape}")
    height, width = x.shape[-2:]
    if window > height or window > width:
        raise ShapeError(f"avg_pool2d: window {window} larger than input {height}x{width}")
    out_h = _output_extent(height, window, stride, 0, "avg_pool2d")
    out_w = _output_extent(width, window, stride, 0, "avg_pool2d")
    h_stop = stride * (out_h - 1) + 1
    w_stop = stride * (out_w - 1) + 1
    area = float(window * window)

    value = np.zeros(x.shape[:-2] + (out_h, out_w))
    for u in range(window):
        for v in range(window):
            value += x.value[..., u:u + h_stop:stride, v:v + w_stop:stride]
    value /= area
    shape = x.shape

    def backward(g):
        grad = np.zeros(shape)
        share = g / area
        for u in range(window):
            for v in range(window):
                grad[..., u:u + h_stop:stride, v:v + w_stop:stride] += share
        return (grad,)

    return emit("avg_pool2d", value, (x,), backward)


# --- verification helpers --------------------------------------------------

def gradient_check(fn: Callable, arrays: Sequence[np.ndarray], h=1e-5, seed=0, floor=1e-3) -> float:
    """Largest relative error between tape gradients and central finite differences.

    ``fn`` maps Tensors to a Tensor; the scalar objective is sum(fn(...) * probe)
    with a fixed random probe. Relative error uses ``max(|a|, |n|, floor)`` as the
    denominator.
    """
    arrays = [np.array(a, dtype=np.float64) for a in arrays]
    leaves = [Tensor(a, requires_grad=True) for a in arrays]
    with Tape() as tape:
        output = fn(*leaves)
    probe = np.random.default_rng(seed).standard_normal(output.shape)
    analytic = tape.backward(output, probe)

    def objective(values):
        return float(np.sum(fn(*[Tensor(v) for v in values]).value * probe))

    worst = 0.0
    for position, (leaf, array) in enumerate(zip(leaves, arrays)):
        grad = analytic.get(leaf, np.zeros_like(array))
        for index in np.ndindex(array.shape):
            values = [a.copy() for a in arrays]
            values[position][index] += h
            upper = objective(values)
            values[position][index] -= 2 * h
            lower = objective(values)
            numeric = (upper - lower) / (2 * h)
            denominator = max(abs(grad[index]), abs(numeric), floor)
            worst = max(worst, abs(grad[index] - numeric) / denominator)
    return worst
