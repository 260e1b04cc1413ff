"""Differentiable operators.

Only the operators the vocoder networks and losses need are provided.  All
operate on ``Tensor`` objects and return new tensors; 1-D convolution layouts
follow the usual ``[batch, channels, length]`` convention.
"""

import numpy as np
from numpy.lib.stride_tricks import as_strided

from .tensor import Function, Tensor


class ShapeError(ValueError):
    """Raised when operand shapes are incompatible."""


class ConfigurationError(ValueError):
    """Raised for operator hyper-parameters that are not allowed."""


def _unbroadcast(grad, shape):
    if grad.shape == shape:
        return grad
    ndiff = grad.ndim - len(shape)
    if ndiff:
        grad = grad.sum(axis=tuple(range(ndiff)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


def _wants(ctx, i):
    return ctx.parents[i].requires_grad


# --- elementwise arithmetic ---------------------------------------------------

class _Add(Function):
    def forward(self, a, b):
        self.shapes = a.shape, b.shape
        return a + b

    def backward(self, grad):
        return _unbroadcast(grad, self.shapes[0]), _unbroadcast(grad, self.shapes[1])


class _Sub(Function):
    def forward(self, a, b):
        self.shapes = a.shape, b.shape
        return a - b

    def backward(self, grad):
        return _unbroadcast(grad, self.shapes[0]), _unbroadcast(-grad, self.shapes[1])


class _Mul(Function):
    def forward(self, a, b):
        self.a, self.b = a, b
        return a * b

    def backward(self, grad):
        ga = _unbroadcast(grad * self.b, self.a.shape) if _wants(self, 0) else None
        gb = _unbroadcast(grad * self.a, self.b.shape) if _wants(self, 1) else None
        return ga, gb


class _Div(Function):
    def forward(self, a, b):
        self.a, self.b = a, b
        return a / b

    def backward(self, grad):
        ga = _unbroadcast(grad / self.b, self.a.shape) if _wants(self, 0) else None
        gb = None
        if _wants(self, 1):
            gb = _unbroadcast(-grad * self.a / (self.b * self.b), self.b.shape)
        return ga, gb


class _Neg(Function):
    def forward(self, a):
        return -a

    def backward(self, grad):
        return -grad


def add(a, b):
    return _Add.apply(a, b)


def sub(a, b):
    return _Sub.apply(a, b)


def mul(a, b):
    return _Mul.apply(a, b)


def div(a, b):
    return _Div.apply(a, b)


def neg(a):
    return _Neg.apply(a)


# --- unary elementwise --------------------------------------------------------

class _Square(Function):
    def forward(self, a):
        self.a = a
        return a * a

    def backward(self, grad):
        return 2 * self.a * grad


class _Abs(Function):
    def forward(self, a):
        self.sign = np.sign(a)
        return np.abs(a)

    def backward(self, grad):
        return grad * self.sign


class _Sqrt(Function):
    def forward(self, a):
        self.out = np.sqrt(a)
        return self.out

    def backward(self, grad):
        # subgradient 0 at sqrt(0) keeps exact-match losses finite
        safe = np.where(self.out > 0, self.out, 1)
        return np.where(self.out > 0, grad / (2 * safe), 0).astype(grad.dtype)


class _Log(Function):
    def forward(self, a):
        if np.any(a <= 0):
            raise FloatingPointError("log of non-positive value")
        self.a = a
        return np.log(a)

    def backward(self, grad):
        return grad / self.a


class _Exp(Function):
    def forward(self, a):
        self.out = np.exp(a)
        return self.out

    def backward(self, grad):
        return grad * self.out


class _Tanh(Function):
    def forward(self, a):
        # rounding would otherwise saturate to exactly +-1 (for float32, past |a| ~ 9)
        edge = np.nextafter(a.dtype.type(1), a.dtype.type(0))
        self.out = np.clip(np.tanh(a), -edge, edge)
        return self.out

    def backward(self, grad):
        return grad * (1 - self.out * self.out)


class _LeakyReLU(Function):
    def forward(self, a, slope=0.2):
        self.scale = np.where(a > 0, 1, slope).astype(a.dtype)
        return a * self.scale

    def backward(self, grad):
        return grad * self.scale


class _ClampMin(Function):
    def forward(self, a, floor=0.0):
        self.mask = a > floor
        return np.where(self.mask, a, a.dtype.type(floor))

    def backward(self, grad):
        return grad * self.mask


def square(a):
    return _Square.apply(a)


def abs(a):  # noqa: A001 - mirrors numpy naming
    return _Abs.apply(a)


def sqrt(a):
    return _Sqrt.apply(a)


def log(a):
    return _Log.apply(a)


def exp(a):
    return _Exp.apply(a)


def tanh_act(a):
    return _Tanh.apply(a)


def leaky_relu(a, slope=0.2):
    """Elementwise ``max(x, slope * x)`` for ``0 <= slope <= 1``."""
    return _LeakyReLU.apply(a, slope=slope)


def clamp_min(a, floor):
    return _ClampMin.apply(a, floor=floor)


# --- reductions and shape ops -------------------------------------------------

class _Sum(Function):
    def forward(self, a, axis=None, keepdims=False):
        self.shape = a.shape
        self.axis, self.keepdims = axis, keepdims
        return np.asarray(a.sum(axis=axis, keepdims=keepdims))

    def backward(self, grad):
        if self.axis is not None and not self.keepdims:
            grad = np.expand_dims(grad, self.axis)
        return np.broadcast_to(grad, self.shape).copy()


class _Mean(Function):
    def forward(self, a, axis=None, keepdims=False):
        self.shape = a.shape
        self.axis, self.keepdims = axis, keepdims
        out = a.mean(axis=axis, keepdims=keepdims)
        self.count = a.size // max(np.asarray(out).size, 1)
        return np.asarray(out)

    def backward(self, grad):
        if self.axis is not None and not self.keepdims:
            grad = np.expand_dims(grad, self.axis)
        return np.broadcast_to(grad / self.count, self.shape).copy()


class _Reshape(Function):
    def forward(self, a, shape=()):
        self.shape = a.shape
        return a.reshape(shape)

    def backward(self, grad):
        return grad.reshape(self.shape)


class _GetItem(Function):
    def forward(self, a, index=None):
        self.shape, self.index = a.shape, index
        return np.array(a[index])

    def backward(self, grad):
        out = np.zeros(self.shape, dtype=grad.dtype)
        out[self.index] = grad
        return out


class _Concat(Function):
    def forward(self, *arrays, axis=0):
        self.axis = axis
        self.splits = np.cumsum([a.shape[axis] for a in arrays])[:-1]
        return np.concatenate(arrays, axis=axis)

    def backward(self, grad):
        return tuple(np.split(grad, self.splits, axis=self.axis))


class _Take(Function):
    def forward(self, a, indices=None, axis=-1):
        self.shape, self.indices, self.axis = a.shape, indices, axis
        return np.take(a, indices, axis=axis)

    def backward(self, grad):
        axis = self.axis % len(self.shape)
        moved = np.moveaxis(grad, axis, -1)
        out = np.zeros(moved.shape[:-1] + (self.shape[axis],), dtype=grad.dtype)
        idx = np.asarray(self.indices)
        # Nearest-neighbour indices are non-decreasing; reduceat sums each run.
        if idx.size and np.all(np.diff(idx) >= 0):
            starts = np.flatnonzero(np.r_[True, np.diff(idx) > 0])
            out[..., idx[starts]] = np.add.reduceat(moved, starts, axis=-1)
        else:
            np.add.at(out, (..., idx), moved)
        return np.moveaxis(out, -1, axis)


def sum(a, axis=None, keepdims=False):  # noqa: A001
    return _Sum.apply(a, axis=axis, keepdims=keepdims)


def mean(a, axis=None, keepdims=False):
    return _Mean.apply(a, axis=axis, keepdims=keepdims)


def reshape(a, shape):
    return _Reshape.apply(a, shape=tuple(shape))


def getitem(a, index):
    return _GetItem.apply(a, index=index)


def concat(tensors, axis=0):
    return _Concat.apply(*tensors, axis=axis)


def take(a, indices, axis=-1):
    """Gather ``indices`` along ``axis`` (used for nearest-neighbour resampling)."""
    return _Take.apply(a, indices=np.asarray(indices, dtype=np.intp), axis=axis)


def upsample_nearest(a, factor):
    """Repeat every time step ``factor`` times along the last axis."""
    return take(a, np.repeat(np.arange(a.shape[-1]), factor), axis=-1)


def resample_nearest(a, length):
    """Nearest-neighbour resample the last axis to ``length`` steps."""
    n = a.shape[-1]
    idx = np.minimum((np.arange(length) * n) // length, n - 1)
    return take(a, idx, axis=-1)


# --- padding ------------------------------------------------------------------

class _PadReflect(Function):
    # single reflection only; longer pads go through reflect_indices + take
    def forward(self, a, left=0, right=0):
        n = a.shape[-1]
        self.left, self.right, self.n = left, right, n
        pad = [(0, 0)] * (a.ndim - 1) + [(left, right)]
        return np.pad(a, pad, mode="reflect")

    def backward(self, grad):
        left, right, n = self.left, self.right, self.n
        out = grad[..., left:left + n].copy()
        if left:
            # padded position i (< left) mirrors source index left - i
            out[..., 1:left + 1] += grad[..., :left][..., ::-1]
        if right:
            out[..., n - 1 - right:n - 1] += grad[..., left + n:][..., ::-1]
        return out


class _PadZero(Function):
    def forward(self, a, left=0, right=0):
        self.left, self.n = left, a.shape[-1]
        pad = [(0, 0)] * (a.ndim - 1) + [(left, right)]
        return np.pad(a, pad)

    def backward(self, grad):
        return grad[..., self.left:self.left + self.n].copy()


def reflect_indices(n, left, right):
    """Source index of every reflect-padded position (numpy semantics: the
    reflection repeats when the pad exceeds the signal)."""
    return np.pad(np.arange(n), (left, right), mode="reflect")


def pad_reflect(a, amount):
    """Reflect-pad the last axis; ``amount`` is an int or a (left, right) pair.

    Pads longer than the signal reflect repeatedly, so even a one-sample
    input can be padded.
    """
    left, right = (amount, amount) if np.isscalar(amount) else amount
    left, right = int(left), int(right)
    n = a.shape[-1]
    if left < n and right < n:
        return _PadReflect.apply(a, left=left, right=right)
    return take(a, reflect_indices(n, left, right), axis=-1)


def pad_zero(a, amount):
    left, right = (amount, amount) if np.isscalar(amount) else amount
    return _PadZero.apply(a, left=int(left), right=int(right))


# --- convolution --------------------------------------------------------------

def conv1d_output_length(length, kernel, stride=1, padding=0, dilation=1):
    return (length + 2 * padding - dilation * (kernel - 1) - 1) // stride + 1


def conv_transpose1d_output_length(length, kernel, stride=1, padding=0):
    return (length - 1) * stride - 2 * padding + kernel


def _frames(xp, kernel, out_len, stride, dilation):
    """Strided view ``[B, C, K, L_out]`` with ``view[..., k, j] = xp[..., k*d + j*s]``."""
    b, c, _ = xp.shape
    sb, sc, sl = xp.strides
    return as_strided(xp, shape=(b, c, kernel, out_len),
                      strides=(sb, sc, dilation * sl, stride * sl), writeable=False)


def _overlap_add(cols, length, stride, dilation):
    """Adjoint of :func:`_frames`: scatter-add ``[B, C, K, L_out]`` into length."""
    b, c, kernel, out_len = cols.shape
    out = np.zeros((b, c, length), dtype=cols.dtype)
    span = stride * (out_len - 1) + 1
    for k in range(kernel):
        start = k * dilation
        out[:, :, start:start + span:stride] += cols[:, :, k, :]
    return out


class _Conv1d(Function):
    def forward(self, x, w, b=None, stride=1, padding=0, dilation=1, groups=1):
        if x.ndim != 3:
            raise ShapeError(f"conv1d input must be [B, C, L], got shape {x.shape}")
        bsz, c_in, length = x.shape
        c_out, c_in_g, kernel = w.shape
        if c_in % groups or c_out % groups:
            raise ShapeError(
                f"channel axis: C_in={c_in}, C_out={c_out} not divisible by groups={groups}"
            )
        if c_in_g * groups != c_in:
            raise ShapeError(
                f"channel axis: input has {c_in} channels, weight expects {c_in_g * groups}"
            )
        if length + 2 * padding < dilation * (kernel - 1) + 1:
            raise ShapeError(
                f"length axis: input length {length} (padding {padding}) shorter than "
                f"dilated kernel extent {dilation * (kernel - 1) + 1}"
            )
        out_len = conv1d_output_length(length, kernel, stride, padding, dilation)
        xp = np.pad(x, ((0, 0), (0, 0), (padding, padding))) if padding else x
        cols = _frames(xp, kernel, out_len, stride, dilation)
        cols = np.ascontiguousarray(cols).reshape(bsz, groups, c_in_g * kernel, out_len)
        wg = w.reshape(groups, c_out // groups, c_in_g * kernel)
        out = np.matmul(wg, cols).reshape(bsz, c_out, out_len)
        if b is not None:
            out += b[None, :, None]
        self.cols, self.w = cols, w
        self.meta = (x.shape, xp.shape[-1], stride, padding, dilation, groups)
        return out

    def backward(self, grad):
        (bsz, c_in, length), padded_len, stride, padding, dilation, groups = self.meta
        c_out, c_in_g, kernel = self.w.shape
        out_len = grad.shape[-1]
        gg = grad.reshape(bsz, groups, c_out // groups, out_len)
        gx = gw = gb = None
        if _wants(self, 1):
            gw = np.matmul(gg, self.cols.transpose(0, 1, 3, 2)).sum(axis=0)
            gw = gw.reshape(self.w.shape)
        if len(self.parents) > 2 and _wants(self, 2):
            gb = grad.sum(axis=(0, 2))
        if _wants(self, 0):
            wg = self.w.reshape(groups, c_out // groups, c_in_g * kernel)
            gcols = np.matmul(wg.transpose(0, 2, 1), gg)
            gcols = gcols.reshape(bsz, c_in, kernel, out_len)
            gxp = _overlap_add(gcols, padded_len, stride, dilation)
            gx = gxp[:, :, padding:padding + length] if padding else gxp
        return gx, gw, gb


def conv1d(x, weight, bias=None, stride=1, padding=0, dilation=1, groups=1):
    """1-D cross-correlation with zero padding.

    ``x`` is ``[B, C_in, L]`` and ``weight`` is ``[C_out, C_in // groups, K]``.
    """
    args = (x, weight) if bias is None else (x, weight, bias)
    return _Conv1d.apply(*args, stride=stride, padding=padding,
                         dilation=dilation, groups=groups)


class _ConvTranspose1d(Function):
    def forward(self, x, w, b=None, stride=1, padding=0):
        if x.ndim != 3:
            raise ShapeError(f"conv_transpose1d input must be [B, C, L], got {x.shape}")
        bsz, c_in, length = x.shape
        if w.shape[0] != c_in:
            raise ShapeError(
                f"channel axis: input has {c_in} channels, weight expects {w.shape[0]}"
            )
        _, c_out, kernel = w.shape
        full_len = (length - 1) * stride + kernel
        out_len = full_len - 2 * padding
        if out_len <= 0:
            raise ShapeError(f"length axis: padding {padding} too large for length {length}")
        w2 = w.reshape(c_in, c_out * kernel)
        cols = np.matmul(w2.T, x).reshape(bsz, c_out, kernel, length)
        full = _overlap_add(cols, full_len, stride, 1)
        out = full[:, :, padding:padding + out_len]
        if b is not None:
            out = out + b[None, :, None]
        self.x, self.w = x, w
        self.meta = (stride, padding, full_len)
        return np.ascontiguousarray(out)

    def backward(self, grad):
        stride, padding, full_len = self.meta
        bsz, c_in, length = self.x.shape
        _, c_out, kernel = self.w.shape
        gfull = np.zeros((bsz, c_out, full_len), dtype=grad.dtype)
        gfull[:, :, padding:padding + grad.shape[-1]] = grad
        gcols = _frames(gfull, kernel, length, stride, 1)
        gcols = np.ascontiguousarray(gcols).reshape(bsz, c_out * kernel, length)
        gx = gw = gb = None
        if _wants(self, 0):
            gx = np.matmul(self.w.reshape(c_in, c_out * kernel), gcols)
        if _wants(self, 1):
            gw = np.matmul(self.x, gcols.transpose(0, 2, 1)).sum(axis=0)
            gw = gw.reshape(self.w.shape)
        if len(self.parents) > 2 and _wants(self, 2):
            gb = grad.sum(axis=(0, 2))
        return gx, gw, gb


def conv_transpose1d(x, weight, bias=None, stride=1, padding=0):
    """Transposed 1-D convolution; ``weight`` is ``[C_in, C_out, K]``.

    Kernels shorter than the stride leave gaps between output taps (a
    checkerboard pattern) and are rejected.
    """
    kernel = weight.shape[-1]
    if kernel < stride:
        raise ConfigurationError(
            f"kernel {kernel} < stride {stride}: transposed conv would leave "
            "uncovered output samples (checkerboard artifacts)"
        )
    args = (x, weight) if bias is None else (x, weight, bias)
    return _ConvTranspose1d.apply(*args, stride=stride, padding=padding)


class _AvgPool1d(Function):
    def forward(self, x, kernel=2, stride=2, padding=0):
        length = x.shape[-1]
        out_len = conv1d_output_length(length, kernel, stride, padding)
        if out_len <= 0:
            raise ShapeError(f"length axis: input length {length} too short for pooling")
        xp = np.pad(x, ((0, 0), (0, 0), (padding, padding))) if padding else x
        view = _frames(xp, kernel, out_len, stride, 1)
        self.meta = (length, xp.shape[-1], kernel, stride, padding)
        return view.sum(axis=2) / x.dtype.type(kernel)

    def backward(self, grad):
        length, padded_len, kernel, stride, padding = self.meta
        g = grad / grad.dtype.type(kernel)
        cols = np.broadcast_to(g[:, :, None, :], g.shape[:2] + (kernel, g.shape[-1]))
        gxp = _overlap_add(cols, padded_len, stride, 1)
        return gxp[:, :, padding:padding + length]


def avg_pool1d(x, kernel, stride=None, padding=0):
    """Average pooling over the last axis; zero padding counts toward the mean."""
    stride = kernel if stride is None else stride
    return _AvgPool1d.apply(x, kernel=kernel, stride=stride, padding=padding)
