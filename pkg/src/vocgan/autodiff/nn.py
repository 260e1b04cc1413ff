"""Parameter containers and the convolution layers used by the vocoder."""

from collections import OrderedDict

import numpy as np

from . import functional as F
from .tensor import Tensor, get_default_dtype

INIT_STD = 0.02


class Parameter(Tensor):
    """A leaf tensor that is trained by the optimizer."""

    __slots__ = ()

    def __init__(self, data, name=None, dtype=None):
        super().__init__(data, requires_grad=True, dtype=dtype, name=name)


def weight_norm_reparam(weight, dim=0):
    """Split a convolution weight into direction ``v`` and magnitude ``g``.

    ``g`` holds the L2 norm of ``weight`` for each slice along ``dim`` (the
    output-channel axis), so ``g * v / ||v||`` reproduces ``weight`` exactly
    at initialisation.
    """
    data = weight.data if isinstance(weight, Tensor) else np.asarray(weight)
    axes = tuple(i for i in range(data.ndim) if i != dim)
    g = np.sqrt((data * data).sum(axis=axes, keepdims=True))
    return Parameter(data.copy(), dtype=data.dtype), Parameter(g, dtype=data.dtype)


def weight_norm_effective(v, g, dim=0):
    axes = tuple(i for i in range(v.ndim) if i != dim)
    norm = F.sqrt(F.sum(F.square(v), axis=axes, keepdims=True))
    return g * (v / norm)


class Module:
    """Minimal module base: attribute walking for parameters and state."""

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)

    def forward(self, *args, **kwargs):
        raise NotImplementedError

    def named_parameters(self, prefix=""):
        for key, value in vars(self).items():
            name = f"{prefix}{key}"
            if isinstance(value, Parameter):
                yield name, value
            elif isinstance(value, Module):
                yield from value.named_parameters(name + ".")
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        yield from item.named_parameters(f"{name}.{i}.")
                    elif isinstance(item, Parameter):
                        yield f"{name}.{i}", item

    def parameters(self):
        return [p for _, p in self.named_parameters()]

    def assign_names(self, prefix=""):
        """Stamp each parameter's dotted path onto ``Parameter.name``."""
        for name, p in self.named_parameters(prefix):
            p.name = name
        return self

    def num_parameters(self):
        return int(sum(p.size for p in self.parameters()))

    def zero_grad(self):
        for p in self.parameters():
            p.grad = None

    def requires_grad_(self, flag=True):
        for p in self.parameters():
            p.requires_grad = flag
        return self

    def state_dict(self):
        return OrderedDict((name, p.data.copy()) for name, p in self.named_parameters())

    def load_state_dict(self, state, strict=True):
        params = dict(self.named_parameters())
        if strict:
            missing = sorted(set(params) - set(state))
            unexpected = sorted(set(state) - set(params))
            if missing or unexpected:
                raise KeyError(f"state mismatch: missing={missing} unexpected={unexpected}")
        for name, p in params.items():
            if name not in state:
                continue
            value = np.asarray(state[name])
            if value.shape != p.shape:
                raise ValueError(f"{name}: shape {value.shape} != {p.shape}")
            p.data = value.astype(p.dtype, copy=True)

    def astype(self, dtype):
        for p in self.parameters():
            p.data = p.data.astype(dtype)
            p.grad = None
        return self


def _normal(rng, shape, dtype):
    return (rng.standard_normal(shape) * INIT_STD).astype(dtype)


class Conv1d(Module):
    """Weight-normalised 1-D convolution.

    ``pad_mode`` is ``"zeros"`` or ``"reflect"``; reflect padding is applied
    before the convolution so the kernel never sees artificial zeros.
    """

    def __init__(self, in_channels, out_channels, kernel_size, stride=1, padding=0,
                 dilation=1, groups=1, pad_mode="zeros", rng=None, weight_norm=True):
        rng = rng if rng is not None else np.random.default_rng(0)
        dtype = get_default_dtype()
        weight = _normal(rng, (out_channels, in_channels // groups, kernel_size), dtype)
        self.weight_norm = weight_norm
        if weight_norm:
            self.weight_v, self.weight_g = weight_norm_reparam(weight, dim=0)
        else:
            self.weight = Parameter(weight)
        self.bias = Parameter(np.zeros(out_channels, dtype=dtype))
        self.in_channels, self.out_channels = in_channels, out_channels
        self.kernel_size, self.stride, self.padding = kernel_size, stride, padding
        self.dilation, self.groups, self.pad_mode = dilation, groups, pad_mode

    def effective_weight(self):
        if self.weight_norm:
            return weight_norm_effective(self.weight_v, self.weight_g, dim=0)
        return self.weight

    def forward(self, x):
        w = self.effective_weight()
        padding = self.padding
        if self.pad_mode == "reflect" and padding:
            x = F.pad_reflect(x, padding)
            padding = 0
        return F.conv1d(x, w, self.bias, stride=self.stride, padding=padding,
                        dilation=self.dilation, groups=self.groups)

    def output_length(self, length):
        return F.conv1d_output_length(length, self.kernel_size, self.stride,
                                      self.padding, self.dilation)


class ConvTranspose1d(Module):
    """Weight-normalised transposed convolution (normalised per output channel)."""

    def __init__(self, in_channels, out_channels, kernel_size, stride=1, padding=0,
                 rng=None, weight_norm=True):
        if kernel_size < stride:
            raise F.ConfigurationError(
                f"kernel {kernel_size} < stride {stride} risks checkerboard artifacts"
            )
        rng = rng if rng is not None else np.random.default_rng(0)
        dtype = get_default_dtype()
        weight = _normal(rng, (in_channels, out_channels, kernel_size), dtype)
        self.weight_norm = weight_norm
        if weight_norm:
            self.weight_v, self.weight_g = weight_norm_reparam(weight, dim=1)
        else:
            self.weight = Parameter(weight)
        self.bias = Parameter(np.zeros(out_channels, dtype=dtype))
        self.kernel_size, self.stride, self.padding = kernel_size, stride, padding

    def effective_weight(self):
        if self.weight_norm:
            return weight_norm_effective(self.weight_v, self.weight_g, dim=1)
        return self.weight

    def forward(self, x):
        return F.conv_transpose1d(x, self.effective_weight(), self.bias,
                                  stride=self.stride, padding=self.padding)
