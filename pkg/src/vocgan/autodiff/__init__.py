"""Reverse-mode automatic differentiation for 1-D convolutional networks."""

from . import functional
from .checkpoint import CheckpointError, CheckpointVersionError, load_checkpoint, save_checkpoint
from .functional import ConfigurationError, ShapeError
from .gradcheck import gradcheck, numerical_grad, relative_error
from .nn import (
    Conv1d,
    ConvTranspose1d,
    Module,
    Parameter,
    weight_norm_effective,
    weight_norm_reparam,
)
from .optim import AdamState, MissingGradientError, adam_step
from .tensor import (
    Function,
    Tensor,
    default_dtype,
    get_default_dtype,
    is_grad_enabled,
    no_grad,
    set_default_dtype,
)

__all__ = [
    "AdamState", "CheckpointError", "CheckpointVersionError", "ConfigurationError",
    "Conv1d", "ConvTranspose1d", "Function", "MissingGradientError", "Module",
    "Parameter", "ShapeError", "Tensor", "adam_step", "default_dtype", "functional",
    "get_default_dtype", "gradcheck", "is_grad_enabled", "load_checkpoint", "no_grad",
    "numerical_grad", "relative_error", "save_checkpoint", "set_default_dtype",
    "weight_norm_effective", "weight_norm_reparam",
]
