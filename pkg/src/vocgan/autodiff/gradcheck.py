"""Central finite-difference gradient checking."""

import numpy as np

from .tensor import Tensor


def numerical_grad(fn, inputs, index, eps=1e-6, positions=None):
    """Central-difference gradient of scalar ``fn(*inputs)`` w.r.t. ``inputs[index]``.

    When ``positions`` (flat indices) is given, only those entries are probed
    and a 1-D array of partial derivatives is returned.
    """
    target = inputs[index]
    flat = target.data.reshape(-1)
    probe = range(flat.size) if positions is None else positions
    out = np.zeros(len(probe) if positions is not None else flat.size)
    for j, pos in enumerate(probe):
        orig = flat[pos]
        flat[pos] = orig + eps
        plus = float(fn(*inputs).data)
        flat[pos] = orig - eps
        minus = float(fn(*inputs).data)
        flat[pos] = orig
        out[j] = (plus - minus) / (2 * eps)
    return out if positions is not None else out.reshape(target.shape)


def relative_error(analytic, numeric):
    analytic, numeric = np.asarray(analytic, float), np.asarray(numeric, float)
    scale = max(np.linalg.norm(analytic), np.linalg.norm(numeric), 1e-12)
    return float(np.linalg.norm(analytic - numeric) / scale)


def gradcheck(fn, inputs, eps=1e-6):
    """Return the relative error for every input that requires grad.

    ``inputs`` must be 64-bit tensors; ``fn`` maps them to a scalar tensor.
    """
    for t in inputs:
        t.grad = None
    fn(*inputs).backward()
    errors = []
    for i, t in enumerate(inputs):
        if not (isinstance(t, Tensor) and t.requires_grad):
            continue
        numeric = numerical_grad(fn, inputs, i, eps)
        errors.append(relative_error(t.grad, numeric))
    return errors
