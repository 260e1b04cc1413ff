"""Adam with bias correction."""

from dataclasses import dataclass, field

import numpy as np

DEFAULT_LR = 1e-4
DEFAULT_BETAS = (0.5, 0.9)
DEFAULT_EPS = 1e-8


class MissingGradientError(RuntimeError):
    pass


@dataclass
class AdamState:
    lr: float = DEFAULT_LR
    beta1: float = DEFAULT_BETAS[0]
    beta2: float = DEFAULT_BETAS[1]
    epsilon: float = DEFAULT_EPS
    step: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)

    @classmethod
    def for_params(cls, params, **kwargs):
        state = cls(**kwargs)
        state.m = [np.zeros_like(p.data) for p in params]
        state.v = [np.zeros_like(p.data) for p in params]
        return state


def adam_step(params, state):
    """Apply one Adam update in place to every parameter in ``params``.

    ``state.m`` / ``state.v`` are aligned with ``params`` by position and are
    allocated on the first call if empty.
    """
    params = list(params)
    for i, p in enumerate(params):
        if p.grad is None:
            label = p.name if p.name else f"#{i}"
            raise MissingGradientError(f"parameter {label} has no gradient")
    if not state.m:
        state.m = [np.zeros_like(p.data) for p in params]
        state.v = [np.zeros_like(p.data) for p in params]
    if len(state.m) != len(params):
        raise ValueError(f"optimizer state holds {len(state.m)} slots for {len(params)} params")

    state.step += 1
    b1, b2 = state.beta1, state.beta2
    correction1 = 1.0 - b1 ** state.step
    correction2 = 1.0 - b2 ** state.step
    for p, m, v in zip(params, state.m, state.v):
        g = p.grad
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        m_hat = m / correction1
        v_hat = v / correction2
        p.data = p.data - state.lr * m_hat / (np.sqrt(v_hat) + state.epsilon)
    return params
