"""Adam, parameter EMA, unsupervised warmup ramp and learning-rate schedule."""
import logging
import math
from dataclasses import dataclass, replace
from typing import Optional, Sequence, Tuple

import numpy as np

from ns3l_lab.classifier.mlp import Params
from ns3l_lab.errors import DomainError, NonFiniteError, ShapeError

LOG = logging.getLogger(__name__)


@dataclass(frozen=True)
class AdamState:
    m: Tuple[np.ndarray, ...]
    v: Tuple[np.ndarray, ...]
    step: int = 0
    lr: float = 6e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def with_lr(self, lr: float) -> 'AdamState':
        return replace(self, lr=lr)


def init_adam(params: Params, lr: float = 6e-4, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
    zeros = tuple(np.zeros_like(a) for a in params.arrays())
    return AdamState(m=zeros, v=zeros, step=0, lr=lr, beta1=beta1, beta2=beta2, eps=eps)


def adam_step(params: Params, grads: Sequence[np.ndarray], state: AdamState) -> Tuple[Params, AdamState]:
    """
    One bias-corrected Adam update.

    Args:
        params: Current parameters.
        grads: Gradients in ``Params.arrays()`` order.
        state: Moments, step count and hyperparameters.

    Returns:
        Tuple[Params, AdamState]: New parameters and state; inputs are left untouched.
    """
    arrays = params.arrays()
    if len(grads) != len(arrays) or any(g.shape != a.shape for g, a in zip(grads, arrays)):
        raise ShapeError('gradient shapes do not match the parameters')
    if not all(np.all(np.isfinite(g)) for g in grads):
        raise NonFiniteError('non-finite gradient passed to adam_step')
    step = state.step + 1
    correction1 = 1.0 - state.beta1**step
    correction2 = 1.0 - state.beta2**step
    new_arrays, new_m, new_v = [], [], []
    for theta, g, m, v in zip(arrays, grads, state.m, state.v):
        m = state.beta1 * m + (1.0 - state.beta1) * g
        v = state.beta2 * v + (1.0 - state.beta2) * g * g
        update = state.lr * (m / correction1) / (np.sqrt(v / correction2) + state.eps)
        new_arrays.append(theta - update)
        new_m.append(m)
        new_v.append(v)
    new_state = replace(state, m=tuple(new_m), v=tuple(new_v), step=step)
    return Params.from_arrays(params.spec, new_arrays), new_state


@dataclass(frozen=True)
class EMAState:
    shadow: Params
    decay: float = 0.999

    def __post_init__(self):
        if not 0.0 <= self.decay < 1.0:
            raise DomainError(f'EMA decay must lie in [0, 1), got {self.decay}')


def ema_update(ema: EMAState, params: Params) -> EMAState:
    """``shadow <- decay * shadow + (1 - decay) * params``."""
    mixed = [
        ema.decay * shadow + (1.0 - ema.decay) * current
        for shadow, current in zip(ema.shadow.arrays(), params.arrays())
    ]
    return EMAState(shadow=Params.from_arrays(params.spec, mixed), decay=ema.decay)


def warmup_weight(t: float, warmup_steps: int) -> float:
    """Sigmoid-shaped ramp ``exp(-5 (1 - min(t / warmup_steps, 1))^2)``."""
    if t < 0:
        raise DomainError(f'step must be >= 0, got {t}')
    if warmup_steps <= 0:
        return 1.0
    phase = 1.0 - min(t / warmup_steps, 1.0)
    return math.exp(-5.0 * phase * phase)


def learning_rate(step: int, base_lr: float, decay_step: Optional[int] = None, factor: float = 0.1) -> float:
    if decay_step is not None and step >= decay_step:
        return base_lr * factor
    return base_lr
