"""Central finite-difference verification of tape gradients."""
import logging
from dataclasses import dataclass
from typing import Callable

import numpy as np

from ns3l_lab.diffcore.tape import Tape, backward
from ns3l_lab.errors import DomainError, NonFiniteError

LOG = logging.getLogger(__name__)

ScalarFn = Callable[[Tape, int], int]


@dataclass(frozen=True)
class GradCheckReport:
    analytic: np.ndarray
    numeric: np.ndarray
    max_relative_error: float

    def passed(self, tolerance: float = 1e-4) -> bool:
        return self.max_relative_error < tolerance


def _evaluate(scalar_fn: ScalarFn, point: np.ndarray) -> float:
    tape = Tape()
    leaf = tape.leaf(point)
    root = scalar_fn(tape, leaf)
    value = tape.value(root).item()
    if not np.isfinite(value):
        raise NonFiniteError('scalar function returned a non-finite value')
    return value


def grad_check(scalar_fn: ScalarFn, point: np.ndarray, h: float = 1e-5) -> GradCheckReport:
    """
    Compares the tape gradient of ``scalar_fn`` at ``point`` with central differences.

    Args:
        scalar_fn: Builds the computation on a fresh tape from the leaf id
            and returns the id of a scalar node. Must be deterministic.
        point: Where to evaluate.
        h: Finite-difference step, strictly positive.

    Returns:
        Both gradients and the worst elementwise relative error,
        measured as ``|a - n| / max(1e-8, |n|)``.
    """
    if not h > 0.0:
        raise DomainError(f'finite-difference step must be positive, got {h}')
    point = np.array(point, dtype=np.float64)
    tape = Tape()
    leaf = tape.leaf(point)
    root = scalar_fn(tape, leaf)
    analytic = backward(tape, root)[leaf].values.copy()

    numeric = np.zeros_like(point)
    flat_point = point.reshape(-1)
    flat_numeric = numeric.reshape(-1)
    for index in range(flat_point.size):
        shifted = flat_point.copy()
        shifted[index] += h
        upper = _evaluate(scalar_fn, shifted.reshape(point.shape))
        shifted[index] -= 2.0 * h
        lower = _evaluate(scalar_fn, shifted.reshape(point.shape))
        flat_numeric[index] = (upper - lower) / (2.0 * h)

    errors = np.abs(analytic - numeric) / np.maximum(1e-8, np.abs(numeric))
    worst = float(errors.max()) if errors.size else 0.0
    LOG.debug('grad_check over %d coordinates: max relative error %.3e', point.size, worst)
    return GradCheckReport(analytic=analytic, numeric=numeric, max_relative_error=worst)
