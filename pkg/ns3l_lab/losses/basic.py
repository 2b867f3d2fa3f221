"""
Loss terms on class probabilities recorded on a tape.

Every function takes node ids of a ``Tape`` and returns the id of a scalar
node, so terms compose freely and stay differentiable w.r.t. whatever
produced the probabilities.
"""
import logging
from typing import Union

import numpy as np

from ns3l_lab.diffcore import Tape
from ns3l_lab.errors import DomainError, NegativeSetError, ShapeError
from ns3l_lab.negselect.masks import MaskLike, as_mask_array

LOG = logging.getLogger(__name__)

CE_FLOOR = 1e-12
NS3L_FLOOR = 1e-7

Targets = Union[int, np.ndarray]


def one_hot(labels: np.ndarray, num_classes: int) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.int64)
    out = np.zeros((labels.size, num_classes))
    out[np.arange(labels.size), labels] = 1.0
    return out


def _rows(tape: Tape, mu: int, op: str) -> int:
    shape = tape.value(mu).shape
    if len(shape) != 2:
        raise ShapeError(f'{op}: probabilities must be 2-D, got shape {shape}')
    if shape[0] == 0:
        raise DomainError(f'{op}: empty batch')
    return shape[0]


def _targets(tape: Tape, mu: int, targets: Targets, op: str) -> int:
    node = tape.as_node(targets)
    if tape.value(node).shape != tape.value(mu).shape:
        raise ShapeError(f'{op}: targets {tape.value(node).shape} vs probabilities {tape.value(mu).shape}')
    return node


def _negative_mean_dot(tape: Tape, targets: int, mu: int, n: int) -> int:
    log_mu = tape.log(tape.clamp_min(mu, CE_FLOOR))
    return tape.scale(tape.sum(tape.mul(targets, log_mu)), -1.0 / n)


def supervised_ce(tape: Tape, mu: int, y: Targets) -> int:
    """Mean cross-entropy against one-hot or soft targets; probabilities are floored at 1e-12."""
    n = _rows(tape, mu, 'supervised_ce')
    return _negative_mean_dot(tape, _targets(tape, mu, y, 'supervised_ce'), mu, n)


def ns3l_loss(tape: Tape, mu: int, mask: MaskLike) -> int:
    """
    Negative-sampling loss ``-(1/B) sum_b log(1 - sum_{k in mask_b} mu_bk)``.

    Args:
        tape: Tape holding ``mu``.
        mu: Node of B x K class probabilities.
        mask: B x K negative-label selection.

    Returns:
        int: Scalar node. Rows with an empty mask contribute exactly 0; the
        remaining mass is floored at 1e-7 before the log.
    """
    n = _rows(tape, mu, 'ns3l_loss')
    mask = as_mask_array(mask)
    if mask.shape != tape.value(mu).shape:
        raise ShapeError(f'ns3l_loss: mask {mask.shape} vs probabilities {tape.value(mu).shape}')
    if np.any(mask.all(axis=1)):
        raise NegativeSetError('negative set covers all classes')
    selected = tape.row_sum(tape.mul(tape.constant(mask.astype(np.float64)), mu))
    remaining = tape.sub(tape.constant(np.ones((n, 1))), selected)
    return tape.scale(tape.sum(tape.log(tape.clamp_min(remaining, NS3L_FLOOR))), -1.0 / n)


def entropy_min_loss(tape: Tape, mu: int) -> int:
    """Mean prediction entropy."""
    n = _rows(tape, mu, 'entropy_min_loss')
    return _negative_mean_dot(tape, mu, mu, n)


def pseudo_label_loss(tape: Tape, mu: int, tau: float) -> int:
    """
    Cross-entropy against the argmax class of rows whose top probability reaches ``tau``.

    The mean runs over the whole batch; rows below ``tau`` contribute 0.
    """
    if not 0.0 < tau < 1.0:
        raise DomainError(f'pseudo-label threshold must lie in (0, 1), got {tau}')
    n = _rows(tape, mu, 'pseudo_label_loss')
    values = tape.value(mu).values
    winners = np.argmax(values, axis=1)
    confident = values[np.arange(n), winners] >= tau
    targets = one_hot(winners, values.shape[1]) * confident[:, None]
    return _negative_mean_dot(tape, tape.constant(targets), mu, n)


def _mean_squared(tape: Tape, a: int, b: int, op: str) -> int:
    if tape.value(a).shape != tape.value(b).shape:
        raise ShapeError(f'{op}: shapes {tape.value(a).shape} and {tape.value(b).shape} differ')
    _rows(tape, a, op)
    return tape.mean(tape.square(tape.sub(a, b)))


def pi_consistency_loss(tape: Tape, mu_a: int, mu_b: int) -> int:
    """Mean squared difference between two stochastic predictions of the same inputs."""
    return _mean_squared(tape, mu_a, mu_b, 'pi_consistency_loss')


def brier_loss(tape: Tape, mu: int, targets: Targets) -> int:
    """Squared error to (soft) targets, averaged over rows and classes."""
    return _mean_squared(tape, mu, _targets(tape, mu, targets, 'brier_loss'), 'brier_loss')


def kl_divergence_rows(tape: Tape, target_log_probs: int, log_probs: int) -> int:
    """Mean over rows of KL(p || q) given log p (treated as fixed) and log q."""
    n = _rows(tape, log_probs, 'kl_divergence_rows')
    target = tape.stop_gradient(target_log_probs)
    divergence = tape.mul(tape.exp(target), tape.sub(target, log_probs))
    return tape.scale(tape.sum(divergence), 1.0 / n)
