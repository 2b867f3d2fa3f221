"""
MixMatch batch construction: label guessing, sharpening and mixup.

Guessed labels are constants; gradients never flow through them.
"""
import logging
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from ns3l_lab.classifier.mlp import Params, predict_probs
from ns3l_lab.data.augment import augment
from ns3l_lab.diffcore import Tape
from ns3l_lab.errors import DomainError, ShapeError
from ns3l_lab.models.config import MixMatchConfig

LOG = logging.getLogger(__name__)


@dataclass(frozen=True)
class MixedSet:
    x: np.ndarray
    y: np.ndarray


def sharpen(p: np.ndarray, E: float) -> np.ndarray:
    """``p_k^(1/E) / sum_j p_j^(1/E)`` row-wise."""
    if E <= 0.0:
        raise DomainError(f'sharpening temperature must be > 0, got {E}')
    p = np.asarray(p, dtype=np.float64)
    scaled = np.power(p / p.max(axis=-1, keepdims=True), 1.0 / E)
    return scaled / scaled.sum(axis=-1, keepdims=True)


def _guess_from_copies(tape: Tape, params: Params, copies: List[np.ndarray], E: float) -> int:
    total = None
    for copy in copies:
        probs = predict_probs(params, copy, tape)
        total = probs if total is None else tape.add(total, probs)
    average = tape.stop_gradient(tape.scale(total, 1.0 / len(copies)))
    return tape.row_softmax(tape.scale(tape.log(tape.clamp_min(average, 1e-300)), 1.0 / E))


def guess_label(
    tape: Tape,
    params: Params,
    x_u: np.ndarray,
    A: int,
    E: float,
    rng: np.random.Generator,
    noise_sigma: float = 0.1,
) -> int:
    """
    Sharpened average prediction over ``A`` augmented copies of each row.

    Returns:
        int: Node holding the guessed labels; no gradient reaches ``params`` through it.
    """
    if A < 1:
        raise DomainError(f'A must be >= 1, got {A}')
    copies = [augment(x_u, rng, noise_sigma) for _ in range(A)]
    return _guess_from_copies(tape, params, copies, E)


def fold_mixup_lambda(lam):
    return np.maximum(lam, 1.0 - lam)


def sample_mixup_lambda(alpha: float, rng: np.random.Generator, size: Optional[int] = None):
    """Beta(alpha, alpha) draws folded onto [0.5, 1]; a float when ``size`` is None."""
    if alpha <= 0.0:
        raise DomainError(f'alpha must be > 0, got {alpha}')
    first = np.asarray(rng.gamma(alpha, 1.0, size=size))
    second = np.asarray(rng.gamma(alpha, 1.0, size=size))
    total = first + second
    # both gammas underflow to 0 for tiny alpha
    lam = np.where(total > 0.0, first / np.where(total > 0.0, total, 1.0), 0.5)
    folded = fold_mixup_lambda(lam)
    return float(folded) if size is None else folded


def mixup_pair(
    x1: np.ndarray, y1: np.ndarray, x2: np.ndarray, y2: np.ndarray, lam: float
) -> Tuple[np.ndarray, np.ndarray]:
    if np.shape(x1) != np.shape(x2) or np.shape(y1) != np.shape(y2):
        raise ShapeError(f'mixup operands differ: {np.shape(x1)}/{np.shape(x2)}, {np.shape(y1)}/{np.shape(y2)}')
    if not 0.5 <= lam <= 1.0:
        raise DomainError(f'folded mixup coefficient must lie in [0.5, 1], got {lam}')
    return lam * x1 + (1.0 - lam) * x2, lam * y1 + (1.0 - lam) * y2


def mixmatch_batch(
    x_labeled: np.ndarray,
    y_labeled: np.ndarray,
    x_unlabeled: np.ndarray,
    params: Params,
    config: MixMatchConfig,
    rng: np.random.Generator,
    lam: Optional[float] = None,
) -> Tuple[MixedSet, MixedSet]:
    """
    Builds the mixed labeled and unlabeled sets X' and U'.

    The pooled rows are shuffled with ``rng.permutation``, which stands in for a
    Fisher-Yates shuffle of W.

    Args:
        x_labeled: Labeled inputs.
        y_labeled: One-hot (or soft) labels for ``x_labeled``.
        x_unlabeled: Unlabeled inputs.
        params: Model used to guess labels.
        config: ``E``, ``A``, ``alpha`` and the augmentation noise.
        rng: All sampling goes through this generator.
        lam: Fixed folded mixup coefficient; sampled when omitted.

    Returns:
        X' with one row per labeled sample and U' with ``A`` rows per unlabeled sample.
    """
    if len(x_labeled) == 0 or len(x_unlabeled) == 0:
        raise DomainError('MixMatch needs non-empty labeled and unlabeled batches')
    x_hat = augment(x_labeled, rng, config.noise_sigma)
    copies = [augment(x_unlabeled, rng, config.noise_sigma) for _ in range(config.A)]
    tape = Tape()
    guessed = tape.value(_guess_from_copies(tape, params, copies, config.E)).values

    u_hat = np.concatenate(copies, axis=0)
    u_targets = np.tile(guessed, (config.A, 1))
    pool_x = np.concatenate([x_hat, u_hat], axis=0)
    pool_y = np.concatenate([np.asarray(y_labeled, dtype=np.float64), u_targets], axis=0)
    order = rng.permutation(pool_x.shape[0])
    shuffled_x, shuffled_y = pool_x[order], pool_y[order]

    if lam is None:
        lam = sample_mixup_lambda(config.alpha, rng)
    n = x_hat.shape[0]
    mixed_x = mixup_pair(x_hat, y_labeled, shuffled_x[:n], shuffled_y[:n], lam)
    mixed_u = mixup_pair(u_hat, u_targets, shuffled_x[n:], shuffled_y[n:], lam)
    return MixedSet(*mixed_x), MixedSet(*mixed_u)
