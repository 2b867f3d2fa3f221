"""Negative-label masks and the selection strategies that need no geometry."""
import logging
from dataclasses import dataclass
from typing import Union

import numpy as np

from ns3l_lab.errors import DomainError, NegativeSetError, ShapeError

LOG = logging.getLogger(__name__)


@dataclass(frozen=True)
class NegativeLabelMask:
    """B x K boolean matrix; ``mask[b, k]`` marks class k as a negative label of row b."""

    mask: np.ndarray

    def __post_init__(self):
        mask = np.array(self.mask, dtype=bool)
        if mask.ndim != 2:
            raise ShapeError(f'negative-label mask must be 2-D, got shape {mask.shape}')
        if mask.shape[1] and np.any(mask.all(axis=1)):
            raise NegativeSetError('negative set covers all classes')
        mask.flags.writeable = False
        object.__setattr__(self, 'mask', mask)

    @property
    def counts(self) -> np.ndarray:
        return self.mask.sum(axis=1)

    @property
    def shape(self):
        return self.mask.shape

    @property
    def empty_rows(self) -> int:
        return int(np.sum(self.counts == 0))


MaskLike = Union[NegativeLabelMask, np.ndarray]


def as_mask_array(mask: MaskLike) -> np.ndarray:
    return mask.mask if isinstance(mask, NegativeLabelMask) else np.asarray(mask, dtype=bool)


def check_negative_count(P: int, num_classes: int) -> None:
    if not 1 <= P <= num_classes - 1:
        raise DomainError(f'P must be in [1, {num_classes - 1}] for K={num_classes}, got {P}')


def threshold_mask(mu: np.ndarray, T: float) -> NegativeLabelMask:
    """Marks every class whose probability is below ``T``; never marks all of a row."""
    if not 0.0 < T < 1.0:
        raise DomainError(f'threshold T must lie in (0, 1), got {T}')
    mu = np.asarray(mu, dtype=np.float64)
    if mu.ndim != 2:
        raise ShapeError(f'probabilities must be 2-D, got shape {mu.shape}')
    mask = mu < T
    full = mask.all(axis=1)
    if np.any(full):
        rows = np.flatnonzero(full)
        mask[rows, np.argmax(mu[rows], axis=1)] = False
        LOG.debug('threshold guard deselected the argmax class on %d rows', rows.size)
    return NegativeLabelMask(mask)


def _first_by_keys(keys: np.ndarray, P: int) -> np.ndarray:
    order = np.argsort(keys, axis=1, kind='stable')[:, :P]
    mask = np.zeros(keys.shape, dtype=bool)
    np.put_along_axis(mask, order, True, axis=1)
    return mask


def uniform_mask(B: int, K: int, P: int, rng: np.random.Generator) -> NegativeLabelMask:
    """Each row gets ``P`` distinct classes drawn uniformly without replacement."""
    check_negative_count(P, K)
    return NegativeLabelMask(_first_by_keys(rng.random((B, K)), P))


def oracle_mask(true_y: np.ndarray, K: int, P: int, rng: np.random.Generator) -> NegativeLabelMask:
    """Diagnostic upper bound: ``P`` negatives drawn uniformly among the wrong classes."""
    check_negative_count(P, K)
    true_y = np.asarray(true_y, dtype=np.int64)
    keys = rng.random((true_y.size, K))
    keys[np.arange(true_y.size), true_y] = np.inf
    return NegativeLabelMask(_first_by_keys(keys, P))


def negative_label_error_rate(mask: MaskLike, true_y: np.ndarray) -> float:
    """Fraction of selected negative labels that are in fact the true class."""
    mask = as_mask_array(mask)
    selected = int(mask.sum())
    if selected == 0:
        return 0.0
    true_y = np.asarray(true_y, dtype=np.int64)
    wrong = int(mask[np.arange(true_y.size), true_y].sum())
    return wrong / selected
