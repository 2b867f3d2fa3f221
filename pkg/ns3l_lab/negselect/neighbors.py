"""Geometry-based negative selection against the labeled set."""
import logging
from typing import Dict, Optional

import numpy as np

from ns3l_lab.errors import DatasetError, DomainError
from ns3l_lab.negselect.masks import NegativeLabelMask, check_negative_count

LOG = logging.getLogger(__name__)

EXCLUDE_VARIANTS = {'exclude_1': 1, 'exclude_4': 4}


class NeighborIndex:
    """
    Distances from unlabeled points to the labeled set.

    Exclusion rows are memoised per unlabeled sample index when ``cache`` is on,
    since the labeled set never changes during a run.
    """

    def __init__(self, labeled_X: np.ndarray, labeled_y: np.ndarray, num_classes: int, cache: bool = True):
        self.labeled_X = np.asarray(labeled_X, dtype=np.float64)
        self.labeled_y = np.asarray(labeled_y, dtype=np.int64)
        if self.labeled_X.shape[0] == 0:
            raise DatasetError('neighbor selection needs a non-empty labeled set')
        self.num_classes = num_classes
        self.cache = cache
        self._exclusions: Dict[tuple, np.ndarray] = {}

    def distances(self, x: np.ndarray) -> np.ndarray:
        diff = np.asarray(x, dtype=np.float64)[:, None, :] - self.labeled_X[None, :, :]
        return np.sqrt(np.sum(diff * diff, axis=2))

    def _exclusion_rows(self, x: np.ndarray, distinct: int) -> np.ndarray:
        order = np.argsort(self.distances(x), axis=1, kind='stable')
        excluded = np.zeros((x.shape[0], self.num_classes), dtype=bool)
        for row, neighbors in enumerate(order):
            found = 0
            for label in self.labeled_y[neighbors]:
                if not excluded[row, label]:
                    excluded[row, label] = True
                    found += 1
                    if found == distinct:
                        break
        return excluded

    def excluded(self, x: np.ndarray, variant: str, indices: Optional[np.ndarray] = None) -> np.ndarray:
        """Classes of the nearest labeled neighbour(s) for every row of ``x``."""
        if variant not in EXCLUDE_VARIANTS:
            raise DomainError(f'unknown neighbour variant {variant!r}')
        distinct = EXCLUDE_VARIANTS[variant]
        x = np.asarray(x, dtype=np.float64)
        if not self.cache or indices is None:
            return self._exclusion_rows(x, distinct)
        out = np.zeros((x.shape[0], self.num_classes), dtype=bool)
        missing = [row for row, index in enumerate(indices) if (variant, int(index)) not in self._exclusions]
        if missing:
            fresh = self._exclusion_rows(x[missing], distinct)
            for row, excluded_row in zip(missing, fresh):
                self._exclusions[(variant, int(indices[row]))] = excluded_row
        for row, index in enumerate(indices):
            out[row] = self._exclusions[(variant, int(index))]
        return out

    def class_distances(self, x: np.ndarray) -> np.ndarray:
        """Distance from each row to the closest labeled sample of every class."""
        distances = self.distances(x)
        out = np.empty((distances.shape[0], self.num_classes))
        for label in range(self.num_classes):
            members = self.labeled_y == label
            if not np.any(members):
                raise DatasetError(f'class {label} has no labeled samples')
            out[:, label] = distances[:, members].min(axis=1)
        return out


def _resolve_index(
    labeled_X: Optional[np.ndarray],
    labeled_y: Optional[np.ndarray],
    num_classes: Optional[int],
    index: Optional[NeighborIndex],
) -> NeighborIndex:
    if index is not None:
        return index
    labeled_y = np.asarray(labeled_y, dtype=np.int64)
    if num_classes is None:
        num_classes = int(labeled_y.max()) + 1 if labeled_y.size else 0
    return NeighborIndex(labeled_X, labeled_y, num_classes, cache=False)


def nn_exclude_mask(
    x_unlabeled: np.ndarray,
    labeled_X: Optional[np.ndarray],
    labeled_y: Optional[np.ndarray],
    P: int,
    variant: str,
    rng: np.random.Generator,
    num_classes: Optional[int] = None,
    index: Optional[NeighborIndex] = None,
    indices: Optional[np.ndarray] = None,
) -> NegativeLabelMask:
    """
    ``P`` negatives drawn uniformly among the classes not held by the nearest labeled neighbours.

    ``exclude_1`` removes the class of the single nearest labeled sample; ``exclude_4`` walks
    neighbours by increasing distance (ties by lowest labeled index) until four distinct classes
    are removed. A prebuilt ``index`` replaces ``labeled_X``/``labeled_y`` and enables caching
    by unlabeled sample ``indices``.
    """
    index = _resolve_index(labeled_X, labeled_y, num_classes, index)
    check_negative_count(P, index.num_classes)
    excluded = index.excluded(x_unlabeled, variant, indices)
    available = (~excluded).sum(axis=1)
    if np.any(available < P):
        raise DomainError(f'only {int(available.min())} candidate classes left, cannot select P={P}')
    keys = rng.random(excluded.shape)
    keys[excluded] = np.inf
    order = np.argsort(keys, axis=1, kind='stable')[:, :P]
    mask = np.zeros(excluded.shape, dtype=bool)
    np.put_along_axis(mask, order, True, axis=1)
    return NegativeLabelMask(mask)


def furthest_class_mask(
    x_unlabeled: np.ndarray,
    labeled_X: Optional[np.ndarray],
    labeled_y: Optional[np.ndarray],
    rng: np.random.Generator,
    num_classes: Optional[int] = None,
    index: Optional[NeighborIndex] = None,
) -> NegativeLabelMask:
    """The class whose closest labeled sample is furthest away; exact ties broken at random."""
    index = _resolve_index(labeled_X, labeled_y, num_classes, index)
    class_distances = index.class_distances(x_unlabeled)
    best = class_distances.max(axis=1, keepdims=True)
    keys = np.where(class_distances == best, rng.random(class_distances.shape), np.inf)
    mask = np.zeros(class_distances.shape, dtype=bool)
    mask[np.arange(mask.shape[0]), np.argmin(keys, axis=1)] = True
    return NegativeLabelMask(mask)
