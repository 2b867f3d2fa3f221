"""Labeled/unlabeled/validation/test partitioning and mini-batch sampling."""
import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ns3l_lab.data.datasets import Dataset
from ns3l_lab.errors import DatasetError

LOG = logging.getLogger(__name__)


@dataclass(frozen=True)
class SSLSplit:
    """Disjoint index sets into one ``Dataset``."""

    labeled: np.ndarray
    unlabeled: np.ndarray
    validation: np.ndarray
    test: np.ndarray

    def __post_init__(self):
        parts = [self.labeled, self.unlabeled, self.validation, self.test]
        joined = np.concatenate(parts)
        if np.unique(joined).size != joined.size:
            raise DatasetError('split index sets overlap')


def split_labeled_unlabeled(
    dataset: Dataset,
    n_labeled: int,
    seed: int,
    valid_fraction: float = 0.1,
    test_fraction: float = 0.1,
    reserve_seed: int = 0,
) -> SSLSplit:
    """
    Reserves validation and test samples, then draws a stratified labeled set.

    The reserves depend only on ``reserve_seed`` so they stay fixed while the
    labeled selection varies with ``seed``. Per-class labeled counts differ by at
    most one; the classes receiving the remainder are drawn at random.
    """
    K = dataset.num_classes
    if n_labeled < K:
        raise DatasetError(f'n_labeled={n_labeled} is smaller than the number of classes K={K}')
    reserve_order = np.random.default_rng(reserve_seed).permutation(len(dataset))
    n_valid = int(round(len(dataset) * valid_fraction))
    n_test = int(round(len(dataset) * test_fraction))
    validation = np.sort(reserve_order[:n_valid])
    test = np.sort(reserve_order[n_valid:n_valid + n_test])
    pool = reserve_order[n_valid + n_test:]
    if n_labeled > pool.size:
        raise DatasetError(f'n_labeled={n_labeled} exceeds the {pool.size} samples left after reserves')

    rng = np.random.default_rng(seed)
    quotas = np.full(K, n_labeled // K)
    quotas[rng.permutation(K)[: n_labeled % K]] += 1
    labeled = []
    for label in range(K):
        members = rng.permutation(np.sort(pool[dataset.y[pool] == label]))
        if members.size < quotas[label]:
            raise DatasetError(f'class {label} has {members.size} samples, {quotas[label]} labeled requested')
        labeled.append(members[: quotas[label]])
    labeled_index = np.sort(np.concatenate(labeled))
    unlabeled_index = np.sort(np.setdiff1d(pool, labeled_index))
    LOG.info(
        'Split %d samples: %d labeled, %d unlabeled, %d validation, %d test',
        len(dataset), labeled_index.size, unlabeled_index.size, validation.size, test.size,
    )
    return SSLSplit(labeled_index, unlabeled_index, validation, test)


@dataclass(frozen=True)
class BatchDiagnostics:
    hidden_labels: np.ndarray


@dataclass(frozen=True)
class SSLBatch:
    """
    One mini-batch. True labels of the unlabeled rows are kept private and only
    reachable through ``diagnostics()``.
    """

    x_labeled: np.ndarray
    y_labeled: np.ndarray
    x_unlabeled: np.ndarray
    num_classes: int
    labeled_index: np.ndarray
    unlabeled_index: np.ndarray
    _hidden_labels: np.ndarray = field(repr=False)

    @property
    def labeled_size(self) -> int:
        return int(self.x_labeled.shape[0])

    @property
    def unlabeled_size(self) -> int:
        return int(self.x_unlabeled.shape[0])

    def diagnostics(self) -> BatchDiagnostics:
        return BatchDiagnostics(hidden_labels=self._hidden_labels)


class _EpochQueue:
    """Serves indices from a pool in reshuffled passes."""

    def __init__(self, pool: np.ndarray, rng: np.random.Generator):
        self.pool = np.asarray(pool, dtype=np.int64)
        self.rng = rng
        self.order = np.empty(0, dtype=np.int64)
        self.cursor = 0

    def take(self, count: int) -> np.ndarray:
        if count and not self.pool.size:
            raise DatasetError('cannot sample from an empty index pool')
        out = []
        while count > 0:
            if self.cursor == self.order.size:
                self.order = self.rng.permutation(self.pool)
                self.cursor = 0
            chunk = self.order[self.cursor:self.cursor + count]
            self.cursor += chunk.size
            count -= chunk.size
            out.append(chunk)
        return np.concatenate(out) if out else np.empty(0, dtype=np.int64)


class BatchSampler:
    """
    Draws ``labeled_batch`` labeled and ``unlabeled_batch`` unlabeled rows per step.

    Labeled and unlabeled indices come from independent rng streams, so the
    labeled sequence never depends on the unlabeled pool.
    """

    def __init__(
        self,
        dataset: Dataset,
        split: SSLSplit,
        rng: np.random.Generator,
        labeled_batch: int = 50,
        unlabeled_batch: int = 50,
        unlabeled_rng: Optional[np.random.Generator] = None,
    ):
        if labeled_batch < 1:
            raise DatasetError('labeled batch size must be >= 1')
        self.dataset = dataset
        self.labeled_batch = labeled_batch
        self.unlabeled_batch = unlabeled_batch
        if unlabeled_rng is None:
            unlabeled_rng = np.random.default_rng(int(rng.integers(2**63)))
        self._labeled = _EpochQueue(split.labeled, rng)
        self._unlabeled = _EpochQueue(split.unlabeled, unlabeled_rng)

    def next_batch(self) -> SSLBatch:
        labeled = self._labeled.take(self.labeled_batch)
        unlabeled = self._unlabeled.take(self.unlabeled_batch) if self.unlabeled_batch else np.empty(0, np.int64)
        return SSLBatch(
            x_labeled=self.dataset.X[labeled],
            y_labeled=self.dataset.y[labeled],
            x_unlabeled=self.dataset.X[unlabeled].reshape(unlabeled.size, self.dataset.dim),
            num_classes=self.dataset.num_classes,
            labeled_index=labeled,
            unlabeled_index=unlabeled,
            _hidden_labels=self.dataset.y[unlabeled],
        )
