"""
Datasets: synthetic generators and the CSV codec.

CSV layout is a header ``label,f0,f1,...`` followed by one sample per row.
"""
import csv
import io
import logging
import os
from dataclasses import dataclass
from typing import List

import numpy as np

from ns3l_lab.errors import DatasetError
from ns3l_lab.utils.config_io import write_text_atomic

LOG = logging.getLogger(__name__)


@dataclass(frozen=True)
class Dataset:
    X: np.ndarray
    y: np.ndarray
    num_classes: int
    provenance: str = ''

    def __post_init__(self):
        X = np.array(self.X, dtype=np.float64)
        y = np.array(self.y, dtype=np.int64)
        if X.ndim != 2:
            raise DatasetError(f'features must be 2-D, got shape {X.shape}')
        if y.shape != (X.shape[0],):
            raise DatasetError(f'{y.size} labels for {X.shape[0]} samples')
        if y.size and (y.min() < 0 or y.max() >= self.num_classes):
            raise DatasetError(f'labels must lie in [0, {self.num_classes})')
        if not np.all(np.isfinite(X)):
            raise DatasetError('features contain non-finite values')
        X.flags.writeable = False
        y.flags.writeable = False
        object.__setattr__(self, 'X', X)
        object.__setattr__(self, 'y', y)

    def __len__(self) -> int:
        return int(self.X.shape[0])

    @property
    def dim(self) -> int:
        return int(self.X.shape[1])

    def subset(self, indices: np.ndarray) -> 'Dataset':
        return Dataset(self.X[indices], self.y[indices], self.num_classes, self.provenance)


@dataclass(frozen=True)
class ToyProblem:
    """1-D two-class problem whose true boundary sits at ``w_star``."""

    labeled: Dataset
    unlabeled: Dataset
    w_star: float = 0.0


def _uniform_sides(n: int, gap: float, rng: np.random.Generator) -> np.ndarray:
    side = np.where(rng.random(n) < 0.5, -1.0, 1.0)
    return side * rng.uniform(gap, 1.0, size=n)


def gen_toy_1d(
    n_labeled: int,
    n_unlabeled: int,
    bias: float,
    rng: np.random.Generator,
    gap: float = 0.0,
    offset: float = 0.0,
) -> ToyProblem:
    """
    Generates the 1-D toy with biased labeled samples.

    Class 1 lies left of w* = 0 and class 0 to the right. Unlabeled points are
    uniform on either side of w*, outside ``(-gap, gap)``; ``gap=0`` is plain
    Uniform(-1, 1). Labeled class-1 points come from (-1, -max(bias, gap)) and
    class-0 points from (max(gap, bias * offset), 1), so a positive ``bias``
    drags a purely supervised boundary to the left of w*.
    """
    if not 0.0 <= bias < 1.0:
        raise DatasetError(f'bias must lie in [0, 1), got {bias}')
    if not 0.0 <= gap < 1.0 or not 0.0 <= offset <= 1.0:
        raise DatasetError('gap must lie in [0, 1) and offset in [0, 1]')
    n_left = n_labeled // 2
    left = rng.uniform(-1.0, -max(bias, gap), size=n_left)
    right = rng.uniform(max(gap, bias * offset), 1.0, size=n_labeled - n_left)
    x_labeled = np.concatenate([left, right])
    y_labeled = np.concatenate([np.ones(n_left, dtype=np.int64), np.zeros(n_labeled - n_left, dtype=np.int64)])
    x_unlabeled = _uniform_sides(n_unlabeled, gap, rng)
    y_unlabeled = (x_unlabeled < 0.0).astype(np.int64)
    provenance = f'toy1d(bias={bias}, gap={gap})'
    return ToyProblem(
        labeled=Dataset(x_labeled[:, None], y_labeled, 2, provenance),
        unlabeled=Dataset(x_unlabeled[:, None], y_unlabeled, 2, provenance),
        w_star=0.0,
    )


def simplex_vertices(K: int, d: int, separation: float = 2.0) -> np.ndarray:
    """K points in d >= K-1 dims with all pairwise distances equal to ``separation``."""
    if K < 2:
        raise DatasetError(f'need K >= 2 classes, got {K}')
    if d < K - 1:
        raise DatasetError(f'{K} equidistant centers need d >= {K - 1}, got d={d}')
    centered = np.eye(K) - 1.0 / K
    _, _, vt = np.linalg.svd(centered)
    coords = centered @ vt[: K - 1].T * (separation / np.sqrt(2.0))
    centers = np.zeros((K, d))
    centers[:, : K - 1] = coords
    return centers


def gen_blobs(
    K: int,
    per_class: int,
    d: int,
    spread: float,
    rng: np.random.Generator,
    separation: float = 2.0,
) -> Dataset:
    """Gaussian clusters of std ``spread`` around the vertices of a regular simplex."""
    centers = simplex_vertices(K, d, separation)
    y = np.repeat(np.arange(K), per_class)
    X = centers[y] + spread * rng.standard_normal((y.size, d))
    order = rng.permutation(y.size)
    return Dataset(X[order], y[order], K, f'blobs(K={K}, d={d}, spread={spread})')


def load_csv_dataset(path: str) -> Dataset:
    """Reads ``label,f0,f1,...`` rows; K is the largest label plus one."""
    if not os.path.isfile(path):
        raise DatasetError(f'dataset file not found: {path}')
    with open(path, newline='', encoding='utf-8') as handle:
        rows = list(csv.reader(handle))
    if not rows:
        raise DatasetError(f'{path}: empty file')
    header = [cell.strip() for cell in rows[0]]
    expected = ['label'] + [f'f{i}' for i in range(len(header) - 1)]
    if len(header) < 2 or header != expected:
        raise DatasetError(f'{path}, line 1: header must be "label,f0,f1,...", got {",".join(header)!r}')
    features: List[List[float]] = []
    labels: List[int] = []
    for line_number, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise DatasetError(f'{path}, line {line_number}: expected {len(header)} columns, found {len(row)}')
        try:
            label = int(row[0])
        except ValueError as e:
            raise DatasetError(f'{path}, line {line_number}: label {row[0]!r} is not an integer') from e
        if label < 0:
            raise DatasetError(f'{path}, line {line_number}: negative label {label}')
        values = []
        for column, cell in zip(header[1:], row[1:]):
            try:
                values.append(float(cell))
            except ValueError as e:
                raise DatasetError(f'{path}, line {line_number}, column {column}: {cell!r} is not a number') from e
        labels.append(label)
        features.append(values)
    if not labels:
        raise DatasetError(f'{path}: no samples after the header')
    LOG.info('Loaded %d samples with %d features from %s', len(labels), len(header) - 1, path)
    return Dataset(np.array(features), np.array(labels), max(labels) + 1, f'csv:{path}')


def save_csv_dataset(dataset: Dataset, path: str) -> None:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator='\n')
    writer.writerow(['label'] + [f'f{i}' for i in range(dataset.dim)])
    for label, features in zip(dataset.y, dataset.X):
        writer.writerow([int(label)] + [repr(float(value)) for value in features])
    write_text_atomic(path, buffer.getvalue())
