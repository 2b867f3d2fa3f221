"""Fan-out of independent training runs over seeds."""
import logging
from concurrent.futures import ProcessPoolExecutor
from typing import List, Sequence, Tuple

import numpy as np

from ns3l_lab.models.config import ExperimentConfig
from ns3l_lab.training.loop import TrainResult, train_run

LOG = logging.getLogger(__name__)


def _run_one(config_data: dict) -> TrainResult:
    return train_run(ExperimentConfig.model_validate(config_data), progress=False)


def run_seeds(config: ExperimentConfig, seeds: Sequence[int], workers: int = 1) -> List[TrainResult]:
    """
    Runs ``config`` once per seed; results come back in seed order.

    Runs share nothing, so with ``workers > 1`` they execute in separate processes.
    """
    payloads = [config.with_overrides(seed=seed).model_dump(mode='json') for seed in seeds]
    if workers <= 1 or len(payloads) <= 1:
        return [_run_one(payload) for payload in payloads]
    LOG.info('Running %d seeds on %d workers', len(payloads), workers)
    with ProcessPoolExecutor(max_workers=min(workers, len(payloads))) as pool:
        return list(pool.map(_run_one, payloads))


def summarize(errors: Sequence[float]) -> Tuple[float, float]:
    """Mean and sample standard deviation (0 for a single value)."""
    values = np.asarray(errors, dtype=np.float64)
    std = float(values.std(ddof=1)) if values.size > 1 else 0.0
    return float(values.mean()), std


def format_summary(label: str, errors: Sequence[float]) -> str:
    mean, std = summarize(errors)
    return f'{label}: test error {100 * mean:.2f}% ± {100 * std:.2f}% over {len(errors)} seed(s)'
