"""Sensitivity of NS3L to the threshold T and the weight lambda1, plus method comparisons."""
import csv
import io
import logging
from dataclasses import dataclass
from typing import Dict, List, Sequence, Tuple

from ns3l_lab.experiments.seeds import run_seeds, summarize
from ns3l_lab.models.config import ExperimentConfig, Method, NegSelectStrategy
from ns3l_lab.training.loop import build_experiment_data
from ns3l_lab.utils.config_io import write_text_atomic

LOG = logging.getLogger(__name__)

DEFAULT_T_GRID = (0.01, 0.02, 0.04, 0.08)
DEFAULT_LAMBDA1_GRID = (0.3, 1.0, 2.0)

DEFAULT_METHODS = ('supervised', 'pl', 'ns3l', 'vat', 'vat+entmin', 'pi', 'pi+ns3l', 'vat+ns3l')

DEFAULT_NEGSELECT = (
    ('threshold', NegSelectStrategy.THRESHOLD, 1),
    ('uniform-1', NegSelectStrategy.UNIFORM, 1),
    ('nn-exclude-1', NegSelectStrategy.NN_EXCLUDE_1, 1),
    ('nn-exclude-4', NegSelectStrategy.NN_EXCLUDE_4, 1),
    ('furthest-nn', NegSelectStrategy.FURTHEST, 1),
    ('oracle-1', NegSelectStrategy.ORACLE, 1),
    ('oracle-3', NegSelectStrategy.ORACLE, 3),
)


@dataclass(frozen=True)
class SweepCell:
    T: float
    lambda1: float
    test_error: float
    test_std: float


@dataclass(frozen=True)
class SweepResult:
    cells: List[SweepCell]
    supervised: Tuple[float, float]
    zero_weight: Tuple[float, float]

    def to_csv_text(self) -> str:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator='\n')
        writer.writerow(('T', 'lambda1', 'test_error'))
        for cell in self.cells:
            writer.writerow((repr(cell.T), repr(cell.lambda1), repr(cell.test_error)))
        return buffer.getvalue()

    def control_csv_text(self) -> str:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator='\n')
        writer.writerow(('run', 'test_error', 'test_std'))
        writer.writerow(('supervised', repr(self.supervised[0]), repr(self.supervised[1])))
        writer.writerow(('ns3l_lambda1_0', repr(self.zero_weight[0]), repr(self.zero_weight[1])))
        return buffer.getvalue()


def _errors(config: ExperimentConfig, seeds: Sequence[int], workers: int) -> Tuple[float, float]:
    return summarize([result.test_error for result in run_seeds(config, seeds, workers)])


def run_sweep(
    base: ExperimentConfig,
    seeds: Sequence[int],
    T_grid: Sequence[float] = DEFAULT_T_GRID,
    lambda1_grid: Sequence[float] = DEFAULT_LAMBDA1_GRID,
    workers: int = 1,
) -> SweepResult:
    """
    Trains NS3L on every (T, lambda1) pair and two controls: the supervised
    baseline and NS3L with lambda1 = 0.
    """
    ns3l = base.with_overrides(method=Method.NS3L.value)
    cells = []
    for T in T_grid:
        for lambda1 in lambda1_grid:
            mean, std = _errors(ns3l.with_overrides(T=T, lambda1=lambda1), seeds, workers)
            LOG.info('T=%s lambda1=%s: test error %.4f ± %.4f', T, lambda1, mean, std)
            cells.append(SweepCell(T=T, lambda1=lambda1, test_error=mean, test_std=std))
    supervised = _errors(base.with_overrides(method=Method.SUPERVISED.value), seeds, workers)
    zero_weight = _errors(ns3l.with_overrides(lambda1=0.0), seeds, workers)
    return SweepResult(cells=cells, supervised=supervised, zero_weight=zero_weight)


def write_sweep(result: SweepResult, out_dir: str) -> None:
    write_text_atomic(f'{out_dir}/sweep.csv', result.to_csv_text())
    write_text_atomic(f'{out_dir}/sweep_control.csv', result.control_csv_text())


def comparison_csv_text(errors: Dict[str, Tuple[float, float]]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator='\n')
    writer.writerow(('run', 'test_error', 'test_std'))
    for name, (mean, std) in errors.items():
        writer.writerow((name, repr(mean), repr(std)))
    return buffer.getvalue()


def run_method_matrix(
    base: ExperimentConfig, seeds: Sequence[int], methods: Sequence[str] = DEFAULT_METHODS, workers: int = 1
) -> Dict[str, Tuple[float, float]]:
    """Mean and std of the test error per method, each with its own default weights."""
    out = {}
    for method in methods:
        out[method] = _errors(base.with_overrides(method=method), seeds, workers)
        LOG.info('%s: test error %.4f ± %.4f', method, *out[method])
    return out


def _supports(strategy: NegSelectStrategy, P: int, num_classes: int) -> bool:
    if strategy == NegSelectStrategy.THRESHOLD:
        return True
    excluded = 4 if strategy == NegSelectStrategy.NN_EXCLUDE_4 else 1
    return 1 <= P <= num_classes - excluded


def run_negselect_comparison(
    base: ExperimentConfig,
    seeds: Sequence[int],
    strategies=DEFAULT_NEGSELECT,
    workers: int = 1,
) -> Dict[str, Tuple[float, float]]:
    """
    NS3L test error for each negative-label selection strategy and count P.

    Strategies the class count cannot support (e.g. nn-exclude-4 with K <= 4) are skipped.
    """
    ns3l = base.with_overrides(method=Method.NS3L.value)
    num_classes = build_experiment_data(base)[0].num_classes
    out = {}
    for name, strategy, P in strategies:
        if not _supports(strategy, P, num_classes):
            LOG.warning('Skipping %s: K=%d leaves fewer than %d candidate classes', name, num_classes, P)
            continue
        out[name] = _errors(ns3l.with_overrides(negselect=strategy.value, neg_count=P), seeds, workers)
        LOG.info('%s: test error %.4f ± %.4f', name, *out[name])
    return out
