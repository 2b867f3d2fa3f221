"""
Training loop: sample a batch, record the objective, back-propagate, step Adam,
update the EMA and periodically evaluate.
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
from tqdm import tqdm

from ns3l_lab import settings
from ns3l_lab.classifier.mlp import Params, bind_params, gradients_for, init_params, probabilities
from ns3l_lab.data.datasets import Dataset, gen_blobs, gen_toy_1d, load_csv_dataset
from ns3l_lab.data.split import BatchSampler, SSLSplit, split_labeled_unlabeled
from ns3l_lab.diffcore import Tape, backward
from ns3l_lab.errors import DatasetError, NonFiniteError, TrainingDivergedError
from ns3l_lab.losses.basic import one_hot
from ns3l_lab.losses.objective import ObjectiveResult, combined_objective
from ns3l_lab.mixmatch import mixmatch_batch, mixmatch_objective
from ns3l_lab.models.config import DatasetKind, ExperimentConfig, NegSelectStrategy
from ns3l_lab.negselect import NegativeSelector, NeighborIndex, negative_label_error_rate
from ns3l_lab.training.optim import EMAState, adam_step, ema_update, init_adam, learning_rate, warmup_weight
from ns3l_lab.utils.metrics import MetricsLog

LOG = logging.getLogger(__name__)

MEDIAN_WINDOW = 20


@dataclass
class TrainResult:
    seed: int
    metrics: MetricsLog
    params: Params
    ema_params: Params
    best_params: Params
    best_step: int
    best_valid_error: float
    test_error: float
    final_test_error: float
    final_test_error_ema: float
    median_test_error: float
    test_history: List[float] = field(default_factory=list)


def evaluate(params: Params, X: np.ndarray, y: np.ndarray) -> float:
    """Fraction of argmax misclassifications (ties go to the lowest class index)."""
    X = np.asarray(X, dtype=np.float64)
    if X.shape[0] == 0:
        raise DatasetError('cannot evaluate on an empty slice')
    predictions = np.argmax(probabilities(params, X), axis=1)
    return float(np.mean(predictions != np.asarray(y)))


def _toy_dataset(config: ExperimentConfig, rng: np.random.Generator) -> Tuple[Dataset, SSLSplit]:
    spec = config.dataset_spec()
    problem = gen_toy_1d(config.n_labeled, spec.toy_unlabeled, spec.toy_bias, rng, spec.toy_gap, spec.toy_offset)
    held_out = gen_toy_1d(0, 2 * spec.toy_eval_points, 0.0, rng, gap=0.0).unlabeled
    X = np.concatenate([problem.labeled.X, problem.unlabeled.X, held_out.X])
    y = np.concatenate([problem.labeled.y, problem.unlabeled.y, held_out.y])
    bounds = np.cumsum([len(problem.labeled), len(problem.unlabeled), spec.toy_eval_points])
    index = np.arange(y.size)
    split = SSLSplit(
        labeled=index[: bounds[0]],
        unlabeled=index[bounds[0]:bounds[1]],
        validation=index[bounds[1]:bounds[2]],
        test=index[bounds[2]:],
    )
    return Dataset(X, y, 2, problem.labeled.provenance), split


def build_experiment_data(config: ExperimentConfig) -> Tuple[Dataset, SSLSplit]:
    """Dataset (fixed by ``dataset_seed``) and its split (varied by ``seed``)."""
    spec = config.dataset_spec()
    rng = np.random.default_rng(spec.seed)
    if spec.kind == DatasetKind.TOY1D:
        return _toy_dataset(config, np.random.default_rng([spec.seed, config.seed]))
    if spec.kind == DatasetKind.CSV:
        dataset = load_csv_dataset(spec.path)
    else:
        dataset = gen_blobs(spec.num_classes, spec.per_class, spec.dim, spec.spread, rng, spec.separation)
    split_spec = config.split_spec()
    split = split_labeled_unlabeled(
        dataset,
        split_spec.n_labeled,
        split_spec.seed,
        split_spec.valid_fraction,
        split_spec.test_fraction,
        split_spec.reserve_seed,
    )
    return dataset, split


def build_selector(config: ExperimentConfig, dataset: Dataset, split: SSLSplit) -> NegativeSelector:
    neg_config = config.negselect_config(dataset.num_classes)
    index = None
    if neg_config.strategy not in (NegSelectStrategy.THRESHOLD, NegSelectStrategy.UNIFORM, NegSelectStrategy.ORACLE):
        index = NeighborIndex(
            dataset.X[split.labeled], dataset.y[split.labeled], dataset.num_classes, cache=neg_config.nn_cache
        )
    return NegativeSelector(neg_config, dataset.num_classes, index)


def _step_objective(tape, batch, params, config, rng, warmup, selector) -> ObjectiveResult:
    if config.method.is_mixmatch:
        mm_config = config.mixmatch(batch.num_classes)
        mixed_x, mixed_u = mixmatch_batch(
            batch.x_labeled, one_hot(batch.y_labeled, batch.num_classes), batch.x_unlabeled, params, mm_config, rng
        )
        return mixmatch_objective(
            tape, mixed_x, mixed_u, params, mm_config, warmup, ns3l_warmup='ns3l' not in config.warmup_exempt
        )
    return combined_objective(tape, batch, params, config, rng, warmup, selector)


def train_run(
    config: ExperimentConfig,
    data: Optional[Tuple[Dataset, SSLSplit]] = None,
    progress: Optional[bool] = None,
) -> TrainResult:
    """
    Trains one model and tracks the best-validation checkpoint.

    Args:
        config: Complete run description; ``config.seed`` drives
            the split, the initialization and every sampling stream.
        data: Prebuilt data, built from the config when omitted.
        progress: Show a progress bar; defaults to ``settings.SHOW_PROGRESS``.

    Returns:
        TrainResult: Metrics, final raw and EMA parameters, and the test error at
        the step of lowest validation error.

    Raises:
        TrainingDivergedError: The loss or its gradient became non-finite.
    """
    dataset, split = data if data is not None else build_experiment_data(config)
    schedule = config.schedule()
    streams = np.random.SeedSequence(config.seed).spawn(3)
    labeled_rng, unlabeled_rng, objective_rng = (np.random.default_rng(s) for s in streams)
    sampler = BatchSampler(
        dataset, split, labeled_rng, config.labeled_batch, config.unlabeled_batch, unlabeled_rng=unlabeled_rng
    )
    selector = build_selector(config, dataset, split)

    params = init_params(config.mlp_spec(dataset.dim, dataset.num_classes))
    adam = init_adam(params, lr=config.lr)
    ema = EMAState(shadow=params, decay=config.ema_decay)
    X_valid, y_valid = dataset.X[split.validation], dataset.y[split.validation]
    X_test, y_test = dataset.X[split.test], dataset.y[split.test]
    if not y_valid.size or not y_test.size:
        raise DatasetError('validation and test reserves must be non-empty')

    metrics = MetricsLog()
    best: Dict[str, object] = {'step': 0, 'valid': np.inf, 'test': np.nan, 'params': params}
    test_history: List[float] = []
    show = settings.SHOW_PROGRESS if progress is None else progress
    LOG.info('Training %s (seed %d) for %d steps', config.method.value, config.seed, schedule.total_steps)

    for step in tqdm(range(1, schedule.total_steps + 1), disable=not show, desc=f'{config.method.value}'):
        lr = learning_rate(step, config.lr, schedule.lr_decay_step)
        ramp = warmup_weight(step - 1, schedule.warmup_steps)
        batch = sampler.next_batch()
        tape = Tape()
        try:
            result = _step_objective(tape, batch, params, config, objective_rng, ramp, selector)
            grads = backward(tape, result.loss)
            params, adam = adam_step(params, gradients_for(bind_params(tape, params), grads), adam.with_lr(lr))
        except NonFiniteError as e:
            LOG.error('Loss diverged at step %d: %s', step, e)
            raise TrainingDivergedError(step, str(e)) from e
        ema = ema_update(ema, params)

        if step % schedule.eval_interval and step != schedule.total_steps:
            continue
        terms = dict(result.terms)
        terms['total'] = tape.value(result.loss).item()
        if result.mask is not None and not config.method.is_mixmatch:
            terms['neg_label_error'] = negative_label_error_rate(result.mask, batch.diagnostics().hidden_labels)
        terms.update(lr=lr, warmup=ramp)
        evaluated = ema.shadow if config.eval_ema else params
        raw_valid, ema_valid = evaluate(params, X_valid, y_valid), evaluate(ema.shadow, X_valid, y_valid)
        raw_test, ema_test = evaluate(params, X_test, y_test), evaluate(ema.shadow, X_test, y_test)
        terms.update(valid_error=raw_valid, valid_error_ema=ema_valid, test_error=raw_test, test_error_ema=ema_test)
        metrics.add(step, terms)
        valid_error, test_error = (ema_valid, ema_test) if config.eval_ema else (raw_valid, raw_test)
        test_history.append(test_error)
        LOG.debug('step %d: %s', step, terms)
        if valid_error < best['valid']:
            best.update(step=step, valid=valid_error, test=test_error, params=evaluated)
            LOG.info('step %d: new best validation error %.4f (test %.4f)', step, valid_error, test_error)

    result_summary = TrainResult(
        seed=config.seed,
        metrics=metrics,
        params=params,
        ema_params=ema.shadow,
        best_params=best['params'],
        best_step=int(best['step']),
        best_valid_error=float(best['valid']),
        test_error=float(best['test']),
        final_test_error=evaluate(params, X_test, y_test),
        final_test_error_ema=evaluate(ema.shadow, X_test, y_test),
        median_test_error=float(np.median(test_history[-MEDIAN_WINDOW:])),
        test_history=test_history,
    )
    LOG.info(
        'Finished %s (seed %d): test error %.4f at best validation step %d',
        config.method.value, config.seed, result_summary.test_error, result_summary.best_step,
    )
    return result_summary
