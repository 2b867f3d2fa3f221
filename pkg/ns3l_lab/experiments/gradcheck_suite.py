"""Finite-difference verification of every loss on random tiny instances."""
import logging
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from ns3l_lab.classifier.mlp import bind_flat, flatten_params, init_params, unflatten_params
from ns3l_lab.data.augment import augment
from ns3l_lab.data.split import SSLBatch
from ns3l_lab.diffcore import grad_check
from ns3l_lab.diffcore.gradcheck import ScalarFn
from ns3l_lab.losses.basic import (
    entropy_min_loss,
    ns3l_loss,
    one_hot,
    pi_consistency_loss,
    pseudo_label_loss,
    supervised_ce,
)
from ns3l_lab.losses.objective import combined_objective
from ns3l_lab.losses.vat import clean_log_probs, vat_loss, vat_perturbation
from ns3l_lab.mixmatch.objective import mixmatch_objective
from ns3l_lab.mixmatch.pipeline import mixmatch_batch
from ns3l_lab.models.config import ExperimentConfig, MixMatchConfig, MLPSpec, VATConfig
from ns3l_lab.negselect.masks import threshold_mask

LOG = logging.getLogger(__name__)

TOLERANCE = 1e-4
INSTANCES = 20

Case = Callable[[np.random.Generator], Tuple[ScalarFn, np.ndarray]]


@dataclass(frozen=True)
class GradCheckResult:
    name: str
    max_relative_error: float

    @property
    def passed(self) -> bool:
        return self.max_relative_error < TOLERANCE


def _logits(rng: np.random.Generator, rows: int = 5, classes: int = 4) -> np.ndarray:
    return rng.normal(0.0, 1.5, size=(rows, classes))


def _supervised_case(rng):
    point = _logits(rng)
    targets = one_hot(rng.integers(0, point.shape[1], size=point.shape[0]), point.shape[1])
    return (lambda tape, leaf: supervised_ce(tape, tape.row_softmax(leaf), targets)), point


def _ns3l_case(rng):
    point = _logits(rng)
    mu = np.exp(point) / np.exp(point).sum(axis=1, keepdims=True)
    mask = threshold_mask(mu, float(np.median(mu)))
    return (lambda tape, leaf: ns3l_loss(tape, tape.row_softmax(leaf), mask)), point


def _entropy_case(rng):
    return (lambda tape, leaf: entropy_min_loss(tape, tape.row_softmax(leaf))), _logits(rng)


def _pseudo_label_case(rng):
    point = _logits(rng) * 2.0
    return (lambda tape, leaf: pseudo_label_loss(tape, tape.row_softmax(leaf), 0.5)), point


def _pi_case(rng):
    point = _logits(rng)
    noise = rng.normal(0.0, 0.3, size=point.shape)

    def scalar_fn(tape, leaf):
        shifted = tape.add(leaf, tape.constant(noise))
        return pi_consistency_loss(tape, tape.row_softmax(leaf), tape.row_softmax(shifted))

    return scalar_fn, point


KINK_MARGIN = 1e-3


def _clear_of_kinks(spec: MLPSpec, flat: np.ndarray, *inputs: np.ndarray) -> bool:
    """True when no hidden pre-activation sits close enough to zero for a finite difference to cross it."""
    params = unflatten_params(flat, spec)
    weight, bias = params.weights[0].values, params.biases[0].values
    return all(np.min(np.abs(x @ weight + bias)) > KINK_MARGIN for x in inputs)


def _tiny_model(rng) -> Tuple[MLPSpec, np.ndarray]:
    spec = MLPSpec(layer_widths=(3, 5, 3), seed=int(rng.integers(2**31)))
    flat = flatten_params(init_params(spec))
    return spec, flat + rng.normal(0.0, 0.1, size=flat.size)


def _vat_case(rng):
    while True:
        spec, flat = _tiny_model(rng)
        x = rng.normal(size=(6, 3))
        params = unflatten_params(flat, spec)
        config = VATConfig(xi=1e-6, epsilon=0.5)
        r_adv = vat_perturbation(params, x, config, rng)
        if _clear_of_kinks(spec, flat, x, x + r_adv):
            break
    target = clean_log_probs(params, x)

    def scalar_fn(tape, leaf):
        bound = bind_flat(tape, leaf, spec)
        return vat_loss(tape, bound, x, config, rng, r_adv=r_adv, target_log_probs=target)

    return scalar_fn, flat


def _mixmatch_case(rng):
    config = MixMatchConfig(ns3l_T=0.05, ns3l_lambda1=2.0, lambda3=5.0)
    while True:
        spec, flat = _tiny_model(rng)
        mixed_x, mixed_u = mixmatch_batch(
            rng.normal(size=(4, 3)),
            one_hot(rng.integers(0, 3, size=4), 3),
            rng.normal(size=(4, 3)),
            unflatten_params(flat, spec),
            config,
            rng,
        )
        if _clear_of_kinks(spec, flat, mixed_x.x, mixed_u.x):
            break

    def scalar_fn(tape, leaf):
        return mixmatch_objective(tape, mixed_x, mixed_u, bind_flat(tape, leaf, spec), config, warmup=0.7).loss

    return scalar_fn, flat


def _combined_case(rng):
    config = ExperimentConfig(method='pi+ns3l', num_classes=3, n_labeled=3, T=0.3, lambda2=2.0)
    while True:
        spec, flat = _tiny_model(rng)
        batch = SSLBatch(
            x_labeled=rng.normal(size=(4, 3)),
            y_labeled=rng.integers(0, 3, size=4),
            x_unlabeled=rng.normal(size=(6, 3)),
            num_classes=3,
            labeled_index=np.arange(4),
            unlabeled_index=np.arange(6),
            _hidden_labels=rng.integers(0, 3, size=6),
        )
        seed = int(rng.integers(2**31))
        noise_rng = np.random.default_rng(seed)
        noisy = [augment(batch.x_unlabeled, noise_rng, config.pi_noise_sigma) for _ in range(2)]
        if _clear_of_kinks(spec, flat, batch.x_labeled, batch.x_unlabeled, *noisy):
            break

    def scalar_fn(tape, leaf):
        step_rng = np.random.default_rng(seed)
        return combined_objective(tape, batch, bind_flat(tape, leaf, spec), config, step_rng, warmup=0.5).loss

    return scalar_fn, flat


CASES: Dict[str, Case] = {
    'supervised_ce': _supervised_case,
    'ns3l_loss': _ns3l_case,
    'entropy_min_loss': _entropy_case,
    'pseudo_label_loss': _pseudo_label_case,
    'pi_consistency_loss': _pi_case,
    'vat_loss': _vat_case,
    'mixmatch_objective': _mixmatch_case,
    'combined_objective': _combined_case,
}


def run_gradcheck_suite(
    seed: int = 0, instances: int = INSTANCES, cases: Optional[Dict[str, Case]] = None
) -> List[GradCheckResult]:
    """Worst relative error of each loss over ``instances`` random problems."""
    cases = CASES if cases is None else cases
    rng = np.random.default_rng(seed)
    results = []
    for name, case in cases.items():
        worst = 0.0
        for _ in range(instances):
            scalar_fn, point = case(rng)
            worst = max(worst, grad_check(scalar_fn, point).max_relative_error)
        result = GradCheckResult(name=name, max_relative_error=worst)
        LOG.info('gradcheck %-20s max relative error %.3e %s', name, worst, 'ok' if result.passed else 'FAILED')
        results.append(result)
    return results
