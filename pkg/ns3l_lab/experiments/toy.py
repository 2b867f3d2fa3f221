"""
One-dimensional toy showing how NS3L corrects a boundary biased by the labeled sample.

A two-class logistic model is fit full-batch, once on the labeled points only
and once with the NS3L term on the unlabeled points, and the recovered
boundaries are compared with the true one.
"""
import csv
import io
import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from ns3l_lab.classifier.mlp import Params, bind_params, gradients_for, init_params, predict_probs, probabilities
from ns3l_lab.data.datasets import ToyProblem, gen_toy_1d
from ns3l_lab.diffcore import Tape, backward
from ns3l_lab.losses.basic import ns3l_loss, one_hot, supervised_ce
from ns3l_lab.models.config import MLPSpec
from ns3l_lab.negselect.masks import threshold_mask
from ns3l_lab.training.optim import adam_step, init_adam

LOG = logging.getLogger(__name__)

METHODS = ('supervised', 'ns3l')


@dataclass(frozen=True)
class ToyConfig:
    n_labeled: int = 20
    n_unlabeled: int = 400
    bias: float = 0.6
    gap: float = 0.0
    offset: float = 0.0
    steps: int = 2000
    lr: float = 0.05
    T: float = 0.04
    lambda1: float = 1.0
    record_every: int = 20


@dataclass(frozen=True)
class GradientComparison:
    """Per-sample gradients at one unlabeled point, as written in closed form and as measured."""

    x_u: float
    mu_u: float
    inductive: float
    ns3l: float
    measured_inductive: float
    measured_ns3l: float

    @property
    def opposite(self) -> bool:
        return np.sign(self.inductive) == -np.sign(self.ns3l) != 0


@dataclass
class ToyRun:
    seed: int
    boundaries: dict
    trajectory: List[Tuple[int, str, float]] = field(default_factory=list)
    gradients: Optional[GradientComparison] = None

    def error(self, method: str, w_star: float = 0.0) -> float:
        return abs(self.boundaries[method] - w_star)


def decision_boundary(params: Params) -> float:
    """Where the two logits of a [1, 2] logistic model cross."""
    weight, bias = params.weights[0].values, params.biases[0].values
    slope = weight[0, 1] - weight[0, 0]
    if slope == 0.0:
        return float('nan')
    return float(-(bias[0, 1] - bias[0, 0]) / slope)


def literal_gradients(mu_u: float, x_u: float) -> Tuple[float, float]:
    """``-(1 - mu) x`` for labeling x as the class, ``mu x`` for labeling it as not that class."""
    return -(1.0 - mu_u) * x_u, mu_u * x_u


def _fit(problem: ToyProblem, config: ToyConfig, seed: int, use_ns3l: bool) -> Tuple[Params, list]:
    params = init_params(MLPSpec(layer_widths=(1, 2), seed=seed))
    adam = init_adam(params, lr=config.lr)
    targets = one_hot(problem.labeled.y, 2)
    label = 'ns3l' if use_ns3l else 'supervised'
    trajectory = []
    for step in range(1, config.steps + 1):
        tape = Tape()
        loss = supervised_ce(tape, predict_probs(params, problem.labeled.X, tape), targets)
        if use_ns3l and len(problem.unlabeled):
            mu_u = predict_probs(params, problem.unlabeled.X, tape)
            mask = threshold_mask(tape.value(mu_u).values, config.T)
            loss = tape.add(loss, tape.scale(ns3l_loss(tape, mu_u, mask), config.lambda1))
        grads = backward(tape, loss)
        params, adam = adam_step(params, gradients_for(bind_params(tape, params), grads), adam)
        if step % config.record_every == 0 or step == config.steps:
            trajectory.append((step, label, decision_boundary(params)))
    return params, trajectory


def _weight_gradient(params: Params, x_u: float, negative: bool) -> float:
    """d/d(w1 - w0) of the per-sample loss for labeling x_u as class 1 (or as not class 0)."""
    tape = Tape()
    bound = bind_params(tape, params)
    mu = predict_probs(params, np.array([[x_u]]), tape)
    if negative:
        loss = ns3l_loss(tape, mu, np.array([[True, False]]))
    else:
        loss = supervised_ce(tape, mu, np.array([[0.0, 1.0]]))
    grad = backward(tape, loss)[bound.weight_ids[0]].values
    return float(grad[0, 1] - grad[0, 0]) / 2.0


def compare_gradients(params: Params, problem: ToyProblem) -> GradientComparison:
    """
    Picks the class-1 unlabeled point closest to the supervised boundary and
    compares pulling it towards class 1 against pushing it away from class 0.
    """
    candidates = problem.unlabeled.X[problem.unlabeled.y == 1, 0]
    if candidates.size == 0:
        candidates = problem.unlabeled.X[:, 0]
    x_u = float(candidates[np.argmin(np.abs(candidates - decision_boundary(params)))])
    mu_u = float(probabilities(params, np.array([[x_u]]))[0, 1])
    inductive, negative = literal_gradients(mu_u, x_u)
    return GradientComparison(
        x_u=x_u,
        mu_u=mu_u,
        inductive=inductive,
        ns3l=negative,
        measured_inductive=_weight_gradient(params, x_u, negative=False),
        measured_ns3l=_weight_gradient(params, x_u, negative=True),
    )


def run_toy(config: ToyConfig, seed: int) -> ToyRun:
    problem = gen_toy_1d(
        config.n_labeled, config.n_unlabeled, config.bias, np.random.default_rng(seed), config.gap, config.offset
    )
    supervised, trajectory = _fit(problem, config, seed, use_ns3l=False)
    negative, ns3l_trajectory = _fit(problem, config, seed, use_ns3l=True)
    run = ToyRun(
        seed=seed,
        boundaries={'supervised': decision_boundary(supervised), 'ns3l': decision_boundary(negative)},
        trajectory=trajectory + ns3l_trajectory,
        gradients=compare_gradients(supervised, problem),
    )
    LOG.info(
        'toy seed %d: |w - w*| supervised %.4f, ns3l %.4f',
        seed, run.error('supervised', problem.w_star), run.error('ns3l', problem.w_star),
    )
    return run


def run_toy_demo(config: ToyConfig, seeds: Sequence[int]) -> List[ToyRun]:
    return [run_toy(config, seed) for seed in seeds]


def mean_boundary_error(runs: Sequence[ToyRun], method: str) -> float:
    return float(np.mean([run.error(method) for run in runs]))


def trajectory_csv_text(runs: Sequence[ToyRun]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator='\n')
    writer.writerow(('seed', 'step', 'method', 'boundary'))
    for run in runs:
        for step, method, boundary in run.trajectory:
            writer.writerow((run.seed, step, method, repr(boundary)))
    return buffer.getvalue()
