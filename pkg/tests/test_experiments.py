import numpy as np
import pytest

from ns3l_lab.classifier import init_params
from ns3l_lab.data import gen_toy_1d
from ns3l_lab.experiments.gradcheck_suite import CASES, run_gradcheck_suite
from ns3l_lab.experiments.seeds import format_summary, run_seeds, summarize
from ns3l_lab.experiments.sweep import run_method_matrix, run_negselect_comparison, run_sweep
from ns3l_lab.experiments.toy import (
    ToyConfig,
    compare_gradients,
    decision_boundary,
    literal_gradients,
    mean_boundary_error,
    run_toy,
    run_toy_demo,
    trajectory_csv_text,
)
from ns3l_lab.models import ExperimentConfig, MLPSpec, NegSelectStrategy


def test_gradcheck_suite_passes():
    results = run_gradcheck_suite(seed=3, instances=3)
    assert [result.name for result in results] == list(CASES)
    for result in results:
        assert result.passed, f'{result.name}: {result.max_relative_error:.3e}'


@pytest.mark.parametrize('mu', [0.01, 0.3, 0.5, 0.99])
@pytest.mark.parametrize('x', [-0.7, 0.2])
def test_literal_gradients_oppose(mu, x):
    inductive, negative = literal_gradients(mu, x)
    assert np.sign(inductive) == -np.sign(negative)


def test_unbiased_toy_lands_near_the_true_boundary():
    run = run_toy(ToyConfig(bias=0.0, steps=400), seed=0)
    assert run.error('supervised') < 0.3
    assert run.error('ns3l') < 0.3


def test_toy_run_records_trajectories_and_gradients():
    runs = run_toy_demo(ToyConfig(steps=100, record_every=50), seeds=[0, 1])
    assert [run.seed for run in runs] == [0, 1]
    assert runs[0].trajectory == [
        (50, 'supervised', runs[0].trajectory[0][2]),
        (100, 'supervised', runs[0].trajectory[1][2]),
        (50, 'ns3l', runs[0].trajectory[2][2]),
        (100, 'ns3l', runs[0].trajectory[3][2]),
    ]
    assert runs[0].gradients.opposite
    assert 0.0 < runs[0].gradients.mu_u < 1.0
    assert trajectory_csv_text(runs).count('\n') == 9
    assert mean_boundary_error(runs, 'ns3l') >= 0.0


def test_measured_gradients_match_closed_form():
    params = init_params(MLPSpec(layer_widths=(1, 2), seed=4))
    problem = gen_toy_1d(10, 50, 0.6, np.random.default_rng(0))
    grads = compare_gradients(params, problem)
    # both losses give -(1 - mu) x for the logit gap when K = 2
    assert grads.measured_inductive == pytest.approx(-(1.0 - grads.mu_u) * grads.x_u, rel=1e-9)
    assert grads.measured_ns3l == pytest.approx(grads.measured_inductive, rel=1e-9)
    assert np.isfinite(decision_boundary(params))


def test_summary_statistics():
    mean, std = summarize([0.1, 0.2, 0.3])
    assert mean == pytest.approx(0.2)
    assert std == pytest.approx(0.1)
    assert summarize([0.25]) == (0.25, 0.0)
    assert format_summary('ns3l', [0.1, 0.2, 0.3]) == 'ns3l: test error 20.00% ± 10.00% over 3 seed(s)'


def test_parallel_seeds_match_serial(small_config):
    config = small_config.with_overrides(method='ns3l', total_steps=20, warmup_steps=5)
    serial = run_seeds(config, [0, 1], workers=1)
    parallel = run_seeds(config, [0, 1], workers=2)
    assert [r.seed for r in parallel] == [0, 1]
    assert [r.test_error for r in serial] == [r.test_error for r in parallel]


@pytest.fixture
def desk_blobs():
    return ExperimentConfig(num_classes=4, dim=8, per_class=650, n_labeled=20)


@pytest.mark.slow
def test_toy_ns3l_corrects_the_biased_boundary():
    runs = run_toy_demo(ToyConfig(gap=0.25), seeds=range(20))
    assert mean_boundary_error(runs, 'ns3l') <= 0.7 * mean_boundary_error(runs, 'supervised')
    assert all(run.gradients.opposite for run in runs)


@pytest.mark.slow
def test_blob_method_ordering(desk_blobs):
    errors = run_method_matrix(desk_blobs, seeds=range(5), methods=('supervised', 'ns3l', 'vat', 'vat+ns3l'))
    assert errors['ns3l'][0] < errors['supervised'][0]
    assert errors['vat+ns3l'][0] <= errors['vat'][0]


@pytest.mark.slow
def test_negative_selection_ordering(desk_blobs):
    strategies = (
        ('oracle-3', NegSelectStrategy.ORACLE, 3),
        ('oracle-1', NegSelectStrategy.ORACLE, 1),
        ('threshold', NegSelectStrategy.THRESHOLD, 1),
        ('uniform-3', NegSelectStrategy.UNIFORM, 3),
    )
    errors = run_negselect_comparison(desk_blobs, seeds=range(5), strategies=strategies)
    errors['supervised'] = run_method_matrix(desk_blobs, seeds=range(5), methods=('supervised',))['supervised']
    order = ['oracle-3', 'oracle-1', 'threshold', 'supervised', 'uniform-3']
    for better, worse in zip(order, order[1:]):
        assert errors[better][0] <= errors[worse][0] + errors[worse][1]


@pytest.mark.slow
def test_sweep_control_matches_supervised(desk_blobs):
    result = run_sweep(desk_blobs, seeds=range(3))
    assert len(result.cells) == 12
    slack = 2.0 * max(result.supervised[1], result.zero_weight[1], 1e-3)
    assert abs(result.zero_weight[0] - result.supervised[0]) <= slack


def test_default_toy_draws_uniform_unlabeled_points():
    run = run_toy(ToyConfig(steps=40, record_every=20), seed=5)
    assert ToyConfig().gap == 0.0
    assert run.gradients.opposite
    assert np.isfinite(run.error('supervised')) and np.isfinite(run.error('ns3l'))


@pytest.mark.slow
def test_uniform_toy_gradients_oppose_for_every_seed():
    runs = run_toy_demo(ToyConfig(), seeds=range(20))
    assert all(run.gradients.opposite for run in runs)
    assert all(0.0 < run.gradients.mu_u < 1.0 for run in runs)
