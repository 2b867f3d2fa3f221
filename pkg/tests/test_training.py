import math

import numpy as np
import pytest

from ns3l_lab.classifier import Params, init_params, probabilities
from ns3l_lab.data import SSLSplit
from ns3l_lab.errors import DatasetError, DomainError, NonFiniteError, ShapeError, TrainingDivergedError
from ns3l_lab.models import MLPSpec
from ns3l_lab.training import (
    EMAState,
    adam_step,
    build_experiment_data,
    ema_update,
    evaluate,
    init_adam,
    learning_rate,
    train_run,
    warmup_weight,
)


def _constant_params(spec, value):
    return Params.from_arrays(spec, [np.full_like(a, value) for a in init_params(spec).arrays()])


class TestAdam:
    def test_zero_gradient_leaves_parameters(self, tiny_params):
        state = init_adam(tiny_params, lr=0.1)
        zeros = [np.zeros_like(a) for a in tiny_params.arrays()]
        new_params, new_state = adam_step(tiny_params, zeros, state)
        for old, new in zip(tiny_params.arrays(), new_params.arrays()):
            np.testing.assert_array_equal(old, new)
        assert new_state.step == 1

    def test_first_step_moves_by_lr_against_the_sign(self, tiny_params, rng):
        grads = [rng.normal(size=a.shape) for a in tiny_params.arrays()]
        new_params, _ = adam_step(tiny_params, grads, init_adam(tiny_params, lr=0.01))
        for old, new, g in zip(tiny_params.arrays(), new_params.arrays(), grads):
            np.testing.assert_allclose(new - old, -0.01 * np.sign(g), rtol=0, atol=1e-6)

    def test_inputs_are_untouched(self, tiny_params, rng):
        before = [a.copy() for a in tiny_params.arrays()]
        state = init_adam(tiny_params)
        adam_step(tiny_params, [rng.normal(size=a.shape) for a in before], state)
        for old, now in zip(before, tiny_params.arrays()):
            np.testing.assert_array_equal(old, now)
        assert state.step == 0
        assert not any(m.any() for m in state.m)

    def test_shape_mismatch(self, tiny_params):
        with pytest.raises(ShapeError):
            adam_step(tiny_params, [np.zeros(1)], init_adam(tiny_params))

    def test_non_finite_gradient(self, tiny_params):
        grads = [np.full_like(a, np.nan) for a in tiny_params.arrays()]
        with pytest.raises(NonFiniteError):
            adam_step(tiny_params, grads, init_adam(tiny_params))


class TestEMA:
    def test_single_update(self):
        spec = MLPSpec(layer_widths=(1, 2))
        ema = EMAState(shadow=_constant_params(spec, 0.0), decay=0.99)
        updated = ema_update(ema, _constant_params(spec, 1.0))
        for array in updated.shadow.arrays():
            np.testing.assert_allclose(array, 0.01)

    def test_zero_decay_copies(self, tiny_params):
        ema = ema_update(EMAState(shadow=_constant_params(tiny_params.spec, 3.0), decay=0.0), tiny_params)
        for shadow, current in zip(ema.shadow.arrays(), tiny_params.arrays()):
            np.testing.assert_array_equal(shadow, current)

    @pytest.mark.parametrize('decay', [1.0, -0.1])
    def test_decay_range(self, tiny_params, decay):
        with pytest.raises(DomainError):
            EMAState(shadow=tiny_params, decay=decay)


class TestSchedules:
    def test_warmup_values(self):
        assert warmup_weight(0, 500) == pytest.approx(math.exp(-5.0))
        assert warmup_weight(250, 500) == pytest.approx(0.286505, abs=1e-6)
        assert warmup_weight(500, 500) == 1.0
        assert warmup_weight(900, 500) == 1.0
        assert warmup_weight(3, 0) == 1.0

    def test_warmup_is_monotone(self):
        values = [warmup_weight(t, 100) for t in range(120)]
        assert all(a <= b for a, b in zip(values, values[1:]))

    def test_learning_rate_decay(self):
        assert learning_rate(99, 0.1, decay_step=100) == 0.1
        assert learning_rate(100, 0.1, decay_step=100) == pytest.approx(0.01)
        assert learning_rate(10**6, 0.1) == 0.1


class TestEvaluate:
    def test_matches_argmax(self, tiny_params, rng):
        X = rng.normal(size=(30, 3))
        predicted = np.argmax(probabilities(tiny_params, X), axis=1)
        assert evaluate(tiny_params, X, predicted) == 0.0
        assert evaluate(tiny_params, X, (predicted + 1) % 4) == 1.0

    def test_empty_slice(self, tiny_params):
        with pytest.raises(DatasetError):
            evaluate(tiny_params, np.zeros((0, 3)), np.zeros(0))


class TestTrainRun:
    def test_is_deterministic(self, small_config):
        config = small_config.with_overrides(method='ns3l')
        first, second = train_run(config), train_run(config)
        for a, b in zip(first.params.arrays(), second.params.arrays()):
            np.testing.assert_array_equal(a, b)
        assert first.test_error == second.test_error
        assert first.metrics.rows == second.metrics.rows

    def test_metrics_are_logged_at_each_evaluation(self, small_config):
        result = train_run(small_config.with_overrides(method='ns3l'))
        assert result.metrics.steps('total') == [10, 20, 30, 40]
        for term in ('supervised', 'ns3l', 'neg_label_error', 'lr', 'warmup', 'valid_error', 'test_error_ema'):
            assert len(result.metrics.values(term)) == 4
        assert len(result.test_history) == 4
        assert 0.0 <= result.test_error <= 1.0
        assert result.best_step in (10, 20, 30, 40)

    def test_zero_weights_ignore_the_unlabeled_pool(self, small_config):
        config = small_config.with_overrides(method='vat+ns3l', lambda1=0.0, lambda2=0.0)
        dataset, split = build_experiment_data(config)
        shrunk = SSLSplit(split.labeled, split.unlabeled[:7], split.validation, split.test)
        full = train_run(config, data=(dataset, split))
        small = train_run(config, data=(dataset, shrunk))
        for a, b in zip(full.params.arrays(), small.params.arrays()):
            np.testing.assert_array_equal(a, b)

    @pytest.mark.parametrize('method', ['supervised', 'vat+ns3l', 'pi+ns3l', 'vat+pl', 'mixmatch+ns3l'])
    def test_methods_complete(self, small_config, method):
        result = train_run(small_config.with_overrides(method=method))
        assert np.isfinite(result.metrics.values('total')).all()
        assert 0.0 <= result.median_test_error <= 1.0

    def test_negative_selection_strategies_run(self, small_config):
        for strategy in ('uniform', 'nn_exclude_1', 'furthest', 'oracle'):
            result = train_run(small_config.with_overrides(method='ns3l', negselect=strategy))
            assert len(result.metrics.values('neg_label_error')) == 4

    def test_oracle_makes_no_negative_label_errors(self, small_config):
        result = train_run(small_config.with_overrides(method='ns3l', negselect='oracle'))
        assert result.metrics.values('neg_label_error') == [0.0, 0.0, 0.0, 0.0]

    def test_divergence_reports_the_step(self, small_config, monkeypatch):
        def exploding(*args, **kwargs):
            raise NonFiniteError('gradient overflow')

        monkeypatch.setattr('ns3l_lab.training.loop.adam_step', exploding)
        with pytest.raises(TrainingDivergedError) as info:
            train_run(small_config)
        assert info.value.step == 1

    def test_toy_dataset_run(self, small_config):
        config = small_config.with_overrides(dataset='toy1d', num_classes=2, dim=1, n_labeled=10, labeled_batch=10)
        result = train_run(config.with_overrides(method='ns3l'))
        assert result.params.spec.layer_widths[0] == 1
        assert result.params.spec.layer_widths[-1] == 2
