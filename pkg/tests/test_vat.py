import numpy as np
import pytest

from ns3l_lab.classifier import Params, init_params
from ns3l_lab.diffcore import Tape
from ns3l_lab.losses import vat_loss, vat_perturbation
from ns3l_lab.losses.vat import clean_log_probs
from ns3l_lab.models import MLPSpec, VATConfig
from ns3l_lab.training import build_experiment_data, train_run


def _linear_model(weight):
    spec = MLPSpec(layer_widths=(2, 2))
    return Params.from_arrays(spec, [np.asarray(weight, dtype=float), np.zeros((1, 2))])


def _kl(params, x, r):
    p = np.exp(clean_log_probs(params, x))
    q = np.exp(clean_log_probs(params, x + r))
    return np.mean(np.sum(p * (np.log(p) - np.log(q)), axis=1))


def test_perturbation_has_radius_epsilon(tiny_params, rng):
    config = VATConfig(epsilon=0.7)
    r = vat_perturbation(tiny_params, rng.normal(size=(20, 3)), config, rng)
    np.testing.assert_allclose(np.linalg.norm(r, axis=1), 0.7, atol=1e-9)


def test_zero_epsilon_gives_zero_loss(tiny_params, rng):
    tape = Tape()
    node = vat_loss(tape, tiny_params, rng.normal(size=(5, 3)), VATConfig(epsilon=0.0), rng)
    assert tape.value(node).item() == 0.0


def test_linear_model_perturbation_aligns_with_class_direction(rng):
    params = _linear_model([[2.0, -2.0], [0.0, 0.0]])
    r = vat_perturbation(params, np.zeros((1, 2)) + [[0.3, 0.0]], VATConfig(epsilon=1.0, power_iterations=2), rng)
    np.testing.assert_allclose(np.abs(r[0]), [1.0, 0.0], atol=1e-6)


def test_loss_matches_closed_form(rng):
    params = _linear_model([[1.0, -1.0], [0.5, 0.0]])
    x = rng.normal(size=(4, 2))
    r = rng.normal(size=(4, 2))
    tape = Tape()
    node = vat_loss(tape, params, x, VATConfig(), rng, r_adv=r)
    assert tape.value(node).item() == pytest.approx(_kl(params, x, r), abs=1e-12)


def test_adversarial_beats_random_direction():
    rng = np.random.default_rng(5)
    params = init_params(MLPSpec(layer_widths=(3, 8, 3), seed=3))
    config = VATConfig(epsilon=0.05, power_iterations=3)
    wins = 0
    for _ in range(50):
        x = rng.normal(size=(1, 3))
        r_adv = vat_perturbation(params, x, config, rng)
        direction = rng.normal(size=(1, 3))
        r_random = 0.05 * direction / np.linalg.norm(direction)
        wins += _kl(params, x, r_adv) >= _kl(params, x, r_random)
    assert wins >= 45


def test_loss_does_not_differentiate_the_clean_branch(tiny_params, rng):
    x = rng.normal(size=(3, 3))
    tape = Tape()
    vat_loss(tape, tiny_params, x, VATConfig(), rng)
    assert any(node.op == 'stop_gradient' for node in tape.nodes)


def test_adversarial_direction_on_a_trained_blob_model(small_config):
    config = small_config.with_overrides(dim=16, total_steps=100)
    dataset, split = build_experiment_data(config)
    params = train_run(config, data=(dataset, split)).params
    vat = VATConfig()
    rng = np.random.default_rng(11)
    wins = 0
    for row in rng.choice(np.concatenate([split.test, split.validation]), size=200):
        x = dataset.X[row:row + 1]
        r_adv = vat_perturbation(params, x, vat, rng)
        assert abs(np.linalg.norm(r_adv) - vat.epsilon) < 1e-9
        direction = rng.normal(size=x.shape)
        r_random = vat.epsilon * direction / np.linalg.norm(direction)
        wins += _kl(params, x, r_adv) >= _kl(params, x, r_random)
    assert wins >= 190
