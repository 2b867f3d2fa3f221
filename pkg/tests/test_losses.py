import math

import numpy as np
import pytest

from ns3l_lab.diffcore import Tape, backward, grad_check
from ns3l_lab.errors import NegativeSetError
from ns3l_lab.losses import (
    brier_loss,
    entropy_min_loss,
    ns3l_loss,
    one_hot,
    pi_consistency_loss,
    pseudo_label_loss,
    supervised_ce,
)
from ns3l_lab.negselect import threshold_mask


def _value(build, *arrays):
    tape = Tape()
    nodes = [tape.leaf(a) for a in arrays]
    return tape.value(build(tape, *nodes)).item()


def _random_simplex(rng, rows, classes):
    logits = rng.normal(0.0, 2.0, size=(rows, classes))
    return np.exp(logits) / np.exp(logits).sum(axis=1, keepdims=True)


class TestSupervisedCE:
    def test_perfect_prediction_is_zero(self):
        y = one_hot([0, 2], 3)
        assert _value(lambda t, mu: supervised_ce(t, mu, y), y) == 0.0

    def test_uniform_over_ten_classes(self):
        mu = np.full((1, 10), 0.1)
        assert _value(lambda t, m: supervised_ce(t, m, one_hot([3], 10)), mu) == pytest.approx(math.log(10), abs=1e-12)

    def test_mean_of_per_sample_values(self):
        mu = np.array([[0.7, 0.3], [0.2, 0.8]])
        expected = -(math.log(0.7) + math.log(0.8)) / 2
        assert _value(lambda t, m: supervised_ce(t, m, one_hot([0, 1], 2)), mu) == pytest.approx(expected, abs=1e-12)

    def test_zero_probability_is_floored(self):
        mu = np.array([[1.0, 0.0]])
        value = _value(lambda t, m: supervised_ce(t, m, one_hot([1], 2)), mu)
        assert value == pytest.approx(-math.log(1e-12))


class TestNS3L:
    def test_empty_mask_is_zero(self, rng):
        mu = _random_simplex(rng, 4, 3)
        assert _value(lambda t, m: ns3l_loss(t, m, np.zeros((4, 3), dtype=bool)), mu) == 0.0

    def test_single_negative(self):
        mu = np.array([[0.9, 0.1]])
        value = _value(lambda t, m: ns3l_loss(t, m, np.array([[False, True]])), mu)
        assert value == pytest.approx(-math.log(0.9), abs=1e-12)

    def test_matches_brute_force(self, rng):
        mu = _random_simplex(rng, 8, 10)
        mask = rng.random((8, 10)) < 0.3
        mask[:, 0] = False
        expected = 0.0
        for b in range(8):
            selected = sum(mu[b, k] for k in range(10) if mask[b, k])
            expected -= math.log(1.0 - selected)
        expected /= 8
        assert _value(lambda t, m: ns3l_loss(t, m, mask), mu) == pytest.approx(expected, abs=1e-12)

    def test_threshold_batches_match_direct_formula(self, rng):
        for _ in range(1000):
            B, K = rng.integers(1, 17), rng.integers(2, 21)
            mu = _random_simplex(rng, B, K)
            mask = threshold_mask(mu, rng.uniform(0.01, 0.3))
            expected = -np.mean(np.log(1.0 - np.sum(np.where(mask.mask, mu, 0.0), axis=1)))
            assert _value(lambda t, m: ns3l_loss(t, m, mask), mu) == pytest.approx(expected, abs=1e-12)

    def test_gradient_on_masked_class(self):
        tape = Tape()
        mu = tape.leaf(np.array([[0.9, 0.1]]))
        grads = backward(tape, ns3l_loss(tape, mu, np.array([[False, True]])))
        np.testing.assert_allclose(grads[mu].values, [[0.0, 1.0 / 0.9]], atol=1e-12)

    def test_full_mask_is_rejected(self):
        with pytest.raises(NegativeSetError, match='covers all classes'):
            _value(lambda t, m: ns3l_loss(t, m, np.ones((1, 2), dtype=bool)), np.array([[0.5, 0.5]]))

    def test_floor_keeps_loss_finite(self):
        mu = np.array([[1.0 - 1e-12, 1e-12]])
        value = _value(lambda t, m: ns3l_loss(t, m, np.array([[True, False]])), mu)
        assert value == pytest.approx(-math.log(1e-7))

    def test_grad_check(self, rng):
        mask = np.array([[True, False, False], [False, True, True], [False, False, False]])

        def scalar_fn(tape, leaf):
            return ns3l_loss(tape, tape.row_softmax(leaf), mask)

        assert grad_check(scalar_fn, rng.normal(size=(3, 3))).max_relative_error < 1e-4


class TestTwoClassIdentity:
    def test_threshold_ns3l_equals_pseudo_labeling(self, rng):
        T = 0.04
        low = rng.uniform(1e-6, T, size=1000)
        mu = np.column_stack([low, 1.0 - low])
        flip = rng.random(1000) < 0.5
        mu[flip] = mu[flip][:, ::-1]
        mask = threshold_mask(mu, T)
        assert np.all(mask.counts == 1)
        ns3l = _value(lambda t, m: ns3l_loss(t, m, mask), mu)
        pseudo = _value(lambda t, m: pseudo_label_loss(t, m, 1.0 - T), mu)
        assert ns3l == pytest.approx(pseudo, abs=1e-12)

    def test_identity_row_by_row_with_random_thresholds(self, rng):
        for _ in range(1000):
            T = rng.uniform(0.01, 0.45)
            low = rng.uniform(1e-6, 0.9 * T)
            mu = np.array([[low, 1.0 - low]] if rng.random() < 0.5 else [[1.0 - low, low]])
            mask = threshold_mask(mu, T)
            assert mask.counts[0] == 1
            ns3l = _value(lambda t, m: ns3l_loss(t, m, mask), mu)
            pseudo = _value(lambda t, m: pseudo_label_loss(t, m, 1.0 - T), mu)
            assert ns3l == pytest.approx(pseudo, abs=1e-12)


class TestEntropyMin:
    def test_one_hot_has_zero_entropy(self):
        assert _value(entropy_min_loss, one_hot([1, 0], 3)) == pytest.approx(0.0, abs=1e-10)

    def test_uniform_is_log_k(self):
        assert _value(entropy_min_loss, np.full((2, 4), 0.25)) == pytest.approx(math.log(4), abs=1e-12)


class TestPseudoLabel:
    def test_no_confident_rows(self):
        assert _value(lambda t, m: pseudo_label_loss(t, m, 0.95), np.full((3, 2), 0.5)) == 0.0

    def test_mean_runs_over_whole_batch(self):
        mu = np.array([[0.97, 0.03], [0.5, 0.5]])
        value = _value(lambda t, m: pseudo_label_loss(t, m, 0.95), mu)
        assert value == pytest.approx(-math.log(0.97) / 2, abs=1e-12)

    def test_ties_pick_lowest_index(self):
        tape = Tape()
        mu = tape.leaf(np.array([[0.5, 0.5]]))
        grads = backward(tape, pseudo_label_loss(tape, mu, 0.5))
        np.testing.assert_allclose(grads[mu].values, [[-2.0, 0.0]])


class TestConsistency:
    def test_identical_predictions_give_zero(self, rng):
        mu = _random_simplex(rng, 3, 4)
        assert _value(pi_consistency_loss, mu, mu.copy()) == 0.0

    def test_is_mean_over_elements(self):
        a = np.array([[1.0, 0.0]])
        b = np.array([[0.0, 1.0]])
        assert _value(pi_consistency_loss, a, b) == pytest.approx(1.0)

    def test_brier_divides_by_classes(self):
        mu = np.array([[0.5, 0.5, 0.0, 0.0]])
        assert _value(lambda t, m: brier_loss(t, m, one_hot([0], 4)), mu) == pytest.approx(0.5 / 4)
