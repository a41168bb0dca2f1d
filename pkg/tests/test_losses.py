"""Loss-kernel tests: golden values, gradient structure, finite-difference checks."""

import math

import numpy as np
import pytest

from contrastlab.errors import NonPositiveTemperature, NonSquare, ShapeMismatch, TOverflow
from contrastlab.gradcheck import central_difference, relative_errors
from contrastlab.losses import (
    LossResult,
    TemperatureParam,
    backprop_to_embeddings,
    evaluate_loss,
    learnable_temp_loss,
    ntxent_loss,
    tf_infonce_loss,
)
from contrastlab.numerics import DEFAULT_CLAMP_EPS, logit_map_derivative


def two_pair_matrix(c):
    return np.array([[c, -c], [-c, c]])


class TestNtxent:
    def test_golden_optimal_two_pair(self):
        # per-row log(1 + e^-2) = -log(sigma(2)), sigma(2) = 0.8807970779778823
        res = ntxent_loss(two_pair_matrix(1.0), tau=1.0)
        per_row = math.log1p(math.exp(-2.0))
        assert per_row == pytest.approx(0.12692801104297263, abs=1e-15)
        assert res.loss == pytest.approx(2 * per_row, abs=1e-9)

    def test_uniform_rows(self):
        for tau in (0.07, 0.5, 3.0):
            res = ntxent_loss(np.zeros((2, 2)), tau=tau)
            assert res.loss == pytest.approx(2 * math.log(2.0), abs=1e-12)

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(10)
        s = rng.uniform(-0.95, 0.95, (4, 4))
        res = ntxent_loss(s, tau=0.25)
        fd = central_difference(lambda m: ntxent_loss(m, tau=0.25).loss, s)
        assert relative_errors(res.grad_sim, fd).max() < 1e-6

    def test_grad_rows_sum_to_zero(self):
        rng = np.random.default_rng(11)
        for _ in range(20):
            s = rng.uniform(-1, 1, (6, 6))
            res = ntxent_loss(s, tau=float(rng.uniform(0.1, 2.0)))
            np.testing.assert_allclose(res.grad_sim.sum(axis=1), 0.0, atol=1e-10)

    def test_row_shift_leaves_loss_unchanged(self):
        rng = np.random.default_rng(12)
        s = rng.uniform(-0.5, 0.5, (5, 5))
        shifted = s + rng.uniform(-0.4, 0.4, (5, 1))
        assert ntxent_loss(shifted, 0.3).loss == pytest.approx(
            ntxent_loss(s, 0.3).loss, abs=1e-10
        )

    def test_two_pair_closed_form_random(self):
        rng = np.random.default_rng(13)
        for _ in range(1000):
            c = float(rng.uniform(0.001, 0.999))
            tau = float(rng.uniform(0.05, 2.0))
            res = ntxent_loss(two_pair_matrix(c), tau)
            assert res.loss / 2 == pytest.approx(math.log1p(math.exp(-2 * c / tau)), abs=1e-10)

    def test_increasing_positive_decreases_loss(self):
        rng = np.random.default_rng(14)
        s = rng.uniform(-0.8, 0.8, (4, 4))
        for tau in (0.1, 1.0):
            base = ntxent_loss(s, tau).loss
            bumped = s.copy()
            bumped[2, 2] += 0.05
            assert ntxent_loss(bumped, tau).loss < base

    def test_mean_reduction(self):
        s = np.random.default_rng(15).uniform(-1, 1, (5, 5))
        total = ntxent_loss(s, 0.5, reduction="sum")
        mean = ntxent_loss(s, 0.5, reduction="mean")
        assert mean.loss == pytest.approx(total.loss / 5, rel=1e-15)
        np.testing.assert_allclose(mean.grad_sim, total.grad_sim / 5, atol=1e-15)

    def test_symmetric_averages_both_directions(self):
        s = np.random.default_rng(16).uniform(-1, 1, (4, 4))
        sym = ntxent_loss(s, 0.5, symmetric=True)
        fwd = ntxent_loss(s, 0.5)
        bwd = ntxent_loss(s.T, 0.5)
        assert sym.loss == pytest.approx(0.5 * (fwd.loss + bwd.loss), rel=1e-14)
        fd = central_difference(lambda m: ntxent_loss(m, 0.5, symmetric=True).loss, s)
        assert relative_errors(sym.grad_sim, fd).max() < 1e-6

    def test_errors(self):
        with pytest.raises(NonSquare):
            ntxent_loss(np.ones((2, 3)), 1.0)
        with pytest.raises(NonPositiveTemperature):
            ntxent_loss(np.eye(2), 0.0)


class TestLearnableTemp:
    def test_zero_similarities_zero_t_gradient(self):
        # a fully undecided batch gives the scale parameter nothing to move on
        for t in (-3.0, 0.0, 2.5):
            res = learnable_temp_loss(np.zeros((2, 2)), t)
            assert res.grad_t == pytest.approx(0.0, abs=1e-12)

    def test_t_zero_matches_ntxent_tau_one(self):
        s = np.random.default_rng(17).uniform(-1, 1, (6, 6))
        a = learnable_temp_loss(s, 0.0)
        b = ntxent_loss(s, 1.0)
        assert a.loss == pytest.approx(b.loss, rel=1e-14)
        np.testing.assert_allclose(a.grad_sim, b.grad_sim, atol=1e-14)

    def test_golden_t_gradient_two_pair(self):
        # per-row |dL/dt| at C=0.5, t=0 is 2*0.5*1 / (1 + e) = 0.2689414213699951
        res = learnable_temp_loss(two_pair_matrix(0.5), 0.0)
        per_row = 1.0 / (1.0 + math.e)
        assert abs(res.grad_t) / 2 == pytest.approx(per_row, abs=1e-12)
        fd = central_difference(
            lambda v: learnable_temp_loss(two_pair_matrix(0.5), float(v[0])).loss,
            np.array([0.0]),
        )
        assert res.grad_t == pytest.approx(fd[0], rel=1e-6)

    def test_gradients_match_finite_differences(self):
        rng = np.random.default_rng(18)
        s = rng.uniform(-0.9, 0.9, (5, 5))
        t = 0.4
        res = learnable_temp_loss(s, t)
        fd_s = central_difference(lambda m: learnable_temp_loss(m, t).loss, s)
        assert relative_errors(res.grad_sim, fd_s).max() < 1e-6
        fd_t = central_difference(lambda v: learnable_temp_loss(s, float(v[0])).loss,
                                  np.array([t]))
        assert res.grad_t == pytest.approx(fd_t[0], rel=1e-6)

    def test_overflow_guard(self):
        with pytest.raises(TOverflow):
            learnable_temp_loss(np.zeros((2, 2)), 701.0)


class TestTempFree:
    def test_uniform_gives_log2(self):
        res = tf_infonce_loss(two_pair_matrix(0.0))
        assert res.loss / 2 == pytest.approx(math.log(2.0), abs=1e-12)

    def test_golden_half(self):
        # logits +-log 3 -> per-row loss log(10/9)
        res = tf_infonce_loss(two_pair_matrix(0.5))
        assert res.loss / 2 == pytest.approx(math.log(10.0 / 9.0), abs=1e-12)
        assert res.loss / 2 == pytest.approx(0.10536051565782628, abs=1e-12)

    def test_near_optimum_loss_and_grad_vanish(self):
        eps = DEFAULT_CLAMP_EPS
        for n in (2, 8):
            s = np.full((n, n), -1.0 + eps)
            np.fill_diagonal(s, 1.0 - eps)
            res = tf_infonce_loss(s, eps)
            assert res.loss / n < 1e-4
            assert np.abs(res.grad_sim).max() < 1e-6

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(19)
        s = rng.uniform(-0.95, 0.95, (6, 6))
        res = tf_infonce_loss(s)
        fd = central_difference(lambda m: tf_infonce_loss(m).loss, s)
        assert relative_errors(res.grad_sim, fd).max() < 1e-6

    def test_grad_row_identity(self):
        # undoing the chain-rule factor recovers softmax mass conservation
        rng = np.random.default_rng(20)
        s = rng.uniform(-0.95, 0.95, (5, 5))
        res = tf_infonce_loss(s)
        residual = res.grad_sim / logit_map_derivative(s)
        np.testing.assert_allclose(residual.sum(axis=1), 0.0, atol=1e-10)

    def test_logit_shift_leaves_loss_unchanged(self):
        # shifting a row's logits by k maps s -> tanh(atanh(s) + k/2)
        rng = np.random.default_rng(21)
        s = rng.uniform(-0.9, 0.9, (4, 4))
        k = 0.7
        shifted = np.tanh(np.arctanh(s) + k / 2.0)
        assert tf_infonce_loss(shifted).loss == pytest.approx(
            tf_infonce_loss(s).loss, abs=1e-10
        )

    def test_clamped_entries_get_zero_gradient(self):
        s = np.array([[1.0, -0.2], [-0.3, 0.4]])
        res = tf_infonce_loss(s)
        assert res.grad_sim[0, 0] == 0.0
        assert np.all(res.grad_sim[1] != 0.0)
        # the loss is locally flat inside the clamped region
        fd = central_difference(lambda m: tf_infonce_loss(m).loss, s, h=1e-9)
        assert fd[0, 0] == 0.0

    def test_two_pair_closed_form_random(self):
        rng = np.random.default_rng(22)
        for _ in range(1000):
            c = float(rng.uniform(0.001, 0.999))
            res = tf_infonce_loss(two_pair_matrix(c))
            expected = -math.log((1 + c) ** 2 / ((1 + c) ** 2 + (1 - c) ** 2))
            assert res.loss / 2 == pytest.approx(expected, abs=1e-10)

    def test_increasing_positive_decreases_loss(self):
        rng = np.random.default_rng(23)
        s = rng.uniform(-0.8, 0.8, (4, 4))
        base = tf_infonce_loss(s).loss
        bumped = s.copy()
        bumped[1, 1] += 0.05
        assert tf_infonce_loss(bumped).loss < base

    def test_non_square_rejected(self):
        with pytest.raises(NonSquare):
            tf_infonce_loss(np.ones((3, 2)))


class TestBackpropToEmbeddings:
    def test_zero_gradient_in_zero_gradient_out(self):
        rng = np.random.default_rng(24)
        u, v = rng.normal(0, 1, (3, 5)), rng.normal(0, 1, (3, 5))
        ga, gv = backprop_to_embeddings(u, v, np.zeros((3, 3)))
        assert np.all(ga == 0.0) and np.all(gv == 0.0)

    def test_aligned_pair_has_zero_direction_gradient(self):
        u = np.array([[1.0, 2.0, 3.0]])
        ga, gv = backprop_to_embeddings(u, u.copy(), np.array([[1.0]]))
        np.testing.assert_allclose(ga, 0.0, atol=1e-15)
        np.testing.assert_allclose(gv, 0.0, atol=1e-15)

    def test_matches_finite_differences(self):
        rng = np.random.default_rng(25)
        u, v = rng.normal(0, 1, (3, 5)), rng.normal(0, 1, (3, 5))
        g = rng.normal(0, 1, (3, 3))

        def objective(stacked):
            a, b = stacked[:3], stacked[3:]
            an = a / np.linalg.norm(a, axis=1, keepdims=True)
            bn = b / np.linalg.norm(b, axis=1, keepdims=True)
            return float(np.sum(g * (an @ bn.T)))

        ga, gv = backprop_to_embeddings(u, v, g)
        fd = central_difference(objective, np.vstack([u, v]))
        assert relative_errors(np.vstack([ga, gv]), fd).max() < 1e-6

    def test_shape_mismatch(self):
        with pytest.raises(ShapeMismatch):
            backprop_to_embeddings(np.ones((3, 4)), np.ones((3, 5)), np.zeros((3, 3)))
        with pytest.raises(ShapeMismatch):
            backprop_to_embeddings(np.ones((3, 4)), np.ones((3, 4)), np.zeros((2, 3)))


class TestTemperatureParam:
    def test_fixed_requires_positive_tau(self):
        with pytest.raises(NonPositiveTemperature):
            TemperatureParam.fixed(0.0)

    def test_dispatch(self):
        s = two_pair_matrix(0.3)
        assert isinstance(evaluate_loss(s, TemperatureParam.fixed(0.5)), LossResult)
        assert evaluate_loss(s, TemperatureParam.learnable()).grad_t is not None
        assert evaluate_loss(s, TemperatureParam.temperature_free()).grad_t is None
