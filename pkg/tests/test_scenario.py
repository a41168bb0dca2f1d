"""Closed-form scenario tests: golden values, consistency with the batch
losses on explicitly constructed similarity rows, curve machinery."""

import math

import numpy as np
import pytest

from contrastlab.errors import InvalidGrid, InvalidScenario
from contrastlab.gradcheck import central_difference
from contrastlab.losses import learnable_temp_loss, ntxent_loss, tf_infonce_loss
from contrastlab.scenario import (
    DIV_TEMP,
    LEARNABLE,
    TEMP_FREE,
    CurveData,
    ScenarioPoint,
    figure_curves,
    find_vanishing_region,
    sample_curve,
    scenario_grad_scale,
    scenario_loss,
)


def scenario_matrix(c, n):
    """Similarity matrix whose every row is the scenario row [C, -C, ..., -C]."""
    s = np.full((n, n), -c)
    np.fill_diagonal(s, c)
    return s


class TestScenarioLoss:
    def test_golden_low_temperature(self):
        p = ScenarioPoint(DIV_TEMP, c=0.5, tau=0.25, n=2)
        assert scenario_loss(p) == pytest.approx(math.log1p(math.exp(-4.0)), abs=1e-15)
        assert scenario_loss(p) == pytest.approx(0.018149927917809738, abs=1e-12)

    def test_golden_uniform_temp_free(self):
        assert scenario_loss(ScenarioPoint(TEMP_FREE, c=0.0, n=2)) == pytest.approx(
            math.log(2.0), abs=1e-15
        )

    def test_golden_optimal_point_unit_temperature(self):
        p = ScenarioPoint(DIV_TEMP, c=1.0, tau=1.0, n=2)
        assert scenario_loss(p) == pytest.approx(0.12692801104297263, abs=1e-12)

    def test_invalid_points_rejected(self):
        with pytest.raises(InvalidScenario):
            ScenarioPoint(DIV_TEMP, c=1.5, tau=1.0)
        with pytest.raises(InvalidScenario):
            ScenarioPoint(DIV_TEMP, c=0.5, tau=0.0)
        with pytest.raises(InvalidScenario):
            ScenarioPoint(TEMP_FREE, c=0.5, n=1)
        with pytest.raises(InvalidScenario):
            ScenarioPoint("bogus", c=0.5)


class TestScenarioGradScale:
    def test_golden_nonzero_gradient_at_optimum(self):
        p = ScenarioPoint(DIV_TEMP, c=1.0, tau=1.0, n=2)
        assert scenario_grad_scale(p) == pytest.approx(2.0 / (1.0 + math.e**2), abs=1e-12)
        assert scenario_grad_scale(p) == pytest.approx(0.23840584404423515, abs=1e-12)

    def test_golden_vanishing_region_value(self):
        p = ScenarioPoint(DIV_TEMP, c=0.5, tau=0.1, n=2)
        assert scenario_grad_scale(p) == pytest.approx(20.0 / (1.0 + math.exp(10.0)), rel=1e-12)

    def test_temp_free_vanishes_only_at_optimum(self):
        for n in (2, 4, 16):
            assert scenario_grad_scale(ScenarioPoint(TEMP_FREE, c=1.0 - 1e-9, n=n)) < 1e-8

    def test_temp_free_at_origin(self):
        assert scenario_grad_scale(ScenarioPoint(TEMP_FREE, c=0.0, n=2)) == pytest.approx(2.0)

    def test_learnable_zero_at_undecided_point(self):
        for t in np.linspace(-5, 5, 21):
            assert scenario_grad_scale(ScenarioPoint(LEARNABLE, c=0.0, t=float(t))) == 0.0

    def test_no_overflow_at_tiny_temperature(self):
        p = ScenarioPoint(DIV_TEMP, c=0.9, tau=1e-3, n=2)
        assert scenario_grad_scale(p) == 0.0  # underflows cleanly instead of overflowing
        assert scenario_loss(p) == 0.0

    def test_matches_finite_differences_of_loss(self):
        rng = np.random.default_rng(30)
        for _ in range(300):
            c = float(rng.uniform(0.05, 0.95))
            n = int(rng.choice([2, 4, 8, 16]))
            variant = rng.choice([DIV_TEMP, LEARNABLE, TEMP_FREE])
            if variant == DIV_TEMP:
                tau = float(rng.uniform(0.2, 2.0))
                fd = central_difference(
                    lambda v: scenario_loss(ScenarioPoint(DIV_TEMP, c=float(v[0]), tau=tau, n=n)),
                    np.array([c]),
                )
                val = scenario_grad_scale(ScenarioPoint(DIV_TEMP, c=c, tau=tau, n=n))
            elif variant == LEARNABLE:
                t = float(rng.uniform(-1.0, 1.0))
                fd = central_difference(
                    lambda v: scenario_loss(ScenarioPoint(LEARNABLE, c=c, t=float(v[0]), n=n)),
                    np.array([t]),
                )
                val = scenario_grad_scale(ScenarioPoint(LEARNABLE, c=c, t=t, n=n))
            else:
                fd = central_difference(
                    lambda v: scenario_loss(ScenarioPoint(TEMP_FREE, c=float(v[0]), n=n)),
                    np.array([c]),
                )
                val = scenario_grad_scale(ScenarioPoint(TEMP_FREE, c=c, n=n))
            assert val == pytest.approx(abs(fd[0]), rel=1e-6)

    def test_fd_oracle_cross_check(self):
        # derivative of the closed-form loss in C at C=0.5, tau=0.5
        fd = central_difference(
            lambda v: scenario_loss(ScenarioPoint(DIV_TEMP, c=float(v[0]), tau=0.5, n=2)),
            np.array([0.5]),
        )
        assert abs(fd[0]) == pytest.approx(4.0 / (1.0 + math.e**2), rel=1e-6)


class TestBatchConsistency:
    def test_scenario_row_equals_batch_loss(self):
        rng = np.random.default_rng(31)
        for _ in range(300):
            c = float(rng.uniform(0.001, 0.999))
            n = int(rng.choice([2, 3, 4, 8, 16]))
            s = scenario_matrix(c, n)

            tau = float(rng.uniform(0.05, 2.0))
            p = ScenarioPoint(DIV_TEMP, c=c, tau=tau, n=n)
            assert ntxent_loss(s, tau).loss / n == pytest.approx(scenario_loss(p), abs=1e-10)

            t = float(rng.uniform(-2.0, 2.0))
            p = ScenarioPoint(LEARNABLE, c=c, t=t, n=n)
            assert learnable_temp_loss(s, t).loss / n == pytest.approx(
                scenario_loss(p), abs=1e-10
            )

            p = ScenarioPoint(TEMP_FREE, c=c, n=n)
            assert tf_infonce_loss(s).loss / n == pytest.approx(scenario_loss(p), abs=1e-10)


class TestCurves:
    def test_default_grid_peaks_at_origin_side(self):
        curve = sample_curve(DIV_TEMP, tau=0.1, n=2)
        assert len(curve.grid) == 512
        # limit of the gradient scale at C -> 0+ is (2/tau)/2 = 10
        assert curve.values.max() == pytest.approx(10.0, abs=0.02)
        assert int(np.argmax(curve.values)) == 0

    def test_monotone_decreasing_temp_free(self):
        for curve in figure_curves(5, points=512):
            assert np.all(np.diff(curve.values) < 0)
            assert np.all(curve.values >= 0)

    def test_figure_presets_shapes(self):
        assert len(figure_curves(2, points=16)) == 4
        assert len(figure_curves(3, points=16)) == 4
        assert len(figure_curves(4, points=16)) == 4
        fig3 = figure_curves(3, points=16)
        assert all(c.sweep == "tau" for c in fig3)
        assert [c.c for c in fig3] == [0.25, 0.5, 0.75, 1.0]

    def test_single_point_grid_rejected(self):
        with pytest.raises(InvalidGrid):
            sample_curve(DIV_TEMP, grid=[0.5], tau=1.0)

    def test_grid_domain_enforced(self):
        with pytest.raises(InvalidGrid):
            sample_curve(DIV_TEMP, grid=[0.0, 0.5], tau=1.0)
        with pytest.raises(InvalidGrid):
            sample_curve(DIV_TEMP, grid=[0.5, 0.4], tau=1.0)

    def test_loss_quantity(self):
        curve = sample_curve(TEMP_FREE, n=2, quantity="loss", points=64)
        expected = [scenario_loss(ScenarioPoint(TEMP_FREE, c=float(c), n=2)) for c in curve.grid]
        np.testing.assert_allclose(curve.values, expected, rtol=1e-14)


class TestVanishingRegion:
    def test_low_temperature_region_covers_the_known_band(self):
        curve = sample_curve(DIV_TEMP, tau=0.1, n=2, points=512)
        regions = find_vanishing_region(curve, threshold=0.01)
        assert len(regions) == 1
        lo, hi = regions[0]
        # analytic crossing of the closed form: C = (tau/2) ln(2/threshold - 1)
        crossing = 0.05 * math.log(1999.0)
        step = curve.grid[1] - curve.grid[0]
        assert abs(lo - crossing) <= step
        assert hi == curve.grid[-1]
        assert lo <= 0.40 and hi >= 0.70

    def test_temp_free_region_abuts_the_optimum_only(self):
        curve = sample_curve(TEMP_FREE, n=2, points=512)
        regions = find_vanishing_region(curve, threshold=0.01)
        assert len(regions) == 1
        lo, hi = regions[0]
        assert lo > 0.9
        assert hi == curve.grid[-1]

    def test_all_above_threshold(self):
        curve = CurveData(variant=DIV_TEMP, grid=np.array([0.1, 0.2, 0.3]),
                          values=np.array([1.0, 1.0, 1.0]), n=2, tau_or_t=1.0)
        assert find_vanishing_region(curve, threshold=0.01) == []

    def test_interior_region(self):
        curve = CurveData(variant=DIV_TEMP, grid=np.linspace(0.1, 0.9, 9),
                          values=np.array([1, 1, 0.001, 0.001, 1, 1, 0.001, 1, 1.0]),
                          n=2, tau_or_t=1.0)
        regions = find_vanishing_region(curve, threshold=0.01)
        assert len(regions) == 2
        np.testing.assert_allclose(regions[0], (0.3, 0.4))
        np.testing.assert_allclose(regions[1], (0.7, 0.7))
