"""
Tests for ergokde/density_estimator.py
"""
import logging
import math

import numpy as np
import pytest
from scipy import integrate

from ergokde.density_estimator import (
    CHUNK_POINTS,
    EvaluationGrid,
    estimate_density,
    evaluate_at_points,
    iterated_log,
    kernel_sums,
    mse_bandwidth,
    psi_d,
    rate_adaptive,
    rate_phi,
    rate_psi,
    sigma_proxy,
    theoretical_bandwidth,
    upsilon,
)
from ergokde.errors import ValidationError
from ergokde.kernel_construction import Kernel, build_order_kernel
from ergokde.process_models import SamplePath


class TestEvaluationGrid:
    """Tests for EvaluationGrid."""

    def test_cube(self):
        """Should span [-w, w]^d with the requested resolution."""
        grid = EvaluationGrid.cube(2, 1.0, 5)
        assert grid.shape == (5, 5)
        assert grid.size == 25
        np.testing.assert_allclose(grid.spacing, [0.5, 0.5])
        np.testing.assert_allclose(grid.axes()[0], [-1.0, -0.5, 0.0, 0.5, 1.0])

    def test_points_in_c_order(self):
        """Should vary the last coordinate fastest."""
        points = EvaluationGrid([0.0, 0.0], [1.0, 1.0], 2).points()
        np.testing.assert_array_equal(points, [[0, 0], [0, 1], [1, 0], [1, 1]])

    def test_covering_spacing(self):
        """Should choose the coarsest lattice with spacing <= max_spacing."""
        grid = EvaluationGrid.covering([0.0], [1.0], 0.3)
        assert grid.points_per_axis == 5
        assert grid.spacing[0] <= 0.3

    def test_shifted(self):
        """Should translate the box."""
        grid = EvaluationGrid.cube(1, 1.0, 3).shifted([2.0])
        np.testing.assert_allclose(grid.axes()[0], [1.0, 2.0, 3.0])

    @pytest.mark.parametrize("lower,upper,n", [([0.0], [0.0], 3), ([0.0], [1.0], 1), ([0.0, 0.0], [1.0], 3)])
    def test_rejects_bad_grids(self, lower, upper, n):
        """Should reject empty boxes, single points and shape mismatches."""
        with pytest.raises(ValidationError):
            EvaluationGrid(lower, upper, n)


class TestEstimateDensity:
    """Tests for estimate_density."""

    def test_constant_path(self):
        """Should give K(0) / h at the resting point."""
        path = SamplePath(0.01, np.zeros((101, 1)))
        est = estimate_density(path, build_order_kernel(1, 1), 0.5, EvaluationGrid.cube(1, 1.0, 5))
        np.testing.assert_allclose(est.values, [0.0, 0.0, 4.0, 0.0, 0.0], atol=1e-12)
        assert est.T == pytest.approx(1.0)

    def test_half_occupation(self):
        """Should halve the value when the path spends half its time away."""
        states = np.concatenate([np.zeros(50), np.full(51, 10.0)])
        path = SamplePath(0.01, states)
        est = estimate_density(path, build_order_kernel(1, 1), 0.5, EvaluationGrid.cube(1, 1.0, 5))
        assert est.values[2] == pytest.approx(2.0)

    def test_uses_left_endpoints(self):
        """Should ignore the final state."""
        states = np.zeros(11)
        states[-1] = 0.2
        path = SamplePath(0.1, states)
        est = estimate_density(path, build_order_kernel(1, 1), 1.0, EvaluationGrid.cube(1, 0.5, 3))
        assert est.values[1] == pytest.approx(2.0)

    def test_binning_matches_direct_sum(self, rng):
        """Should agree with the naive double loop within 1e-12."""
        path = SamplePath(0.01, rng.normal(scale=0.4, size=(2001, 2)))
        k = build_order_kernel(2, 3)
        grid = EvaluationGrid.cube(2, 1.0, 13)
        est = estimate_density(path, k, 0.3, grid)
        direct = evaluate_at_points(path, k, 0.3, grid.points())
        np.testing.assert_allclose(est.values.ravel(), direct, rtol=1e-12, atol=1e-12)

    def test_binning_uniform_kernel_boundary(self):
        """Should include lattice points exactly at distance h/2 for the box kernel."""
        path = SamplePath(0.1, np.full(3, 0.25))
        grid = EvaluationGrid([0.0], [1.0], 5)
        est = estimate_density(path, Kernel.uniform(1), 0.5, grid)
        direct = evaluate_at_points(path, Kernel.uniform(1), 0.5, grid.points())
        np.testing.assert_allclose(est.values, direct)
        np.testing.assert_allclose(est.values, [2.0, 2.0, 2.0, 0.0, 0.0])

    def test_points_outside_grid_contribute(self):
        """Should count path points just outside the box."""
        path = SamplePath(0.1, np.full(3, 1.1))
        est = estimate_density(path, build_order_kernel(1, 1), 0.5, EvaluationGrid.cube(1, 1.0, 5))
        assert est.values[-1] == pytest.approx(2.0 * 0.6 / 0.5)

    def test_thread_count_does_not_change_result(self, rng):
        """Should be bit-identical for one and several threads."""
        points = rng.normal(size=(2 * CHUNK_POINTS + 1000, 1))
        k = build_order_kernel(1, 1)
        grid = EvaluationGrid.cube(1, 2.0, 21)
        one = kernel_sums(points, k, 0.2, grid, threads=1)
        many = kernel_sums(points, k, 0.2, grid, threads=4)
        assert np.array_equal(one, many)

    def test_riemann_sum_matches_time_average(self):
        """Should reproduce (1/T) int K_h(x - sin t) dt over one period for small dt."""
        # 4 (1 - 4|sin t|)_+ averaged over a period, in closed form
        a = math.asin(0.25)
        exact = 2.0 * 4.0 * (2.0 * a - 8.0 * (1.0 - math.cos(a))) / (2.0 * math.pi)
        steps = 10_000
        dt = 2.0 * math.pi / steps
        path = SamplePath(dt, np.sin(dt * np.arange(steps + 1)))
        est = estimate_density(path, build_order_kernel(1, 1), 0.5, EvaluationGrid.cube(1, 0.5, 3))
        assert est.values[1] == pytest.approx(exact, abs=1e-4)

    def test_riemann_error_within_lipschitz_bound(self):
        """Should stay within L dt / 2 of the time average as dt is refined."""
        a = math.asin(0.25)
        exact = 2.0 * 4.0 * (2.0 * a - 8.0 * (1.0 - math.cos(a))) / (2.0 * math.pi)
        for steps in (250, 1000, 4000, 16_000):
            dt = 2.0 * math.pi / steps
            path = SamplePath(dt, np.sin(dt * np.arange(steps + 1)))
            est = estimate_density(path, build_order_kernel(1, 1), 0.5, EvaluationGrid.cube(1, 0.5, 3))
            error = abs(est.values[1] - exact)
            # t -> 4 (1 - 4|sin t|)_+ is 16-Lipschitz
            assert error <= 8.0 * dt

    @pytest.mark.parametrize("dim,max_spacing", [(1, 0.005), (2, 0.02)])
    def test_total_mass_is_one(self, rng, dim, max_spacing):
        """Should integrate to 1 over a box containing the path and the kernel support."""
        states = 0.05 * np.cumsum(rng.normal(size=(801, dim)), axis=0)
        path = SamplePath(0.01, states)
        h = 0.5
        grid = EvaluationGrid.covering(states.min(axis=0) - h, states.max(axis=0) + h, max_spacing)
        est = estimate_density(path, build_order_kernel(dim, 1), h, grid)
        mass = est.values
        for axis in reversed(grid.axes()):
            mass = integrate.trapezoid(mass, axis, axis=-1)
        assert float(mass) == pytest.approx(1.0, abs=1e-3)

    def test_translation_equivariance(self, rng):
        """Should give the same values for a shifted path on a shifted grid."""
        states = rng.normal(scale=0.4, size=(2001, 2))
        shift = np.array([0.3, -0.7])
        k = build_order_kernel(2, 3)
        grid = EvaluationGrid.cube(2, 1.0, 17)
        base = estimate_density(SamplePath(0.01, states), k, 0.3, grid)
        moved = estimate_density(SamplePath(0.01, states + shift), k, 0.3, grid.shifted(shift))
        np.testing.assert_allclose(moved.values, base.values, rtol=0, atol=1e-9)

    def test_sup_gap_bound(self):
        """Should equal L * spacing / h^(d+1)."""
        path = SamplePath(0.01, np.zeros((11, 1)))
        est = estimate_density(path, build_order_kernel(1, 1), 0.5, EvaluationGrid.cube(1, 1.0, 5))
        assert est.sup_gap_bound() == pytest.approx(4.0 * 0.5 / 0.25)
        assert est.rows().shape == (5, 2)

    def test_warns_on_coarse_dt(self, caplog):
        """Should warn when dt exceeds h/10."""
        path = SamplePath(0.1, np.zeros((11, 1)))
        with caplog.at_level(logging.WARNING, logger="ergokde.density_estimator"):
            estimate_density(path, build_order_kernel(1, 1), 0.5, EvaluationGrid.cube(1, 1.0, 5))
        assert "Riemann" in caplog.text

    @pytest.mark.parametrize("h", [0.0, 1.5])
    def test_rejects_bandwidth_outside_unit_interval(self, h):
        """Should reject h outside (0, 1]."""
        path = SamplePath(0.01, np.zeros((11, 1)))
        with pytest.raises(ValidationError):
            estimate_density(path, build_order_kernel(1, 1), h, EvaluationGrid.cube(1, 1.0, 5))

    def test_rejects_dimension_mismatch(self):
        """Should reject a kernel of another dimension."""
        path = SamplePath(0.01, np.zeros((11, 1)))
        with pytest.raises(ValidationError):
            estimate_density(path, build_order_kernel(2, 1), 0.5, EvaluationGrid.cube(1, 1.0, 5))


class TestIteratedLog:
    """Tests for iterated_log."""

    def test_two_fold(self):
        """Should give log log T."""
        assert iterated_log(math.exp(math.e ** 2), 2) == pytest.approx(2.0, abs=1e-12)

    def test_zero_depth(self):
        """Should return T itself."""
        assert iterated_log(5.0, 0) == 5.0

    def test_non_positive_result(self):
        """Should reject log log e = 0."""
        with pytest.raises(ValidationError):
            iterated_log(math.e, 2)


class TestClosedForms:
    """Tests for psi_d, sigma_proxy, upsilon and the rate functions."""

    def test_psi_d(self):
        """Should match the closed forms per dimension."""
        assert psi_d(0.3, 1) == 1.0
        assert psi_d(0.01, 2) == pytest.approx(2.36753, abs=1e-5)
        assert psi_d(1.0 / 64.0, 3) == pytest.approx(2.0)

    @pytest.mark.parametrize("x", [0.0, math.e])
    def test_psi_d_domain(self, x):
        """Should reject x outside (0, e)."""
        with pytest.raises(ValidationError):
            psi_d(x, 2)

    def test_sigma_proxy(self):
        """Should match the worked value at h = 1/2, T = e^10, d = 3."""
        assert sigma_proxy(0.5, math.exp(10), 3, 1) == pytest.approx(0.27684, abs=1e-5)

    def test_sigma_proxy_vanishes_at_one(self):
        """Should be exactly 0 at h = 1."""
        assert sigma_proxy(1.0, 1e6, 3, 1) == 0.0

    def test_sigma_proxy_decreases_in_h(self):
        """Should shrink as h grows."""
        values = [sigma_proxy(h, 1e8, 3, 1) for h in (0.1, 0.2, 0.4, 0.8)]
        assert values == sorted(values, reverse=True)

    def test_upsilon(self):
        """Should match the worked value at u = 1."""
        assert upsilon(0.5, math.exp(10), 1.0, 3) == pytest.approx(0.04585, abs=1e-5)

    def test_upsilon_rejects_small_u(self):
        """Should require u >= 1."""
        with pytest.raises(ValidationError):
            upsilon(0.5, 100.0, 0.5, 3)

    def test_rates(self):
        """Should match the closed-form rates."""
        assert rate_phi(1, 3.0, 4.0) == pytest.approx(0.5)
        assert rate_phi(3, 2.0, 1e5) == pytest.approx(0.01)
        assert rate_psi(2, 3.0, math.exp(4)) == pytest.approx(0.54134, abs=1e-5)
        assert rate_psi(1, 3.0, math.exp(4)) == pytest.approx(math.sqrt(4.0 / math.exp(4)))

    def test_adaptive_rate_exceeds_sup_rate(self):
        """Should pay an extra log_(k) T factor over the sup-norm rate."""
        T = 1e6
        assert rate_adaptive(3, 2.0, T) > rate_psi(3, 2.0, T)

    def test_rate_domain(self):
        """Should reject T <= e."""
        with pytest.raises(ValidationError):
            rate_phi(1, 3.0, 2.0)


class TestBandwidthRules:
    """Tests for theoretical_bandwidth and mse_bandwidth."""

    def test_theoretical_values(self):
        """Should match the worked bandwidths."""
        assert theoretical_bandwidth(3, 3.0, 1e4).h == pytest.approx(0.3684, abs=1e-4)
        assert theoretical_bandwidth(2, 3.0, 1e8).h == pytest.approx(0.18421, abs=1e-5)

    def test_theoretical_clipped(self):
        """Should clip values above 1 and flag it."""
        choice = theoretical_bandwidth(1, 3.0, math.exp(4))
        assert choice.h == 1.0
        assert choice.clipped

    def test_constant_scales_bandwidth(self):
        """Should multiply by c_h."""
        assert theoretical_bandwidth(3, 3.0, 1e4, c_h=0.5).h == pytest.approx(
            0.5 * theoretical_bandwidth(3, 3.0, 1e4).h)

    def test_mse_low_dimension(self):
        """Should give T^(-1/gamma) for d <= 2."""
        assert mse_bandwidth(1, 3.0, 1e6, gamma=2.0).h == pytest.approx(1e-3)
        assert mse_bandwidth(2, 3.0, 1e6).h == pytest.approx(1e-2)

    def test_mse_high_dimension(self):
        """Should give T^(-1/(2 beta + d - 2)) for d >= 3."""
        assert mse_bandwidth(3, 2.0, 1e5).h == pytest.approx(1e5 ** (-0.2))

    def test_mse_rejects_gamma_above_beta(self):
        """Should require gamma <= beta."""
        with pytest.raises(ValidationError):
            mse_bandwidth(1, 2.0, 1e6, gamma=3.0)
