"""
Tests for ergokde/process_models.py
"""
import math

import numpy as np
import pytest

from ergokde.errors import SimulationError, ValidationError
from ergokde.levy_noise import (
    GaussianJumpLaw,
    JumpMeasureSpec,
    LevyTriplet,
    MomentFlags,
    PointMassJumpLaw,
    TemperedStableDensity,
)
from ergokde.process_models import (
    ConstantMatrix,
    JumpSDEModel,
    LibraryDrift,
    OUModel,
    SamplePath,
    drift_coefficient,
    matrix_coefficient,
    simulate_jump_sde,
    simulate_ou,
    simulate_path,
    stationary_gaussian_cov,
    validate_jump_assumptions,
    validate_ou_assumptions,
)


def brownian_ou(B, Q, drift_a=None):
    return OUModel(np.atleast_2d(B), LevyTriplet.brownian(np.atleast_2d(Q), drift_a))


def jump_model(drift="soft_restoring", sigma="identity", gamma="zero", spec=None, dim=1, **kwargs):
    return JumpSDEModel(
        drift_coefficient(drift),
        matrix_coefficient(sigma, dim),
        matrix_coefficient(gamma, dim),
        spec if spec is not None else JumpMeasureSpec.none(dim),
        **kwargs,
    )


class TestSamplePath:
    """Tests for SamplePath."""

    def test_properties(self):
        """Should expose n_steps, dim and horizon."""
        path = SamplePath(0.5, np.zeros((5, 2)))
        assert path.n_steps == 4
        assert path.dim == 2
        assert path.horizon == 2.0
        np.testing.assert_array_equal(path.times(), [0.0, 0.5, 1.0, 1.5, 2.0])

    def test_one_dimensional_states_become_columns(self):
        """Should accept a flat array for d = 1."""
        assert SamplePath(0.1, np.arange(3.0)).states.shape == (3, 1)

    def test_states_are_read_only(self):
        """Should not allow writes to the stored states."""
        path = SamplePath(0.1, np.zeros((3, 1)))
        with pytest.raises(ValueError):
            path.states[0, 0] = 1.0

    def test_caller_array_stays_writeable(self):
        """Should copy the states and leave the caller's buffer writeable."""
        states = np.zeros((3, 1))
        path = SamplePath(0.1, states)
        assert states.flags.writeable
        states[0, 0] = 5.0
        assert path.states[0, 0] == 0.0

    def test_rejects_single_state(self):
        """Should require at least one step."""
        with pytest.raises(ValidationError):
            SamplePath(0.1, np.zeros((1, 1)))


class TestStationaryGaussianCov:
    """Tests for stationary_gaussian_cov."""

    def test_diagonal_case(self):
        """Should give Q_ii / (2 b_i) for diagonal B."""
        sigma = stationary_gaussian_cov(np.diag([1.0, 2.0]), np.eye(2))
        np.testing.assert_allclose(sigma, np.diag([0.5, 0.25]), atol=1e-12)

    def test_solves_lyapunov_equation(self):
        """Should satisfy B S + S B^T = Q for a non-normal B."""
        B = np.array([[1.0, 0.5], [0.0, 2.0]])
        Q = np.array([[1.0, 0.2], [0.2, 0.5]])
        S = stationary_gaussian_cov(B, Q)
        np.testing.assert_allclose(B @ S + S @ B.T, Q, atol=1e-10)
        np.testing.assert_allclose(S, S.T)

    def test_rejects_unstable_B(self):
        """Should reject a B with an eigenvalue of non-positive real part."""
        with pytest.raises(ValidationError):
            stationary_gaussian_cov(np.diag([1.0, -0.1]), np.eye(2))


class TestSimulateOU:
    """Tests for simulate_ou."""

    def test_same_seed_same_path(self):
        """Should reproduce a path bit for bit."""
        model = brownian_ou(np.eye(2), np.eye(2))
        a = simulate_ou(model, 5.0, 0.01, rng=3)
        b = simulate_ou(model, 5.0, 0.01, rng=3)
        assert np.array_equal(a.states, b.states)
        assert a.seed == 3

    def test_different_seeds_differ(self):
        """Should draw different paths for different seeds."""
        model = brownian_ou(1.0, 1.0)
        assert not np.array_equal(simulate_ou(model, 1.0, 0.01, rng=1).states,
                                  simulate_ou(model, 1.0, 0.01, rng=2).states)

    def test_step_count(self):
        """Should keep round(T/dt) steps after burn-in."""
        path = simulate_ou(brownian_ou(1.0, 1.0), 2.0, 0.01, rng=0)
        assert path.n_steps == 200
        assert path.states.shape == (201, 1)
        assert path.burn_in_steps == 0

    def test_deterministic_decay_without_noise(self):
        """Should follow x0 exp(-t B) exactly when Q = 0."""
        model = brownian_ou(1.0, 0.0)
        path = simulate_ou(model, 1.0, 0.1, x0=[2.0], rng=0)
        np.testing.assert_allclose(path.states[:, 0], 2.0 * np.exp(-path.times()), rtol=1e-12)

    def test_stationary_variance(self):
        """Should have empirical variance near Q / (2B)."""
        path = simulate_ou(brownian_ou(1.0, 2.0), 2000.0, 0.01, rng=5)
        assert path.states[:, 0].var() == pytest.approx(1.0, abs=0.2)

    def test_mean_decays_from_x0(self):
        """Should give E[X_T] = exp(-T B) x0 over independent runs."""
        model = brownian_ou(np.eye(2), np.eye(2))
        reps = 10_000
        ends = np.array([simulate_ou(model, 1.0, 0.1, x0=[1.0, 0.0], rng=i).states[-1] for i in range(reps)])
        se = math.sqrt((1.0 - math.exp(-2.0)) / 2.0 / reps)
        np.testing.assert_allclose(ends.mean(axis=0), [math.exp(-1.0), 0.0], atol=3 * se)

    def test_jump_ou_mean_and_burn_in(self):
        """Should start at B^{-1} a with a burn-in and stay around it."""
        noise = LevyTriplet(np.array([1.0]), np.array([[0.5]]),
                            JumpMeasureSpec.compound_poisson(1.0, GaussianJumpLaw.standard(1)))
        path = simulate_ou(OUModel(np.array([[2.0]]), noise), 500.0, 0.01, rng=9)
        assert path.burn_in_steps == 5000
        assert path.states[:, 0].mean() == pytest.approx(0.5, abs=0.15)

    def test_x0_disables_default_burn_in(self):
        """Should not burn in when x0 is given."""
        noise = LevyTriplet(np.zeros(1), np.eye(1),
                            JumpMeasureSpec.compound_poisson(1.0, GaussianJumpLaw.standard(1)))
        path = simulate_ou(OUModel(np.eye(1), noise), 1.0, 0.01, x0=[0.0], rng=0)
        assert path.burn_in_steps == 0
        assert path.states[0, 0] == 0.0

    def test_rejects_unstable_B(self):
        """Should refuse to simulate with an unstable B."""
        with pytest.raises(ValidationError):
            simulate_ou(brownian_ou(-1.0, 1.0), 1.0, 0.01)

    def test_rejects_wrong_x0_length(self):
        """Should reject x0 of the wrong dimension."""
        with pytest.raises(ValidationError):
            simulate_ou(brownian_ou(np.eye(2), np.eye(2)), 1.0, 0.01, x0=[0.0])

    def test_rejects_horizon_below_dt(self):
        """Should reject T < dt."""
        with pytest.raises(ValidationError):
            simulate_ou(brownian_ou(1.0, 1.0), 0.001, 0.01)


class TestSimulateJumpSDE:
    """Tests for simulate_jump_sde."""

    def test_euler_recursion_without_noise(self):
        """Should follow x (1 - dt)^k for a linear drift and no noise."""
        model = jump_model(drift="linear_restoring", sigma="zero")
        path = simulate_jump_sde(model, 1.0, 0.1, x0=[1.0], rng=0)
        np.testing.assert_allclose(path.states[:, 0], 0.9 ** np.arange(11), rtol=1e-12)

    def test_non_finite_state_reports_step(self):
        """Should raise SimulationError with the failing step index."""
        model = JumpSDEModel(lambda x: np.full_like(x, np.inf), matrix_coefficient("zero", 1),
                             matrix_coefficient("zero", 1), JumpMeasureSpec.none(1))
        with pytest.raises(SimulationError) as info:
            simulate_jump_sde(model, 1.0, 0.1, x0=[0.0], rng=0)
        assert info.value.step_index == 1
        assert info.value.to_dict()["step_index"] == 1

    def test_dispatch(self):
        """Should route a JumpSDEModel through simulate_path."""
        path = simulate_path(jump_model(), 1.0, 0.01, x0=[0.0], rng=4)
        assert path.model_tag == "jump_sde"
        assert path.n_steps == 100

    def test_default_burn_in(self):
        """Should burn in min(T/10, 50) without x0."""
        path = simulate_jump_sde(jump_model(), 10.0, 0.01, rng=0)
        assert path.burn_in_steps == 100

    def test_dispatch_rejects_unknown_model(self):
        """Should reject objects that are not models."""
        with pytest.raises(ValidationError):
            simulate_path(object(), 1.0, 0.01)

    def test_rejects_alpha_out_of_range(self):
        """Should reject alpha outside (0, 2)."""
        with pytest.raises(ValidationError):
            jump_model(alpha=2.0)

    def test_compiled_path_matches_python_fallback(self):
        """Should give the same path for library coefficients and equivalent plain callables."""
        spec = JumpMeasureSpec.compound_poisson(1.5, GaussianJumpLaw.standard(2))
        library = jump_model(gamma="identity", spec=spec, dim=2)
        wrapped = JumpSDEModel(lambda x: library.drift_b(x), lambda x: library.dispersion_sigma(x),
                               lambda x: library.jump_gamma(x), spec)
        compiled = simulate_jump_sde(library, 20.0, 0.01, x0=[2.0, -1.0], rng=13)
        fallback = simulate_jump_sde(wrapped, 20.0, 0.01, x0=[2.0, -1.0], rng=13)
        np.testing.assert_allclose(compiled.states, fallback.states, rtol=1e-10, atol=1e-10)

    def test_compiled_path_reports_non_finite_step(self):
        """Should report the overflowing step from the compiled recursion."""
        model = JumpSDEModel(drift_coefficient("linear_restoring", 1e300), matrix_coefficient("zero", 1),
                             matrix_coefficient("zero", 1), JumpMeasureSpec.none(1))
        with pytest.raises(SimulationError) as info:
            simulate_jump_sde(model, 3.0, 1.0, x0=[1.0], rng=0)
        assert info.value.step_index == 2

    def test_brownian_marginal_variance(self):
        """Should give Var(X_T - x0) = T for b = 0, sigma = I, gamma = 0."""
        model = jump_model(drift="zero")
        reps = 10_000
        ends = np.array([simulate_jump_sde(model, 1.0, 0.05, x0=[0.5], rng=i).states[-1, 0]
                         for i in range(reps)]) - 0.5
        assert ends.var() == pytest.approx(1.0, abs=3 * math.sqrt(2.0 / reps))
        assert ends.mean() == pytest.approx(0.0, abs=3 * math.sqrt(1.0 / reps))

    def test_weak_consistency_when_halving_dt(self):
        """Should give E[cos X_T] within sampling error for dt and dt/2."""
        model = jump_model(drift="zero")
        reps = 5_000

        def values(dt, offset):
            return np.array([math.cos(simulate_jump_sde(model, 1.0, dt, x0=[0.0], rng=offset + i).states[-1, 0])
                             for i in range(reps)])

        coarse, fine = values(0.1, 0), values(0.05, reps)
        se = math.sqrt((coarse.var() + fine.var()) / reps)
        assert abs(coarse.mean() - fine.mean()) <= 3 * se
        assert fine.mean() == pytest.approx(math.exp(-0.5), abs=3 * math.sqrt(fine.var() / reps))

    def test_long_run_averages_settle(self):
        """Should give matching time averages of |X| for long soft-restoring runs."""
        model = jump_model()
        short = simulate_jump_sde(model, 20_000.0, 0.05, rng=1).states[:, 0]
        long = simulate_jump_sde(model, 40_000.0, 0.05, rng=2).states[:, 0]
        assert np.abs(long).mean() == pytest.approx(np.abs(short).mean(), rel=0.05)


class TestCoefficientLibrary:
    """Tests for drift_coefficient and matrix_coefficient."""

    def test_soft_restoring_has_unit_norm_outside_ball(self):
        """Should return -x/||x|| for ||x|| >= 1."""
        b = drift_coefficient("soft_restoring")
        np.testing.assert_allclose(b(np.array([3.0, 4.0])), [-0.6, -0.8])
        np.testing.assert_allclose(b(np.array([0.5, 0.0])), [-0.5, 0.0])

    def test_scaled_drift(self):
        """Should multiply the drift by its scale."""
        b = drift_coefficient("linear_restoring", 2.0)
        np.testing.assert_allclose(b(np.array([1.0])), [-2.0])

    def test_unknown_drift(self):
        """Should reject an unknown drift name."""
        with pytest.raises(ValidationError):
            drift_coefficient("cubic")

    def test_identity_matrix(self):
        """Should return scale * I regardless of x."""
        sigma = matrix_coefficient("identity", 2, 3.0)
        np.testing.assert_array_equal(sigma(np.zeros(2)), 3.0 * np.eye(2))

    def test_library_types(self):
        """Should return named drift and constant matrix objects with read-only values."""
        b = drift_coefficient("soft_restoring", 2.0)
        gamma = matrix_coefficient("identity", 2, 0.5)
        assert isinstance(b, LibraryDrift)
        assert (b.name, b.scale) == ("soft_restoring", 2.0)
        assert isinstance(gamma, ConstantMatrix)
        assert not gamma.value.flags.writeable


class TestValidateJumpAssumptions:
    """Tests for validate_jump_assumptions."""

    def test_default_model_passes(self):
        """Should pass every check for the soft restoring drift with identity sigma."""
        report = validate_jump_assumptions(jump_model(dim=2), sample_count=200)
        assert report.passed, [c.to_dict() for c in report.checks if not c.passed]
        assert "drift_dissipativity" in report.names()
        assert "exponential_moment" in report.names()

    def test_zero_drift_violates_dissipativity(self):
        """Should report a witness point for a non-dissipative drift."""
        report = validate_jump_assumptions(jump_model(drift="zero"), sample_count=200)
        check = report.get("drift_dissipativity")
        assert not check.passed
        assert check.witness["margin"] < 0
        assert not report.passed

    def test_linear_drift_is_unbounded(self):
        """Should flag a drift that grows with ||x||."""
        report = validate_jump_assumptions(jump_model(drift="linear_restoring"), sample_count=200)
        assert report.get("drift_dissipativity").passed
        assert not report.get("drift_bounded").passed

    def test_degenerate_sigma(self):
        """Should fail ellipticity when sigma vanishes."""
        report = validate_jump_assumptions(jump_model(sigma="zero"), sample_count=200)
        check = report.get("uniform_ellipticity")
        assert not check.passed
        assert math.isinf(check.witness["c"])

    def test_point_mass_jumps_are_not_absolutely_continuous(self):
        """Should fail absolute continuity for a point-mass jump law."""
        spec = JumpMeasureSpec.compound_poisson(1.0, PointMassJumpLaw(np.array([0.5])))
        report = validate_jump_assumptions(jump_model(gamma="identity", spec=spec), sample_count=200)
        assert not report.get("nu_absolutely_continuous").passed
        assert report.get("exponential_moment").passed

    def test_kappa_bounded_for_matching_alpha(self):
        """Should accept kappa when alpha matches the stable index."""
        spec = JumpMeasureSpec.density_family(TemperedStableDensity(1, 1.0, 1.0, 2.0))
        report = validate_jump_assumptions(jump_model(gamma="identity", spec=spec, alpha=1.0, eta0=1.0),
                                           sample_count=200)
        assert report.get("kappa_bounded").passed
        assert report.get("exponential_moment").passed

    def test_kappa_unbounded_for_small_alpha(self):
        """Should flag kappa growing towards the origin."""
        spec = JumpMeasureSpec.density_family(TemperedStableDensity(1, 1.0, 1.5, 2.0))
        report = validate_jump_assumptions(jump_model(gamma="identity", spec=spec, alpha=0.5, eta0=1.0),
                                           sample_count=200)
        assert not report.get("kappa_bounded").passed

    def test_exponential_moment_divergence_is_reported(self):
        """Should report, not raise, a divergent exponential moment."""
        spec = JumpMeasureSpec.density_family(TemperedStableDensity(1, 1.0, 1.0, 1.0))
        report = validate_jump_assumptions(jump_model(gamma="identity", spec=spec, eta0=3.0),
                                           sample_count=200)
        assert not report.get("exponential_moment").passed

    def test_rejects_small_sample_count(self):
        """Should require at least 100 samples."""
        with pytest.raises(ValidationError):
            validate_jump_assumptions(jump_model(), sample_count=10)

    def test_report_serialises(self):
        """Should convert numpy witnesses to lists."""
        data = validate_jump_assumptions(jump_model(drift="zero"), sample_count=200).to_dict()
        witness = data["checks"][0]["witness"]
        assert isinstance(data["passed"], bool)
        assert witness["margin"] < 0


class TestValidateOUAssumptions:
    """Tests for validate_ou_assumptions."""

    def test_brownian_model_passes(self):
        """Should pass for stable B and full-rank Q."""
        report = validate_ou_assumptions(brownian_ou(np.eye(2), np.eye(2)))
        assert report.passed
        assert report.get("stationarity_log_moment").witness == 0.0

    def test_rank_deficient_Q(self):
        """Should report the numerical rank of Q."""
        check = validate_ou_assumptions(brownian_ou(np.eye(2), np.diag([1.0, 0.0]))).get("rank_Q")
        assert not check.passed
        assert check.witness == {"rank": 1, "dim": 2}

    def test_unstable_B_is_reported(self):
        """Should report, not raise, an unstable B."""
        report = validate_ou_assumptions(brownian_ou(-1.0, 1.0))
        assert not report.get("B_stable").passed

    def test_declared_moment_scenarios(self):
        """Should list the scenarios enabled by the declared moment flags."""
        spec = JumpMeasureSpec.compound_poisson(
            1.0, GaussianJumpLaw.standard(1), MomentFlags(p_moment=4.0, log_moment_alpha=3.0))
        report = validate_ou_assumptions(OUModel(np.eye(1), LevyTriplet(np.zeros(1), np.eye(1), spec)))
        assert report.get("declared_p_moment").passed
        assert report.scenarios == ["finite_p_moment_any_dimension", "log_moment_dimension_one"]
