#!/usr/bin/env python3
"""
Experiment harness

Monte Carlo experiments: sup-norm and pointwise risk across horizons,
log-log rate fits, variance scaling of localized occupation integrals and
the decay of ergodic averages. Every experiment is a pure function of its
inputs and the master seed: replication (t_index, rep) always uses seed
master_seed + t_index * reps + rep, and rows are sorted by (T, seed).
"""

import hashlib
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import interpolate, stats

from .adaptive_selector import BandwidthSettings, build_grid, resolve_bandwidth
from .config import get_config
from .density_estimator import (
    DensityEstimate,
    EvaluationGrid,
    estimate_density,
    evaluate_at_points,
    theoretical_bandwidth,
)
from .errors import DegenerateDataError, ReferenceUnavailableError, ValidationError
from .kernel_construction import build_order_kernel
from .process_models import (
    JumpSDEModel,
    OUModel,
    SamplePath,
    simulate_path,
    stationary_gaussian_cov,
)


logger = logging.getLogger("ergokde.experiment_harness")

BOOTSTRAP_RESAMPLES = 500
PILOT_FACTOR = 50.0

Reference = Callable[[np.ndarray], np.ndarray]
Model = Union[OUModel, JumpSDEModel]


def _map(fn, items: list, threads: Optional[int]) -> list:
    threads = threads or get_config().THREADS
    if threads > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, items))
    return [fn(item) for item in items]


def replication_seed(master_seed: int, t_index: int, rep: int, reps: int) -> int:
    return int(master_seed) + t_index * reps + rep


# ============================================================================
# Errors and references
# ============================================================================

def sup_norm_error(est: DensityEstimate, reference: Reference) -> float:
    """max over grid points of |rho_hat - reference|."""
    ref = np.asarray(reference(est.grid.points()), dtype=float).ravel()
    if not np.all(np.isfinite(ref)):
        raise ValidationError("reference density is not finite on the evaluation grid")
    return float(np.max(np.abs(est.values.ravel() - ref)))


def gaussian_ou_reference(model: OUModel) -> Reference:
    """Analytic invariant density N(B^-1 a, Sigma) of a Brownian-driven OU model."""
    if not model.noise.is_brownian:
        raise ReferenceUnavailableError("analytic reference needs a Brownian-driven OU model",
                                        key="experiment.reference")
    cov = stationary_gaussian_cov(model.B, model.noise.gaussian_Q)
    law = stats.multivariate_normal(mean=model.stationary_mean(), cov=cov)
    return lambda x: np.atleast_1d(law.pdf(np.asarray(x, dtype=float).reshape(-1, model.dim)))


def _grid_interpolator(est: DensityEstimate) -> Reference:
    interp = interpolate.RegularGridInterpolator(tuple(est.grid.axes()), est.values,
                                                 bounds_error=False, fill_value=0.0)
    return lambda x: interp(np.asarray(x, dtype=float).reshape(-1, est.grid.dim))


def pilot_cache_key(model_key: str, T_pilot: float, h_pilot: float, grid: EvaluationGrid,
                    seed: int, dt: float, kernel_order: int) -> str:
    payload = json.dumps({
        "model": model_key,
        "T_pilot": T_pilot,
        "h_pilot": h_pilot,
        "dt": dt,
        "kernel_order": kernel_order,
        "lower": grid.lower.tolist(),
        "upper": grid.upper.tolist(),
        "points_per_axis": grid.points_per_axis,
        "seed": seed,
    }, sort_keys=True)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def pilot_reference(model: Model, kernel_order: int, T_pilot: float, h_pilot: float,
                    eval_grid: EvaluationGrid, dt: float, seed: int,
                    model_key: Optional[str] = None,
                    cache_dir: Optional[Path] = None) -> Reference:
    """
    Reference density from one long pilot path, cached on disk when model_key is given.

    The cache file is <cache_dir>/pilot_<sha256>.npz.
    """
    cache_file = None
    if model_key is not None:
        cache_dir = Path(cache_dir) if cache_dir else get_config().CACHE_DIR
        key = pilot_cache_key(model_key, T_pilot, h_pilot, eval_grid, seed, dt, kernel_order)
        cache_file = cache_dir / f"pilot_{key}.npz"
        if cache_file.exists():
            logger.info("Loading pilot reference from %s", cache_file)
            with np.load(cache_file) as data:
                est = DensityEstimate(eval_grid, data["values"], float(data["h"]), float(data["T"]),
                                      kernel_order)
            return _grid_interpolator(est)

    logger.info("Computing pilot reference: T=%g h=%g", T_pilot, h_pilot)
    kernel = build_order_kernel(model.dim, kernel_order)
    path = simulate_path(model, T_pilot, dt, rng=seed)
    est = estimate_density(path, kernel, h_pilot, eval_grid)

    if cache_file is not None:
        try:
            cache_file.parent.mkdir(parents=True, exist_ok=True)
            np.savez(cache_file, values=est.values, h=est.h, T=est.T)
        except OSError as e:
            logger.warning("Could not write pilot cache %s: %s", cache_file, e)
    return _grid_interpolator(est)


def _smallest_bandwidth(rule: str, d: int, T_list: Sequence[float], settings: BandwidthSettings) -> float:
    T_max = max(T_list)
    if rule == "fixed":
        return float(settings.h_fixed)
    if rule == "adaptive" and d >= 3:
        return build_grid(T_max, d, settings.eta, settings.k, settings.threshold_scale).h_min
    return theoretical_bandwidth(d, settings.beta, T_max, settings.c_h).h


# ============================================================================
# Risk experiments
# ============================================================================

@dataclass(frozen=True)
class RiskRow:
    T: float
    seed: int
    h: float
    sup_err: float
    pt_sq_err: float


@dataclass
class RiskSummary:
    T: float
    median_sup_err: float
    q1_sup_err: float
    q3_sup_err: float
    median_pt_sq_err: float
    ci_low: float
    ci_high: float


@dataclass
class RiskReport:
    rows: List[RiskRow]
    reps: int
    h_rule: str
    T_list: List[float]
    summaries: List[RiskSummary] = field(default_factory=list)

    def medians(self, column: str = "sup_err") -> np.ndarray:
        out = []
        for T in self.T_list:
            values = [getattr(r, column) for r in self.rows if r.T == T]
            out.append(float(np.median(values)))
        return np.array(out)

    def csv_rows(self) -> List[list]:
        return [[r.T, r.seed, r.h, r.sup_err, r.pt_sq_err] for r in self.rows]


def bootstrap_median_ci(values: Sequence[float], resamples: int = BOOTSTRAP_RESAMPLES,
                        rng: Union[np.random.Generator, int] = 0,
                        level: float = 0.95) -> Tuple[float, float]:
    """Percentile bootstrap interval for the median."""
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise ValidationError("bootstrap needs at least one value")
    gen = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    idx = gen.integers(0, values.size, size=(resamples, values.size))
    medians = np.median(values[idx], axis=1)
    alpha = 0.5 * (1.0 - level)
    return float(np.quantile(medians, alpha)), float(np.quantile(medians, 1.0 - alpha))


def run_risk_experiment(model: Model, kernel_order: int, T_list: Sequence[float], h_rule: str,
                        reps: int, master_seed: int = 0, *, dt: float,
                        eval_grid: EvaluationGrid,
                        settings: BandwidthSettings = BandwidthSettings(),
                        reference: Optional[Reference] = None,
                        pilot: bool = False,
                        pilot_factor: float = PILOT_FACTOR,
                        model_key: Optional[str] = None,
                        reference_point=None,
                        x0=None, burn_in: Optional[float] = None,
                        threads: Optional[int] = None) -> RiskReport:
    """
    Full factorial T_list x reps of simulate -> choose h -> estimate -> score.

    The reference density is, in order: the given callable, the analytic
    Gaussian density of a Brownian-driven OU model, or a pilot estimate
    (T_pilot = pilot_factor * max T, h_pilot = h_min / 2) when pilot=True.

    Raises:
        ReferenceUnavailableError: If no reference can be produced
    """
    if reps < 1:
        raise ValidationError("reps must be >= 1", key="experiment.reps")
    if not T_list:
        raise ValidationError("T_list must not be empty", key="experiment.T_list")
    T_list = [float(T) for T in T_list]
    d = model.dim

    if reference is None:
        if isinstance(model, OUModel) and model.noise.is_brownian:
            reference = gaussian_ou_reference(model)
        elif pilot:
            h_pilot = 0.5 * _smallest_bandwidth(h_rule, d, T_list, settings)
            reference = pilot_reference(model, kernel_order, pilot_factor * max(T_list), h_pilot,
                                        eval_grid, dt, int(master_seed) + len(T_list) * reps,
                                        model_key)
        else:
            raise ReferenceUnavailableError(
                "no reference density for this model; enable experiment.pilot or supply a reference",
                key="experiment.pilot",
            )

    kernel = build_order_kernel(d, kernel_order)
    point = np.zeros(d) if reference_point is None else np.atleast_1d(np.asarray(reference_point, dtype=float))
    ref_at_point = float(np.asarray(reference(point[None, :])).ravel()[0])

    jobs = [(T, replication_seed(master_seed, t_index, rep, reps))
            for t_index, T in enumerate(T_list) for rep in range(reps)]

    def run(job) -> RiskRow:
        T, seed = job
        path = simulate_path(model, T, dt, x0, burn_in, rng=seed)
        decision = resolve_bandwidth(h_rule, path, kernel, eval_grid, settings, threads=1)
        est = estimate_density(path, kernel, decision.h, eval_grid, threads=1)
        pt = float(evaluate_at_points(path, kernel, decision.h, point[None, :])[0])
        return RiskRow(T, seed, decision.h, sup_norm_error(est, reference), (pt - ref_at_point) ** 2)

    rows = sorted(_map(run, jobs, threads), key=lambda r: (r.T, r.seed))
    report = RiskReport(rows, reps, h_rule, T_list)
    for T in T_list:
        sup = np.array([r.sup_err for r in rows if r.T == T])
        pt = np.array([r.pt_sq_err for r in rows if r.T == T])
        lo, hi = bootstrap_median_ci(sup, rng=int(master_seed))
        q1, q3 = np.quantile(sup, [0.25, 0.75])
        report.summaries.append(RiskSummary(T, float(np.median(sup)), float(q1), float(q3),
                                            float(np.median(pt)), lo, hi))
    logger.info("Risk experiment finished: %d rows, rule=%s", len(rows), h_rule)
    return report


# ============================================================================
# Rate fits
# ============================================================================

class RateFit(NamedTuple):
    log_T: np.ndarray
    log_err: np.ndarray
    slope: float
    intercept: float
    residual_rms: float


def fit_log_rate(T_values: Sequence[float], errors: Sequence[float]) -> RateFit:
    """
    Least-squares line through (log T, log error).

    Raises:
        ValidationError: With fewer than 3 pairs or a non-positive value
    """
    T_values = np.asarray(T_values, dtype=float)
    errors = np.asarray(errors, dtype=float)
    if T_values.shape != errors.shape or T_values.size < 3:
        raise ValidationError("rate fit needs at least 3 (T, error) pairs")
    if np.any(errors <= 0) or np.any(T_values <= 0):
        raise ValidationError("rate fit needs positive T values and errors")
    x, y = np.log(T_values), np.log(errors)
    fit = stats.linregress(x, y)
    residual = y - (fit.intercept + fit.slope * x)
    return RateFit(x, y, float(fit.slope), float(fit.intercept), float(np.sqrt(np.mean(residual ** 2))))


def rate_fit_from_report(report: RiskReport, column: str = "sup_err") -> RateFit:
    return fit_log_rate(report.T_list, report.medians(column))


# ============================================================================
# Variance scaling
# ============================================================================

def theoretical_variance_exponent(d: int) -> float:
    """Exponent of lambda in lambda^2 psi_d(lambda)^2 (log factor dropped for d = 2)."""
    if d <= 2:
        return 2.0
    return 1.0 + 2.0 / d


def occupation_integrals(path: SamplePath, center, lam: float) -> float:
    """dt * #{left endpoints inside the cube of volume lam centred at center}."""
    center = np.atleast_1d(np.asarray(center, dtype=float))
    half = 0.5 * lam ** (1.0 / path.dim)
    inside = np.all(np.abs(path.states[:-1] - center) <= half, axis=1)
    return float(path.dt * np.count_nonzero(inside))


def occupation_variance(paths: Sequence[SamplePath], center, lam: float) -> float:
    """Empirical Var(int_0^T f(X_s) ds) / T for f the cube indicator."""
    integrals = np.array([occupation_integrals(p, center, lam) for p in paths])
    if integrals.size < 2:
        raise ValidationError("variance needs at least 2 paths")
    return float(np.var(integrals, ddof=1) / paths[0].horizon)


@dataclass
class VarianceScalingReport:
    lambdas: np.ndarray
    var_over_T: np.ndarray
    slope: float
    theoretical_exponent: float
    fit: Optional[RateFit] = None
    notes: List[str] = field(default_factory=list)

    def csv_rows(self) -> List[list]:
        return [[float(l), float(v)] for l, v in zip(self.lambdas, self.var_over_T)]


def variance_scaling_experiment(model: Model, center, lambda_list: Sequence[float], T: float,
                                reps: int, master_seed: int = 0, *, dt: float,
                                x0=None, burn_in: Optional[float] = None,
                                threads: Optional[int] = None) -> VarianceScalingReport:
    """
    Var(int_0^T 1_S(X_s) ds) / T against the cube volume lambda(S).

    Raises:
        ValidationError: If reps < 50, a lambda lies outside (0, 1) or the
            lambdas span less than 1.5 decades
        DegenerateDataError: If every occupation integral is zero
    """
    if reps < 50:
        raise ValidationError("variance experiment needs reps >= 50", key="experiment.reps")
    lambdas = np.asarray(sorted(float(l) for l in lambda_list))
    if lambdas.size < 2 or np.any(lambdas <= 0) or np.any(lambdas >= 1):
        raise ValidationError("lambda values must lie in (0, 1)", key="experiment.lambda_list")
    if math.log10(lambdas[-1] / lambdas[0]) < 1.5:
        raise ValidationError("lambda values must span at least 1.5 decades", key="experiment.lambda_list")
    center = np.atleast_1d(np.asarray(center, dtype=float))

    def run(rep: int) -> np.ndarray:
        path = simulate_path(model, T, dt, x0, burn_in, rng=replication_seed(master_seed, 0, rep, reps))
        return np.array([occupation_integrals(path, center, lam) for lam in lambdas])

    occupations = np.vstack(_map(run, list(range(reps)), threads))
    if not np.any(occupations):
        raise DegenerateDataError("all occupation integrals are zero; the cube centre is outside the bulk",
                                  key="experiment.center")

    horizon = round(T / dt) * dt
    var_over_T = np.var(occupations, axis=0, ddof=1) / horizon
    exponent = theoretical_variance_exponent(model.dim)
    report = VarianceScalingReport(lambdas, var_over_T, math.nan, exponent)
    if np.all(var_over_T > 0) and lambdas.size >= 3:
        report.fit = fit_log_rate(lambdas, var_over_T)
        report.slope = report.fit.slope
    else:
        report.notes.append("slope undefined: some variances are zero")
    logger.info("Variance scaling: slope=%.4g theory=%.4g", report.slope, exponent)
    return report


# ============================================================================
# Ergodic averages
# ============================================================================

def ergodic_average(path: SamplePath, g: Callable[[np.ndarray], np.ndarray]) -> float:
    """Riemann average (1/n) sum g(X_{t_i}) over the left endpoints; exact for constant g."""
    values = np.asarray(g(path.states[:-1]), dtype=float).ravel()
    if values.size == 1 and path.n_steps > 1:
        return float(values[0])
    return float(values[0] + np.mean(values - values[0]))


@dataclass
class ErgodicRateReport:
    T_list: List[float]
    rms: np.ndarray
    fit: Optional[RateFit]

    def csv_rows(self) -> List[list]:
        return [[T, float(r)] for T, r in zip(self.T_list, self.rms)]


def ergodic_rate_experiment(model: Model, g: Callable[[np.ndarray], np.ndarray], mu_g: float,
                            T_list: Sequence[float], reps: int, master_seed: int = 0, *,
                            dt: float, x0=None, burn_in: Optional[float] = None,
                            threads: Optional[int] = None) -> ErgodicRateReport:
    """RMS of (ergodic average - mu_g) per horizon and its log-log slope."""
    if reps < 1:
        raise ValidationError("reps must be >= 1", key="experiment.reps")
    T_list = [float(T) for T in T_list]
    jobs = [(t_index, T, replication_seed(master_seed, t_index, rep, reps))
            for t_index, T in enumerate(T_list) for rep in range(reps)]

    def run(job) -> Tuple[int, float]:
        t_index, T, seed = job
        path = simulate_path(model, T, dt, x0, burn_in, rng=seed)
        return t_index, ergodic_average(path, g) - mu_g

    results = _map(run, jobs, threads)
    rms = np.zeros(len(T_list))
    for t_index in range(len(T_list)):
        errs = np.array([e for i, e in results if i == t_index])
        rms[t_index] = math.sqrt(float(np.mean(errs ** 2)))
    fit = fit_log_rate(T_list, rms) if len(T_list) >= 3 and np.all(rms > 0) else None
    return ErgodicRateReport(T_list, rms, fit)
