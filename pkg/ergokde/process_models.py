#!/usr/bin/env python3
"""
Process models

Simulators for the two model classes handled by ergokde:

- OUModel: dX = -B X dt + dZ with Z a Levy process (LevyTriplet)
- JumpSDEModel: dX = b(X) dt + sigma(X) dW + gamma(X-) dZ_comp

plus numerical validators for their coefficient assumptions. Validators
never raise on a violated assumption; they return an AssumptionReport.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Union

import numpy as np
from numba import njit
from scipy import linalg

from .errors import NumericalError, SimulationError, ValidationError
from .levy_noise import (
    JumpMeasureSpec,
    LevyTriplet,
    exponential_moment_check,
    psd_factor,
    sample_compensated_jumps,
    sample_increments,
    stationarity_log_moment,
    uniform_directions,
)


logger = logging.getLogger("ergokde.process_models")

STABILITY_TOL = 1e-10
RANK_TOL = 1e-10
LYAPUNOV_RESIDUAL_TOL = 1e-10
NOISE_BLOCK = 1 << 16
MAX_DEFAULT_BURN_IN = 50.0

RngLike = Union[np.random.Generator, int, None]


def _as_generator(rng: RngLike, seed: Optional[int]) -> tuple:
    """Resolve (generator, recorded seed) from an rng argument."""
    if isinstance(rng, np.random.Generator):
        return rng, -1 if seed is None else int(seed)
    base = 0 if rng is None else int(rng)
    return np.random.default_rng(base), base if seed is None else int(seed)


# ============================================================================
# Sample paths
# ============================================================================

@dataclass(frozen=True, eq=False)
class SamplePath:
    """Trajectory on the uniform grid t_k = k*dt, k = 0..n_steps."""

    dt: float
    states: np.ndarray
    seed: int = -1
    burn_in_steps: int = 0
    model_tag: str = ""

    def __post_init__(self):
        states = np.array(self.states, dtype=float, copy=True)
        if states.ndim == 1:
            states = states[:, None]
        if not self.dt > 0:
            raise ValidationError("path dt must be > 0")
        if states.ndim != 2 or states.shape[0] < 2:
            raise ValidationError("a path needs n_steps >= 1 (at least two states)")
        states.flags.writeable = False
        object.__setattr__(self, "states", states)

    @property
    def n_steps(self) -> int:
        return self.states.shape[0] - 1

    @property
    def dim(self) -> int:
        return self.states.shape[1]

    @property
    def horizon(self) -> float:
        return self.n_steps * self.dt

    def times(self) -> np.ndarray:
        return self.dt * np.arange(self.n_steps + 1)

    def final_state(self) -> np.ndarray:
        return self.states[-1].copy()


# ============================================================================
# Models
# ============================================================================

@dataclass(frozen=True, eq=False)
class OUModel:
    """Levy-driven Ornstein-Uhlenbeck model dX = -B X dt + dZ."""

    B: np.ndarray
    noise: LevyTriplet
    tag: str = "ou"

    def __post_init__(self):
        B = np.atleast_2d(np.asarray(self.B, dtype=float))
        if B.shape != (self.noise.dim, self.noise.dim):
            raise ValidationError(f"B must be {self.noise.dim}x{self.noise.dim}, got {B.shape}")
        object.__setattr__(self, "B", B)

    @property
    def dim(self) -> int:
        return self.noise.dim

    @property
    def is_stable(self) -> bool:
        return bool(np.all(np.linalg.eigvals(self.B).real > STABILITY_TOL))

    def stationary_mean(self) -> np.ndarray:
        return np.linalg.solve(self.B, self.noise.drift_a)


Coefficient = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True, eq=False)
class JumpSDEModel:
    """Jump SDE dX = b(X) dt + sigma(X) dW + gamma(X-) dZ_comp."""

    drift_b: Coefficient
    dispersion_sigma: Coefficient
    jump_gamma: Coefficient
    jump_spec: JumpMeasureSpec
    c1: float = 1.0
    c2: float = 1.0
    eta0: float = 1.0
    alpha: float = 1.0
    tag: str = "jump_sde"

    def __post_init__(self):
        if not (0.0 < self.alpha < 2.0):
            raise ValidationError("alpha must lie in (0, 2)")
        for name in ("c1", "c2", "eta0"):
            if not getattr(self, name) > 0:
                raise ValidationError(f"{name} must be > 0")

    @property
    def dim(self) -> int:
        return self.jump_spec.dim


# ============================================================================
# Coefficient library
# ============================================================================

def _zero_drift(x: np.ndarray) -> np.ndarray:
    return np.zeros_like(x)


def _soft_restoring(x: np.ndarray) -> np.ndarray:
    return -x / max(float(np.linalg.norm(x)), 1.0)


def _linear_restoring(x: np.ndarray) -> np.ndarray:
    return -np.asarray(x, dtype=float)


DRIFTS: Dict[str, Coefficient] = {
    "zero": _zero_drift,
    "soft_restoring": _soft_restoring,
    "linear_restoring": _linear_restoring,
}

# Drift codes understood by the compiled Euler kernel
DRIFT_CODES = {"zero": 0, "soft_restoring": 1, "linear_restoring": 2}


@dataclass(frozen=True)
class LibraryDrift:
    """Built-in drift `name` times `scale`."""

    name: str
    scale: float = 1.0

    def __call__(self, x: np.ndarray) -> np.ndarray:
        value = DRIFTS[self.name](x)
        return value if self.scale == 1.0 else self.scale * value


@dataclass(frozen=True, eq=False)
class ConstantMatrix:
    """State-independent matrix coefficient."""

    value: np.ndarray

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.value


def drift_coefficient(name: str, scale: float = 1.0) -> Coefficient:
    """Built-in drift b by name, multiplied by `scale`."""
    if name not in DRIFTS:
        raise ValidationError(f"unknown drift {name!r}; known: {sorted(DRIFTS)}")
    return LibraryDrift(name, float(scale))


def matrix_coefficient(name: str, dim: int, scale: float = 1.0) -> Coefficient:
    """Built-in constant matrix coefficient: `zero` or `identity` times `scale`."""
    if name == "zero":
        value = np.zeros((dim, dim))
    elif name == "identity":
        value = scale * np.eye(dim)
    else:
        raise ValidationError(f"unknown matrix coefficient {name!r}; known: ['identity', 'zero']")
    value.flags.writeable = False
    return ConstantMatrix(value)


# ============================================================================
# Stationary covariance
# ============================================================================

def _require_stable(B: np.ndarray):
    eigvals = np.linalg.eigvals(B)
    worst = eigvals[np.argmin(eigvals.real)]
    if worst.real <= STABILITY_TOL:
        raise ValidationError(f"B is not stable: eigenvalue {worst:.6g} has real part <= {STABILITY_TOL:g}")


def stationary_gaussian_cov(B, Q) -> np.ndarray:
    """
    Solve the Lyapunov equation B S + S B^T = Q.

    Raises:
        ValidationError: If B is not stable or Q is not symmetric PSD
        NumericalError: If the residual exceeds 1e-10
    """
    B = np.atleast_2d(np.asarray(B, dtype=float))
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    _require_stable(B)
    psd_factor(Q, "Q")
    sigma = linalg.solve_continuous_lyapunov(B, Q)
    sigma = 0.5 * (sigma + sigma.T)
    residual = float(np.max(np.abs(B @ sigma + sigma @ B.T - Q)))
    if residual > LYAPUNOV_RESIDUAL_TOL * max(1.0, float(np.max(np.abs(Q)))):
        raise NumericalError(f"Lyapunov residual {residual:.3e} exceeds tolerance")
    return sigma


# ============================================================================
# Simulation
# ============================================================================

@njit(cache=True)
def _ou_recursion(A, M, x, noise, out, start):
    d = x.shape[0]
    tmp = np.empty(d)
    for i in range(noise.shape[0]):
        for r in range(d):
            s = 0.0
            for c in range(d):
                s += A[r, c] * x[c] + M[r, c] * noise[i, c]
            tmp[r] = s
        for r in range(d):
            x[r] = tmp[r]
            out[start + i, r] = tmp[r]


@njit(cache=True)
def _euler_recursion(drift_code, drift_scale, sigma, gamma, x, gauss, jumps, has_jumps, dt, out, start):
    """Euler steps for library coefficients; returns the first non-finite row index or -1."""
    d = x.shape[0]
    sqrt_dt = math.sqrt(dt)
    b = np.empty(d)
    for i in range(gauss.shape[0]):
        if drift_code == 1:
            norm = 0.0
            for r in range(d):
                norm += x[r] * x[r]
            norm = math.sqrt(norm)
            denom = norm if norm > 1.0 else 1.0
            for r in range(d):
                b[r] = -drift_scale * x[r] / denom
        elif drift_code == 2:
            for r in range(d):
                b[r] = -drift_scale * x[r]
        else:
            for r in range(d):
                b[r] = 0.0
        finite = True
        for r in range(d):
            s = 0.0
            for c in range(d):
                s += sigma[r, c] * gauss[i, c]
            value = x[r] + b[r] * dt + sqrt_dt * s
            if has_jumps:
                j = 0.0
                for c in range(d):
                    j += gamma[r, c] * jumps[i, c]
                value += j
            if not math.isfinite(value):
                finite = False
            x[r] = value
            out[start + i, r] = value
        if not finite:
            return start + i
    return -1


def _compiled_coefficients(model: "JumpSDEModel"):
    """(drift code, scale, sigma, gamma) when every coefficient comes from the library, else None."""
    b, sigma, gamma = model.drift_b, model.dispersion_sigma, model.jump_gamma
    if not (isinstance(b, LibraryDrift) and isinstance(sigma, ConstantMatrix)
            and isinstance(gamma, ConstantMatrix)):
        return None
    d = model.dim
    sigma_value = np.ascontiguousarray(sigma.value, dtype=float)
    gamma_value = np.ascontiguousarray(gamma.value, dtype=float)
    if sigma_value.shape != (d, d) or gamma_value.shape != (d, d):
        return None
    return DRIFT_CODES[b.name], float(b.scale), sigma_value, gamma_value


def _step_counts(T: float, dt: float, burn_in: float) -> tuple:
    if not dt > 0:
        raise ValidationError("dt must be > 0")
    if not T >= dt:
        raise ValidationError("horizon T must be >= dt")
    if burn_in < 0:
        raise ValidationError("burn_in must be >= 0")
    return int(round(T / dt)), int(round(burn_in / dt))


def simulate_ou(model: OUModel, T: float, dt: float, x0=None, burn_in: Optional[float] = None,
                rng: RngLike = 0, seed: Optional[int] = None) -> SamplePath:
    """
    Simulate an OU path with the exact linear map and midpoint-weighted noise.

    X_{k+1} = e^{-dt B} X_k + e^{-dt B / 2} dZ_k

    Args:
        model: OU model (B must be stable)
        T: Horizon of the retained path
        dt: Step size
        x0: Start state; None means the stationary law for Brownian noise,
            otherwise the stationary mean followed by a burn-in
        burn_in: Discarded lead time. Defaults to 0 when x0 is given or the
            start is exactly stationary, else min(T/10, 50)
        rng: Generator or integer seed
        seed: Seed recorded on the path (defaults to the integer rng)

    Returns:
        SamplePath: n_steps = round(T/dt) steps after burn-in
    """
    _require_stable(model.B)
    d = model.dim
    gen, recorded_seed = _as_generator(rng, seed)

    exact_start = x0 is None and model.noise.is_brownian
    if burn_in is None:
        burn_in = 0.0 if (x0 is not None or exact_start) else min(T / 10.0, MAX_DEFAULT_BURN_IN)
    n_steps, burn_steps = _step_counts(T, dt, burn_in)

    if x0 is not None:
        start = np.atleast_1d(np.asarray(x0, dtype=float)).copy()
        if start.shape != (d,):
            raise ValidationError(f"x0 must have length {d}")
    elif exact_start:
        mean = model.stationary_mean()
        factor = psd_factor(stationary_gaussian_cov(model.B, model.noise.gaussian_Q), "Sigma")
        start = mean + factor @ gen.standard_normal(d)
    else:
        start = model.stationary_mean()

    A = np.ascontiguousarray(linalg.expm(-dt * model.B))
    M = np.ascontiguousarray(linalg.expm(-0.5 * dt * model.B))

    total = burn_steps + n_steps
    out = np.empty((total + 1, d))
    out[0] = start
    x = start.copy()
    done = 0
    while done < total:
        block = min(NOISE_BLOCK, total - done)
        noise = np.ascontiguousarray(sample_increments(model.noise, dt, block, gen))
        _ou_recursion(A, M, x, noise, out, done + 1)
        done += block

    states = out[burn_steps:]
    if not np.all(np.isfinite(states)):
        bad = int(np.argmax(~np.all(np.isfinite(out), axis=1)))
        raise SimulationError("non-finite OU state", step_index=bad)
    logger.debug("simulated OU path: d=%d n_steps=%d burn_in_steps=%d", d, n_steps, burn_steps)
    return SamplePath(dt, states, recorded_seed, burn_steps, model.tag)


def simulate_jump_sde(model: JumpSDEModel, T: float, dt: float, x0=None,
                      burn_in: Optional[float] = None, rng: RngLike = 0,
                      seed: Optional[int] = None) -> SamplePath:
    """
    Euler-Maruyama scheme for the jump SDE.

    X_{k+1} = X_k + b(X_k) dt + sigma(X_k) sqrt(dt) xi_k + gamma(X_k) dZ_comp,k

    x0 defaults to the origin; burn_in defaults to 0 when x0 is given and to
    min(T/10, 50) otherwise.

    Raises:
        SimulationError: On a non-finite state, with the offending step index
    """
    d = model.dim
    gen, recorded_seed = _as_generator(rng, seed)
    if burn_in is None:
        burn_in = 0.0 if x0 is not None else min(T / 10.0, MAX_DEFAULT_BURN_IN)
    n_steps, burn_steps = _step_counts(T, dt, burn_in)

    x = np.zeros(d) if x0 is None else np.atleast_1d(np.asarray(x0, dtype=float)).copy()
    if x.shape != (d,):
        raise ValidationError(f"x0 must have length {d}")

    total = burn_steps + n_steps
    out = np.empty((total + 1, d))
    out[0] = x
    sqrt_dt = math.sqrt(dt)
    compiled = _compiled_coefficients(model)
    has_jumps = model.jump_spec.has_jumps
    step = 0
    while step < total:
        block = min(NOISE_BLOCK, total - step)
        gauss = gen.standard_normal((block, d))
        jumps = sample_compensated_jumps(model.jump_spec, dt, block, gen).increments
        if compiled is not None:
            code, scale, sigma, gamma = compiled
            bad = _euler_recursion(code, scale, sigma, gamma, x, gauss, np.ascontiguousarray(jumps, dtype=float),
                                   has_jumps, dt, out, step + 1)
            if bad >= 0:
                raise SimulationError(f"non-finite state at step {bad}", step_index=int(bad))
            step += block
            continue
        for i in range(block):
            x = x + model.drift_b(x) * dt + sqrt_dt * (model.dispersion_sigma(x) @ gauss[i])
            if has_jumps:
                x = x + model.jump_gamma(out[step + i]) @ jumps[i]
            if not np.all(np.isfinite(x)):
                raise SimulationError(f"non-finite state at step {step + i + 1}", step_index=step + i + 1)
            out[step + i + 1] = x
        step += block

    logger.debug("simulated jump SDE path: d=%d n_steps=%d burn_in_steps=%d", d, n_steps, burn_steps)
    return SamplePath(dt, out[burn_steps:], recorded_seed, burn_steps, model.tag)


def simulate_path(model: Union[OUModel, JumpSDEModel], T: float, dt: float, x0=None,
                  burn_in: Optional[float] = None, rng: RngLike = 0,
                  seed: Optional[int] = None) -> SamplePath:
    """Dispatch to the simulator for the model's class."""
    if isinstance(model, OUModel):
        return simulate_ou(model, T, dt, x0, burn_in, rng, seed)
    if isinstance(model, JumpSDEModel):
        return simulate_jump_sde(model, T, dt, x0, burn_in, rng, seed)
    raise ValidationError(f"unsupported model type {type(model).__name__}")


# ============================================================================
# Assumption reports
# ============================================================================

@dataclass
class AssumptionCheck:
    name: str
    passed: bool
    witness: Any = None
    detail: str = ""

    def to_dict(self) -> Dict[str, Any]:
        witness = self.witness
        if isinstance(witness, np.ndarray):
            witness = witness.tolist()
        return {"name": self.name, "passed": bool(self.passed), "witness": witness, "detail": self.detail}


@dataclass
class AssumptionReport:
    model_tag: str
    checks: List[AssumptionCheck] = field(default_factory=list)
    scenarios: List[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks)

    def get(self, name: str) -> AssumptionCheck:
        for check in self.checks:
            if check.name == name:
                return check
        raise KeyError(name)

    def names(self) -> List[str]:
        return [check.name for check in self.checks]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "model_tag": self.model_tag,
            "passed": self.passed,
            "checks": [check.to_dict() for check in self.checks],
            "scenarios": list(self.scenarios),
        }


def _sphere_points(radii: Sequence[float], per_radius: int, dim: int,
                   rng: np.random.Generator) -> np.ndarray:
    return np.concatenate([r * uniform_directions(per_radius, dim, rng) for r in radii])


def _sampled_lipschitz(fn: Coefficient, radius: float, count: int, dim: int,
                       rng: np.random.Generator) -> tuple:
    """Largest ||f(x)-f(y)|| / ||x-y|| over random pairs in the ball of given radius."""
    best, witness = 0.0, None
    xs = rng.uniform(-radius, radius, (count, dim))
    ys = xs + rng.normal(scale=max(radius, 1.0) * 1e-2, size=(count, dim))
    for x, y in zip(xs, ys):
        gap = float(np.linalg.norm(x - y))
        if gap == 0.0:
            continue
        ratio = float(np.linalg.norm(np.asarray(fn(x)) - np.asarray(fn(y)))) / gap
        if not math.isfinite(ratio):
            return math.inf, (x, y)
        if ratio > best:
            best, witness = ratio, (x, y)
    return best, witness


def _kappa_decades(model: JumpSDEModel, points: np.ndarray, count: int,
                   rng: np.random.Generator) -> Optional[np.ndarray]:
    """Per-decade sup of ||gamma(x) z||^{d+alpha} nu(z) for ||z|| in 1e-6..1e2."""
    d = model.dim
    decades = np.arange(-6, 2)
    maxima = np.zeros(decades.size)
    xs = points[rng.integers(0, points.shape[0], size=count)]
    for k, lo in enumerate(decades):
        radii = 10.0 ** rng.uniform(lo, lo + 1, count)
        z = radii[:, None] * uniform_directions(count, d, rng)
        nu = model.jump_spec.density(z)
        if nu is None:
            return None
        gz = np.array([model.jump_gamma(x) @ zi for x, zi in zip(xs, z)])
        with np.errstate(over="ignore", invalid="ignore"):
            kappa = np.linalg.norm(gz, axis=1) ** (d + model.alpha) * nu
        maxima[k] = np.max(kappa) if np.all(np.isfinite(kappa)) else math.inf
    return maxima


def validate_jump_assumptions(model: JumpSDEModel, sample_count: int = 1000,
                              radius_grid: Sequence[float] = (1.0, 2.0, 5.0, 10.0),
                              rng: RngLike = 0) -> AssumptionReport:
    """
    Sample the jump SDE coefficient assumptions.

    Checks: drift dissipativity on spheres of radius >= c2, uniform
    ellipticity of sigma sigma^T, boundedness of b and gamma, sampled
    Lipschitz constants of b, sigma and gamma, absolute continuity of nu,
    boundedness of kappa_alpha near the origin and the exponential moment
    of nu. A passing Lipschitz or boundedness entry means no sampled
    violation, not a proof.
    """
    if sample_count < 100:
        raise ValidationError("sample_count must be >= 100")
    gen, _ = _as_generator(rng, None)
    d = model.dim
    report = AssumptionReport(model.tag)

    # Drift dissipativity
    radii = sorted(float(r) for r in radius_grid if r >= model.c2)
    if not radii:
        radii = [model.c2, 2.0 * model.c2, 4.0 * model.c2]
    points = _sphere_points(radii, sample_count, d, gen)
    margins = np.array([-model.c1 * np.linalg.norm(x) - float(x @ model.drift_b(x)) for x in points])
    worst = int(np.argmin(margins))
    slack = 1e-9 * (1.0 + np.linalg.norm(points[worst]))
    report.checks.append(AssumptionCheck(
        "drift_dissipativity", bool(margins[worst] >= -slack),
        {"x": points[worst], "margin": float(margins[worst])},
        f"<x,b(x)> <= -c1 ||x|| sampled on radii {radii}",
    ))

    # Uniform ellipticity
    all_points = np.concatenate([np.zeros((1, d)),
                                 _sphere_points(sorted(float(r) for r in radius_grid) or [1.0],
                                                sample_count, d, gen)])
    eig_min, eig_max, at_min = math.inf, 0.0, None
    for x in all_points:
        s = np.asarray(model.dispersion_sigma(x), dtype=float)
        eig = np.linalg.eigvalsh(s @ s.T)
        if eig[0] < eig_min:
            eig_min, at_min = float(eig[0]), x
        eig_max = max(eig_max, float(eig[-1]))
    c_elliptic = math.inf if eig_min <= 0 else max(eig_max, 1.0 / eig_min, 1.0)
    report.checks.append(AssumptionCheck(
        "uniform_ellipticity", math.isfinite(c_elliptic),
        {"c": c_elliptic, "min_eigenvalue": eig_min, "x": at_min},
        "eigenvalues of sigma sigma^T within [1/c, c]",
    ))

    # Boundedness of b and gamma: outermost sphere vs all inner ones
    for name, fn in (("drift_bounded", model.drift_b), ("jump_coefficient_bounded", model.jump_gamma)):
        by_radius = []
        for r in sorted(float(r) for r in radius_grid):
            pts = _sphere_points([r], sample_count, d, gen)
            by_radius.append(max(float(np.linalg.norm(np.asarray(fn(x)))) for x in pts))
        outer, inner = by_radius[-1], max(by_radius[:-1], default=by_radius[-1])
        report.checks.append(AssumptionCheck(
            name, bool(outer <= 1.01 * inner + 1e-12),
            {"sup_outer": outer, "sup_inner": inner},
            "sampled sup norm does not grow on the outermost sphere",
        ))

    # Lipschitz estimates
    r_max = max(float(r) for r in radius_grid)
    for name, fn in (("lipschitz_b", model.drift_b), ("lipschitz_sigma", model.dispersion_sigma),
                     ("lipschitz_gamma", model.jump_gamma)):
        estimate, pair = _sampled_lipschitz(fn, r_max, sample_count, d, gen)
        report.checks.append(AssumptionCheck(
            name, math.isfinite(estimate), {"estimate": estimate},
            "sampled finite-difference ratio (an estimate, not a proof)",
        ))

    # Absolute continuity and kappa_alpha
    spec = model.jump_spec
    if not spec.has_jumps:
        report.checks.append(AssumptionCheck("nu_absolutely_continuous", True, None, "no jumps"))
        report.checks.append(AssumptionCheck("kappa_bounded", True, 0.0, "no jumps"))
    else:
        maxima = _kappa_decades(model, all_points, sample_count, gen)
        if maxima is None:
            report.checks.append(AssumptionCheck(
                "nu_absolutely_continuous", False, None, "jump measure has no Lebesgue density"))
            report.checks.append(AssumptionCheck(
                "kappa_bounded", False, None, "kappa_alpha undefined without a density"))
        else:
            report.checks.append(AssumptionCheck("nu_absolutely_continuous", True, None, "density available"))
            bounded = bool(np.all(np.isfinite(maxima)) and maxima[0] <= 1.01 * maxima[1] + 1e-300)
            report.checks.append(AssumptionCheck(
                "kappa_bounded", bounded, {"decade_maxima": maxima},
                "sup of ||gamma(x) z||^(d+alpha) nu(z) per radial decade does not grow towards 0",
            ))

    # Exponential moment
    try:
        moment = exponential_moment_check(spec, model.eta0)
        report.checks.append(AssumptionCheck("exponential_moment", moment.finite, moment.value, moment.detail))
    except NumericalError as e:
        report.checks.append(AssumptionCheck("exponential_moment", False, None, str(e)))

    return report


def validate_ou_assumptions(model: OUModel) -> AssumptionReport:
    """
    Report rank(Q) = d, stability of B, the stationarity log-moment and the
    declared moment flags of the driving noise, plus the moment scenarios
    under which the estimator's rate results apply.
    """
    d = model.dim
    report = AssumptionReport(model.tag)
    Q = model.noise.gaussian_Q

    q_norm = float(np.linalg.norm(Q, 2))
    singular = np.linalg.svd(Q, compute_uv=False)
    rank = int(np.sum(singular > RANK_TOL * q_norm)) if q_norm > 0 else 0
    full_rank = rank == d
    report.checks.append(AssumptionCheck("rank_Q", full_rank, {"rank": rank, "dim": d},
                                         "numerical rank with tolerance 1e-10 * ||Q||"))

    eigvals = np.linalg.eigvals(model.B)
    worst = float(eigvals.real.min())
    report.checks.append(AssumptionCheck("B_stable", worst > STABILITY_TOL, {"min_real_part": worst},
                                         "all eigenvalues of B have positive real part"))

    spec = model.noise.jump_spec
    try:
        log_moment = stationarity_log_moment(spec)
        report.checks.append(AssumptionCheck("stationarity_log_moment", log_moment.finite,
                                             log_moment.value, log_moment.detail))
    except NumericalError as e:
        report.checks.append(AssumptionCheck("stationarity_log_moment", False, None, str(e)))

    flags = spec.moment_flags
    if flags.p_moment is not None:
        report.checks.append(AssumptionCheck("declared_p_moment", True, flags.p_moment,
                                             "declared finite p-moment of nu"))
        if full_rank:
            report.scenarios.append("finite_p_moment_any_dimension")
    if flags.log_moment_alpha is not None:
        report.checks.append(AssumptionCheck("declared_log_moment", True, flags.log_moment_alpha,
                                             "declared log-moment of nu"))
        if full_rank and d == 1 and flags.log_moment_alpha > 2:
            report.scenarios.append("log_moment_dimension_one")

    return report
