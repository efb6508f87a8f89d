#!/usr/bin/env python3
"""
Levy noise

Increments of a d-dimensional Levy process given by its generating triplet
(a, Q, nu). The jump part is compensated in full, so `a` is the mean drift
of the process. Three jump-measure variants are supported:

- none: no jumps
- compound_poisson: finite intensity `total_mass` with a jump law
- density_family: a (possibly infinite) Levy density; jumps of norm <= eps
  are replaced by a Gaussian with the matching covariance, larger jumps are
  simulated as compound Poisson

Integrals against nu use adaptive radial quadrature on dyadic shells times
a spherical product rule whose angular resolution is refined until the
result stabilises.
"""

import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Iterable, NamedTuple, Optional, Tuple

import numpy as np
from scipy import integrate, stats

from .errors import NumericalError, ValidationError


logger = logging.getLogger("ergokde.levy_noise")

# ============================================================================
# Constants
# ============================================================================

SYMMETRY_TOL = 1e-12
PSD_TOL = 1e-12
QUADRATURE_RTOL = 1e-6
MOMENT_OVERFLOW_GUARD = 1e12
DEFAULT_SMALL_JUMP_EPS = 1e-2
MAX_SHELL_RADIUS = 2.0 ** 20
NEGLIGIBLE_SHELL = 1e-15
# Consecutive negligible shells that end an open-ended integral of unknown extent
UNBOUNDED_NEGLIGIBLE_RUN = 4

# Angular refinement ladders (Gauss-Legendre nodes per polar angle)
ANGULAR_LEVELS = {2: (8, 16, 32, 64), 3: (6, 12, 24)}
ANGULAR_LEVELS_HIGH_DIM = (4, 8, 12)

Integrand = Callable[[np.ndarray], np.ndarray]


# ============================================================================
# Linear algebra helpers
# ============================================================================

def psd_factor(matrix, name: str = "Q") -> np.ndarray:
    """
    Factor a symmetric PSD matrix as L L^T.

    Raises:
        ValidationError: If the matrix is not square, not symmetric within
            1e-12 or has an eigenvalue below -1e-12
    """
    Q = np.atleast_2d(np.asarray(matrix, dtype=float))
    if Q.ndim != 2 or Q.shape[0] != Q.shape[1]:
        raise ValidationError(f"{name} must be a square matrix, got shape {Q.shape}")
    if np.max(np.abs(Q - Q.T), initial=0.0) > SYMMETRY_TOL:
        raise ValidationError(f"{name} is not symmetric")
    eigvals, eigvecs = np.linalg.eigh(0.5 * (Q + Q.T))
    if eigvals.min() < -PSD_TOL:
        raise ValidationError(f"{name} is not positive semidefinite (min eigenvalue {eigvals.min():.3e})")
    return eigvecs * np.sqrt(np.clip(eigvals, 0.0, None))


def uniform_directions(n: int, dim: int, rng: np.random.Generator) -> np.ndarray:
    """n independent directions uniform on the unit sphere of R^dim."""
    if dim == 1:
        return np.where(rng.random((n, 1)) < 0.5, -1.0, 1.0)
    g = rng.standard_normal((n, dim))
    norms = np.linalg.norm(g, axis=1, keepdims=True)
    norms[norms == 0.0] = 1.0
    return g / norms


def sphere_surface_area(dim: int) -> float:
    """Surface area of the unit sphere in R^dim (2 for dim=1)."""
    return 2.0 * math.pi ** (dim / 2.0) / math.gamma(dim / 2.0)


def sphere_rule(dim: int, n: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    Product quadrature rule on the unit sphere of R^dim.

    Azimuth uses the 2n-point trapezoid rule, each further polar angle an
    n-point Gauss-Legendre rule with the sin^(k-1) Jacobian folded into the
    weights. Weights sum to the sphere's surface area.

    Returns:
        tuple: (directions (M, dim), weights (M,))
    """
    if dim == 1:
        return np.array([[1.0], [-1.0]]), np.ones(2)

    m = 2 * n
    azimuth = 2.0 * math.pi * np.arange(m) / m
    dirs = np.column_stack([np.cos(azimuth), np.sin(azimuth)])
    weights = np.full(m, 2.0 * math.pi / m)

    nodes, gl_weights = np.polynomial.legendre.leggauss(n)
    phi = 0.5 * math.pi * (nodes + 1.0)
    w_phi = 0.5 * math.pi * gl_weights
    sin_phi, cos_phi = np.sin(phi), np.cos(phi)

    for k in range(2, dim):
        grown = np.empty((dirs.shape[0], n, k + 1))
        grown[:, :, :k] = dirs[:, None, :] * sin_phi[None, :, None]
        grown[:, :, k] = cos_phi[None, :]
        dirs = grown.reshape(-1, k + 1)
        weights = (weights[:, None] * (w_phi * sin_phi ** (k - 1))[None, :]).reshape(-1)

    return dirs, weights


# ============================================================================
# Quadrature against a Levy measure
# ============================================================================

def _relative_change(new: np.ndarray, old: np.ndarray) -> float:
    scale = max(np.max(np.abs(new), initial=0.0), np.max(np.abs(old), initial=0.0))
    if scale == 0.0:
        return 0.0
    return float(np.max(np.abs(new - old)) / scale)


def _shell_intervals(r_lo: float, r_hi: float) -> Iterable[Tuple[float, float]]:
    """Dyadic radial shells covering (r_lo, r_hi]."""
    a = r_lo
    while a < r_hi and a < MAX_SHELL_RADIUS:
        b = max(2.0 * a, 1.0) if a > 0.0 else min(1.0, r_hi)
        b = min(b, r_hi)
        yield a, b
        a = b


def _shell_sum(density: Integrand, g: Integrand, dim: int, r_lo: float, r_hi: float,
               n_angular: int, radial_extent: float, breakpoints: Tuple[float, ...],
               guard: Optional[float]) -> Tuple[np.ndarray, bool]:
    """Sum of shell integrals at one angular resolution. Returns (value, diverged)."""
    dirs, weights = sphere_rule(dim, n_angular)

    def radial(r: float) -> np.ndarray:
        z = r * dirs
        with np.errstate(over="ignore", invalid="ignore"):
            values = np.asarray(g(z), dtype=float) * np.asarray(density(z), dtype=float)[:, None]
            return r ** (dim - 1) * (weights @ values)

    total = None
    negligible_run = 0
    for a, b in _shell_intervals(r_lo, r_hi):
        inner = [p for p in breakpoints if a < p < b]
        with np.errstate(over="ignore", invalid="ignore"):
            piece, _ = integrate.quad_vec(radial, a, b, points=inner or None,
                                          epsrel=1e-10, epsabs=0.0, limit=400)
        piece = np.atleast_1d(np.asarray(piece, dtype=float))
        total = piece if total is None else total + piece

        if not np.all(np.isfinite(total)):
            if guard is not None:
                return total, True
            raise NumericalError("non-finite value in Levy-measure quadrature")
        if guard is not None and np.max(np.abs(total)) > guard:
            return total, True

        if np.max(np.abs(piece)) <= NEGLIGIBLE_SHELL * np.max(np.abs(total), initial=0.0) \
                or not np.any(piece):
            negligible_run += 1
        else:
            negligible_run = 0
        if math.isfinite(r_hi):
            continue
        if b >= radial_extent and negligible_run >= 2:
            return total, False
        if math.isinf(radial_extent) and negligible_run >= UNBOUNDED_NEGLIGIBLE_RUN:
            return total, False
    else:
        if math.isfinite(r_hi) or r_hi <= r_lo:
            if total is None:
                total = np.atleast_1d(np.asarray(g(np.zeros((1, dim))), dtype=float)[0] * 0.0)
            return total, False

    if guard is not None:
        return total, True
    raise NumericalError(f"Levy-measure integral did not settle before radius {MAX_SHELL_RADIUS:g}")


def measure_integral(density: Integrand, g: Integrand, dim: int, r_lo: float, r_hi: float,
                     radial_extent: float = math.inf, breakpoints: Tuple[float, ...] = (),
                     guard: Optional[float] = None) -> Tuple[np.ndarray, bool]:
    """
    Integrate g against a density over the shell r_lo < ||z|| <= r_hi.

    The angular rule is refined until successive results agree to a relative
    1e-6. With `guard` set, a partial sum exceeding it (or a non-finite value)
    stops the integration and is reported as divergence instead of raised.

    Returns:
        tuple: (value array, diverged flag)

    Raises:
        NumericalError: If the angular refinement cap is reached first
    """
    if dim == 1:
        return _shell_sum(density, g, dim, r_lo, r_hi, 1, radial_extent, breakpoints, guard)

    levels = ANGULAR_LEVELS.get(dim, ANGULAR_LEVELS_HIGH_DIM)
    previous = None
    for n in levels:
        value, diverged = _shell_sum(density, g, dim, r_lo, r_hi, n, radial_extent, breakpoints, guard)
        if diverged:
            return value, True
        if previous is not None and _relative_change(value, previous) <= QUADRATURE_RTOL:
            return value, False
        previous = value
    raise NumericalError(
        f"Levy-measure quadrature did not converge: relative change "
        f"{_relative_change(value, previous if previous is not None else value):.2e} "
        f"after {levels[-1]} angular nodes"
    )


class _MeasureBase:
    """Shared integration entry point for jump laws and Levy densities."""

    dim: int
    radial_extent: float = math.inf
    breakpoints: Tuple[float, ...] = ()

    def density(self, z: np.ndarray) -> Optional[np.ndarray]:
        raise NotImplementedError

    def integrate(self, g: Integrand, r_lo: float, r_hi: float,
                  guard: Optional[float] = None) -> Tuple[np.ndarray, bool]:
        return measure_integral(self.density, g, self.dim, r_lo, r_hi,
                                self.radial_extent, self.breakpoints, guard)


# ============================================================================
# Jump laws (compound Poisson)
# ============================================================================

class JumpLaw(_MeasureBase):
    """Probability law of a single jump."""

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        raise NotImplementedError

    def mean(self) -> np.ndarray:
        raise NotImplementedError

    def sample_sums(self, counts: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        """Sum of counts[i] independent jumps for every i."""
        counts = np.asarray(counts, dtype=np.int64)
        total = int(counts.sum())
        sums = np.zeros((counts.size, self.dim))
        if total == 0:
            return sums
        jumps = self.sample(total, rng)
        owner = np.repeat(np.arange(counts.size), counts)
        for axis in range(self.dim):
            sums[:, axis] = np.bincount(owner, weights=jumps[:, axis], minlength=counts.size)
        return sums


@dataclass(frozen=True, eq=False)
class GaussianJumpLaw(JumpLaw):
    """Jumps distributed as N(mean, cov)."""

    mean_vector: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.atleast_1d(np.asarray(self.mean_vector, dtype=float))
        cov = np.atleast_2d(np.asarray(self.cov, dtype=float))
        if cov.shape != (mean.size, mean.size):
            raise ValidationError(f"jump_cov shape {cov.shape} does not match jump mean of length {mean.size}")
        object.__setattr__(self, "mean_vector", mean)
        object.__setattr__(self, "cov", cov)
        object.__setattr__(self, "dim", mean.size)
        object.__setattr__(self, "_factor", psd_factor(cov, "jump_cov"))
        spread = math.sqrt(max(np.linalg.eigvalsh(cov).max(), 0.0))
        object.__setattr__(self, "radial_extent", float(np.linalg.norm(mean) + 12.0 * spread))

    @classmethod
    def standard(cls, dim: int) -> "GaussianJumpLaw":
        return cls(np.zeros(dim), np.eye(dim))

    @cached_property
    def _frozen(self):
        return stats.multivariate_normal(mean=self.mean_vector, cov=self.cov)

    def density(self, z: np.ndarray) -> np.ndarray:
        return np.atleast_1d(self._frozen.pdf(np.asarray(z, dtype=float).reshape(-1, self.dim)))

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return self.mean_vector + rng.standard_normal((n, self.dim)) @ self._factor.T

    def sample_sums(self, counts: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        # Sum of k Gaussian jumps is N(k mean, k cov); exact and one draw per row
        counts = np.asarray(counts, dtype=float)
        noise = rng.standard_normal((counts.size, self.dim)) @ self._factor.T
        return counts[:, None] * self.mean_vector + np.sqrt(counts)[:, None] * noise

    def mean(self) -> np.ndarray:
        return self.mean_vector.copy()


@dataclass(frozen=True, eq=False)
class UniformShellJumpLaw(JumpLaw):
    """Jumps uniform on the shell r_inner <= ||z|| <= r_outer."""

    dim: int
    r_inner: float
    r_outer: float

    def __post_init__(self):
        if not (0.0 <= self.r_inner < self.r_outer):
            raise ValidationError("uniform shell needs 0 <= r_inner < r_outer")
        object.__setattr__(self, "radial_extent", float(self.r_outer))
        object.__setattr__(self, "breakpoints", (float(self.r_inner), float(self.r_outer)))

    @property
    def volume(self) -> float:
        return sphere_surface_area(self.dim) * (self.r_outer ** self.dim - self.r_inner ** self.dim) / self.dim

    def density(self, z: np.ndarray) -> np.ndarray:
        r = np.linalg.norm(np.asarray(z, dtype=float).reshape(-1, self.dim), axis=1)
        return np.where((r >= self.r_inner) & (r <= self.r_outer), 1.0 / self.volume, 0.0)

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        u = rng.random(n)
        lo, hi = self.r_inner ** self.dim, self.r_outer ** self.dim
        radius = (lo + u * (hi - lo)) ** (1.0 / self.dim)
        return radius[:, None] * uniform_directions(n, self.dim, rng)

    def mean(self) -> np.ndarray:
        return np.zeros(self.dim)


@dataclass(frozen=True, eq=False)
class PointMassJumpLaw(JumpLaw):
    """Every jump equals `location`. Has no Lebesgue density."""

    location: np.ndarray

    def __post_init__(self):
        loc = np.atleast_1d(np.asarray(self.location, dtype=float))
        object.__setattr__(self, "location", loc)
        object.__setattr__(self, "dim", loc.size)

    def density(self, z: np.ndarray) -> None:
        return None

    def integrate(self, g: Integrand, r_lo: float, r_hi: float,
                  guard: Optional[float] = None) -> Tuple[np.ndarray, bool]:
        r = float(np.linalg.norm(self.location))
        value = np.atleast_1d(np.asarray(g(self.location[None, :]), dtype=float)[0])
        if not (r_lo < r <= r_hi):
            value = np.zeros_like(value)
        diverged = guard is not None and (not np.all(np.isfinite(value)) or np.max(np.abs(value)) > guard)
        return value, bool(diverged)

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return np.tile(self.location, (n, 1))

    def sample_sums(self, counts: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        return np.asarray(counts, dtype=float)[:, None] * self.location

    def mean(self) -> np.ndarray:
        return self.location.copy()


# ============================================================================
# Levy densities (density_family)
# ============================================================================

class LevyDensity(_MeasureBase):
    """Levy density nu(z); may have infinite total mass near the origin."""

    def sample_tail(self, n: int, eps: float, rng: np.random.Generator) -> np.ndarray:
        """Draw n jumps from nu restricted to ||z|| > eps, normalised."""
        raise ValidationError(f"{type(self).__name__} does not support jump sampling")

    def _rejection_fill(self, n: int, propose: Callable[[int], np.ndarray],
                        accept: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
        out = np.empty((n, self.dim))
        filled = 0
        while filled < n:
            batch = max(64, 2 * (n - filled))
            candidates = propose(batch)
            kept = candidates[accept(candidates)]
            take = min(n - filled, kept.shape[0])
            out[filled:filled + take] = kept[:take]
            filled += take
        return out


@dataclass(frozen=True, eq=False)
class TemperedStableDensity(LevyDensity):
    """nu(z) = c ||z||^{-(d+alpha)} exp(-theta ||z||), radially symmetric."""

    dim: int
    c: float
    alpha: float
    theta: float

    def __post_init__(self):
        if self.c <= 0 or self.theta <= 0 or not (0.0 < self.alpha < 2.0):
            raise ValidationError("tempered_stable needs c > 0, theta > 0 and alpha in (0, 2)")
        object.__setattr__(self, "radial_extent", 40.0 / self.theta)

    def density(self, z: np.ndarray) -> np.ndarray:
        r = np.linalg.norm(np.asarray(z, dtype=float).reshape(-1, self.dim), axis=1)
        with np.errstate(divide="ignore", over="ignore"):
            return np.where(r > 0, self.c * r ** (-(self.dim + self.alpha)) * np.exp(-self.theta * r), 0.0)

    def sample_tail(self, n: int, eps: float, rng: np.random.Generator) -> np.ndarray:
        # Pareto(eps, alpha) radius thinned by exp(-theta (r - eps)): exact
        def propose(m: int) -> np.ndarray:
            radius = eps * rng.random(m) ** (-1.0 / self.alpha)
            keep = rng.random(m) < np.exp(-self.theta * (radius - eps))
            return (radius[:, None] * uniform_directions(m, self.dim, rng))[keep]

        return self._rejection_fill(n, propose, lambda z: np.ones(z.shape[0], dtype=bool))


@dataclass(frozen=True, eq=False)
class GaussianLevyDensity(LevyDensity):
    """nu(z) = intensity * N(0, cov) density; finite activity."""

    dim: int
    intensity: float
    cov: np.ndarray

    def __post_init__(self):
        if self.intensity <= 0:
            raise ValidationError("gaussian density needs intensity > 0")
        cov = np.atleast_2d(np.asarray(self.cov, dtype=float))
        if cov.shape != (self.dim, self.dim):
            raise ValidationError(f"gaussian density cov must be {self.dim}x{self.dim}")
        object.__setattr__(self, "cov", cov)
        object.__setattr__(self, "_law", GaussianJumpLaw(np.zeros(self.dim), cov))
        object.__setattr__(self, "radial_extent", self._law.radial_extent)

    def density(self, z: np.ndarray) -> np.ndarray:
        return self.intensity * self._law.density(z)

    def sample_tail(self, n: int, eps: float, rng: np.random.Generator) -> np.ndarray:
        return self._rejection_fill(
            n, lambda m: self._law.sample(m, rng),
            lambda z: np.linalg.norm(z, axis=1) > eps,
        )


@dataclass(frozen=True, eq=False)
class UniformBoxDensity(LevyDensity):
    """nu(z) = height on the box [-half_width, half_width]^d."""

    dim: int
    height: float
    half_width: float

    def __post_init__(self):
        if self.height <= 0 or self.half_width <= 0:
            raise ValidationError("uniform_box needs height > 0 and half_width > 0")
        object.__setattr__(self, "radial_extent", self.half_width * math.sqrt(self.dim))
        object.__setattr__(self, "breakpoints", (float(self.half_width),))

    def density(self, z: np.ndarray) -> np.ndarray:
        z = np.asarray(z, dtype=float).reshape(-1, self.dim)
        inside = np.all(np.abs(z) <= self.half_width, axis=1)
        return np.where(inside, self.height, 0.0)

    def sample_tail(self, n: int, eps: float, rng: np.random.Generator) -> np.ndarray:
        return self._rejection_fill(
            n, lambda m: rng.uniform(-self.half_width, self.half_width, (m, self.dim)),
            lambda z: np.linalg.norm(z, axis=1) > eps,
        )


@dataclass(frozen=True, eq=False)
class CallableDensity(LevyDensity):
    """Arbitrary Levy density given as a vectorised callable; integrals only."""

    dim: int
    fn: Integrand
    radial_extent: float = math.inf
    breakpoints: Tuple[float, ...] = ()

    def density(self, z: np.ndarray) -> np.ndarray:
        return np.asarray(self.fn(np.asarray(z, dtype=float).reshape(-1, self.dim)), dtype=float)


LEVY_DENSITIES = {
    "tempered_stable": TemperedStableDensity,
    "gaussian": GaussianLevyDensity,
    "uniform_box": UniformBoxDensity,
}


# ============================================================================
# Jump measure specification and triplet
# ============================================================================

@dataclass(frozen=True)
class MomentFlags:
    """Declared moment properties of nu (echoed by the assumption validators)."""

    exp_moment_eta0: Optional[float] = None
    p_moment: Optional[float] = None
    log_moment_alpha: Optional[float] = None


class JumpDraw(NamedTuple):
    increments: np.ndarray
    counts: np.ndarray


@dataclass(frozen=True, eq=False)
class JumpMeasureSpec:
    """Jump measure nu of a Levy process."""

    variant: str
    dim: int
    total_mass: float = 0.0
    jump_law: Optional[JumpLaw] = None
    levy_density: Optional[LevyDensity] = None
    eps: float = DEFAULT_SMALL_JUMP_EPS
    moment_flags: MomentFlags = field(default_factory=MomentFlags)

    VARIANTS = ("none", "compound_poisson", "density_family")

    def __post_init__(self):
        if self.variant not in self.VARIANTS:
            raise ValidationError(f"unknown jump variant {self.variant!r}")
        if self.dim < 1:
            raise ValidationError("jump measure dimension must be >= 1")
        if self.variant == "compound_poisson":
            if not self.total_mass > 0:
                raise ValidationError("compound_poisson needs total_mass (lambda) > 0")
            if self.jump_law is None or self.jump_law.dim != self.dim:
                raise ValidationError("compound_poisson needs a jump law of matching dimension")
        if self.variant == "density_family":
            if not self.eps > 0:
                raise ValidationError("density_family needs truncation eps > 0")
            if self.levy_density is None or self.levy_density.dim != self.dim:
                raise ValidationError("density_family needs a Levy density of matching dimension")

    @classmethod
    def none(cls, dim: int) -> "JumpMeasureSpec":
        return cls("none", dim)

    @classmethod
    def compound_poisson(cls, total_mass: float, jump_law: JumpLaw,
                         moment_flags: MomentFlags = None) -> "JumpMeasureSpec":
        return cls("compound_poisson", jump_law.dim, total_mass=float(total_mass),
                   jump_law=jump_law, moment_flags=moment_flags or MomentFlags())

    @classmethod
    def density_family(cls, levy_density: LevyDensity, eps: float = DEFAULT_SMALL_JUMP_EPS,
                       moment_flags: MomentFlags = None) -> "JumpMeasureSpec":
        return cls("density_family", levy_density.dim, levy_density=levy_density,
                   eps=float(eps), moment_flags=moment_flags or MomentFlags())

    @property
    def has_jumps(self) -> bool:
        return self.variant != "none"

    def density(self, z: np.ndarray) -> Optional[np.ndarray]:
        """nu density at the rows of z, or None when nu has no Lebesgue density."""
        z = np.asarray(z, dtype=float).reshape(-1, self.dim)
        if self.variant == "none":
            return np.zeros(z.shape[0])
        if self.variant == "compound_poisson":
            values = self.jump_law.density(z)
            return None if values is None else self.total_mass * values
        return self.levy_density.density(z)

    def integrate(self, g: Integrand, r_lo: float, r_hi: float,
                  guard: Optional[float] = None) -> Tuple[np.ndarray, bool]:
        """Integral of g over r_lo < ||z|| <= r_hi against nu; returns (value, diverged)."""
        if self.variant == "none":
            at_origin = np.asarray(g(np.zeros((1, self.dim))), dtype=float)
            return np.zeros(at_origin.shape[1:] or (1,)), False
        if self.variant == "compound_poisson":
            value, diverged = self.jump_law.integrate(g, r_lo, r_hi, guard=None if guard is None
                                                      else guard / self.total_mass)
            return self.total_mass * value, diverged
        return self.levy_density.integrate(g, r_lo, r_hi, guard=guard)

    # Quantities used by the density_family sampler, computed once
    @cached_property
    def small_jump_cov(self) -> np.ndarray:
        return small_jump_covariance(self, self.eps)

    @cached_property
    def _small_jump_factor(self) -> np.ndarray:
        return psd_factor(self.small_jump_cov, "small_jump_covariance")

    @cached_property
    def big_jump_rate(self) -> float:
        value, _ = self.integrate(lambda z: np.ones((z.shape[0], 1)), self.eps, math.inf)
        return float(value[0])

    @cached_property
    def big_jump_mean(self) -> np.ndarray:
        value, _ = self.integrate(lambda z: z, self.eps, math.inf)
        return np.asarray(value, dtype=float)


@dataclass(frozen=True, eq=False)
class LevyTriplet:
    """Generating triplet (a, Q, nu) of a Levy process."""

    drift_a: np.ndarray
    gaussian_Q: np.ndarray
    jump_spec: JumpMeasureSpec

    def __post_init__(self):
        a = np.atleast_1d(np.asarray(self.drift_a, dtype=float))
        Q = np.atleast_2d(np.asarray(self.gaussian_Q, dtype=float))
        if a.ndim != 1 or a.size < 1:
            raise ValidationError("drift_a must be a non-empty vector")
        if Q.shape != (a.size, a.size):
            raise ValidationError(f"gaussian_Q must be {a.size}x{a.size}, got {Q.shape}")
        if self.jump_spec.dim != a.size:
            raise ValidationError("jump_spec dimension does not match drift_a")
        object.__setattr__(self, "drift_a", a)
        object.__setattr__(self, "gaussian_Q", Q)
        object.__setattr__(self, "_q_factor", psd_factor(Q, "Q"))

    @classmethod
    def brownian(cls, Q, drift_a=None) -> "LevyTriplet":
        Q = np.atleast_2d(np.asarray(Q, dtype=float))
        a = np.zeros(Q.shape[0]) if drift_a is None else drift_a
        return cls(a, Q, JumpMeasureSpec.none(Q.shape[0]))

    @property
    def dim(self) -> int:
        return self.drift_a.size

    @property
    def is_brownian(self) -> bool:
        return not self.jump_spec.has_jumps


# ============================================================================
# Operations
# ============================================================================

def small_jump_covariance(spec: JumpMeasureSpec, eps: float) -> np.ndarray:
    """
    Covariance of the jumps of norm <= eps: integral of z z^T over the eps-ball.

    Raises:
        ValidationError: If eps <= 0
        NumericalError: If the quadrature does not converge
    """
    if not eps > 0:
        raise ValidationError("eps must be > 0")
    d = spec.dim
    if spec.variant == "none":
        return np.zeros((d, d))

    def outer(z: np.ndarray) -> np.ndarray:
        return (z[:, :, None] * z[:, None, :]).reshape(z.shape[0], d * d)

    value, _ = spec.integrate(outer, 0.0, float(eps))
    cov = value.reshape(d, d)
    return 0.5 * (cov + cov.T)


class MomentCheck(NamedTuple):
    value: float
    finite: bool
    detail: str


def exponential_moment_check(spec: JumpMeasureSpec, eta0: float) -> MomentCheck:
    """
    Evaluate the integral of ||z||^2 exp(eta0 ||z||) against nu.

    Divergence (partial sum above 1e12 or a non-finite value) is reported
    in the result, never raised.
    """
    if not eta0 > 0:
        raise ValidationError("eta0 must be > 0")

    def weight(z: np.ndarray) -> np.ndarray:
        r = np.linalg.norm(z, axis=1)
        return (r ** 2 * np.exp(eta0 * r))[:, None]

    value, diverged = spec.integrate(weight, 0.0, math.inf, guard=MOMENT_OVERFLOW_GUARD)
    if diverged:
        return MomentCheck(math.inf, False, f"exponential moment with eta0={eta0:g} diverges")
    return MomentCheck(float(value[0]), True, f"exponential moment with eta0={eta0:g} is finite")


def stationarity_log_moment(spec: JumpMeasureSpec) -> MomentCheck:
    """Evaluate the integral of log||z|| over ||z|| > 2 against nu."""
    def weight(z: np.ndarray) -> np.ndarray:
        return np.log(np.linalg.norm(z, axis=1))[:, None]

    value, diverged = spec.integrate(weight, 2.0, math.inf, guard=MOMENT_OVERFLOW_GUARD)
    if diverged:
        return MomentCheck(math.inf, False, "log-moment outside the radius-2 ball diverges")
    return MomentCheck(float(value[0]), True, "log-moment outside the radius-2 ball is finite")


def jump_measure_integral(spec: JumpMeasureSpec, g: Integrand, r_lo: float = 0.0,
                          r_hi: float = math.inf) -> np.ndarray:
    """Integral of g over r_lo < ||z|| <= r_hi against nu (raises on non-convergence)."""
    value, _ = spec.integrate(g, r_lo, r_hi)
    return value


def sample_compensated_jumps(spec: JumpMeasureSpec, dt: float, n: int,
                             rng: np.random.Generator) -> JumpDraw:
    """
    Compensated jump increments over n consecutive steps of length dt.

    Returns:
        JumpDraw: increments (n, d) and jump counts (n,); for density_family
        the counts are the number of jumps above eps
    """
    if not dt > 0:
        raise ValidationError("dt must be > 0")
    d = spec.dim
    if spec.variant == "none":
        return JumpDraw(np.zeros((n, d)), np.zeros(n, dtype=np.int64))

    if spec.variant == "compound_poisson":
        counts = rng.poisson(spec.total_mass * dt, n)
        sums = spec.jump_law.sample_sums(counts, rng)
        return JumpDraw(sums - spec.total_mass * dt * spec.jump_law.mean(), counts)

    # density_family: Gaussian small jumps plus compensated big jumps
    increments = np.zeros((n, d))
    if np.any(spec.small_jump_cov):
        increments += math.sqrt(dt) * (rng.standard_normal((n, d)) @ spec._small_jump_factor.T)
    counts = rng.poisson(spec.big_jump_rate * dt, n)
    total = int(counts.sum())
    if total:
        jumps = spec.levy_density.sample_tail(total, spec.eps, rng)
        owner = np.repeat(np.arange(n), counts)
        for axis in range(d):
            increments[:, axis] += np.bincount(owner, weights=jumps[:, axis], minlength=n)
    increments -= dt * spec.big_jump_mean
    return JumpDraw(increments, counts)


def sample_increments(triplet: LevyTriplet, dt: float, n: int,
                      rng: np.random.Generator) -> np.ndarray:
    """
    n independent increments of the Levy process over steps of length dt.

    Each row is a*dt + N(0, Q dt) + compensated jumps; the result depends
    only on (triplet, dt, n) and the generator state.
    """
    if not dt > 0:
        raise ValidationError("dt must be > 0")
    if n < 1:
        raise ValidationError("n must be >= 1")
    d = triplet.dim
    out = np.broadcast_to(triplet.drift_a * dt, (n, d)).copy()
    if np.any(triplet._q_factor):
        out += math.sqrt(dt) * (rng.standard_normal((n, d)) @ triplet._q_factor.T)
    if triplet.jump_spec.has_jumps:
        out += sample_compensated_jumps(triplet.jump_spec, dt, n, rng).increments
    return out


def sample_increment(triplet: LevyTriplet, dt: float, rng: np.random.Generator) -> np.ndarray:
    """One increment of length dt."""
    return sample_increments(triplet, dt, 1, rng)[0]


# ============================================================================
# Config tags
# ============================================================================

def jump_spec_from_config(section: dict, dim: int) -> JumpMeasureSpec:
    """
    Build a JumpMeasureSpec from a resolved `model.jumps` config section.

    Tags: "none", "cpoisson-gauss" (lambda, jump_cov, jump_mean) and
    "density" (density name, params, eps).
    """
    flags = MomentFlags(
        exp_moment_eta0=section.get("eta0"),
        p_moment=section.get("p_moment"),
        log_moment_alpha=section.get("log_moment_alpha"),
    )
    family = section.get("family", "none")
    if family == "none":
        return JumpMeasureSpec("none", dim, moment_flags=flags)
    if family == "cpoisson-gauss":
        cov = section.get("jump_cov")
        cov = np.eye(dim) if cov is None else np.asarray(cov, dtype=float)
        mean = section.get("jump_mean")
        mean = np.zeros(dim) if mean is None else np.asarray(mean, dtype=float)
        return JumpMeasureSpec.compound_poisson(section["lambda"], GaussianJumpLaw(mean, cov), flags)
    if family == "density":
        name = section.get("density")
        if name not in LEVY_DENSITIES:
            raise ValidationError(f"unknown Levy density {name!r}; known: {sorted(LEVY_DENSITIES)}")
        params = dict(section.get("params") or {})
        if "cov" in params:
            params["cov"] = np.asarray(params["cov"], dtype=float)
        try:
            density = LEVY_DENSITIES[name](dim=dim, **params)
        except TypeError as e:
            raise ValidationError(f"bad parameters for density {name!r}: {e}")
        return JumpMeasureSpec.density_family(density, section.get("eps", DEFAULT_SMALL_JUMP_EPS), flags)
    raise ValidationError(f"unknown jump family tag {family!r}")
