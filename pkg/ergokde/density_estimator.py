#!/usr/bin/env python3
"""
Density estimator

Kernel estimator of the invariant density from one sample path,

    rho_hat(x) = (1/n) sum_{i<n} h^{-d} K((x - X_{t_i}) / h),

the left-endpoint Riemann sum of (1/T) int_0^T K_h(x - X_s) ds, evaluated on
a rectangular lattice by binning: each path point only touches the lattice
cells inside its kernel support. Also hosts the closed-form rate and
variance-proxy functions used for bandwidth choice.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, NamedTuple, Optional, Sequence

import numpy as np
from numba import njit

from .config import get_config
from .errors import ValidationError
from .kernel_construction import Kernel
from .process_models import SamplePath


logger = logging.getLogger("ergokde.density_estimator")

CHUNK_POINTS = 1 << 18
RIEMANN_RATIO = 10.0
DIRECT_CHUNK = 4096


# ============================================================================
# Evaluation grid
# ============================================================================

@dataclass(frozen=True, eq=False)
class EvaluationGrid:
    """Lattice on the box [lower, upper] with points_per_axis points per axis."""

    lower: np.ndarray
    upper: np.ndarray
    points_per_axis: int

    def __post_init__(self):
        lower = np.atleast_1d(np.asarray(self.lower, dtype=float))
        upper = np.atleast_1d(np.asarray(self.upper, dtype=float))
        if lower.shape != upper.shape:
            raise ValidationError("grid lower and upper must have the same length")
        if not np.all(lower < upper):
            raise ValidationError("grid needs lower < upper componentwise")
        if int(self.points_per_axis) < 2:
            raise ValidationError("grid needs at least 2 points per axis")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)
        object.__setattr__(self, "points_per_axis", int(self.points_per_axis))

    @classmethod
    def cube(cls, dim: int, half_width: float, points_per_axis: int) -> "EvaluationGrid":
        return cls(-half_width * np.ones(dim), half_width * np.ones(dim), points_per_axis)

    @classmethod
    def covering(cls, lower, upper, max_spacing: float) -> "EvaluationGrid":
        """Smallest lattice on [lower, upper] whose spacing does not exceed max_spacing."""
        if not max_spacing > 0:
            raise ValidationError("max_spacing must be > 0")
        lower = np.atleast_1d(np.asarray(lower, dtype=float))
        upper = np.atleast_1d(np.asarray(upper, dtype=float))
        span = float(np.max(upper - lower))
        return cls(lower, upper, max(2, int(math.ceil(span / max_spacing - 1e-12)) + 1))

    @property
    def dim(self) -> int:
        return self.lower.size

    @property
    def spacing(self) -> np.ndarray:
        return (self.upper - self.lower) / (self.points_per_axis - 1)

    @property
    def shape(self) -> tuple:
        return (self.points_per_axis,) * self.dim

    @property
    def size(self) -> int:
        return self.points_per_axis ** self.dim

    def axes(self) -> List[np.ndarray]:
        return [np.linspace(lo, hi, self.points_per_axis) for lo, hi in zip(self.lower, self.upper)]

    def points(self) -> np.ndarray:
        """All lattice points in C order, shape (size, d)."""
        mesh = np.meshgrid(*self.axes(), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def shifted(self, v) -> "EvaluationGrid":
        v = np.asarray(v, dtype=float)
        return EvaluationGrid(self.lower + v, self.upper + v, self.points_per_axis)


@dataclass(frozen=True, eq=False)
class DensityEstimate:
    grid: EvaluationGrid
    values: np.ndarray
    h: float
    T: float
    kernel_order: int
    lipschitz_L: float = math.inf

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values)))

    def sup_gap_bound(self) -> float:
        """Bound L * spacing / h^{d+1} on the gap between grid max and continuum sup."""
        return float(self.lipschitz_L * np.max(self.grid.spacing) / self.h ** (self.grid.dim + 1))

    def rows(self) -> np.ndarray:
        """(size, d+1) array of lattice points and estimates."""
        return np.column_stack([self.grid.points(), self.values.ravel()])


# ============================================================================
# Binning kernels
# ============================================================================

@njit(cache=True, nogil=True)
def _univariate(u, coeffs, uniform):
    au = abs(u)
    if au > 0.5:
        return 0.0
    v = u * u
    p = 0.0
    for i in range(coeffs.shape[0] - 1, -1, -1):
        p = p * v + coeffs[i]
    if uniform:
        return p
    return p * (1.0 - 2.0 * au)


@njit(cache=True, nogil=True)
def _bin_points(points, axes, spacing, shape, h, coeffs, uniform, out):
    n, d = points.shape
    strides = np.ones(d, np.int64)
    for i in range(d - 2, -1, -1):
        strides[i] = strides[i + 1] * shape[i + 1]
    width = np.empty(d, np.int64)
    for i in range(d):
        width[i] = int(np.ceil(h / spacing[i])) + 2
    vals = np.zeros((d, width.max()))
    start = np.empty(d, np.int64)
    counter = np.zeros(d, np.int64)

    for p in range(n):
        skip = False
        for i in range(d):
            lo = int(np.floor((points[p, i] - 0.5 * h - axes[i, 0]) / spacing[i]))
            start[i] = lo
            nonzero = False
            for j in range(width[i]):
                idx = lo + j
                if idx < 0 or idx >= shape[i]:
                    vals[i, j] = 0.0
                else:
                    v = _univariate((axes[i, idx] - points[p, i]) / h, coeffs, uniform)
                    vals[i, j] = v
                    if v != 0.0:
                        nonzero = True
            if not nonzero:
                skip = True
                break
        if skip:
            continue

        for i in range(d):
            counter[i] = 0
        while True:
            prod = 1.0
            flat = 0
            for i in range(d):
                v = vals[i, counter[i]]
                if v == 0.0:
                    prod = 0.0
                    break
                prod *= v
                flat += (start[i] + counter[i]) * strides[i]
            if prod != 0.0:
                out[flat] += prod
            i = d - 1
            while i >= 0:
                counter[i] += 1
                if counter[i] < width[i]:
                    break
                counter[i] = 0
                i -= 1
            if i < 0:
                break


def _check_bandwidth(h: float):
    if not (0.0 < h <= 1.0):
        raise ValidationError(f"bandwidth h must lie in (0, 1], got {h}")


def _left_endpoints(path: SamplePath) -> np.ndarray:
    return path.states[:-1]


def kernel_sums(points: np.ndarray, k: Kernel, h: float, grid: EvaluationGrid,
                threads: Optional[int] = None) -> np.ndarray:
    """
    Unnormalised sum_i K((x - points_i) / h) at every lattice point x.

    Points are processed in fixed-size chunks whose partial grids are added
    in chunk order, so the result does not depend on the thread count.
    """
    d = grid.dim
    lo = grid.lower - 0.5 * h
    hi = grid.upper + 0.5 * h
    inside = np.all((points >= lo) & (points <= hi), axis=1)
    relevant = np.ascontiguousarray(points[inside], dtype=float)

    axes = np.ascontiguousarray(np.stack(grid.axes()))
    spacing = np.ascontiguousarray(grid.spacing)
    shape = np.asarray(grid.shape, dtype=np.int64)
    coeffs = np.ascontiguousarray(k.univariate_coeffs, dtype=float)
    uniform = k.weight == "uniform"

    def run(chunk: np.ndarray) -> np.ndarray:
        acc = np.zeros(grid.size)
        _bin_points(chunk, axes, spacing, shape, float(h), coeffs, uniform, acc)
        return acc

    chunks = [relevant[i:i + CHUNK_POINTS] for i in range(0, relevant.shape[0], CHUNK_POINTS)]
    if not chunks:
        return np.zeros(grid.shape)
    threads = threads or get_config().THREADS
    if threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            partials = list(pool.map(run, chunks))
    else:
        partials = [run(c) for c in chunks]

    total = partials[0]
    for part in partials[1:]:
        total = total + part
    return total.reshape(grid.shape)


def estimate_density(path: SamplePath, k: Kernel, h: float, grid: EvaluationGrid,
                     threads: Optional[int] = None) -> DensityEstimate:
    """
    Kernel estimate of the invariant density on the evaluation grid.

    Args:
        path: Sample path (left endpoints X_{t_0}..X_{t_{n-1}} are used)
        k: Kernel of the path's dimension
        h: Bandwidth in (0, 1]
        grid: Evaluation lattice
        threads: Worker threads (defaults to ERGOKDE_THREADS)

    Raises:
        ValidationError: On h outside (0, 1] or mismatched dimensions
    """
    _check_bandwidth(h)
    if path.dim != grid.dim or k.dim != grid.dim:
        raise ValidationError(f"dimension mismatch: path {path.dim}, kernel {k.dim}, grid {grid.dim}")
    if path.dt > h / RIEMANN_RATIO:
        logger.warning("dt=%g exceeds h/10=%g; Riemann error may dominate", path.dt, h / RIEMANN_RATIO)

    points = _left_endpoints(path)
    n = points.shape[0]
    sums = kernel_sums(points, k, h, grid, threads)
    values = sums / (n * h ** grid.dim)
    return DensityEstimate(grid, values, float(h), n * path.dt, k.order, k.lipschitz_L)


def evaluate_at_points(path: SamplePath, k: Kernel, h: float, points) -> np.ndarray:
    """Estimator evaluated directly at arbitrary points (m, d)."""
    _check_bandwidth(h)
    targets = np.atleast_2d(np.asarray(points, dtype=float))
    if targets.shape[1] != path.dim:
        targets = targets.reshape(-1, path.dim)
    data = _left_endpoints(path)
    values = np.zeros(targets.shape[0])
    for start in range(0, data.shape[0], DIRECT_CHUNK):
        block = data[start:start + DIRECT_CHUNK]
        u = (targets[:, None, :] - block[None, :, :]) / h
        values += k.evaluate(u).sum(axis=1)
    return values / (data.shape[0] * h ** path.dim)


# ============================================================================
# Closed-form rates and variance proxies
# ============================================================================

def iterated_log(T: float, k: int) -> float:
    """
    k-fold logarithm of T (log_(0) T = T).

    Raises:
        ValidationError: If an intermediate value is <= 0 before depth k,
            or the result is not > 0
    """
    if k < 0:
        raise ValidationError("iterated log depth k must be >= 0")
    value = float(T)
    for depth in range(k):
        if value <= 0:
            raise ValidationError(f"log_({k}) {T} undefined: value {value} at depth {depth}")
        value = math.log(value)
    if not value > 0:
        raise ValidationError(f"log_({k}) {T} = {value} is not > 0")
    return value


def psi_d(x: float, d: int) -> float:
    """1 (d=1), sqrt(1 + log(1/x)) (d=2), x^{1/d - 1/2} (d>=3), for 0 < x < e."""
    if not (0.0 < x < math.e):
        raise ValidationError(f"psi_d needs 0 < x < e, got {x}")
    if d < 1:
        raise ValidationError("d must be >= 1")
    if d == 1:
        return 1.0
    if d == 2:
        return math.sqrt(1.0 + math.log(1.0 / x))
    return x ** (1.0 / d - 0.5)


def _log_T(T: float) -> float:
    if not T > 1:
        raise ValidationError(f"T must be > 1, got {T}")
    return math.log(T)


def sigma_proxy(h: float, T: float, d: int, k: int) -> float:
    """Variance proxy sigma(h, T); exactly 0 at h = 1."""
    _check_bandwidth(h)
    lk = iterated_log(T, k)
    log_t = _log_T(T)
    log_inv_h = math.log(1.0 / h)
    first = lk * log_t ** 2 / (T * h ** d) * log_inv_h
    second = psi_d(h ** d, d) * math.sqrt(lk * log_inv_h / T)
    return first + second


def upsilon(h: float, T: float, u: float, d: int) -> float:
    """Deviation term u (log T)^2/(T h^d) + T^{-1/2} psi_d(h^d) sqrt(max(u, log 1/h))."""
    _check_bandwidth(h)
    if not u >= 1:
        raise ValidationError("upsilon needs u >= 1")
    log_t = _log_T(T)
    return (u * log_t ** 2 / (T * h ** d)
            + psi_d(h ** d, d) * math.sqrt(max(u, math.log(1.0 / h))) / math.sqrt(T))


def _rate_domain(d: int, beta: float, T: float):
    if d < 1:
        raise ValidationError("d must be >= 1")
    if not beta > 0:
        raise ValidationError("beta must be > 0")
    if not T > math.e:
        raise ValidationError(f"T must exceed e, got {T}")


def rate_phi(d: int, beta: float, T: float) -> float:
    """Pointwise rate: 1/sqrt(T), sqrt(log T / T), T^{-beta/(2 beta + d - 2)}."""
    _rate_domain(d, beta, T)
    if d == 1:
        return 1.0 / math.sqrt(T)
    if d == 2:
        return math.sqrt(math.log(T) / T)
    return T ** (-beta / (2.0 * beta + d - 2.0))


def rate_psi(d: int, beta: float, T: float) -> float:
    """Sup-norm rate: sqrt(log T / T), log T / sqrt(T), (log T / T)^{beta/(2 beta + d - 2)}."""
    _rate_domain(d, beta, T)
    log_t = math.log(T)
    if d == 1:
        return math.sqrt(log_t / T)
    if d == 2:
        return log_t / math.sqrt(T)
    return (log_t / T) ** (beta / (2.0 * beta + d - 2.0))


def rate_adaptive(d: int, beta: float, T: float, k: int = 1) -> float:
    """Rate of the adaptive rule: (log_(k) T log T / T)^{beta/(2 beta + d - 2)}."""
    _rate_domain(d, beta, T)
    return (iterated_log(T, k) * math.log(T) / T) ** (beta / (2.0 * beta + d - 2.0))


class BandwidthChoice(NamedTuple):
    h: float
    clipped: bool


def _clip(h: float, label: str) -> BandwidthChoice:
    if h > 1.0:
        logger.warning("%s bandwidth %.6g exceeds 1; clipped to 1", label, h)
        return BandwidthChoice(1.0, True)
    return BandwidthChoice(h, False)


def theoretical_bandwidth(d: int, beta: float, T: float, c_h: float = 1.0) -> BandwidthChoice:
    """
    Sup-norm-optimal bandwidth c_h * {log^2 T/sqrt T, log T/T^{1/4},
    (log T/T)^{1/(2 beta + d - 2)}} for d = 1, 2, >= 3, clipped to 1.
    """
    _rate_domain(d, beta, T)
    if not c_h > 0:
        raise ValidationError("c_h must be > 0")
    log_t = math.log(T)
    if d == 1:
        h = log_t ** 2 / math.sqrt(T)
    elif d == 2:
        h = log_t / T ** 0.25
    else:
        h = (log_t / T) ** (1.0 / (2.0 * beta + d - 2.0))
    return _clip(c_h * h, "theoretical")


def mse_bandwidth(d: int, beta: float, T: float, gamma: Optional[float] = None,
                  c_h: float = 1.0) -> BandwidthChoice:
    """Pointwise-risk bandwidth: c_h T^{-1/gamma} (d <= 2, 0 < gamma <= beta) or c_h T^{-1/(2 beta + d - 2)}."""
    _rate_domain(d, beta, T)
    if not c_h > 0:
        raise ValidationError("c_h must be > 0")
    if d <= 2:
        gamma = beta if gamma is None else gamma
        if not (0.0 < gamma <= beta):
            raise ValidationError("gamma must lie in (0, beta]")
        h = T ** (-1.0 / gamma)
    else:
        h = T ** (-1.0 / (2.0 * beta + d - 2.0))
    return _clip(c_h * h, "mse")
