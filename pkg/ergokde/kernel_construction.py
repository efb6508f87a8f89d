#!/usr/bin/env python3
"""
Kernel construction

Compactly supported product kernels of order ell on [-1/2, 1/2]^d. The
univariate factor is K1(u) = p(u^2) (1 - 2|u|)_+ with the even polynomial p
fixed by the moment conditions, so K1 is continuous on R and Lipschitz.
"""

import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

import numpy as np
from numpy.polynomial import Polynomial
from scipy import linalg

from .errors import KernelConstructionError, ValidationError


logger = logging.getLogger("ergokde.kernel_construction")

SUPPORT_HALF_WIDTH = 0.5
QUADRATURE_NODES = 200
CONDITION_LIMIT = 1e14


def weight_moment(k: int) -> float:
    """Integral of u^(2k) (1 - 2|u|)_+ over R."""
    return 0.5 ** (2 * k) / ((2 * k + 1) * (2 * k + 2))


@dataclass(frozen=True, eq=False)
class Kernel:
    """Product kernel K(u) = prod_i K1(u_i) supported on [-1/2, 1/2]^d."""

    dim: int
    order: int
    univariate_coeffs: np.ndarray
    lipschitz_L: float
    sup_value: float
    weight: str = "triangular"
    note: str = ""

    def __post_init__(self):
        coeffs = np.asarray(self.univariate_coeffs, dtype=float)
        coeffs.flags.writeable = False
        object.__setattr__(self, "univariate_coeffs", coeffs)

    @classmethod
    def uniform(cls, dim: int, declared_order: int = 1) -> "Kernel":
        """Box kernel K = 1 on the support (not Lipschitz)."""
        return cls(dim, declared_order, np.array([1.0]), math.inf, 1.0, weight="uniform")

    def univariate(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        inside = np.abs(u) <= SUPPORT_HALF_WIDTH
        poly = np.polynomial.polynomial.polyval(u * u, self.univariate_coeffs)
        if self.weight == "uniform":
            return np.where(inside, poly, 0.0)
        return np.where(inside, poly * np.clip(1.0 - 2.0 * np.abs(u), 0.0, None), 0.0)

    def evaluate(self, u) -> np.ndarray:
        """K at points u of shape (..., d)."""
        u = np.asarray(u, dtype=float)
        if self.dim == 1 and (u.ndim == 0 or u.shape[-1] != 1):
            return self.univariate(u)
        if u.shape[-1] != self.dim:
            raise ValidationError(f"kernel of dimension {self.dim} evaluated at points of dimension {u.shape[-1]}")
        return np.prod(self.univariate(u), axis=-1)

    def __call__(self, u) -> np.ndarray:
        return self.evaluate(u)


def _moment_coefficients(m: int) -> np.ndarray:
    """Solve sum_i c_i mu_{2(i+j)} = delta_{j0}, j = 0..m."""
    hankel = np.array([[weight_moment(i + j) for i in range(m + 1)] for j in range(m + 1)])
    rhs = np.zeros(m + 1)
    rhs[0] = 1.0
    try:
        cond = np.linalg.cond(hankel)
        if not np.isfinite(cond) or cond > CONDITION_LIMIT:
            raise KernelConstructionError(f"moment system is singular (condition number {cond:.3e})")
        return linalg.solve(hankel, rhs, assume_a="sym")
    except linalg.LinAlgError as e:
        raise KernelConstructionError(f"moment system could not be solved: {e}")


def _half_profile(coeffs: np.ndarray) -> Polynomial:
    """K1 restricted to [0, 1/2] as a polynomial in u."""
    p_of_u = Polynomial(np.ravel(np.column_stack([coeffs, np.zeros_like(coeffs)]))[:-1])
    return p_of_u * Polynomial([1.0, -2.0])


def _sup_on_half(poly: Polynomial) -> float:
    """max |poly| over [0, 1/2] via critical points."""
    candidates = [0.0, SUPPORT_HALF_WIDTH]
    deriv = poly.deriv()
    if deriv.degree() > 0:
        for root in deriv.roots():
            if abs(root.imag) < 1e-12 and 0.0 <= root.real <= SUPPORT_HALF_WIDTH:
                candidates.append(float(root.real))
    return float(max(abs(poly(c)) for c in candidates))


def build_order_kernel(d: int, ell: int) -> Kernel:
    """
    Build the product kernel of order ell in dimension d.

    Even ell is rounded up to the next odd order (symmetric kernels have
    vanishing odd moments).

    Raises:
        ValidationError: If d < 1 or ell < 1
        KernelConstructionError: If the moment system is singular
    """
    if d < 1:
        raise ValidationError("kernel dimension must be >= 1")
    if ell < 1:
        raise ValidationError("kernel order must be >= 1")

    note = ""
    if ell % 2 == 0:
        note = f"order {ell} rounded up to {ell + 1}"
        logger.warning("Kernel %s", note)
        ell += 1

    coeffs = _moment_coefficients((ell - 1) // 2)
    profile = _half_profile(coeffs)
    L1 = _sup_on_half(profile.deriv())
    S1 = _sup_on_half(profile)
    lipschitz = d * L1 * S1 ** (d - 1)
    return Kernel(d, ell, coeffs, lipschitz, S1 ** d, note=note)


def eval_kernel(k: Kernel, u) -> float:
    """K(u) at a single point u."""
    u = np.atleast_1d(np.asarray(u, dtype=float))
    return float(np.prod(k.univariate(u)))


@dataclass
class MomentReport:
    passed: bool
    tol: float
    total_integral: float
    moments: Dict[Tuple[int, ...], float] = field(default_factory=dict)
    worst_index: Optional[Tuple[int, ...]] = None
    worst_value: float = 0.0

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "tol": self.tol,
            "total_integral": self.total_integral,
            "moments": {",".join(map(str, k)): v for k, v in self.moments.items()},
            "worst_index": list(self.worst_index) if self.worst_index else None,
            "worst_value": self.worst_value,
        }


def univariate_moments(k: Kernel, max_power: int, nodes: int = QUADRATURE_NODES) -> np.ndarray:
    """Integrals of u^j K1(u), j = 0..max_power, by Gauss-Legendre split at 0."""
    x, w = np.polynomial.legendre.leggauss(nodes)
    half = SUPPORT_HALF_WIDTH / 2.0
    u = np.concatenate([half * (x - 1.0), half * (x + 1.0)])
    weights = np.concatenate([half * w, half * w])
    values = k.univariate(u)
    return np.array([float(np.sum(weights * u ** j * values)) for j in range(max_power + 1)])


def verify_moments(k: Kernel, tol: float = 1e-8) -> MomentReport:
    """
    Check the integral of K and every moment of total degree 1..order.

    Mixed moments factor into univariate moments of the product kernel.
    """
    if not tol > 0:
        raise ValidationError("tol must be > 0")
    uni = univariate_moments(k, k.order)
    total = float(uni[0] ** k.dim)
    report = MomentReport(passed=abs(total - 1.0) <= tol, tol=tol, total_integral=total)

    worst_dev = abs(total - 1.0)
    for alpha in itertools.product(range(k.order + 1), repeat=k.dim):
        degree = sum(alpha)
        if degree < 1 or degree > k.order:
            continue
        value = float(np.prod([uni[a] for a in alpha]))
        report.moments[alpha] = value
        if abs(value) > tol:
            report.passed = False
        if report.worst_index is None or abs(value) > abs(report.worst_value):
            report.worst_index, report.worst_value = alpha, value
    if worst_dev > tol and report.worst_index is None:
        report.worst_value = total
    return report
