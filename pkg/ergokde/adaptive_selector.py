#!/usr/bin/env python3
"""
Adaptive bandwidth selection

Lepski-type rule over the geometric grid eta^{-l} above the threshold
(log_(k) T (log T)^5 / T)^{1/(d+2)}: choose the largest h whose estimate
stays within sqrt(max_est) * sigma(g, T) of every finer estimate g <= h.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from .config import get_config
from .density_estimator import (
    DensityEstimate,
    EvaluationGrid,
    estimate_density,
    iterated_log,
    mse_bandwidth,
    sigma_proxy,
    theoretical_bandwidth,
)
from .errors import EmptyBandwidthGridError, ValidationError
from .kernel_construction import Kernel
from .process_models import SamplePath


logger = logging.getLogger("ergokde.adaptive_selector")

__all__ = [
    "BandwidthDecision",
    "BandwidthGrid",
    "BandwidthSettings",
    "PairwiseStat",
    "SelectionTrace",
    "build_grid",
    "iterated_log",
    "resolve_bandwidth",
    "select_bandwidth",
]

BANDWIDTH_RULES = ("fixed", "theoretical", "mse", "adaptive")


@dataclass(frozen=True)
class BandwidthGrid:
    eta: float
    k: int
    d: int
    T: float
    bandwidths: Tuple[float, ...]
    threshold: float
    threshold_scale: float = 1.0

    @property
    def h_min(self) -> float:
        return self.bandwidths[-1]

    @property
    def h_max(self) -> float:
        return self.bandwidths[0]


def grid_threshold(T: float, d: int, k: int = 1, threshold_scale: float = 1.0) -> float:
    """threshold_scale * (log_(k) T (log T)^5 / T)^{1/(d+2)}."""
    lk = iterated_log(T, k)
    return threshold_scale * (lk * math.log(T) ** 5 / T) ** (1.0 / (d + 2))


def build_grid(T: float, d: int, eta: float = 2.0, k: int = 1,
               threshold_scale: float = 1.0) -> BandwidthGrid:
    """
    Candidate bandwidths 1, 1/eta, 1/eta^2, ... strictly above the threshold.

    Raises:
        ValidationError: If eta <= 1, d < 1 or log_(k) T is undefined
        EmptyBandwidthGridError: If the threshold is >= 1
    """
    if not eta > 1:
        raise ValidationError("eta must be > 1", key="adaptive.eta")
    if d < 1:
        raise ValidationError("d must be >= 1")
    if not threshold_scale > 0:
        raise ValidationError("threshold_scale must be > 0", key="adaptive.threshold_scale")
    threshold = grid_threshold(T, d, k, threshold_scale)

    bandwidths = []
    level = 0
    while True:
        h = float(eta) ** (-level)
        if h <= threshold:
            break
        bandwidths.append(h)
        level += 1

    if not bandwidths:
        raise EmptyBandwidthGridError(
            f"bandwidth grid is empty: threshold {threshold:.6g} >= 1 at T={T:g}, d={d}; "
            f"increase T or lower adaptive.threshold_scale",
            key="adaptive",
        )
    return BandwidthGrid(float(eta), int(k), int(d), float(T), tuple(bandwidths), threshold,
                         float(threshold_scale))


@dataclass(frozen=True)
class PairwiseStat:
    h: float
    g: float
    diff_sup: float
    threshold: float
    passed: bool


@dataclass
class SelectionTrace:
    selected_h: float
    max_est: float
    pairwise_stats: List[PairwiseStat] = field(default_factory=list)
    decisions: Dict[float, bool] = field(default_factory=dict)
    notes: List[str] = field(default_factory=list)
    estimates: Dict[float, DensityEstimate] = field(default_factory=dict, repr=False, compare=False)

    def rows(self) -> List[list]:
        """CSV rows h, g, diff_sup, threshold, pass."""
        return [[s.h, s.g, s.diff_sup, s.threshold, int(s.passed)] for s in self.pairwise_stats]

    def stats_for(self, h: float) -> List[PairwiseStat]:
        return [s for s in self.pairwise_stats if s.h == h]


def select_bandwidth(path: SamplePath, k: Kernel, grid: BandwidthGrid, eval_grid: EvaluationGrid,
                     threads: Optional[int] = None) -> SelectionTrace:
    """
    Run the selection rule on one path.

    Every grid bandwidth is estimated once on the shared evaluation grid;
    comparisons use sigma(g, T) of the finer bandwidth g.
    """
    if not grid.bandwidths:
        raise EmptyBandwidthGridError("bandwidth grid is empty")
    if path.dt > grid.h_min / 10.0:
        logger.warning("dt=%g exceeds h_min/10=%g", path.dt, grid.h_min / 10.0)

    threads = threads or get_config().THREADS

    def run(h: float) -> DensityEstimate:
        return estimate_density(path, k, h, eval_grid, threads=1)

    if threads > 1 and len(grid.bandwidths) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            estimates = dict(zip(grid.bandwidths, pool.map(run, grid.bandwidths)))
    else:
        estimates = {h: run(h) for h in grid.bandwidths}

    notes = []
    max_est = float(np.max(estimates[grid.h_min].values))
    if max_est < 0:
        notes.append(f"max_est {max_est:.6g} < 0 clamped to 0")
        logger.warning("Negative max_est %.6g clamped to 0", max_est)
        max_est = 0.0
    scale = math.sqrt(max_est)

    sigmas = {g: sigma_proxy(g, grid.T, grid.d, grid.k) for g in grid.bandwidths}
    stats: List[PairwiseStat] = []
    decisions: Dict[float, bool] = {}
    for h in grid.bandwidths:
        ok = True
        for g in grid.bandwidths:
            if g > h:
                continue
            diff = float(np.max(np.abs(estimates[h].values - estimates[g].values)))
            threshold = scale * sigmas[g]
            passed = diff <= threshold
            stats.append(PairwiseStat(h, g, diff, threshold, passed))
            ok = ok and passed
        decisions[h] = ok

    selected = next((h for h in grid.bandwidths if decisions[h]), grid.h_min)
    logger.info("Selected h=%.6g from %d candidates (max_est=%.6g)", selected, len(grid.bandwidths), max_est)
    return SelectionTrace(selected, max_est, stats, decisions, notes, estimates)


@dataclass(frozen=True)
class BandwidthSettings:
    """Parameters of the bandwidth rules (estimator and adaptive config sections)."""

    h_fixed: Optional[float] = None
    beta: float = 3.0
    c_h: float = 1.0
    gamma: Optional[float] = None
    eta: float = 2.0
    k: int = 1
    threshold_scale: float = 1.0


@dataclass
class BandwidthDecision:
    h: float
    rule: str
    clipped: bool = False
    trace: Optional[SelectionTrace] = None
    grid: Optional[BandwidthGrid] = None


def resolve_bandwidth(rule: str, path: SamplePath, kernel: Kernel, eval_grid: EvaluationGrid,
                      settings: BandwidthSettings = BandwidthSettings(),
                      threads: Optional[int] = None) -> BandwidthDecision:
    """
    Bandwidth for a path under the named rule.

    The adaptive rule applies in d >= 3 only; for d <= 2 it resolves to the
    theoretical bandwidth, which does not depend on the smoothness.
    """
    if rule not in BANDWIDTH_RULES:
        raise ValidationError(f"unknown bandwidth rule {rule!r}", key="estimator.h_rule")
    d, T = path.dim, path.horizon

    if rule == "fixed":
        if settings.h_fixed is None:
            raise ValidationError("fixed bandwidth rule needs estimator.h", key="estimator.h")
        if not (0.0 < settings.h_fixed <= 1.0):
            raise ValidationError("estimator.h must lie in (0, 1]", key="estimator.h")
        return BandwidthDecision(float(settings.h_fixed), rule)
    if rule == "mse":
        choice = mse_bandwidth(d, settings.beta, T, settings.gamma, settings.c_h)
        return BandwidthDecision(choice.h, rule, choice.clipped)
    if rule == "theoretical" or d <= 2:
        choice = theoretical_bandwidth(d, settings.beta, T, settings.c_h)
        return BandwidthDecision(choice.h, "theoretical", choice.clipped)

    grid = build_grid(T, d, settings.eta, settings.k, settings.threshold_scale)
    trace = select_bandwidth(path, kernel, grid, eval_grid, threads)
    return BandwidthDecision(trace.selected_h, rule, False, trace, grid)
