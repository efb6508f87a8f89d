#!/usr/bin/env python3
"""
ergokde command line

Experiment configs are JSON documents validated against config_schema.json.
Every command writes one CSV to --out and prints a one-line summary; any
failure prints a single JSON error line on stderr and exits non-zero
(2 for an empty bandwidth grid, 1 otherwise).

Usage:
    python -m ergokde simulate --config cfg.json --out path.csv
    python -m ergokde estimate --config cfg.json --out rho.csv [--path path.csv]
    python -m ergokde adapt --config cfg.json --out trace.csv [--path path.csv]
    python -m ergokde rates --config cfg.json --out risk.csv
    python -m ergokde variance --config cfg.json --out var.csv
    python -m ergokde formulas --fn sigma --h 0.5 --T 22026.47 --d 3 --k 1 --out f.csv
"""

import argparse
import copy
import csv
import hashlib
import json
import logging
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, Iterable, List, Optional, Sequence

import numpy as np

from .adaptive_selector import BandwidthSettings, build_grid, resolve_bandwidth, select_bandwidth
from .config import SCHEMA_FILE, get_config
from .density_estimator import (
    EvaluationGrid,
    estimate_density,
    mse_bandwidth,
    psi_d,
    rate_adaptive,
    rate_phi,
    rate_psi,
    sigma_proxy,
    theoretical_bandwidth,
    upsilon,
)
from .errors import ConfigError, ErgoKDEError, ValidationError
from .experiment_harness import rate_fit_from_report, run_risk_experiment, variance_scaling_experiment
from .kernel_construction import build_order_kernel
from .levy_noise import LevyTriplet, jump_spec_from_config
from .logs import RunLog, setup_logging
from .process_models import (
    JumpSDEModel,
    OUModel,
    SamplePath,
    drift_coefficient,
    matrix_coefficient,
    simulate_path,
)


logger = logging.getLogger("ergokde.cli_io")

COMMANDS = ("simulate", "estimate", "adapt", "rates", "variance", "formulas")


# ============================================================================
# Config parsing
# ============================================================================

def load_schema() -> Dict[str, Any]:
    with open(SCHEMA_FILE, "r", encoding="utf-8") as f:
        return json.load(f)


def _is_number(value) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def _check_bounds(value: float, entry: Dict[str, Any], key: str):
    if not math.isfinite(value):
        raise ConfigError(f"{key} must be finite", key=key)
    if "minimum" in entry and value < entry["minimum"]:
        raise ConfigError(f"{key} must be >= {entry['minimum']}, got {value}", key=key)
    if "maximum" in entry and value > entry["maximum"]:
        raise ConfigError(f"{key} must be <= {entry['maximum']}, got {value}", key=key)
    if "exclusiveMinimum" in entry and value <= entry["exclusiveMinimum"]:
        raise ConfigError(f"{key} must be > {entry['exclusiveMinimum']}, got {value}", key=key)
    if "exclusiveMaximum" in entry and value >= entry["exclusiveMaximum"]:
        raise ConfigError(f"{key} must be < {entry['exclusiveMaximum']}, got {value}", key=key)


def _number_list(value, key: str) -> List[float]:
    if not isinstance(value, list) or not value or not all(_is_number(v) for v in value):
        raise ConfigError(f"{key} must be a non-empty list of numbers", key=key)
    return [float(v) for v in value]


def _check_value(value, entry: Dict[str, Any], key: str):
    """Type-check one config value against its schema entry."""
    if value is None:
        if entry.get("default", 0) is None:
            return None
        raise ConfigError(f"{key} must not be null", key=key)

    kind = entry["type"]
    if kind == "number":
        if not _is_number(value):
            raise ConfigError(f"{key} must be a number", key=key)
        value = float(value)
        _check_bounds(value, entry, key)
    elif kind == "integer":
        if not isinstance(value, int) or isinstance(value, bool):
            raise ConfigError(f"{key} must be an integer", key=key)
        _check_bounds(value, entry, key)
    elif kind == "string":
        if not isinstance(value, str):
            raise ConfigError(f"{key} must be a string", key=key)
    elif kind == "boolean":
        if not isinstance(value, bool):
            raise ConfigError(f"{key} must be true or false", key=key)
    elif kind == "vector":
        value = [float(value)] if _is_number(value) else _number_list(value, key)
    elif kind == "number_list":
        value = _number_list(value, key)
    elif kind == "matrix":
        if _is_number(value):
            value = float(value)
        else:
            if not isinstance(value, list) or not value:
                raise ConfigError(f"{key} must be a number or a list of rows", key=key)
            rows = [_number_list(row, key) for row in value]
            if len({len(r) for r in rows}) != 1:
                raise ConfigError(f"{key} rows must have equal length", key=key)
            value = rows
    elif kind == "object":
        if not isinstance(value, dict):
            raise ConfigError(f"{key} must be an object", key=key)
        value = copy.deepcopy(value)
    else:
        raise ConfigError(f"schema type {kind!r} of {key} is not supported", key=key)

    if "enum" in entry and value not in entry["enum"]:
        raise ConfigError(f"{key} must be one of {entry['enum']}, got {value!r}", key=key)
    return value


def _resolve_section(keys: Dict[str, Any], raw, prefix: str, model_type: Optional[str]) -> Dict[str, Any]:
    def full(name: str) -> str:
        return f"{prefix}.{name}" if prefix else name

    if not isinstance(raw, dict):
        raise ConfigError(f"{prefix or 'config'} must be an object", key=prefix or None)
    for name in raw:
        if name not in keys:
            raise ConfigError(f"unknown key {full(name)}", key=full(name))

    resolved = {}
    for name, entry in keys.items():
        key = full(name)
        tagged = entry.get("model_type")
        if tagged is not None and model_type is not None and tagged != model_type:
            if name in raw:
                raise ConfigError(f"{key} does not apply to model type {model_type!r}", key=key)
            continue
        if entry["type"] == "section":
            resolved[name] = _resolve_section(entry["keys"], raw.get(name, {}), key, model_type)
        else:
            resolved[name] = _check_value(raw.get(name, copy.deepcopy(entry.get("default"))), entry, key)
    return resolved


def _check_length(value, dim: int, key: str):
    if value is None:
        return
    if isinstance(value, float):
        return
    if isinstance(value[0], list):
        if len(value) != dim or len(value[0]) != dim:
            raise ConfigError(f"{key} must be {dim}x{dim}", key=key)
    elif len(value) not in (1, dim):
        raise ConfigError(f"{key} must have length {dim}", key=key)


def _cross_check(resolved: Dict[str, Any]):
    model = resolved["model"]
    dim = model["dim"]
    jumps = model["jumps"]
    for name in ("B", "Q", "a"):
        if name in model:
            _check_length(model[name], dim, f"model.{name}")
    _check_length(jumps["jump_mean"], dim, "model.jumps.jump_mean")
    _check_length(jumps["jump_cov"], dim, "model.jumps.jump_cov")
    _check_length(resolved["simulation"]["x0"], dim, "simulation.x0")
    grid = resolved["estimator"]["grid"]
    _check_length(grid["lower"], dim, "estimator.grid.lower")
    _check_length(grid["upper"], dim, "estimator.grid.upper")
    _check_length(resolved["experiment"]["center"], dim, "experiment.center")
    _check_length(resolved["experiment"]["reference_point"], dim, "experiment.reference_point")

    if jumps["family"] == "cpoisson-gauss" and jumps["lambda"] is None:
        raise ConfigError("cpoisson-gauss jumps need model.jumps.lambda", key="model.jumps.lambda")
    if jumps["family"] == "density" and jumps["density"] is None:
        raise ConfigError("density jumps need model.jumps.density", key="model.jumps.density")
    simulation = resolved["simulation"]
    if simulation["T"] < simulation["dt"]:
        raise ConfigError("simulation.T must be >= simulation.dt", key="simulation.T")
    if resolved["estimator"]["h_rule"] == "fixed" and resolved["estimator"]["h"] is None:
        raise ConfigError("fixed bandwidth rule needs estimator.h", key="estimator.h")


@dataclass
class ModelSection:
    type: str = "ou"
    dim: int = 1
    B: Any = None
    a: Any = None
    Q: Any = None
    drift: Optional[str] = None
    drift_scale: float = 1.0
    sigma: Optional[str] = None
    sigma_scale: float = 1.0
    gamma: Optional[str] = None
    gamma_scale: float = 1.0
    c1: float = 1.0
    c2: float = 1.0
    eta0: float = 1.0
    alpha: float = 1.0
    jumps: Dict[str, Any] = field(default_factory=dict)


@dataclass
class SimulationSection:
    T: float
    dt: float
    burn_in: Optional[float]
    seed: int
    x0: Optional[List[float]]


@dataclass
class KernelSection:
    order: int


@dataclass
class EstimatorSection:
    h_rule: str
    h: Optional[float]
    beta: float
    c_h: float
    gamma: Optional[float]
    grid: Dict[str, Any]


@dataclass
class AdaptiveSection:
    eta: float
    k: int
    threshold_scale: float


@dataclass
class ExperimentSection:
    reps: int
    T_list: List[float]
    lambda_list: List[float]
    center: Optional[List[float]]
    reference_point: Optional[List[float]]
    pilot: bool
    pilot_factor: float


@dataclass
class ExperimentConfig:
    model: ModelSection
    simulation: SimulationSection
    kernel: KernelSection
    estimator: EstimatorSection
    adaptive: AdaptiveSection
    experiment: ExperimentSection
    resolved: Dict[str, Any]

    @classmethod
    def from_resolved(cls, resolved: Dict[str, Any]) -> "ExperimentConfig":
        r = copy.deepcopy(resolved)
        return cls(
            model=ModelSection(**r["model"]),
            simulation=SimulationSection(**r["simulation"]),
            kernel=KernelSection(**r["kernel"]),
            estimator=EstimatorSection(**r["estimator"]),
            adaptive=AdaptiveSection(**r["adaptive"]),
            experiment=ExperimentSection(**r["experiment"]),
            resolved=r,
        )

    def with_seed(self, seed: int) -> "ExperimentConfig":
        resolved = copy.deepcopy(self.resolved)
        resolved["simulation"]["seed"] = int(seed)
        return ExperimentConfig.from_resolved(resolved)

    def digest(self) -> str:
        return hashlib.sha256(serialize_config(self).encode("utf-8")).hexdigest()[:16]


def resolve_config(raw: Dict[str, Any]) -> Dict[str, Any]:
    """Validate a decoded config document and fill defaults."""
    schema = load_schema()
    if not isinstance(raw, dict):
        raise ConfigError("config document must be a JSON object")
    model_raw = raw.get("model", {})
    if not isinstance(model_raw, dict):
        raise ConfigError("model must be an object", key="model")
    model_type = model_raw.get("type", "ou")
    if model_type not in ("ou", "jumpsde"):
        raise ConfigError(f"model.type must be 'ou' or 'jumpsde', got {model_type!r}", key="model.type")
    resolved = _resolve_section(schema, raw, "", model_type)
    _cross_check(resolved)
    return resolved


def parse_config(text: str) -> ExperimentConfig:
    """
    Parse and validate a JSON experiment config.

    Raises:
        ConfigError: On malformed JSON, unknown keys, type mismatches or
            violated constraints; `key` names the offending entry
    """
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"config is not valid JSON: {e}")
    config = ExperimentConfig.from_resolved(resolve_config(raw))
    logger.info("Resolved config: %s", json.dumps(config.resolved, sort_keys=True, separators=(",", ":")))
    return config


def load_config(path) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as f:
        return parse_config(f.read())


def serialize_config(config: ExperimentConfig) -> str:
    """Resolved config as JSON text with sorted keys."""
    return json.dumps(config.resolved, sort_keys=True, indent=2)


# ============================================================================
# Builders
# ============================================================================

def _matrix(value, dim: int) -> Optional[np.ndarray]:
    if value is None:
        return None
    if isinstance(value, float):
        return value * np.eye(dim)
    return np.asarray(value, dtype=float)


def _vector(value, dim: int) -> Optional[np.ndarray]:
    if value is None:
        return None
    arr = np.asarray(value, dtype=float)
    return np.full(dim, arr[0]) if arr.size == 1 and dim > 1 else arr


def model_key(config: ExperimentConfig) -> str:
    return json.dumps(config.resolved["model"], sort_keys=True, separators=(",", ":"))


def build_model(config: ExperimentConfig):
    """OUModel or JumpSDEModel described by the model section."""
    m = config.model
    dim = m.dim
    jumps = dict(m.jumps)
    jumps["jump_cov"] = _matrix(jumps.get("jump_cov"), dim)
    jumps["jump_mean"] = _vector(jumps.get("jump_mean"), dim)
    spec = jump_spec_from_config(jumps, dim)

    if m.type == "ou":
        a = _vector(m.a, dim)
        triplet = LevyTriplet(np.zeros(dim) if a is None else a, _matrix(m.Q, dim), spec)
        return OUModel(_matrix(m.B, dim), triplet)
    return JumpSDEModel(
        drift_coefficient(m.drift, m.drift_scale),
        matrix_coefficient(m.sigma, dim, m.sigma_scale),
        matrix_coefficient(m.gamma, dim, m.gamma_scale),
        spec, c1=m.c1, c2=m.c2, eta0=m.eta0, alpha=m.alpha,
    )


def build_eval_grid(config: ExperimentConfig) -> EvaluationGrid:
    g = config.estimator.grid
    dim = config.model.dim
    lower = _vector(g["lower"], dim)
    upper = _vector(g["upper"], dim)
    lower = -g["half_width"] * np.ones(dim) if lower is None else lower
    upper = g["half_width"] * np.ones(dim) if upper is None else upper
    try:
        return EvaluationGrid(lower, upper, g["points_per_axis"])
    except ValidationError as e:
        raise ConfigError(e.message, key="estimator.grid")


def bandwidth_settings(config: ExperimentConfig) -> BandwidthSettings:
    e, a = config.estimator, config.adaptive
    return BandwidthSettings(h_fixed=e.h, beta=e.beta, c_h=e.c_h, gamma=e.gamma,
                             eta=a.eta, k=a.k, threshold_scale=a.threshold_scale)


# ============================================================================
# CSV I/O
# ============================================================================

def format_value(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return str(value)


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> int:
    """
    Write a CSV with '\\n' line endings and 17-significant-digit floats.

    Returns:
        int: Number of data rows written
    """
    path = Path(path)
    if path.parent and not path.parent.exists():
        path.parent.mkdir(parents=True, exist_ok=True)
    count = 0
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(list(header))
        for row in rows:
            writer.writerow([format_value(v) for v in row])
            count += 1
    return count


def write_path_csv(path, sample: SamplePath) -> int:
    header = ["t"] + [f"x{i + 1}" for i in range(sample.dim)]
    times = sample.times()
    return write_csv(path, header, ([t, *state] for t, state in zip(times, sample.states)))


def read_path_csv(path) -> SamplePath:
    """
    Read a path written by write_path_csv.

    Raises:
        ValidationError: If the header or values are malformed
    """
    with open(path, "r", encoding="utf-8", newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if not header or header[0] != "t" or header[1:] != [f"x{i + 1}" for i in range(len(header) - 1)]:
            raise ValidationError(f"{path}: expected header t,x1,...,xd")
        try:
            data = np.array([[float(v) for v in row] for row in reader if row], dtype=float)
        except ValueError as e:
            raise ValidationError(f"{path}: {e}")
    if data.ndim != 2 or data.shape[0] < 2 or data.shape[1] != len(header):
        raise ValidationError(f"{path}: a path needs at least two rows")
    dt = (data[-1, 0] - data[0, 0]) / (data.shape[0] - 1)
    return SamplePath(dt, data[:, 1:], model_tag="csv")


# ============================================================================
# Commands
# ============================================================================

def _obtain_path(config: ExperimentConfig, options: Dict[str, Any]) -> SamplePath:
    if options.get("path"):
        return read_path_csv(options["path"])
    s = config.simulation
    return simulate_path(build_model(config), s.T, s.dt, s.x0, s.burn_in, rng=s.seed)


def cmd_simulate(config: ExperimentConfig, out: Path, options: Dict[str, Any]) -> str:
    """Simulate a path and write t,x1..xd."""
    s = config.simulation
    sample = simulate_path(build_model(config), s.T, s.dt, s.x0, s.burn_in, rng=s.seed)
    write_path_csv(out, sample)
    return f"simulate: d={sample.dim} n_steps={sample.n_steps} dt={s.dt:g} seed={s.seed} out={out}"


def cmd_estimate(config: ExperimentConfig, out: Path, options: Dict[str, Any]) -> str:
    """Estimate the invariant density and write x1..xd,rho_hat."""
    sample = _obtain_path(config, options)
    kernel = build_order_kernel(sample.dim, config.kernel.order)
    grid = build_eval_grid(config)
    decision = resolve_bandwidth(config.estimator.h_rule, sample, kernel, grid, bandwidth_settings(config))
    est = estimate_density(sample, kernel, decision.h, grid)
    header = [f"x{i + 1}" for i in range(sample.dim)] + ["rho_hat"]
    write_csv(out, header, est.rows())
    return (f"estimate: rule={decision.rule} h={decision.h:.6g} clipped={decision.clipped} "
            f"sup={est.sup_norm():.6g} out={out}")


def cmd_adapt(config: ExperimentConfig, out: Path, options: Dict[str, Any]) -> str:
    """Run the adaptive selection rule and write its trace."""
    sample = _obtain_path(config, options)
    a = config.adaptive
    grid = build_grid(sample.horizon, sample.dim, a.eta, a.k, a.threshold_scale)
    kernel = build_order_kernel(sample.dim, config.kernel.order)
    trace = select_bandwidth(sample, kernel, grid, build_eval_grid(config))
    write_csv(out, ["h", "g", "diff_sup", "threshold", "pass"], trace.rows())
    return (f"adapt: selected_h={trace.selected_h:.6g} candidates={len(grid.bandwidths)} "
            f"max_est={trace.max_est:.6g} out={out}")


def cmd_rates(config: ExperimentConfig, out: Path, options: Dict[str, Any]) -> str:
    """Risk experiment over T_list; writes the risk CSV and <stem>_rate.csv."""
    e, s = config.experiment, config.simulation
    report = run_risk_experiment(
        build_model(config), config.kernel.order, e.T_list, config.estimator.h_rule, e.reps, s.seed,
        dt=s.dt, eval_grid=build_eval_grid(config), settings=bandwidth_settings(config),
        pilot=e.pilot, pilot_factor=e.pilot_factor, model_key=model_key(config),
        reference_point=e.reference_point, x0=s.x0, burn_in=s.burn_in,
    )
    write_csv(out, ["T", "seed", "h", "sup_err", "pt_sq_err"], report.csv_rows())
    rate_out = out.with_name(f"{out.stem}_rate.csv")
    medians = report.medians()
    write_csv(rate_out, ["logT", "log_med_err"],
              ([math.log(T), math.log(m) if m > 0 else -math.inf] for T, m in zip(report.T_list, medians)))
    if len(report.T_list) >= 3 and np.all(medians > 0):
        slope = f"{rate_fit_from_report(report).slope:.6g}"
    else:
        slope = "nan"
    return f"rates: rule={report.h_rule} rows={len(report.rows)} slope={slope} out={out} rate_out={rate_out}"


def cmd_variance(config: ExperimentConfig, out: Path, options: Dict[str, Any]) -> str:
    """Variance scaling experiment; writes lambda,var_over_T."""
    e, s = config.experiment, config.simulation
    center = np.zeros(config.model.dim) if e.center is None else _vector(e.center, config.model.dim)
    report = variance_scaling_experiment(build_model(config), center, e.lambda_list, s.T, e.reps, s.seed,
                                         dt=s.dt, x0=s.x0, burn_in=s.burn_in)
    write_csv(out, ["lambda", "var_over_T"], report.csv_rows())
    return f"variance: slope={report.slope:.6g} theory={report.theoretical_exponent:.6g} out={out}"


FORMULAS: Dict[str, tuple] = {
    "psi": (("x", "d"), lambda a: psi_d(a["x"], int(a["d"]))),
    "sigma": (("h", "T", "d", "k"), lambda a: sigma_proxy(a["h"], a["T"], int(a["d"]), int(a["k"]))),
    "upsilon": (("h", "T", "u", "d"), lambda a: upsilon(a["h"], a["T"], a["u"], int(a["d"]))),
    "phi": (("d", "beta", "T"), lambda a: rate_phi(int(a["d"]), a["beta"], a["T"])),
    "psi_rate": (("d", "beta", "T"), lambda a: rate_psi(int(a["d"]), a["beta"], a["T"])),
    "adaptive_rate": (("d", "beta", "T", "k"), lambda a: rate_adaptive(int(a["d"]), a["beta"], a["T"], int(a["k"]))),
    "bandwidth": (("d", "beta", "T", "c_h"),
                  lambda a: theoretical_bandwidth(int(a["d"]), a["beta"], a["T"], a["c_h"]).h),
    "mse_bandwidth": (("d", "beta", "T", "c_h"),
                      lambda a: mse_bandwidth(int(a["d"]), a["beta"], a["T"], a.get("gamma"), a["c_h"]).h),
}


def evaluate_formula(name: str, arguments: Dict[str, Optional[float]]) -> float:
    """Evaluate a named closed-form function from flag values."""
    if name not in FORMULAS:
        raise ValidationError(f"unknown formula {name!r}; known: {sorted(FORMULAS)}", key="--fn")
    required, fn = FORMULAS[name]
    values = {k: v for k, v in arguments.items() if v is not None}
    values.setdefault("c_h", 1.0)
    values.setdefault("beta", 3.0)
    for arg in required:
        if arg not in values:
            raise ValidationError(f"formula {name!r} needs --{arg.replace('_', '-')}", key=f"--{arg}")
    return float(fn(values))


def cmd_formulas(config: Optional[ExperimentConfig], out: Path, options: Dict[str, Any]) -> str:
    """Evaluate one formula and write fn,value."""
    name = options.get("fn")
    value = evaluate_formula(name, options.get("fn_args") or {})
    write_csv(out, ["fn", "value"], [[name, value]])
    return f"formulas: {name}={format_value(value)} out={out}"


HANDLERS: Dict[str, Callable[[Optional[ExperimentConfig], Path, Dict[str, Any]], str]] = {
    "simulate": cmd_simulate,
    "estimate": cmd_estimate,
    "adapt": cmd_adapt,
    "rates": cmd_rates,
    "variance": cmd_variance,
    "formulas": cmd_formulas,
}


def _error_line(payload: Dict[str, Any]):
    print(json.dumps(payload, sort_keys=True), file=sys.stderr)


def dispatch(command: str, config: Optional[ExperimentConfig], out_path, options: Dict[str, Any] = None,
             run_log: Optional[RunLog] = None) -> int:
    """
    Run a command and return its exit status.

    Failures print one JSON line on stderr: 2 for an empty bandwidth grid,
    1 for any other error.
    """
    options = options or {}
    run_log = run_log or RunLog()
    details = {"out": str(out_path), "config_digest": config.digest() if config is not None else None}
    if command not in HANDLERS:
        _error_line({"error": "ValidationError", "exit_code": 1, "key": "command",
                     "message": f"unknown command {command!r}"})
        return 1
    try:
        summary = HANDLERS[command](config, Path(out_path), options)
    except ErgoKDEError as e:
        logger.error("%s failed: %s", command, e.message)
        _error_line(e.to_dict())
        run_log.record(command, "error", e.exit_code, {**details, "error": e.to_dict()})
        return e.exit_code
    except OSError as e:
        logger.error("%s failed: %s", command, e)
        payload = {"error": "OSError", "exit_code": 1, "key": None, "message": str(e)}
        _error_line(payload)
        run_log.record(command, "error", 1, {**details, "error": payload})
        return 1

    print(summary)
    run_log.record(command, "success", 0, details)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ergokde",
        description="ergokde - invariant density estimation for ergodic Markov processes",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  Simulate a path:
    python -m ergokde simulate --config configs/ou_d1.json --out path.csv --seed 7

  Estimate from a stored path:
    python -m ergokde estimate --config configs/ou_d1.json --path path.csv --out rho.csv

  Adaptive selection trace:
    python -m ergokde adapt --config configs/ou_d3_adaptive.json --out trace.csv

  Closed-form functions:
    python -m ergokde formulas --fn psi --x 0.01 --d 2 --out psi.csv
        """,
    )
    subparsers = parser.add_subparsers(dest="command", help="Available commands")

    for name, help_text in (("simulate", "Simulate a sample path"),
                            ("estimate", "Estimate the invariant density"),
                            ("adapt", "Run adaptive bandwidth selection"),
                            ("rates", "Risk experiment and rate fit"),
                            ("variance", "Variance scaling experiment")):
        sub = subparsers.add_parser(name, help=help_text)
        sub.add_argument("--config", "-c", required=True, help="Experiment config (JSON)")
        sub.add_argument("--out", "-o", required=True, help="Output CSV")
        sub.add_argument("--seed", type=int, help="Override simulation.seed")
        if name in ("estimate", "adapt"):
            sub.add_argument("--path", help="Use a stored path CSV instead of simulating")
        sub.set_defaults(command=name)

    formulas = subparsers.add_parser("formulas", help="Evaluate a closed-form function")
    formulas.add_argument("--fn", required=True, choices=sorted(FORMULAS), help="Function name")
    formulas.add_argument("--out", "-o", required=True, help="Output CSV")
    formulas.add_argument("--config", "-c", help="Ignored; accepted for a uniform interface")
    for flag in ("x", "d", "h", "T", "k", "u", "beta", "c-h", "gamma"):
        formulas.add_argument(f"--{flag}", type=float, default=None)
    formulas.set_defaults(command="formulas")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Main entry point for CLI."""
    parser = build_parser()
    args = parser.parse_args(argv)
    if not args.command:
        parser.print_help()
        return 1

    try:
        setup_logging(get_config())
    except ErgoKDEError as e:
        _error_line(e.to_dict())
        return e.exit_code

    config = None
    options: Dict[str, Any] = {}
    if args.command == "formulas":
        options["fn"] = args.fn
        options["fn_args"] = {name: getattr(args, name) for name in
                              ("x", "d", "h", "T", "k", "u", "beta", "c_h", "gamma")}
    else:
        try:
            config = load_config(args.config)
            if args.seed is not None:
                config = config.with_seed(args.seed)
        except ErgoKDEError as e:
            _error_line(e.to_dict())
            RunLog().record(args.command, "error", e.exit_code, {"error": e.to_dict()})
            return e.exit_code
        except OSError as e:
            _error_line({"error": "OSError", "exit_code": 1, "key": None, "message": str(e)})
            return 1
        options["path"] = getattr(args, "path", None)

    return dispatch(args.command, config, args.out, options)
