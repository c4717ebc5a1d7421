"""
Experiment configuration: a single INI file with nested sections.

Sections and keys (all optional unless noted):

  [grid]      dimension, lower, h (required), count
  [time]      horizon, snapshots ("a:b:dt" or a list), cfl
  [kernel]    builtin = indicator(R) | triangle(a) | zero-mean-wavelet(a) | zero,
              or csv = <path>; l1_bound override
  [external]  type = constant | pulse | table; value; table
  [initial]   type = hat | interval(a) | disk(r) | csv; path
  [engine]    eps_schedule, max_iterations, tolerance, damping
  [diagnostics] delta, rho, eta0, semiconvexity_offset
  [output]    directory
  [counterexample] gamma / gammas, ode_mesh, snapshot_dt, sup_tolerance_cells
  [verify]    batteries, seed
  [convergence] experiment

Values are parsed leniently: numbers, python-style lists, or bare strings.
The "pulse" external velocity is the quadratic 2(t-1)(2-t) driving the
non-uniqueness family.
"""

from __future__ import annotations

import ast
import configparser
import hashlib
import math
import os
from dataclasses import dataclass, field as dc_field

import numpy as np

from .errors import ConfigError
from .fattening import OccupancyControl, driving_velocity, initial_profile
from .grid import GridSpec, ScalarField, field_from_function, read_field_csv
from .velocity import (
    ExternalVelocity,
    Kernel,
    constant_velocity,
    indicator_kernel,
    kernel_from_csv,
    time_profile_velocity,
    triangle_kernel,
    velocity_bounds,
    zero_kernel,
    zero_mean_wavelet_kernel,
)
from .weak import FixedPointConfig

OUTPUT_ROOT_ENV = "DISLOCLAB_OUTPUT_ROOT"

ALL_BATTERIES = (
    "monotone_step",
    "oracle_equivalence",
    "convolution_brute_force",
    "inclusion_preservation",
    "band_growth",
    "gradient_margin_persistence",
)


def _parse_value(text: str):
    text = text.strip()
    if not text:
        return None
    try:
        return ast.literal_eval(text)
    except (ValueError, SyntaxError):
        return text


def _parse_times(value, horizon: float) -> tuple[float, ...]:
    if value is None:
        n = 10
        return tuple(np.round(np.linspace(0.0, horizon, n + 1), 12))
    if isinstance(value, str) and ":" in value:
        a, b, dt = (float(p) for p in value.split(":"))
        times = np.round(np.arange(a, b + dt / 2, dt), 12)
        return tuple(float(t) for t in times)
    if isinstance(value, (list, tuple)):
        return tuple(float(t) for t in value)
    raise ConfigError(f"cannot parse snapshot times from {value!r}")


def _parse_builtin(text: str) -> tuple[str, list[float]]:
    text = text.strip()
    if "(" not in text:
        return text, []
    name, rest = text.split("(", 1)
    if not rest.endswith(")"):
        raise ConfigError(f"malformed builtin spec {text!r}")
    args = [float(a) for a in rest[:-1].split(",") if a.strip()]
    return name.strip(), args


@dataclass
class ExperimentConfig:
    grid: GridSpec
    horizon: float
    snapshot_times: tuple[float, ...]
    theta: float
    kernel: Kernel
    external: ExternalVelocity
    u0: ScalarField
    engine: FixedPointConfig
    delta: float
    rho: float | None
    eta0: float | None
    semiconvexity_offset: float | None
    output_dir: str
    seed: int
    gammas: list[OccupancyControl]
    ode_mesh: float
    counterexample_snapshot_dt: float
    sup_tolerance_cells: float
    batteries: tuple[str, ...]
    convergence_experiment: str
    config_hash: str
    metadata: dict = dc_field(default_factory=dict)

    def resolved_output_dir(self) -> str:
        root = os.environ.get(OUTPUT_ROOT_ENV)
        if root:
            return os.path.join(root, os.path.basename(self.output_dir))
        return self.output_dir


def _build_grid(section) -> GridSpec:
    if "h" not in section:
        raise ConfigError("[grid] needs a spacing h")
    h = float(section["h"])
    dim = int(section.get("dimension", 1))
    lower = section.get("lower", -3.0)
    if isinstance(lower, (int, float)):
        lower = (float(lower),) * dim
    else:
        lower = tuple(float(v) for v in lower)
    count = section.get("count")
    if count is None:
        raise ConfigError("[grid] needs node counts")
    if isinstance(count, (int, float)):
        counts = (int(count),) * dim
    else:
        counts = tuple(int(c) for c in count)
    return GridSpec(dim, lower, h, counts)


def _build_kernel(section, dim: int) -> Kernel:
    csv_path = section.get("csv")
    if csv_path:
        return kernel_from_csv(csv_path, section.get("l1_bound"))
    builtin = section.get("builtin", "zero")
    name, args = _parse_builtin(str(builtin))
    if name == "zero":
        return zero_kernel(dim)
    if name == "indicator":
        if len(args) != 1:
            raise ConfigError("indicator kernel takes one radius argument")
        return indicator_kernel(args[0], dim)
    if name == "triangle":
        return triangle_kernel(args[0] if args else 1.0, dim)
    if name in ("zero-mean-wavelet", "wavelet"):
        if not args:
            raise ConfigError("wavelet kernel needs a width argument")
        l1 = float(section.get("l1_bound", 1.0))
        return zero_mean_wavelet_kernel(args[0], l1, dim)
    raise ConfigError(f"unknown kernel builtin {name!r}")


def _build_external(section) -> ExternalVelocity:
    kind = str(section.get("type", "constant")).strip()
    if kind == "constant":
        return constant_velocity(float(section.get("value", 0.0)))
    if kind == "pulse":
        return driving_velocity()
    if kind == "table":
        table = section.get("table")
        if not table:
            raise ConfigError("table external velocity needs a [[t, v], ...] table")
        ts = np.array([float(p[0]) for p in table])
        vs = np.array([float(p[1]) for p in table])
        if np.any(np.diff(ts) <= 0):
            raise ConfigError("table times must be strictly increasing")
        bound = float(np.abs(vs).max())
        return time_profile_velocity(lambda t: float(np.interp(t, ts, vs)), bound)
    raise ConfigError(f"unknown external velocity type {kind!r}")


def _build_initial(section, grid: GridSpec) -> ScalarField:
    kind = str(section.get("type", "hat")).strip()
    name, args = _parse_builtin(kind)
    if name == "csv":
        field, _ = read_field_csv(section["path"])
        if field.spec != grid:
            raise ConfigError("initial data CSV grid does not match [grid]")
        return field
    if name == "hat":
        if grid.dimension != 1:
            raise ConfigError("hat initial data is 1D")
        return field_from_function(grid, initial_profile)
    if name == "interval":
        if grid.dimension != 1:
            raise ConfigError("interval initial data is 1D")
        a = args[0] if args else 1.0
        return field_from_function(grid, lambda x: np.maximum(a - np.abs(x), -1.0))
    if name == "disk":
        if grid.dimension != 2:
            raise ConfigError("disk initial data is 2D")
        r = args[0] if args else 1.0
        return field_from_function(
            grid, lambda x, y: np.maximum(r - np.sqrt(x * x + y * y), -1.0)
        )
    raise ConfigError(f"unknown initial data type {kind!r}")


def measured_support_radius(u0: ScalarField) -> float:
    """Smallest radius outside which the field is identically -1."""
    active = u0.values > -1.0
    if not active.any():
        return 0.0
    return float(u0.spec.radius()[active].max()) + u0.spec.h


def load_config(path) -> ExperimentConfig:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    with open(path) as f:
        raw_text = f.read()
    parser.read_string(raw_text)
    sections = {
        name: {k: _parse_value(v) for k, v in parser[name].items()}
        for name in parser.sections()
    }

    def sec(name):
        return sections.get(name, {})

    grid = _build_grid(sec("grid"))
    time_sec = sec("time")
    horizon = float(time_sec.get("horizon", 1.0))
    snapshot_times = _parse_times(time_sec.get("snapshots"), horizon)
    theta = float(time_sec.get("cfl", 0.45))
    kernel = _build_kernel(sec("kernel"), grid.dimension)
    external = _build_external(sec("external"))
    u0 = _build_initial(sec("initial"), grid)

    eng = sec("engine")
    eps = eng.get("eps_schedule")
    engine = FixedPointConfig(
        eps_schedule=tuple(float(e) for e in eps) if eps else None,
        max_iterations=int(eng.get("max_iterations", 200)),
        tolerance=float(eng["tolerance"]) if eng.get("tolerance") is not None else None,
        damping=float(eng.get("damping", 1.0)),
        theta=theta,
    )

    diag = sec("diagnostics")
    out = sec("output")
    ce = sec("counterexample")
    gammas_cfg = ce.get("gammas")
    gamma_cfg = ce.get("gamma")
    if gammas_cfg is not None:
        gammas = [OccupancyControl.from_pairs(g) for g in gammas_cfg]
    elif gamma_cfg is not None:
        gammas = [OccupancyControl.from_pairs(gamma_cfg)]
    else:
        gammas = [OccupancyControl.constant(0.0), OccupancyControl.constant(1.0)]

    ver = sec("verify")
    batteries_cfg = ver.get("batteries")
    if batteries_cfg is None:
        batteries = ALL_BATTERIES
    elif isinstance(batteries_cfg, str):
        batteries = tuple(b.strip() for b in batteries_cfg.split(",") if b.strip())
    else:
        batteries = tuple(batteries_cfg)
    unknown = [b for b in batteries if b not in ALL_BATTERIES]
    if unknown:
        raise ConfigError(f"unknown verify batteries: {unknown}")

    conv = sec("convergence")

    cfg = ExperimentConfig(
        grid=grid,
        horizon=horizon,
        snapshot_times=snapshot_times,
        theta=theta,
        kernel=kernel,
        external=external,
        u0=u0,
        engine=engine,
        delta=float(diag.get("delta", 0.0)),
        rho=float(diag["rho"]) if diag.get("rho") is not None else None,
        eta0=float(diag["eta0"]) if diag.get("eta0") is not None else None,
        semiconvexity_offset=(
            float(diag["semiconvexity_offset"])
            if diag.get("semiconvexity_offset") is not None
            else None
        ),
        output_dir=str(out.get("directory", "out")),
        seed=int(ver.get("seed", 1234)),
        gammas=gammas,
        ode_mesh=float(ce.get("ode_mesh", 1e-4)),
        counterexample_snapshot_dt=float(ce.get("snapshot_dt", 0.05)),
        sup_tolerance_cells=float(ce.get("sup_tolerance_cells", 2.0)),
        batteries=batteries,
        convergence_experiment=str(conv.get("experiment", "counterexample")),
        config_hash=hashlib.sha256(raw_text.encode()).hexdigest()[:16],
    )
    return cfg


def validate_simulation(cfg: ExperimentConfig) -> dict:
    """Finite-speed sanity check: the box must contain B(0, R0 + M T).

    Returns the derived constants used by the check and by output headers.
    """
    bounds = velocity_bounds(cfg.kernel, cfg.external)
    r0 = measured_support_radius(cfg.u0)
    reach = r0 + bounds.speed * cfg.horizon
    if not cfg.grid.contains_ball(reach):
        raise ConfigError(
            f"grid box {cfg.grid.lower}..{cfg.grid.upper} does not contain "
            f"B(0, R0 + M*T) = B(0, {reach:.3f}) (R0={r0:.3f}, M={bounds.speed:.3f})"
        )
    if any(abs(t1 - t0) < 1e-12 for t0, t1 in zip(cfg.snapshot_times, cfg.snapshot_times[1:])):
        raise ConfigError("degenerate snapshot times")
    if math.isnan(bounds.speed) or bounds.speed <= 0:
        raise ConfigError("velocity bounds must be positive")
    return {"M": bounds.speed, "L": bounds.lipschitz, "R0": r0, "reach": reach}
