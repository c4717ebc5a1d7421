"""
Closed-form non-uniqueness family for the 1D nonlocal equation
U_t = (1 * 1_{U >= 0} + c1(t)) |DU|.

With the driving velocity c1(t) = 2(t-1)(2-t) and the hat initial profile,
the front first collapses to the origin over [0, 1] (radius x(t) = (t-1)^2),
then the zero set fattens: for every piecewise-constant control g(t) in
[0, 1] the plateau radius solving

    y'(t) = c1(t) + 2 g(t) y(t),   y(1) = 0,

yields a distinct weak solution whose zero set is the full interval
[-y(t), y(t)] with occupancy g(t) 1_{[-y, y]}.  All members share the same
initial data and each is certified by re-solving the level-set equation with
its own speed c(t) = c1(t) + 2 g(t) y(t); the indicator distance between the
extreme members at the final time is 4/3, which is the non-uniqueness gap.

The 1 * 1_A kernel (convolution against a constant) is realized as the
indicator kernel of radius 4, wide enough that the convolution equals the
occupied measure everywhere on the working box [-3, 3]; finite speed of
propagation keeps the dynamics unchanged by the truncation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from numpy.typing import NDArray

from .analysis import indicator_l1_distance
from .eikonal import CFL_DEFAULT, EikonalProblem, scalar_speed, solve
from .errors import ConfigError
from .grid import GridSpec, ScalarField, field_from_function, sublevel_measure, sup_norm
from .velocity import (
    ExternalVelocity,
    OccupancyField,
    Kernel,
    convolve,
    indicator_kernel,
    time_profile_velocity,
)
from .weak import WeakSolution, sandwich_check

__all__ = [
    "driving_speed",
    "collapse_radius",
    "driving_velocity",
    "consistency_kernel",
    "OccupancyControl",
    "PlateauRadius",
    "solve_plateau_radius",
    "ClosedFormSolution",
    "closed_form_solution",
    "initial_profile",
    "sample_closed_form",
    "verify_weak_solution",
    "VerificationReport",
    "nonuniqueness_gap",
    "fattening_measure",
    "write_report_csv",
]

FINAL_TIME = 2.0
FATTENING_ONSET = 1.0


def driving_speed(t: float):
    """External velocity pulse c1(t) = 2(t-1)(2-t): negative before t=1,
    nonnegative on [1, 2], vanishing at both endpoints."""
    return 2.0 * (np.asarray(t) - 1.0) * (2.0 - np.asarray(t))


def collapse_radius(t: float):
    """Front radius x(t) = (t-1)^2 on the collapse phase [0, 1]:
    solves x' = c1(t) + 2x with x(0) = 1."""
    return (np.asarray(t) - 1.0) ** 2


def driving_velocity() -> ExternalVelocity:
    """The pulse as an ExternalVelocity (bound 4 on [0, 2], space-independent)."""
    return time_profile_velocity(lambda t: float(driving_speed(t)), bound=4.0)


def consistency_kernel(dimension: int = 1) -> Kernel:
    """Truncated constant kernel used for the mass-consistency check."""
    return indicator_kernel(4.0, dimension)


@dataclass(frozen=True)
class OccupancyControl:
    """Piecewise-constant control g: [1, 2] -> [0, 1] (breakpoints + values)."""

    breakpoints: tuple[float, ...]
    values: tuple[float, ...]

    def __post_init__(self):
        if len(self.breakpoints) != len(self.values) or not self.breakpoints:
            raise ConfigError("control needs one value per breakpoint")
        if abs(self.breakpoints[0] - FATTENING_ONSET) > 1e-12:
            raise ConfigError("first breakpoint must be at t=1 (fattening onset)")
        if any(t1 <= t0 for t0, t1 in zip(self.breakpoints, self.breakpoints[1:])):
            raise ConfigError("breakpoints must be strictly increasing")
        if self.breakpoints[-1] >= FINAL_TIME:
            raise ConfigError("breakpoints must lie in [1, 2)")
        if any(not 0.0 <= v <= 1.0 for v in self.values):
            raise ConfigError("control values must lie in [0, 1]")

    @classmethod
    def constant(cls, value: float) -> "OccupancyControl":
        return cls((FATTENING_ONSET,), (float(value),))

    @classmethod
    def from_pairs(cls, pairs: Sequence[Sequence[float]]) -> "OccupancyControl":
        return cls(tuple(float(p[0]) for p in pairs), tuple(float(p[1]) for p in pairs))

    def __call__(self, t: float) -> float:
        k = int(np.searchsorted(self.breakpoints, t + 1e-15) - 1)
        return self.values[min(max(k, 0), len(self.values) - 1)]

    def label(self) -> str:
        if len(self.values) == 1:
            return f"gamma={self.values[0]:g}"
        return "gamma=" + ";".join(
            f"{t:g}:{v:g}" for t, v in zip(self.breakpoints, self.values)
        )


@dataclass(frozen=True)
class PlateauRadius:
    """Dense samples of the plateau radius on [1, 2] with exact averages."""

    control: OccupancyControl
    times: NDArray[np.float64]
    radii: NDArray[np.float64]

    def __call__(self, t):
        return np.interp(t, self.times, self.radii)

    def final(self) -> float:
        return float(self.radii[-1])


def _rk4_piece(t0: float, t1: float, y0: float, gamma: float, n: int) -> tuple[NDArray, NDArray]:
    ts = np.linspace(t0, t1, n + 1)
    ys = np.empty(n + 1)
    ys[0] = y0
    hstep = (t1 - t0) / n

    def f(t, y):
        return float(driving_speed(t)) + 2.0 * gamma * y

    y = y0
    for i in range(n):
        t = ts[i]
        k1 = f(t, y)
        k2 = f(t + hstep / 2, y + hstep * k1 / 2)
        k3 = f(t + hstep / 2, y + hstep * k2 / 2)
        k4 = f(t + hstep, y + hstep * k3)
        y = y + hstep * (k1 + 2 * k2 + 2 * k3 + k4) / 6.0
        ys[i + 1] = y
    return ts, ys


def solve_plateau_radius(control: OccupancyControl, mesh: float = 1e-4) -> PlateauRadius:
    """Integrate y' = c1(t) + 2 g(t) y, y(1) = 0, with breakpoint-aligned RK4.

    Substeps never straddle a control breakpoint, so the classical fourth
    order is preserved for piecewise-constant controls.
    """
    if mesh > 1e-3:
        raise ConfigError(f"ODE mesh must be at most 1e-3, got {mesh}")
    edges = sorted(set(control.breakpoints) | {FATTENING_ONSET, FINAL_TIME})
    all_t = [np.array([FATTENING_ONSET])]
    all_y = [np.array([0.0])]
    y = 0.0
    for a, b in zip(edges, edges[1:]):
        n = max(1, int(math.ceil((b - a) / mesh - 1e-12)))
        ts, ys = _rk4_piece(a, b, y, control(a), n)
        y = float(ys[-1])
        all_t.append(ts[1:])
        all_y.append(ys[1:])
    times = np.concatenate(all_t)
    radii = np.concatenate(all_y)
    if radii.min() < -1e-10 or np.any(np.diff(radii) < -1e-10):
        raise ConfigError("plateau radius must be nonnegative and nondecreasing")
    return PlateauRadius(control, times, np.maximum(radii, 0.0))


@dataclass(frozen=True)
class ClosedFormSolution:
    """Closed-form member of the solution family for one control."""

    control: OccupancyControl
    radius: PlateauRadius

    def value(self, x, t: float):
        """Level-set value U(x, t): collapsing hat for t <= 1, flat-top
        profile with plateau radius y(t) afterwards."""
        ax = np.abs(np.asarray(x, dtype=float))
        if t <= FATTENING_ONSET:
            return np.maximum(collapse_radius(t) - ax, -1.0)
        y = float(self.radius(t))
        return np.clip(y - ax, -1.0, 0.0)

    def occupancy(self, x, t: float):
        """Companion occupancy: classical indicator during collapse, the
        control fraction of the plateau afterwards."""
        ax = np.abs(np.asarray(x, dtype=float))
        if t <= FATTENING_ONSET:
            return (ax <= collapse_radius(t)).astype(float)
        return self.control(t) * (ax <= float(self.radius(t))).astype(float)

    def speed(self, t: float) -> float:
        """Equation speed c(t): equals the radius rate on both phases."""
        if t <= FATTENING_ONSET:
            return float(driving_speed(t)) + 2.0 * float(collapse_radius(t))
        return float(driving_speed(t)) + 2.0 * self.control(t) * float(self.radius(t))

    def speed_average(self, t0: float, t1: float) -> float:
        """Exact time average of the speed: a radius difference quotient."""
        if t1 <= FATTENING_ONSET:
            travel = float(collapse_radius(t1) - collapse_radius(t0))
        elif t0 >= FATTENING_ONSET:
            travel = float(self.radius(t1) - self.radius(t0))
        else:
            travel = float(-collapse_radius(t0) + self.radius(t1))
        return travel / (t1 - t0)

    def plateau(self, t: float) -> float:
        return float(self.radius(t)) if t > FATTENING_ONSET else 0.0


def closed_form_solution(control: OccupancyControl, mesh: float = 1e-4) -> ClosedFormSolution:
    return ClosedFormSolution(control, solve_plateau_radius(control, mesh))


def initial_profile(x):
    """Hat profile max(1 - |x|, -1): front at |x| = 1, far field -1."""
    return np.maximum(1.0 - np.abs(np.asarray(x, dtype=float)), -1.0)


def sample_closed_form(sol: ClosedFormSolution, spec: GridSpec, t: float) -> ScalarField:
    return field_from_function(spec, lambda x: sol.value(x, t))


def default_grid(h: float = 1.0 / 200.0) -> GridSpec:
    n = int(round(6.0 / h)) + 1
    return GridSpec(1, (-3.0,), h, (n,))


def default_snapshot_times(control: OccupancyControl, dt: float = 0.05) -> tuple[float, ...]:
    base = np.round(np.arange(0.0, FINAL_TIME + dt / 2, dt), 12)
    times = sorted(set(base.tolist()) | set(control.breakpoints) | {0.0, FINAL_TIME})
    return tuple(times)


@dataclass
class VerificationReport:
    """Against-the-closed-form certificate for one control."""

    control: OccupancyControl
    times: tuple[float, ...]
    sup_errors: NDArray[np.float64]
    sandwich_violations: NDArray[np.float64]
    consistency: NDArray[np.float64]
    front_measure: NDArray[np.float64]
    zero_set_measure: NDArray[np.float64]
    collapse: NDArray[np.float64]
    plateau: NDArray[np.float64]
    solution: WeakSolution
    closed_form: ClosedFormSolution
    h: float

    @property
    def max_sup_error(self) -> float:
        return float(self.sup_errors.max())

    @property
    def max_consistency_error(self) -> float:
        return float(self.consistency.max())

    def passes(self, tolerance: float | None = None) -> bool:
        tol = 2.0 * self.h if tolerance is None else tolerance
        return self.max_sup_error <= tol and float(self.sandwich_violations.sum()) == 0.0


def verify_weak_solution(
    control: OccupancyControl,
    spec: GridSpec | None = None,
    theta: float = CFL_DEFAULT,
    snapshot_times: Sequence[float] | None = None,
    mesh: float = 1e-4,
) -> VerificationReport:
    """Certify one family member: re-solve numerically and compare.

    Solves the level-set equation with the member's own speed (consumed as
    exact step averages, so the comparison isolates the spatial error),
    then reports the sup distance to the closed form, the occupancy sandwich
    violations of the numerical trajectory, and the mass consistency
    |c(t) - (c0 * chi + c1)(t)| with the truncated constant kernel.
    """
    if spec is None:
        spec = default_grid()
    if spec.dimension != 1:
        raise ConfigError("the non-uniqueness family is one-dimensional")
    if not (spec.lower[0] <= -3.0 + 1e-12 and spec.upper[0] >= 3.0 - 1e-12):
        raise ConfigError("grid box must contain [-3, 3]")
    sol = closed_form_solution(control, mesh)
    times = tuple(snapshot_times) if snapshot_times is not None else default_snapshot_times(control)
    u0 = field_from_function(spec, initial_profile)
    provider = scalar_speed(spec, sol.speed, average=sol.speed_average)
    traj = solve(
        EikonalProblem(
            u0=u0,
            speed=provider,
            horizon=times[-1],
            snapshot_times=times,
            theta=theta,
        )
    )
    sup_errors = np.array(
        [
            sup_norm(f.values - sample_closed_form(sol, spec, t).values)
            for f, t in zip(traj.fields, times)
        ]
    )
    chis = [
        OccupancyField(spec, sol.occupancy(spec.axis(0), t)) for t in times
    ]
    violations = sandwich_check(traj, chis, band_tolerance=2.0 * spec.h)
    kernel = consistency_kernel(spec.dimension)
    consistency = np.array(
        [
            abs(
                sol.speed(t)
                - (
                    float(convolve(kernel, chi, t).values[spec.counts[0] // 2])
                    + float(driving_speed(t))
                )
            )
            for chi, t in zip(chis, times)
        ]
    )
    front = np.array([sublevel_measure(sample_closed_form(sol, spec, t), lower=0.0) for t in times])
    zero = np.array([fattening_measure(sol, t, spec) for t in times])
    collapse = np.array([float(collapse_radius(min(t, FATTENING_ONSET))) for t in times])
    plateau = np.array([sol.plateau(t) for t in times])
    weak = WeakSolution(
        trajectory=traj,
        occupancies=tuple(chis),
        speeds=tuple(provider(t) for t in times),
        velocity_record=provider,
        eps_final=0.0,
        theta=theta,
        level_residuals=[],
        converged=True,
        snapshot_residual=np.zeros(len(times)),
        sandwich_violations=violations,
        metadata={"kernel": kernel.name, "control": control.label()},
    )
    return VerificationReport(
        control=control,
        times=times,
        sup_errors=sup_errors,
        sandwich_violations=violations,
        consistency=consistency,
        front_measure=front,
        zero_set_measure=zero,
        collapse=collapse,
        plateau=plateau,
        solution=weak,
        closed_form=sol,
        h=spec.h,
    )


def nonuniqueness_gap(
    sol_a: ClosedFormSolution, sol_b: ClosedFormSolution, t: float, spec: GridSpec | None = None
) -> float:
    """Indicator L1 distance between two members' sets {U >= 0} at time t."""
    if spec is None:
        spec = default_grid()
    fa = sample_closed_form(sol_a, spec, t)
    fb = sample_closed_form(sol_b, spec, t)
    return indicator_l1_distance(fa, fb)


def fattening_measure(sol: ClosedFormSolution, t: float, spec: GridSpec | None = None) -> float:
    """Measure of the zero set {U(., t) = 0} at grid tolerance.

    The detection threshold is strictly below one cell (|U| < h), so the two
    isolated front points of the collapse phase contribute at most two cells
    per side even when the front radius lands exactly on a node.
    """
    if spec is None:
        spec = default_grid()
    field = sample_closed_form(sol, spec, t)
    band = spec.h * (1.0 - 1e-9)
    return sublevel_measure(field, lower=-band, upper=band)


def write_report_csv(report: VerificationReport, path, metadata: dict | None = None) -> None:
    """Write the per-snapshot verification table.

    Columns: t, x1, y_gamma, front_measure, zero_set_measure,
    sup_error_numeric_vs_closed, sandwich_violations.
    """
    lines = []
    meta = dict(metadata or {})
    meta.setdefault("control", report.control.label())
    meta.setdefault("h", report.h)
    for key, value in sorted(meta.items()):
        lines.append(f"# {key}={value}")
    lines.append(
        "t,x1,y_gamma,front_measure,zero_set_measure,sup_error_numeric_vs_closed,sandwich_violations"
    )
    for k, t in enumerate(report.times):
        row = (
            t,
            float(report.collapse[k]),
            float(report.plateau[k]),
            float(report.front_measure[k]),
            float(report.zero_set_measure[k]),
            float(report.sup_errors[k]),
            float(report.sandwich_violations[k]),
        )
        lines.append(",".join("%.17g" % v for v in row))
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")
