"""
Measurable diagnostics for the structural estimates behind the weak-solution
theory: gradient margins, semiconvexity moduli, inclusion preservation,
level-band growth, continuous dependence on the velocity, front perimeter,
indicator distances, and the self-consistency residual of a weak solution.

These are measurements, not proofs: each op reproduces an inequality from
the continuum theory with discrete constants measured on the actual fields,
and reports whether the discrete analogue holds at the stated tolerance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, Sequence

import numpy as np
from numpy.typing import NDArray

from .errors import ConfigError
from .grid import (
    ScalarField,
    Trajectory,
    godunov_magnitudes,
    lipschitz_estimate,
    sublevel_measure,
    sup_norm,
)

if TYPE_CHECKING:
    from .weak import WeakSolution

__all__ = [
    "gradient_margin",
    "semiconvexity_modulus",
    "inclusion_test",
    "band_growth",
    "BandGrowthReport",
    "continuous_dependence_gap",
    "DependenceGapReport",
    "contour_segments",
    "front_perimeter",
    "indicator_l1_distance",
    "l1_stability_residual",
]


def gradient_margin(u: ScalarField) -> float:
    """min over nodes of |u| + max(upwind gradient magnitudes).

    A positive margin keeps the zero set thin: wherever the value is small
    the gradient is bounded away from zero.  The returned value is the
    largest eta for which the lower-bound estimate -|u| - |Du| <= -eta holds
    discretely.
    """
    mags = godunov_magnitudes(u)
    combined = np.abs(u.values) + np.maximum(mags.contract, mags.expand)
    return float(combined.min())


def semiconvexity_modulus(u: ScalarField, max_offset: float) -> float:
    """Largest violation of discrete semiconvexity up to the given offset.

    C_hat = max over nodes x and offsets |k| <= max_offset of
            max(0, -(u(x+k) + u(x-k) - 2 u(x)) / |k|^2),

    so u(x+k) + u(x-k) - 2 u(x) >= -C_hat |k|^2 on the sampled range.
    Offsets run over the axis directions and, in 2D, the diagonals.
    """
    spec = u.spec
    if max_offset < spec.h:
        raise ConfigError("max_offset must be at least one cell")
    m = int(math.floor(max_offset / spec.h + 1e-9))
    vals = u.values
    worst = 0.0
    offsets: list[tuple[int, ...]] = []
    for k in range(1, m + 1):
        if spec.dimension == 1:
            offsets.append((k,))
        else:
            offsets.extend([(k, 0), (0, k), (k, k), (k, -k)])
    for off in offsets:
        dist2 = sum((spec.h * o) ** 2 for o in off)
        if dist2 > max_offset**2 + 1e-12:
            continue
        sl_plus, sl_minus, sl_mid = [], [], []
        for o, n in zip(off, vals.shape):
            a = abs(o)
            if o >= 0:
                sl_plus.append(slice(2 * a, n) if a else slice(None))
                sl_minus.append(slice(0, n - 2 * a) if a else slice(None))
            else:
                sl_plus.append(slice(0, n - 2 * a))
                sl_minus.append(slice(2 * a, n))
            sl_mid.append(slice(a, n - a) if a else slice(None))
        second = vals[tuple(sl_plus)] + vals[tuple(sl_minus)] - 2.0 * vals[tuple(sl_mid)]
        if second.size:
            worst = max(worst, float(max(0.0, -second.min() / dist2)))
    return worst


def inclusion_test(traj_inner: Trajectory, traj_outer: Trajectory) -> list[bool]:
    """Per snapshot: every node with u_inner >= 0 has u_outer > 0.

    Discrete preservation-of-inclusion check for two independently evolved
    fronts on the same grid and snapshot times.
    """
    if traj_inner.times != traj_outer.times:
        raise ConfigError("trajectories must share snapshot times")
    out = []
    for fi, fo in zip(traj_inner.fields, traj_outer.fields):
        inner_set = fi.values >= 0.0
        out.append(bool(np.all(fo.values[inner_set] > 0.0)) if inner_set.any() else True)
    return out


@dataclass(frozen=True)
class BandGrowthReport:
    times: tuple[float, ...]
    band_measure: NDArray[np.float64]
    bound: NDArray[np.float64]
    rate: float  # K_hat
    floored_initial: float
    flagged: bool


def band_growth(
    traj: Trajectory,
    rho: float,
    speeds: Sequence[ScalarField],
    max_offset: float | None = None,
    margin_floor: float | None = None,
) -> BandGrowthReport:
    """Growth check for the measure of the band {-rho <= u < 0}.

    The Gronwall rate is assembled from measured discrete constants:
    K_hat = L_hat + 2 C_hat M_hat / eta_hat with L_hat / M_hat the largest
    Lipschitz estimate / sup of the recorded speeds, C_hat the measured
    semiconvexity modulus of the snapshots and eta_hat the worst gradient
    margin.  The initial band measure is floored by 2 rho / eta0 * perimeter
    (the co-area value that node counting can miss at coarse rho), and the
    flag fires if any snapshot exceeds 1.5 e^{K_hat t} times that floor.
    """
    h = traj.spec.h
    if max_offset is None:
        max_offset = 4.0 * h
    margins = [gradient_margin(f) for f in traj.fields]
    eta_hat = margin_floor if margin_floor is not None else min(margins)
    if not 0 < rho < eta_hat / 2:
        raise ConfigError(
            f"band half-width rho={rho} must lie in (0, {eta_hat / 2}) (half the gradient margin)"
        )
    measures = np.array(
        [
            sublevel_measure(f, lower=-rho, upper=0.0, include_upper=False)
            for f in traj.fields
        ]
    )
    l_hat = max(lipschitz_estimate(c) for c in speeds)
    m_hat = max(sup_norm(c) for c in speeds)
    c_hat = max(semiconvexity_modulus(f, max_offset) for f in traj.fields)
    k_hat = l_hat + (2.0 * c_hat * m_hat / eta_hat if eta_hat > 0 else math.inf)
    eta0 = margins[0]
    floor0 = max(measures[0], 2.0 * rho / eta0 * front_perimeter(traj.fields[0]))
    times = np.asarray(traj.times)
    # exponent compared in log space: K_hat can be huge when a snapshot has a
    # concave kink, making the envelope astronomically loose but still finite
    log_bound = np.log(1.5 * floor0) + k_hat * (times - times[0])
    with np.errstate(over="ignore"):
        bound = np.exp(np.minimum(log_bound, 700.0))
    flagged = bool(np.any(np.log(np.maximum(measures, 1e-300)) > log_bound))
    return BandGrowthReport(traj.times, measures, bound, float(k_hat), float(floor0), flagged)


@dataclass(frozen=True)
class DependenceGapReport:
    times: tuple[float, ...]
    gap: NDArray[np.float64]
    bound: NDArray[np.float64]
    rate: float  # Lambda
    ok: bool


def _speed_sup_diff(speeds1, speeds2, times, samples_per_segment: int) -> NDArray[np.float64]:
    """Integral of sup |c1 - c2| up to each snapshot time.

    Velocity records may be snapshot field lists (frozen per segment) or
    providers t -> ScalarField, which are sampled on a fine trapezoid mesh.
    """
    integrals = [0.0]
    acc = 0.0
    callable_records = callable(speeds1) and callable(speeds2)
    for k, (t0, t1) in enumerate(zip(times, times[1:])):
        if callable_records:
            ts = np.linspace(t0, t1, samples_per_segment + 1)
            sups = [sup_norm(speeds1(t).values - speeds2(t).values) for t in ts]
            acc += float(np.trapezoid(sups, ts))
        else:
            acc += sup_norm(speeds1[k].values - speeds2[k].values) * (t1 - t0)
        integrals.append(acc)
    return np.asarray(integrals)


def continuous_dependence_gap(
    u1: Trajectory,
    u2: Trajectory,
    speeds1,
    speeds2,
    slack: float = 0.0,
    tol: float = 1e-9,
    samples_per_segment: int = 32,
) -> DependenceGapReport:
    """Continuous-dependence estimate between two solves from the same data.

    Verifies, per snapshot,
        sup |u1 - u2|(t) <= Lip(u0) e^{Lambda t} Integral_0^t sup|c1 - c2| ds
                            * (1 + tol) + slack,
    with Lambda the largest measured spatial Lipschitz constant of the two
    speed records (zero for space-independent speeds).
    """
    if u1.times != u2.times:
        raise ConfigError("trajectories must share snapshot times")
    if sup_norm(u1.fields[0].values - u2.fields[0].values) > 0:
        raise ConfigError("trajectories must start from the same initial data")
    times = u1.times
    lip0 = lipschitz_estimate(u1.fields[0])
    records = []
    for sp in (speeds1, speeds2):
        if callable(sp):
            records.append([sp(t) for t in times])
        else:
            records.append(list(sp))
    lam = max(lipschitz_estimate(c) for rec in records for c in rec)
    integ = _speed_sup_diff(speeds1, speeds2, times, samples_per_segment)
    gaps = np.array(
        [sup_norm(f1.values - f2.values) for f1, f2 in zip(u1.fields, u2.fields)]
    )
    rel = np.exp(lam * (np.asarray(times) - times[0])) * integ * lip0
    bound = rel * (1.0 + tol) + slack
    return DependenceGapReport(times, gaps, bound, float(lam), bool(np.all(gaps <= bound)))


# marching-squares segment table: for each sign configuration of the cell
# corners (bit k set when corner k has u >= 0; corners ordered (i,j), (i+1,j),
# (i+1,j+1), (i,j+1)), the crossed edges, as pairs of corner indices
_EDGES = {(0, 1): 0, (1, 2): 1, (2, 3): 2, (3, 0): 3}


def _cell_segments(code: int) -> list[tuple[int, int]]:
    inside = [bool(code & (1 << k)) for k in range(4)]
    crossed = [e for (a, b), e in _EDGES.items() if inside[a] != inside[b]]
    if len(crossed) == 2:
        return [(crossed[0], crossed[1])]
    if len(crossed) == 4:
        # saddle: split into two segments (choice does not affect O(h) length)
        return [(0, 1), (2, 3)]
    return []


def contour_segments(u: ScalarField) -> NDArray[np.float64]:
    """Zero level set of a 2D field as marching-squares line segments.

    Returns an array of shape (n, 2, 2): n segments with physical (x, y)
    endpoints, linearly interpolated along cell edges.
    """
    if u.spec.dimension != 2:
        raise ConfigError("contour extraction is 2D only")
    vals = u.values
    h = u.spec.h
    lx, ly = u.spec.lower
    inside = vals >= 0.0
    if inside.all() or not inside.any():
        return np.empty((0, 2, 2))
    corners = (
        inside[:-1, :-1].astype(int)
        | (inside[1:, :-1].astype(int) << 1)
        | (inside[1:, 1:].astype(int) << 2)
        | (inside[:-1, 1:].astype(int) << 3)
    )
    mixed = np.argwhere((corners != 0) & (corners != 15))
    base = {0: (0.0, 0.0), 1: (1.0, 0.0), 2: (1.0, 1.0), 3: (0.0, 1.0)}
    segments = []
    for i, j in mixed:
        code = int(corners[i, j])
        c = (vals[i, j], vals[i + 1, j], vals[i + 1, j + 1], vals[i, j + 1])
        pts = {}
        for (a, b), e in _EDGES.items():
            if (c[a] >= 0) != (c[b] >= 0):
                frac = c[a] / (c[a] - c[b])
                xa, ya = base[a]
                xb, yb = base[b]
                pts[e] = (xa + frac * (xb - xa), ya + frac * (yb - ya))
        for ea, eb in _cell_segments(code):
            if ea in pts and eb in pts:
                (x0, y0), (x1, y1) = pts[ea], pts[eb]
                segments.append(
                    (
                        (lx + (i + x0) * h, ly + (j + y0) * h),
                        (lx + (i + x1) * h, ly + (j + y1) * h),
                    )
                )
    return np.asarray(segments)


def front_perimeter(u: ScalarField) -> float:
    """Size of the zero level set: interface count in 1D, contour length in 2D.

    2D uses marching squares with linear interpolation along cell edges.
    """
    vals = u.values
    if u.spec.dimension == 1:
        signs = vals >= 0.0
        return float(np.count_nonzero(signs[1:] != signs[:-1]))
    segs = contour_segments(u)
    if segs.size == 0:
        return 0.0
    return float(np.hypot(segs[:, 1, 0] - segs[:, 0, 0], segs[:, 1, 1] - segs[:, 0, 1]).sum())


def indicator_l1_distance(u1: ScalarField, u2: ScalarField) -> float:
    """L1 distance between the indicators of {u1 >= 0} and {u2 >= 0}."""
    if u1.spec != u2.spec:
        raise ConfigError("fields must share a grid")
    diff = (u1.values >= 0.0) != (u2.values >= 0.0)
    return float(u1.spec.h**u1.spec.dimension * np.count_nonzero(diff))


def l1_stability_residual(w: "WeakSolution") -> float:
    """Sup-norm misfit between a weak solution and a re-solve of itself.

    The frozen-velocity problem is re-solved from the solution's initial
    field using its recorded velocity, and the largest snapshot distance to
    the stored trajectory is returned.  A small residual certifies that the
    stored pair solves its own level-set equation at grid accuracy.
    """
    from .eikonal import EikonalProblem, solve

    traj = w.trajectory
    problem = EikonalProblem(
        u0=traj.fields[0],
        speed=w.velocity_record,
        horizon=traj.times[-1],
        snapshot_times=traj.times,
        theta=w.theta,
    )
    redo = solve(problem)
    return max(
        sup_norm(a.values - b.values) for a, b in zip(redo.fields, traj.fields)
    )
