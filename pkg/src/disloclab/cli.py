"""
Command line entry points: simulate, counterexample, verify, convergence.

Exit code contract: 0 = pass, 1 = a property/criterion failed, 2 = bad
configuration, 3 = fixed-point iteration did not converge (best iterate is
still written).  All outputs are CSV, stamped with the config hash and the
derived constants, and are bit-identical across reruns of the same config
and seed.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from .analysis import (
    band_growth,
    gradient_margin,
    indicator_l1_distance,
    semiconvexity_modulus,
)
from .config import ALL_BATTERIES, ExperimentConfig, load_config, validate_simulation
from .errors import ConfigError, ResourceError
from .fattening import (
    closed_form_solution,
    nonuniqueness_gap,
    sample_closed_form,
    verify_weak_solution,
    write_report_csv,
)
from .grid import GridSpec, field_from_function, lipschitz_estimate, sup_norm
from .velocity import velocity_bounds, zero_mean_wavelet_kernel, constant_velocity
from .verify import (
    circle_radius_oracle,
    inject_fault,
    measured_front_radius,
    run_batteries,
)
from .weak import continuation, export_weak_solution

_FMT = "%.17g"


def _write_csv(path, header_comments: dict, columns: str, rows) -> None:
    lines = [f"# {k}={v}" for k, v in sorted(header_comments.items())]
    lines.append(columns)
    for row in rows:
        lines.append(",".join(_FMT % v if isinstance(v, float) else str(v) for v in row))
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")


def _bounds_row(cfg: ExperimentConfig, w, derived) -> dict:
    margins = [gradient_margin(f) for f in w.trajectory.fields]
    eta0 = cfg.eta0 if cfg.eta0 is not None else margins[0]
    eta_t = min(margins)
    offset = cfg.semiconvexity_offset or 4.0 * cfg.grid.h
    c_hat = max(semiconvexity_modulus(f, offset) for f in w.trajectory.fields)
    l_hat = max(lipschitz_estimate(c) for c in w.speeds)
    m_hat = max(sup_norm(c) for c in w.speeds)
    k_hat = l_hat + (2.0 * c_hat * m_hat / eta_t if eta_t > 0 else float("inf"))
    rho = cfg.rho if cfg.rho is not None else eta_t / 4.0
    return {
        "M0": cfg.kernel.l1_bound,
        "M1": cfg.external.bound,
        "L0": cfg.kernel.grad_l1_bound,
        "L1": cfg.external.lipschitz,
        "M": derived["M"],
        "L": derived["L"],
        "eta0": eta0,
        "eta_T": eta_t,
        "C_hat": c_hat,
        "K_hat": k_hat,
        "delta": cfg.delta,
        "rho": rho,
    }


def run_simulate(cfg: ExperimentConfig) -> int:
    derived = validate_simulation(cfg)
    outdir = cfg.resolved_output_dir()
    os.makedirs(outdir, exist_ok=True)
    w = continuation(cfg.kernel, cfg.external, cfg.u0, cfg.snapshot_times, cfg.engine)
    w.metadata["config_sha256"] = cfg.config_hash
    w.metadata.update({k: f"{v:.6g}" for k, v in derived.items()})
    export_weak_solution(w, outdir)

    bounds = _bounds_row(cfg, w, derived)
    _write_csv(
        os.path.join(outdir, "bounds.csv"),
        {"config_sha256": cfg.config_hash},
        ",".join(bounds),
        [tuple(float(v) for v in bounds.values())],
    )
    rho = bounds["rho"]
    if 0 < rho < bounds["eta_T"] / 2:
        growth = band_growth(w.trajectory, rho, w.speeds)
        if growth.flagged:
            print("band growth bound exceeded", file=sys.stderr)
            return 1
    tol = w.metadata.get("tolerance")
    violations = float(np.sum(w.sandwich_violations))
    if not w.converged:
        print(
            f"fixed point did not converge (best residual "
            f"{min(r[-1] for r in w.level_residuals):.3g}); outputs written to {outdir}",
            file=sys.stderr,
        )
        return 3
    if violations > 0:
        print(f"sandwich violations of measure {violations}", file=sys.stderr)
        return 1
    print(f"weak solution written to {outdir} (tolerance {tol}, all checks passed)")
    return 0


def run_counterexample(cfg: ExperimentConfig) -> int:
    grid = cfg.grid
    if grid.dimension != 1 or not (grid.lower[0] <= -3.0 + 1e-9 and grid.upper[0] >= 3.0 - 1e-9):
        raise ConfigError("counterexample runs need a 1D grid containing [-3, 3]")
    outdir = cfg.resolved_output_dir()
    os.makedirs(outdir, exist_ok=True)
    dt = cfg.counterexample_snapshot_dt
    reports = []
    all_pass = True
    for k, control in enumerate(cfg.gammas):
        times = sorted(set(np.round(np.arange(0.0, 2.0 + dt / 2, dt), 12)) | set(control.breakpoints) | {2.0})
        report = verify_weak_solution(control, grid, cfg.theta, tuple(times), cfg.ode_mesh)
        ok = report.passes(cfg.sup_tolerance_cells * grid.h)
        all_pass &= ok
        write_report_csv(
            report,
            os.path.join(outdir, f"counterexample_report_{k}.csv"),
            {"config_sha256": cfg.config_hash, "passes": ok},
        )
        print(
            f"{control.label()}: sup error {report.max_sup_error:.4g} "
            f"({report.max_sup_error / grid.h:.2f} cells), sandwich "
            f"{report.sandwich_violations.sum():g}, consistency "
            f"{report.max_consistency_error:.4g} -> {'pass' if ok else 'FAIL'}"
        )
        reports.append(report)
    rows = []
    for i in range(len(reports)):
        for j in range(i + 1, len(reports)):
            gap = indicator_l1_distance(
                sample_closed_form(reports[i].closed_form, grid, 2.0),
                sample_closed_form(reports[j].closed_form, grid, 2.0),
            )
            rows.append((i, j, float(gap)))
    _write_csv(
        os.path.join(outdir, "nonuniqueness_gaps.csv"),
        {"config_sha256": cfg.config_hash, "t": 2.0},
        "control_a,control_b,indicator_l1_gap",
        rows,
    )
    labels = [c.label() for c in cfg.gammas]
    if "gamma=0" in labels and "gamma=1" in labels:
        gap = next(
            r[2]
            for r in rows
            if {labels[r[0]], labels[r[1]]} == {"gamma=0", "gamma=1"}
        )
        print(f"non-uniqueness gap at t=2 between extreme controls: {gap:.6g}")
        if gap < 1.0:
            print("gap below 1: non-uniqueness not demonstrated", file=sys.stderr)
            all_pass = False
    return 0 if all_pass else 1


def run_verify(cfg: ExperimentConfig, fault: str | None = None) -> int:
    if not cfg.batteries:
        raise ConfigError("empty battery selection")
    outdir = cfg.resolved_output_dir()
    os.makedirs(outdir, exist_ok=True)
    if fault:
        with inject_fault(fault):
            results = run_batteries(cfg.batteries, cfg.seed)
    else:
        results = run_batteries(cfg.batteries, cfg.seed)
    rows = [(r.name, int(r.passed), r.detail) for r in results]
    _write_csv(
        os.path.join(outdir, "verify_report.csv"),
        {"config_sha256": cfg.config_hash, "seed": cfg.seed, "fault": fault or "none"},
        "battery,passed,detail",
        rows,
    )
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'} {r.name}: {r.detail}")
    return 0 if all(r.passed for r in results) else 1


def _counterexample_errors(cfg: ExperimentConfig, grids) -> list[float]:
    from .fattening import OccupancyControl

    control = cfg.gammas[-1] if cfg.gammas else OccupancyControl.constant(1.0)
    errs = []
    for h in grids:
        n = int(round(6.0 / h)) + 1
        spec = GridSpec(1, (-3.0,), h, (n,))
        times = tuple(sorted({0.0, 2.0} | set(np.round(np.arange(0.0, 2.001, 1.0 / 6.0), 12)) | set(control.breakpoints)))
        report = verify_weak_solution(control, spec, cfg.theta, times, cfg.ode_mesh)
        errs.append(report.max_sup_error)
    return errs


def _constant_speed_errors(cfg: ExperimentConfig, grids) -> list[float]:
    from .eikonal import EikonalProblem, oleinik_lax_inf, oleinik_lax_sup, scalar_speed, solve
    from .fattening import initial_profile

    horizon = 0.5
    times = (0.0, 1.0 / 6.0, 1.0 / 3.0, horizon)
    errs = []
    for h in grids:
        n = int(round(6.0 / h)) + 1
        spec = GridSpec(1, (-3.0,), h, (n,))
        u0 = field_from_function(spec, initial_profile)
        worst = 0.0
        for sign in (-1.0, 1.0):
            provider = scalar_speed(spec, lambda t, s=sign: s, average=lambda a, b, s=sign: s)
            traj = solve(
                EikonalProblem(u0=u0, speed=provider, horizon=horizon, snapshot_times=times, theta=cfg.theta)
            )
            oracle = oleinik_lax_inf if sign < 0 else oleinik_lax_sup
            for t, f in zip(times, traj.fields):
                worst = max(worst, sup_norm(f.values - oracle(u0, t).values))
        errs.append(worst)
    return errs


def _expanding_circle_errors(cfg: ExperimentConfig, grids) -> list[float]:
    errs = []
    for h in grids:
        half = 2.8
        n = int(round(2 * half / h)) + 1
        spec = GridSpec(2, (-half, -half), h, (n, n))
        u0 = field_from_function(spec, lambda x, y: np.maximum(1.0 - np.sqrt(x * x + y * y), -1.0))
        kernel = zero_mean_wavelet_kernel(0.25, 1.0, 2)
        c1 = constant_velocity(1.1)
        horizon = 0.25
        times = tuple(np.round(np.linspace(0.0, horizon, 11), 12))
        w = continuation(kernel, c1, u0, times, cfg.engine)
        oracle = circle_radius_oracle(kernel, 1.1, 1.0, times, quad_h=h / 3.0)
        worst = max(
            abs(measured_front_radius(f) - r)
            for f, r in zip(w.trajectory.fields[1:], oracle[1:])
        )
        errs.append(worst)
    return errs


_EXPERIMENTS = {
    "counterexample": _counterexample_errors,
    "constant_speed": _constant_speed_errors,
    "expanding_circle": _expanding_circle_errors,
}


def run_convergence(cfg: ExperimentConfig, grids) -> int:
    if len(grids) < 3:
        raise ConfigError("convergence study needs at least 3 grid levels")
    name = cfg.convergence_experiment
    if name not in _EXPERIMENTS:
        raise ConfigError(f"unknown convergence experiment {name!r}")
    errs = _EXPERIMENTS[name](cfg, grids)
    rate = float(np.polyfit(np.log(grids), np.log(errs), 1)[0])
    outdir = cfg.resolved_output_dir()
    os.makedirs(outdir, exist_ok=True)
    _write_csv(
        os.path.join(outdir, "convergence.csv"),
        {"config_sha256": cfg.config_hash, "experiment": name, "fitted_rate": f"{rate:.6g}"},
        "h,sup_error",
        list(zip(grids, errs)),
    )
    for h, e in zip(grids, errs):
        print(f"h={h:g}: sup error {e:.6g}")
    print(f"fitted rate: {rate:.3f}")
    if any(e1 >= e0 for e0, e1 in zip(errs, errs[1:])):
        print("error does not decrease monotonically", file=sys.stderr)
        return 1
    return 0 if rate >= 0.8 else 1


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="disloclab",
        description="Nonlocal eikonal (dislocation dynamics) laboratory",
    )
    parser.add_argument("--seed", type=int, default=None, help="override the config seed")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("simulate", "counterexample", "verify", "convergence"):
        p = sub.add_parser(name)
        p.add_argument("config", help="experiment configuration file")
        if name == "verify":
            p.add_argument(
                "--inject-fault",
                choices=("flip_upwind",),
                default=None,
                help="corrupt the scheme to demonstrate battery sensitivity",
            )
        if name == "convergence":
            p.add_argument("--grids", required=True, help="comma-separated spacings h1,h2,...")
    args = parser.parse_args(argv)

    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg.seed = args.seed
        if args.command == "simulate":
            return run_simulate(cfg)
        if args.command == "counterexample":
            return run_counterexample(cfg)
        if args.command == "verify":
            return run_verify(cfg, fault=args.inject_fault)
        grids = [float(g) for g in args.grids.split(",") if g.strip()]
        return run_convergence(cfg, grids)
    except (ConfigError, OSError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except ResourceError as exc:
        print(f"resource budget exceeded: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
