import numpy as np
import pytest

from disloclab.errors import ConfigError, DimensionError, StepSizeError
from disloclab.eikonal import (
    EikonalProblem,
    oleinik_lax_inf,
    oleinik_lax_sup,
    scalar_speed,
    solve,
    step,
)
from disloclab.grid import (
    GridSpec,
    ScalarField,
    constant_field,
    field_from_function,
    lipschitz_estimate,
    sublevel_measure,
    sup_norm,
)

from oracles import hat, window_max, window_min


def constant_speed_field(spec, value):
    return constant_field(spec, value)


def test_step_zero_speed_identity(hat_1d):
    out = step(hat_1d, constant_speed_field(hat_1d.spec, 0.0), dt=0.1)
    np.testing.assert_array_equal(out.values, hat_1d.values)


def test_step_refuses_cfl_violation(hat_1d):
    c = constant_speed_field(hat_1d.spec, 2.0)
    with pytest.raises(StepSizeError):
        step(hat_1d, c, dt=hat_1d.spec.h)  # dt * |c| = 2h > 0.9h


def test_step_constant_fixed_point(grid_1d):
    u = constant_field(grid_1d, -0.4)
    c = constant_speed_field(grid_1d, 1.5)
    out = step(u, c, dt=0.001)
    np.testing.assert_array_equal(out.values, u.values)


def test_step_monotone_on_random_pairs():
    rng = np.random.default_rng(42)
    for _ in range(100):
        dim = int(rng.integers(1, 3))
        n = int(rng.integers(6, 20))
        spec = GridSpec(dim, (-1.0,) * dim, 2.0 / (n - 1), (n,) * dim)
        u = ScalarField(spec, rng.uniform(-1, 1, spec.counts))
        v = ScalarField(spec, np.minimum(u.values + rng.uniform(0, 0.4, spec.counts), 1.0))
        c = ScalarField(spec, rng.uniform(-2, 2, spec.counts))
        dt = rng.uniform(0.05, 1.0) * 0.45 * spec.h / (np.sqrt(dim) * max(sup_norm(c), 1e-9))
        assert np.all(step(u, c, dt).values <= step(v, c, dt).values + 1e-12)


def test_step_translation_equivariance(grid_1d):
    u = field_from_function(grid_1d, lambda x: np.maximum(0.8 - np.abs(x), -1.0))
    shift = 20  # cells
    v = ScalarField(grid_1d, np.roll(u.values, shift))
    c = constant_speed_field(grid_1d, -1.0)
    dt = 0.4 * grid_1d.h
    a = step(u, c, dt)
    b = step(v, c, dt)
    inner = slice(shift + 2, -2)
    np.testing.assert_allclose(np.roll(a.values, shift)[inner], b.values[inner], atol=1e-13)


def test_step_contracting_hat_front(hat_1d):
    # total time tau at speed -1: the front shrinks to [-(1-tau), 1-tau]
    spec = hat_1d.spec
    c = constant_speed_field(spec, -1.0)
    dt = 0.4 * spec.h
    u = hat_1d
    tau = 0.2
    for _ in range(int(round(tau / dt))):
        u = step(u, c, dt)
    x = spec.axis(0)
    front = x[u.values >= 0.0]
    assert front.min() == pytest.approx(-(1 - tau), abs=2 * spec.h)
    assert front.max() == pytest.approx(1 - tau, abs=2 * spec.h)


def test_expanding_plateau(grid_1d):
    # from -|x| with c = +1: {u >= 0} approaches [-tau, tau] (kept as a
    # near-zero plateau; check via the band within half a cell of zero)
    u0 = field_from_function(grid_1d, lambda x: np.maximum(-np.abs(x), -1.0))
    prov = scalar_speed(grid_1d, lambda t: 1.0, average=lambda a, b: 1.0)
    tau = 0.25
    traj = solve(EikonalProblem(u0=u0, speed=prov, horizon=tau, snapshot_times=(0.0, tau)))
    band = sublevel_measure(traj.fields[-1], lower=-grid_1d.h * 0.5)
    assert band == pytest.approx(2 * tau, abs=3 * grid_1d.h)


def test_problem_validation(hat_1d):
    good = dict(u0=hat_1d, speed=scalar_speed(hat_1d.spec, lambda t: 0.0), horizon=1.0,
                snapshot_times=(0.0, 1.0))
    EikonalProblem(**good)
    with pytest.raises(ConfigError):
        EikonalProblem(**{**good, "horizon": -1.0, "snapshot_times": (0.0, -1.0)})
    with pytest.raises(ConfigError):
        EikonalProblem(**{**good, "theta": 0.95})
    with pytest.raises(ConfigError):
        EikonalProblem(**{**good, "snapshot_times": (0.0, 0.5)})
    bad_u0 = constant_field(hat_1d.spec, 0.5)  # not -1 at the boundary
    with pytest.raises(ConfigError):
        EikonalProblem(**{**good, "u0": bad_u0})


def test_solve_zero_speed_constant(hat_1d):
    prov = scalar_speed(hat_1d.spec, lambda t: 0.0)
    traj = solve(EikonalProblem(u0=hat_1d, speed=prov, horizon=0.5, snapshot_times=(0.0, 0.25, 0.5)))
    for f in traj.fields:
        np.testing.assert_array_equal(f.values, hat_1d.values)


def test_solve_finite_speed_of_propagation(hat_1d):
    spec = hat_1d.spec
    prov = scalar_speed(spec, lambda t: 1.0, average=lambda a, b: 1.0)
    times = (0.0, 0.3, 0.6)
    traj = solve(EikonalProblem(u0=hat_1d, speed=prov, horizon=0.6, snapshot_times=times))
    x = spec.axis(0)
    for t, f in zip(times, traj.fields):
        occupied = np.abs(x[f.values >= 0.0])
        assert occupied.max() <= 1.0 + 1.0 * t + 2 * spec.h  # R0 = 1 front radius + M t


@pytest.mark.parametrize("sign", [-1.0, 1.0])
def test_solve_matches_window_extrema(sign, hat_1d):
    # constant-sign speeds: the solve must reproduce the inf/sup formulas;
    # this test pins the upwinding convention
    spec = hat_1d.spec
    prov = scalar_speed(spec, lambda t: sign, average=lambda a, b: sign)
    times = (0.0, 0.11, 0.23, 0.3)
    traj = solve(EikonalProblem(u0=hat_1d, speed=prov, horizon=0.3, snapshot_times=times))
    oracle = oleinik_lax_inf if sign < 0 else oleinik_lax_sup
    for t, f in zip(times, traj.fields):
        assert sup_norm(f.values - oracle(hat_1d, t).values) <= 2 * spec.h


def test_solve_lipschitz_growth(hat_1d):
    # space-independent speed: L = 0, so the Lipschitz estimate cannot grow
    spec = hat_1d.spec
    prov = scalar_speed(spec, lambda t: 2.0 * (t - 1.0), average=lambda a, b: (a + b) - 2.0)
    times = tuple(np.linspace(0.0, 1.0, 6))
    traj = solve(EikonalProblem(u0=hat_1d, speed=prov, horizon=1.0, snapshot_times=times))
    lip0 = lipschitz_estimate(hat_1d)
    for f in traj.fields:
        assert lipschitz_estimate(f) <= lip0 * (1 + 1e-9)


def test_oleinik_lax_radius_zero_identity(hat_1d):
    np.testing.assert_array_equal(oleinik_lax_inf(hat_1d, 0.0).values, hat_1d.values)
    np.testing.assert_array_equal(oleinik_lax_sup(hat_1d, 0.0).values, hat_1d.values)


def test_oleinik_lax_inf_shifts_hat(hat_1d):
    spec = hat_1d.spec
    r = 0.3
    out = oleinik_lax_inf(hat_1d, r)
    x = spec.axis(0)
    expected = np.maximum(1.0 - (np.abs(x) + r), -1.0)
    assert sup_norm(out.values - expected) <= spec.h + 1e-12


def test_oleinik_lax_sup_plateau(grid_1d):
    u = field_from_function(grid_1d, lambda x: np.maximum(-np.abs(x), -1.0))
    r = 0.4
    out = oleinik_lax_sup(u, r)
    x = grid_1d.axis(0)
    expected = np.clip(r - np.abs(x), -1.0, 0.0)
    assert sup_norm(out.values - expected) <= grid_1d.h + 1e-12


def test_oleinik_lax_even_symmetry(hat_1d):
    out = oleinik_lax_inf(hat_1d, 0.17)
    np.testing.assert_allclose(out.values, out.values[::-1], atol=1e-13)


def test_oleinik_lax_sup_dominates_inf(hat_1d):
    lo = oleinik_lax_inf(hat_1d, 0.2).values
    hi = oleinik_lax_sup(hat_1d, 0.2).values
    assert np.all(hi >= lo)


def test_oleinik_lax_brute_force(grid_1d):
    rng = np.random.default_rng(1)
    u = ScalarField(grid_1d, rng.uniform(-1, 1, grid_1d.counts))
    cells = 7
    r = cells * grid_1d.h
    np.testing.assert_array_equal(
        oleinik_lax_inf(u, r).values, window_min(u.values, cells)
    )
    np.testing.assert_array_equal(
        oleinik_lax_sup(u, r).values, window_max(u.values, cells)
    )


def test_oleinik_lax_rejects_2d():
    spec = GridSpec(2, (-1.0, -1.0), 0.1, (21, 21))
    u = field_from_function(spec, lambda x, y: np.maximum(-np.hypot(x, y), -1.0))
    with pytest.raises(DimensionError):
        oleinik_lax_inf(u, 0.1)
