import numpy as np
import pytest

from disloclab.errors import ConfigError
from disloclab.grid import (
    GridSpec,
    ScalarField,
    constant_field,
    field_from_function,
    godunov_magnitudes,
    lipschitz_estimate,
    one_sided_differences,
    read_field_csv,
    sublevel_measure,
    write_field_csv,
)


def test_grid_validation():
    with pytest.raises(ConfigError):
        GridSpec(1, (-1.0,), -0.1, (10,))
    with pytest.raises(ConfigError):
        GridSpec(1, (-1.0,), 0.1, (2,))
    with pytest.raises(Exception):
        GridSpec(3, (-1.0,) * 3, 0.1, (10,) * 3)
    spec = GridSpec(2, (-1.0, -2.0), 0.5, (5, 9))
    assert spec.upper == (1.0, 2.0)
    assert spec.node_count == 45


def test_field_shape_mismatch():
    spec = GridSpec(1, (0.0,), 0.1, (5,))
    with pytest.raises(ConfigError):
        ScalarField(spec, np.zeros(6))


def test_differences_linear_field():
    spec = GridSpec(1, (0.0,), 0.1, (11,))
    u = field_from_function(spec, lambda x: x)
    fwd, bwd = one_sided_differences(u)
    np.testing.assert_allclose(fwd[0], 1.0, atol=1e-13)
    np.testing.assert_allclose(bwd[0], 1.0, atol=1e-13)


def test_differences_constant_field():
    spec = GridSpec(2, (0.0, 0.0), 0.1, (6, 6))
    fwd, bwd = one_sided_differences(constant_field(spec, -1.0))
    for arr in (*fwd, *bwd):
        np.testing.assert_array_equal(arr, 0.0)


def test_differences_hat_at_half():
    # node x = 0.5 on the hat max(1-|x|, -1) with h = 0.25: both slopes -1
    spec = GridSpec(1, (-3.0,), 0.25, (25,))
    u = field_from_function(spec, lambda x: np.maximum(1.0 - np.abs(x), -1.0))
    i = int(np.argmin(np.abs(spec.axis(0) - 0.5)))
    fwd, bwd = one_sided_differences(u)
    assert fwd[0][i] == pytest.approx(-1.0)
    assert bwd[0][i] == pytest.approx(-1.0)


def test_godunov_linear_interior():
    spec = GridSpec(1, (0.0,), 0.1, (11,))
    mags = godunov_magnitudes(field_from_function(spec, lambda x: x))
    np.testing.assert_allclose(mags.contract[1:-1], 1.0, atol=1e-13)
    np.testing.assert_allclose(mags.expand[1:-1], 1.0, atol=1e-13)


def test_godunov_kink_brute_force():
    # u = -|x|: at the kink both one-sided slopes feed the contraction value
    spec = GridSpec(1, (-1.0,), 0.1, (21,))
    u = field_from_function(spec, lambda x: -np.abs(x))
    i = int(np.argmin(np.abs(spec.axis(0))))
    fwd, bwd = one_sided_differences(u)
    dminus, dplus = bwd[0][i], fwd[0][i]
    expected_contract = np.sqrt(max(dminus, 0) ** 2 + min(dplus, 0) ** 2)
    expected_expand = np.sqrt(min(dminus, 0) ** 2 + max(dplus, 0) ** 2)
    mags = godunov_magnitudes(u)
    assert mags.contract[i] == pytest.approx(expected_contract) == pytest.approx(np.sqrt(2))
    assert mags.expand[i] == pytest.approx(expected_expand) == pytest.approx(0.0)


def test_godunov_constant_zero():
    spec = GridSpec(2, (0.0, 0.0), 0.1, (6, 6))
    mags = godunov_magnitudes(constant_field(spec, 0.3))
    np.testing.assert_array_equal(mags.contract, 0.0)
    np.testing.assert_array_equal(mags.expand, 0.0)


def test_godunov_smooth_convergence():
    # O(h) accuracy on sin(x) against |cos(x)| away from the kinks of |Du|
    errs = []
    for h in (0.02, 0.01, 0.005):
        n = int(round(6.0 / h)) + 1
        spec = GridSpec(1, (-3.0,), h, (n,))
        u = field_from_function(spec, np.sin)
        mags = godunov_magnitudes(u)
        x = spec.axis(0)
        away = np.abs(np.cos(x)) > 0.1
        away[:2] = away[-2:] = False
        errs.append(np.abs(mags.contract[away] - np.abs(np.cos(x[away]))).max())
    assert errs[0] > errs[1] > errs[2]
    rate = np.polyfit(np.log([0.02, 0.01, 0.005]), np.log(errs), 1)[0]
    assert rate > 0.9


def test_sublevel_measure_hat(hat_1d):
    # {u >= 0} = [-1, 1], node counting gives 2 + h
    m = sublevel_measure(hat_1d, lower=0.0)
    assert m == pytest.approx(2.0, abs=2 * hat_1d.spec.h)


def test_sublevel_measure_empty(hat_1d):
    assert sublevel_measure(hat_1d, lower=2.0) == 0.0


def test_sublevel_measure_whole_box():
    spec = GridSpec(1, (-3.0,), 0.01, (601,))
    m = sublevel_measure(constant_field(spec, 0.0), lower=0.0)
    assert m == pytest.approx(6.0, abs=2 * spec.h)


def test_sublevel_additive_and_monotone():
    rng = np.random.default_rng(7)
    spec = GridSpec(1, (-1.0,), 0.05, (41,))
    u = ScalarField(spec, rng.uniform(-1, 1, spec.counts))
    a = sublevel_measure(u, lower=-0.5, upper=0.0, include_upper=False)
    b = sublevel_measure(u, lower=0.0, upper=0.5)
    both = sublevel_measure(u, lower=-0.5, upper=0.5)
    assert a + b == pytest.approx(both)
    wider = sublevel_measure(u, lower=-0.7, upper=0.7)
    assert both <= wider


def test_lipschitz_values(hat_1d):
    assert lipschitz_estimate(hat_1d) == pytest.approx(1.0)
    spec = hat_1d.spec
    assert lipschitz_estimate(constant_field(spec, -1.0)) == 0.0
    assert lipschitz_estimate(field_from_function(spec, lambda x: 2 * x / 3.0)) == pytest.approx(2 / 3)


def test_csv_round_trip(tmp_path):
    spec = GridSpec(2, (-0.3, 0.1), 0.05, (7, 5))
    rng = np.random.default_rng(3)
    u = ScalarField(spec, rng.uniform(-1, 1, spec.counts))
    path = tmp_path / "field.csv"
    write_field_csv(u, path, t=0.7354)
    back, t = read_field_csv(path)
    assert t == 0.7354
    assert back.spec == spec
    np.testing.assert_array_equal(back.values, u.values)
    header = path.read_text().splitlines()[0]
    assert header.startswith("# t=") and "h=" in header and "n=7,5" in header


def test_csv_round_trip_1d(tmp_path, hat_1d):
    path = tmp_path / "hat.csv"
    write_field_csv(hat_1d, path, t=0.0)
    back, _ = read_field_csv(path)
    np.testing.assert_array_equal(back.values, hat_1d.values)
