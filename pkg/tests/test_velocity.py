import numpy as np
import pytest

from disloclab.errors import ConfigError
from disloclab.grid import GridSpec, field_from_function, write_field_csv, ScalarField
from disloclab.velocity import (
    ExternalVelocity,
    Kernel,
    OccupancyField,
    assemble_total_velocity,
    check_positivity,
    constant_velocity,
    convolve,
    indicator_kernel,
    indicator_occupancy,
    kernel_from_csv,
    time_profile_velocity,
    triangle_kernel,
    velocity_bounds,
    zero_kernel,
    zero_mean_wavelet_kernel,
)

from oracles import brute_convolution, pulse


def interval_occupancy(spec, a, b):
    x = spec.axis(0)
    return OccupancyField(spec, ((x >= a) & (x <= b)).astype(float))


def test_occupancy_range_validation(grid_1d):
    with pytest.raises(ConfigError):
        OccupancyField(grid_1d, np.full(grid_1d.counts, 1.5))


def test_convolve_constant_kernel_measures_the_set(grid_1d):
    # wide indicator kernel: convolution equals the occupied measure
    kern = indicator_kernel(8.0, 1)
    chi = interval_occupancy(grid_1d, -1.0, 1.0)
    out = convolve(kern, chi)
    np.testing.assert_allclose(out.values, 2.0, atol=2 * grid_1d.h)


def test_convolve_zero_occupancy(grid_1d):
    kern = triangle_kernel(1.0, 1)
    chi = OccupancyField(grid_1d, np.zeros(grid_1d.counts))
    np.testing.assert_array_equal(convolve(kern, chi).values, 0.0)


def test_convolve_triangle_half_mass(grid_1d):
    # c0 = tent of width 1, chi = 1_[0,1]: value at 0 is int_0^1 (1-y) dy = 1/2
    kern = triangle_kernel(1.0, 1)
    chi = interval_occupancy(grid_1d, 0.0, 1.0)
    i0 = int(np.argmin(np.abs(grid_1d.axis(0))))
    v = convolve(kern, chi).values[i0]
    assert v == pytest.approx(0.5, abs=2 * grid_1d.h)
    # cross-check by brute-force summation at half the spacing
    h2 = grid_1d.h / 2
    spec2 = GridSpec(1, (-3.0,), h2, (1201,))
    x2 = spec2.axis(0)
    chi2 = ((x2 >= 0) & (x2 <= 1)).astype(float)
    brute = brute_convolution(lambda z: np.maximum(1 - np.abs(z), 0.0), x2, chi2, h2)
    assert brute[int(np.argmin(np.abs(x2)))] == pytest.approx(0.5, abs=2 * h2)


def test_convolve_brute_force_full_support(grid_1d):
    rng = np.random.default_rng(11)
    coarse = GridSpec(1, (-1.5,), 0.1, (31,))
    kern = triangle_kernel(0.4, 1)
    chi = OccupancyField(coarse, rng.uniform(0, 1, coarse.counts))
    xs = coarse.axis(0)
    brute = brute_convolution(lambda z: np.maximum(1 - np.abs(z) / 0.4, 0.0), xs, chi.values, coarse.h)
    np.testing.assert_allclose(convolve(kern, chi).values, brute, atol=1e-12)


def test_convolve_linearity_and_bounds(grid_1d):
    rng = np.random.default_rng(5)
    kern = zero_mean_wavelet_kernel(0.5, 1.0, 1)
    chi1 = OccupancyField(grid_1d, rng.uniform(0, 1, grid_1d.counts))
    chi2 = OccupancyField(grid_1d, rng.uniform(0, 1, grid_1d.counts))
    a, b = 0.3, 0.6
    mix = OccupancyField(grid_1d, a * chi1.values + b * chi2.values)
    lhs = convolve(kern, mix).values
    rhs = a * convolve(kern, chi1).values + b * convolve(kern, chi2).values
    np.testing.assert_allclose(lhs, rhs, atol=1e-12)
    assert np.abs(convolve(kern, chi1).values).max() <= kern.l1_bound + 1e-9


def test_convolve_monotone_for_nonnegative_kernel(grid_1d):
    rng = np.random.default_rng(9)
    kern = triangle_kernel(0.7, 1)
    lo = rng.uniform(0, 0.5, grid_1d.counts)
    hi = lo + rng.uniform(0, 0.5, grid_1d.counts)
    a = convolve(kern, OccupancyField(grid_1d, lo)).values
    b = convolve(kern, OccupancyField(grid_1d, hi)).values
    assert np.all(b >= a - 1e-12)


def test_kernel_l1_invariant_enforced(grid_1d):
    def profile(mesh, t):
        return np.ones_like(mesh[0])

    bad = Kernel("too-big", profile, 1.0, l1_bound=0.5, grad_l1_bound=0.0, sup_bound=1.0)
    chi = indicator_occupancy(field_from_function(grid_1d, lambda x: -np.ones_like(x)))
    with pytest.raises(ConfigError):
        convolve(bad, chi)


def test_wavelet_zero_mean_and_l1():
    for dim in (1, 2):
        kern = zero_mean_wavelet_kernel(0.4, 1.0, dim)
        h = 0.02
        patch = kern.patch(h, dim)
        assert h**dim * np.abs(patch).sum() == pytest.approx(1.0, rel=1e-12)
        assert abs(h**dim * patch.sum()) < 5e-3  # continuum mean is exactly zero
        assert patch.min() < 0 < patch.max()


def test_kernel_csv_round_trip(tmp_path, grid_1d):
    spec = GridSpec(1, (-0.5,), grid_1d.h, (101,))
    sample = field_from_function(spec, lambda z: np.maximum(1 - np.abs(z) / 0.5, 0.0))
    path = tmp_path / "kern.csv"
    write_field_csv(sample, path)
    kern = kernel_from_csv(path)
    ref = triangle_kernel(0.5, 1)
    chi = interval_occupancy(grid_1d, -0.25, 0.75)
    np.testing.assert_allclose(convolve(kern, chi).values, convolve(ref, chi).values, atol=1e-12)


def test_kernel_csv_spacing_mismatch(tmp_path):
    spec = GridSpec(1, (-0.5,), 0.01, (101,))
    sample = field_from_function(spec, lambda z: np.maximum(1 - np.abs(z) / 0.5, 0.0))
    path = tmp_path / "kern.csv"
    write_field_csv(sample, path)
    kern = kernel_from_csv(path)
    other = GridSpec(1, (-1.0,), 0.02, (101,))
    chi = OccupancyField(other, np.ones(other.counts))
    with pytest.raises(ConfigError):
        convolve(kern, chi)


def test_assemble_total_velocity(grid_1d):
    chi0 = OccupancyField(grid_1d, np.zeros(grid_1d.counts))
    c1 = constant_velocity(1.0)
    out = assemble_total_velocity(zero_kernel(1), chi0, c1)
    np.testing.assert_allclose(out.values, 1.0)
    # collapse-phase data at t=0: kernel mass 2, external pulse -4 -> speed -2
    kern = indicator_kernel(4.0, 1)
    chi = interval_occupancy(grid_1d, -1.0, 1.0)
    drive = time_profile_velocity(pulse, bound=4.0)
    cbar = assemble_total_velocity(kern, chi, drive, t=0.0)
    i0 = int(np.argmin(np.abs(grid_1d.axis(0))))
    assert cbar.values[i0] == pytest.approx(-2.0, abs=2 * grid_1d.h)


def test_velocity_bounds_sums():
    kern = indicator_kernel(4.0, 1)
    c1 = constant_velocity(1.0)
    b = velocity_bounds(kern, c1)
    assert b.speed == pytest.approx(8.0 + 1.0)
    assert b.lipschitz == pytest.approx(2.0)
    # the pulse's maximum over [0, 2] is 1/2 at t = 3/2; its largest
    # magnitude (what a speed bound must cover) is 4 at t = 0
    ts = np.linspace(0, 2, 20001)
    assert pulse(ts).max() == pytest.approx(0.5, abs=1e-7)
    assert np.abs(pulse(ts)).max() == pytest.approx(4.0)
    zero = velocity_bounds(zero_kernel(1), constant_velocity(0.0))
    assert zero.speed == 0.0 and zero.lipschitz == 0.0


def test_check_positivity(grid_1d):
    ones = ScalarField(grid_1d, np.ones(grid_1d.counts))
    rep = check_positivity(ones, delta=0.5)
    assert rep.ok and rep.min_value == 1.0
    minus2 = ScalarField(grid_1d, np.full(grid_1d.counts, -2.0))
    assert not check_positivity(minus2, delta=0.0).ok
    zeros = ScalarField(grid_1d, np.zeros(grid_1d.counts))
    assert check_positivity(zeros, delta=0.0).ok


def test_external_velocity_sampling(grid_1d):
    c1 = ExternalVelocity(lambda mesh, t: mesh[0] * t, bound=6.0, lipschitz=2.0)
    f = c1.sample(grid_1d, 2.0)
    np.testing.assert_allclose(f.values, 2.0 * grid_1d.axis(0), atol=1e-13)
