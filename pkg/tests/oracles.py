"""Independent reference values for the test suite.

Everything here is derived by a route separate from the library code:
closed-form antiderivatives, integrating factors, adaptive quadrature, and
explicit double-loop summation.
"""

import numpy as np
from scipy.integrate import quad


def pulse(t):
    return 2.0 * (t - 1.0) * (2.0 - t)


def plateau_gamma0(t):
    """y' = pulse, y(1) = 0: direct antiderivative of 2(t-1)(2-t)."""
    antider = lambda s: 3.0 * s**2 - (2.0 / 3.0) * s**3 - 4.0 * s
    return antider(t) - antider(1.0)


def plateau_gamma1(t):
    """y' = pulse + 2y, y(1) = 0: integrating factor gives (t-1)^2."""
    return (t - 1.0) ** 2


def plateau_quadrature(control_pairs, t, tol=1e-11):
    """Plateau radius for a piecewise-constant control via per-piece quadrature.

    control_pairs: [(t0, g0), (t1, g1), ...] with t0 = 1; on each piece the
    exact solution is y(b) = e^{2g(b-a)} y(a) + int_a^b e^{2g(b-s)} pulse(s) ds.
    """
    edges = [p[0] for p in control_pairs] + [2.0]
    y = 0.0
    for (a, g), b in zip(control_pairs, edges[1:]):
        b = min(b, t)
        if b <= a:
            break
        val, _ = quad(lambda s: np.exp(2.0 * g * (b - s)) * pulse(s), a, b, epsabs=tol, epsrel=tol)
        y = np.exp(2.0 * g * (b - a)) * y + val
        if b >= t:
            break
    return y


def hat(x):
    return np.maximum(1.0 - np.abs(x), -1.0)


def brute_convolution(kernel_fn, xs, chi, h):
    """(c0 * chi)(x) = h * sum_y c0(x - y) chi(y), explicit double loop."""
    out = np.zeros_like(xs)
    for i, x in enumerate(xs):
        out[i] = h * np.sum(kernel_fn(x - xs) * chi)
    return out


def window_min(values, cells):
    """Brute-force sliding window minimum with edge replication."""
    n = values.size
    out = np.empty(n)
    for i in range(n):
        lo = max(0, i - cells)
        hi = min(n, i + cells + 1)
        out[i] = values[lo:hi].min()
    return out


def window_max(values, cells):
    n = values.size
    out = np.empty(n)
    for i in range(n):
        lo = max(0, i - cells)
        hi = min(n, i + cells + 1)
        out[i] = values[lo:hi].max()
    return out
