import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from dfock.errors import ConvergenceError
from dfock.quadrature import gauss_legendre, polar_integrate, scan_decay_radius


def test_gauss_legendre_is_exact_for_polynomials():
    x, w = gauss_legendre(6)
    for k in range(12):
        exact = 0.0 if k % 2 else 2.0 / (k + 1)
        assert float(w @ x**k) == pytest.approx(exact, abs=1e-14)


def test_gauss_legendre_is_read_only():
    x, _ = gauss_legendre(4)
    with pytest.raises(ValueError):
        x[0] = 0.0


@pytest.mark.parametrize("R", [0.5, 1.0, 3.0])
def test_gaussian_disk_integral(R):
    res = polar_integrate(lambda w: np.exp(-np.abs(w) ** 2), 0j, R, rtol=1e-12)
    assert float(res) == pytest.approx(math.pi * (1 - math.exp(-R * R)), rel=1e-11)


@settings(max_examples=25, deadline=None)
@given(x=st.floats(-2, 2), y=st.floats(-2, 2), r=st.floats(0.1, 3.0))
def test_off_centre_second_moment(x, y, r):
    # mean of |w|^2 over D(c, r) is |c|^2 + r^2 / 2
    c = complex(x, y)
    res = polar_integrate(lambda w: np.abs(w) ** 2 + 0j, c, r, rtol=1e-12)
    assert float(res) == pytest.approx(math.pi * r * r * (abs(c) ** 2 + r * r / 2), rel=1e-10)


def test_complex_integrand_keeps_imaginary_part():
    c = 0.3 + 0.2j
    res = polar_integrate(lambda w: w + 0j, c, 0.7, rtol=1e-12)
    assert res.complex_value == pytest.approx(math.pi * 0.49 * c, rel=1e-11)


def test_radial_break_resolves_jump():
    # indicator of |w - c| < 1 inside the disk of radius 2 about c
    c = 1 + 1j
    f = lambda w: (np.abs(w - c) < 1.0).astype(complex)
    res = polar_integrate(f, c, 2.0, rtol=1e-12, radial_breaks=(1.0,))
    assert float(res) == pytest.approx(math.pi, rel=1e-12)


def test_annulus_and_sector():
    f = lambda w: np.abs(w) ** 2 + 0j
    ann = polar_integrate(f, 0j, 2.0, inner_radius=1.0, rtol=1e-12)
    assert float(ann) == pytest.approx(0.5 * math.pi * (16 - 1), rel=1e-11)
    sec = polar_integrate(f, 0j, 1.0, theta_range=(0.0, math.pi / 2), rtol=1e-12)
    assert float(sec) == pytest.approx(math.pi / 8, rel=1e-11)


def test_matches_scipy_on_oscillatory_integrand():
    f = lambda w: np.cos(3 * w.real) * np.exp(-np.abs(w - 0.5) ** 2) + 0j
    res = polar_integrate(f, 0.5 + 0j, 4.0, rtol=1e-10)
    g = lambda s, t: math.cos(3 * (0.5 + s * math.cos(t))) * math.exp(-s * s) * s
    ref, _ = integrate.dblquad(g, 0, 2 * math.pi, 0, 4.0, epsabs=1e-12, epsrel=1e-12)
    assert float(res) == pytest.approx(ref, rel=1e-9)


def test_result_carries_diagnostics():
    res = polar_integrate(lambda w: np.ones_like(w), 0j, 1.0)
    assert res.cells >= 48 and res.error >= 0.0
    assert res.abs_integral == pytest.approx(math.pi)


def test_budget_exhaustion_raises_with_estimate():
    f = lambda w: np.sign(np.sin(40 * w.real)) + 0j
    with pytest.raises(ConvergenceError) as info:
        polar_integrate(f, 0.1j, 1.0, rtol=1e-14, max_cells=500)
    assert info.value.best_estimate is not None


def test_non_finite_integrand_raises():
    with pytest.raises(ConvergenceError):
        polar_integrate(lambda w: np.full(w.shape, np.nan, dtype=complex), 0j, 1.0)


def test_scan_decay_radius_gaussian():
    # e^{-t^2} < 1e-14 once t > sqrt(14 ln 10) ~ 5.68
    radius, peak = scan_decay_radius(lambda w: np.exp(-np.abs(w) ** 2), 0j, 1.0)
    assert peak == pytest.approx(1.0)
    assert 5.68 <= radius <= 5.68 * 2 ** 0.75


def test_scan_decay_radius_gives_up_on_flat_integrand():
    radius, _ = scan_decay_radius(lambda w: np.ones(w.shape), 0j, 1.0, cap_factor=64.0)
    assert radius is None
