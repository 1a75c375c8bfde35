import math

import numpy as np
import pytest
from scipy.stats import ncx2

from dfock.errors import DivisionDomainError, InsufficientDataError, OutOfDomainError
from dfock.geometry import MetricGraph, radial_distance_from_origin
from dfock.kernels import basis_norms, degree_budget
from dfock.symbols import parse_symbol
from dfock.transforms import (average_hat, berezin, berezin_field, beta_calibration, build_cutoff,
                              build_regularizer_symbol, classify_symbol, mean_oscillation,
                              omega_oscillation, oscillation_report, radial_berezin_series)
from dfock.weights import WeightModel

RHO_G = (2 * math.pi) ** -0.5


def _gauss_disk_prob(z, R):
    # under |k_z|^2 e^{-2 phi} dA, 2|w|^2 is noncentral chi^2 with 2 dof and centrality 2|z|^2
    return ncx2.cdf(2 * R * R, 2, 2 * abs(z) ** 2)


@pytest.fixture(scope="module")
def gauss_graph(gauss_field):
    return MetricGraph(gauss_field, 4.0, 0.05)


# ---- Berezin transform --------------------------------------------------------------------

def test_berezin_indicator_at_origin(gauss_series):
    f = parse_symbol("indicator_inside:1")
    assert berezin(gauss_series, f, 0j).real == pytest.approx(1 - math.exp(-1), abs=1e-6)


@pytest.mark.parametrize("z", [0.5, 1 + 1j, -2.5j])
def test_berezin_indicator_off_centre(gauss_series, z):
    f = parse_symbol("indicator_inside:1.5")
    assert berezin(gauss_series, f, z).real == pytest.approx(_gauss_disk_prob(z, 1.5), abs=1e-6)


def test_berezin_second_moment(gauss_series):
    f = parse_symbol("abs_sq")
    assert berezin(gauss_series, f, 0j).real == pytest.approx(1.0, rel=1e-6)
    assert berezin(gauss_series, f, 1 - 2j).real == pytest.approx(6.0, rel=1e-6)


def test_berezin_heat_semigroup(gauss_series):
    # Re w ~ N(Re z, 1/2), so E sin(Re w) = e^{-1/4} sin(Re z)
    f = parse_symbol("sin_re")
    for z in (0.3, 2 + 1j, -1.7 - 0.4j):
        assert berezin(gauss_series, f, z) == pytest.approx(math.exp(-0.25) * math.sin(z.real),
                                                            abs=1e-7)


@pytest.mark.parametrize("name", ["gauss_series", "power2_series", "power4_series"])
def test_berezin_of_constant(name, request):
    s = request.getfixturevalue(name)
    f = parse_symbol("const:2.5")
    for z in (0j, 1 + 1j, -2.5, 3j):
        assert berezin(s, f, z) == pytest.approx(2.5, abs=1e-5)


def test_berezin_unitary_equivalence(power2_series):
    # multiplication by z maps the power(2) space onto the fock_sobolev(1) space
    w = WeightModel.fock_sobolev(1.0)
    fs = basis_norms(w, degree_budget(w))
    for name in ("sin_log_abs", "arctan_re", "indicator_outside:1"):
        f = parse_symbol(name)
        for z in (0.7, 1.5 - 1j):
            assert berezin(fs, f, z) == pytest.approx(berezin(power2_series, f, z), abs=1e-6)


def test_radial_series_matches_quadrature(power4_series):
    from dfock.operators import radial_diagonal
    f = parse_symbol("sin_log_abs")
    d = radial_diagonal(power4_series, f, power4_series.degrees)
    for a in (0.0, 0.8, 2.2):
        assert radial_berezin_series(power4_series, f, a, diagonal=d) == pytest.approx(
            berezin(power4_series, f, a), abs=1e-6)


def test_berezin_positive_and_monotone(power4_series):
    f, g = parse_symbol("indicator_inside:1"), parse_symbol("indicator_inside:1.5")
    for z in (0.4, 1 + 0.5j, 2.5j):
        a, b = berezin(power4_series, f, z).real, berezin(power4_series, g, z).real
        assert -1e-6 <= a <= b + 1e-6


# ---- Berezin fields --------------------------------------------------------------------------

def test_radial_field_interpolates(gauss_series):
    f = parse_symbol("indicator_inside:1")
    bf = berezin_field(gauss_series, f, radii=np.linspace(0, 3, 13))
    np.testing.assert_allclose(bf.values.real, _gauss_disk_prob(bf.grid, 1.0), atol=1e-6)
    assert bf(1.5j) == pytest.approx(bf.values[6])
    with pytest.raises(OutOfDomainError):
        bf(3.5)


def test_radial_field_needs_radial_symbol(gauss_series):
    with pytest.raises(ValueError):
        berezin_field(gauss_series, parse_symbol("sin_re"), radii=[0, 1])
    with pytest.raises(ValueError):
        berezin_field(gauss_series, parse_symbol("sin_re"))


def test_box_field_bilinear(gauss_series, tmp_path):
    f = parse_symbol("sin_re")
    bf = berezin_field(gauss_series, f, box=(1.0, 3))
    np.testing.assert_allclose(bf.values.real, math.exp(-0.25) * np.sin(bf.grid.real), atol=1e-7)
    mid = 0.5 * (bf.values[3] + bf.values[6])  # between (0,-1) and (1,-1)
    assert bf(0.5 - 1j) == pytest.approx(mid)
    with pytest.raises(OutOfDomainError):
        bf(1.5)
    bf.to_csv(tmp_path / "b.csv")
    assert (tmp_path / "b.csv").read_text().splitlines()[0] == "re,im,re_btransform,im_btransform"


# ---- averages over D(z) ------------------------------------------------------------------------

def _lens_area(R, r, d):
    if d >= R + r:
        return 0.0
    if d <= abs(R - r):
        return math.pi * min(R, r) ** 2
    a = R * R * math.acos((d * d + R * R - r * r) / (2 * d * R))
    b = r * r * math.acos((d * d + r * r - R * R) / (2 * d * r))
    return a + b - 0.5 * math.sqrt((-d + r + R) * (d + r - R) * (d - r + R) * (d + r + R))


def test_average_hat_closed_forms(gauss_field, power4_series):
    assert average_hat(gauss_field, parse_symbol("const:3"), 1 + 1j) == pytest.approx(3.0)
    assert abs(average_hat(gauss_field, parse_symbol("re"), 0j)) < 1e-12
    assert average_hat(gauss_field, parse_symbol("abs_sq"), 0j).real == pytest.approx(
        1 / (4 * math.pi), rel=1e-6)


@pytest.mark.parametrize("z", [1.2, 0.9 + 0.3j, 0.1j])
def test_average_hat_across_a_jump(gauss_field, z):
    f = parse_symbol("indicator_inside:1")
    exact = _lens_area(1.0, RHO_G, abs(z)) / (math.pi * RHO_G**2)
    assert average_hat(gauss_field, f, z).real == pytest.approx(exact, abs=1e-6)


def test_mean_oscillation_closed_forms(gauss_field):
    f = parse_symbol("re")
    assert mean_oscillation(gauss_field, f, 0j, 2) == pytest.approx(RHO_G / 2, rel=1e-6)
    assert mean_oscillation(gauss_field, parse_symbol("const:1"), 0.5, 2) == pytest.approx(0, abs=1e-9)
    a = mean_oscillation(gauss_field, f, 1 - 1j, 1.5)
    assert mean_oscillation(gauss_field, f + 7.0, 1 - 1j, 1.5) == pytest.approx(a, rel=1e-9)
    with pytest.raises(ValueError):
        mean_oscillation(gauss_field, f, 0j, 0.5)


def test_mean_oscillation_of_indicator(gauss_field):
    # a two-valued function: MO_2 = sqrt(q (1 - q)) with q the covered fraction
    z = 1.1
    q = _lens_area(1.0, RHO_G, z) / (math.pi * RHO_G**2)
    mo = mean_oscillation(gauss_field, parse_symbol("indicator_inside:1"), z, 2)
    assert mo == pytest.approx(math.sqrt(q * (1 - q)), abs=1e-6)


# ---- metric oscillation ---------------------------------------------------------------------------

def test_omega_of_real_part(gauss_graph):
    f = parse_symbol("re")
    for z in (0j, 1 - 1j):
        assert omega_oscillation(gauss_graph, f, z, 1.0).value == pytest.approx(RHO_G, rel=0.05)


def test_omega_constant_and_monotone(gauss_graph):
    assert omega_oscillation(gauss_graph, parse_symbol("const:2"), 0.3, 1.0).value == 0
    f = parse_symbol("sin_re")
    for z in (0j, 2 + 1j, -1.5j):
        assert (omega_oscillation(gauss_graph, f, z, 0.5).value
                <= omega_oscillation(gauss_graph, f, z, 1.0).value)


def test_omega_flags_truncated_ball(gauss_graph):
    assert omega_oscillation(gauss_graph, parse_symbol("re"), 3.9, 1.0).truncated
    assert not omega_oscillation(gauss_graph, parse_symbol("re"), 0j, 1.0).truncated


# ---- classification ---------------------------------------------------------------------------------

ANNULI = [[0.5, 1.5], [1.5, 2.5], [2.5, 3.5], [3.5, 4.5]]


@pytest.fixture(scope="module")
def wide_graph(gauss_field):
    return MetricGraph(gauss_field, 6.0, 0.1)


def test_classify_constant(gauss_field, wide_graph):
    rep = oscillation_report(gauss_field, wide_graph, parse_symbol("const:1"), ANNULI)
    tags = classify_symbol(rep)["advisory_tags"]
    assert {"BO", "VO"} <= set(tags)


def test_classify_sin_abs(gauss_field, wide_graph):
    rep = oscillation_report(gauss_field, wide_graph, parse_symbol("sin_abs"), ANNULI)
    out = classify_symbol(rep)
    assert "BO" in out["advisory_tags"] and "VO" not in out["advisory_tags"]
    # omega is about Lipschitz constant times the ball radius
    assert max(rep.annulus_max("omega")) == pytest.approx(RHO_G, rel=0.1)


def test_classify_indicator_vanishing_average(gauss_field, wide_graph):
    rep = oscillation_report(gauss_field, wide_graph, parse_symbol("indicator_inside:1"), ANNULI,
                             p=1.0)
    assert "VA^1" in classify_symbol(rep)["advisory_tags"]
    # D(z) misses D(0, 1) once |z| > 1 + rho
    assert np.all(rep.hat_p[-1] == 0)


def test_classify_needs_four_annuli(gauss_field, wide_graph):
    rep = oscillation_report(gauss_field, wide_graph, parse_symbol("re"), ANNULI[:3])
    with pytest.raises(InsufficientDataError):
        classify_symbol(rep)


# ---- cutoff and regulariser ------------------------------------------------------------------------------

def test_cutoff_profile(gauss_graph, gauss_field):
    R = 2.0
    h = build_cutoff(gauss_graph, R)
    assert h(np.array([0j]))[0] == 1
    a = 1.5 * R * RHO_G  # d(z, 0) = |z| / rho
    assert h(np.array([a * 1j]))[0].real == pytest.approx(0.5, abs=1e-6)
    assert h(np.array([3.0]))[0] == 0
    assert radial_distance_from_origin(gauss_field, h.meta["radius_outer"]) == pytest.approx(2 * R,
                                                                                             rel=1e-6)


def test_cutoff_is_lipschitz(gauss_graph):
    R = 2.0
    h = build_cutoff(gauss_graph, R)
    for z in (0.5, 0.8 + 0.8j, -1.2j, 1.6):
        assert omega_oscillation(gauss_graph, h, z, 1.0).value <= 1 / R + gauss_graph.grid_tolerance / R


def test_cutoff_box_too_small(gauss_graph):
    with pytest.raises(OutOfDomainError):
        build_cutoff(gauss_graph, 20.0)


def test_regularizer_of_one(gauss_series):
    bf = berezin_field(gauss_series, parse_symbol("const:1"), radii=np.linspace(0, 4, 9))
    g = build_regularizer_symbol(bf, 1.0)
    np.testing.assert_allclose(g(np.array([0.5, 1.0, 2j, 3.9])), [0, 1, 1, 1], atol=1e-5)


def test_regularizer_of_two(gauss_series):
    bf = berezin_field(gauss_series, parse_symbol("const:2"), radii=np.linspace(0, 4, 9))
    g = build_regularizer_symbol(bf, 1.0)
    np.testing.assert_allclose(g(np.array([0.2, 1.5, 3.0])), [0, 0.5, 0.5], atol=1e-5)


def test_regularizer_division_error(gauss_series):
    f = parse_symbol("indicator_inside:1")
    bf = berezin_field(gauss_series, f, radii=np.linspace(0, 6, 13))
    # the oracle: f~ decays like a Gaussian tail beyond the support
    assert abs(bf.values[-1]) < 1e-9
    with pytest.raises(DivisionDomainError) as info:
        build_regularizer_symbol(bf, 1.0)
    assert info.value.point is not None


def test_beta_calibration_gaussian(gauss_series, gauss_field):
    cal = beta_calibration(gauss_series, gauss_field)
    assert cal.C == pytest.approx(RHO_G, rel=1e-6)
    assert cal.C_max - cal.C_min < 1e-6
