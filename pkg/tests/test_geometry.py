import math

import numpy as np
import pytest
from scipy.spatial.distance import pdist, squareform

from dfock.errors import InsufficientDataError, OutOfDomainError
from dfock.geometry import (MetricGraph, build_lattice, check_lattice, covering_multiplicity,
                            metric_distance, radial_distance_from_origin, ring_points,
                            verify_distance_bounds)
from dfock.weights import InducedRadiusField, WeightModel

RHO_G = (2 * math.pi) ** -0.5


@pytest.fixture(scope="module")
def gauss_lattice(gauss_field):
    return build_lattice(gauss_field, 1.0, 5.0)


@pytest.fixture(scope="module")
def gauss_graph(gauss_field):
    return MetricGraph(gauss_field, 4.0, 0.1)


@pytest.fixture(scope="module")
def power4_field():
    return InducedRadiusField(WeightModel.power(4.0))


# ---- lattices --------------------------------------------------------------------------

def test_gaussian_lattice_spacing_brute_force(gauss_lattice, gauss_field):
    pts = gauss_lattice.points
    D = squareform(pdist(np.column_stack([pts.real, pts.imag])))
    np.fill_diagonal(D, np.inf)
    assert D.min() >= 2 * RHO_G / 5
    assert check_lattice(gauss_lattice, gauss_field) == (0, 0)


def test_gaussian_lattice_covers_dense_probes(gauss_lattice):
    rng = np.random.default_rng(1)
    rad = 5.0 * np.sqrt(rng.uniform(size=4000))
    probes = rad * np.exp(2j * np.pi * rng.uniform(size=4000))
    dist = np.abs(probes[:, None] - gauss_lattice.points[None, :])
    assert np.all(np.any(dist < RHO_G, axis=1))


def test_tiny_domain_gives_single_point(gauss_field):
    lat = build_lattice(gauss_field, 1.0, 0.05)
    assert len(lat) == 1 and lat.points[0] == 0


@pytest.mark.parametrize("m", [2.0, 4.0])
def test_lattice_density_follows_rho(m):
    # points per unit area scale like 1 / rho^2
    field = InducedRadiusField(WeightModel.power(m))
    lat = build_lattice(field, 1.0, 4.0)
    a = np.abs(lat.points)
    scaled = []
    for lo, hi in ((0.5, 1.5), (2.5, 3.5)):
        sel = (a >= lo) & (a < hi)
        area = math.pi * (hi * hi - lo * lo)
        scaled.append(sel.sum() / area * float(np.mean(lat.rho[sel] ** 2)))
    assert scaled[1] == pytest.approx(scaled[0], rel=0.3)


def test_lattice_rejects_bad_kappa(gauss_field):
    with pytest.raises(ValueError):
        build_lattice(gauss_field, 1.0, 2.0, kappa=0.3)


def _brute_multiplicity(lat, field, m, probes):
    best = 0
    for z in probes:
        rz = field(z)
        best = max(best, int(np.sum(np.abs(lat.points - z) < lat.r * lat.rho + m * lat.r * rz)))
    return best


def test_covering_multiplicity_matches_brute_force(gauss_lattice, gauss_field):
    rng = np.random.default_rng(2)
    probes = rng.uniform(-3, 3, 300) + 1j * rng.uniform(-3, 3, 300)
    fast = covering_multiplicity(gauss_lattice, gauss_field, 1.0, probes)
    assert fast == _brute_multiplicity(gauss_lattice, gauss_field, 1.0, probes)


def test_covering_multiplicity_stable_under_refinement(gauss_lattice, gauss_field):
    coarse = ring_points(gauss_field, 4.0, 0.1)
    fine = ring_points(gauss_field, 4.0, 0.05)
    a = covering_multiplicity(gauss_lattice, gauss_field, 1.0, coarse)
    b = covering_multiplicity(gauss_lattice, gauss_field, 1.0, fine)
    assert a == b


def test_covering_multiplicity_edge_cases(gauss_lattice, gauss_field):
    assert covering_multiplicity(gauss_lattice, gauss_field, 1.0, []) == 0
    single = build_lattice(gauss_field, 1.0, 0.05)
    assert covering_multiplicity(single, gauss_field, 3.0, [0.01, -0.02j]) == 1


# ---- metric distance ----------------------------------------------------------------------

def test_gaussian_distance_is_scaled_euclidean(gauss_graph):
    rng = np.random.default_rng(3)
    for _ in range(15):
        z, w = rng.uniform(-3.5, 3.5, 2) @ [1, 1j], rng.uniform(-3.5, 3.5, 2) @ [1, 1j]
        exact = abs(z - w) * math.sqrt(2 * math.pi)
        assert metric_distance(gauss_graph, z, w) == pytest.approx(exact, rel=0.03)


def test_distance_identity_and_symmetry(gauss_graph):
    z, w = 0.33 - 1.21j, -2.07 + 0.5j
    assert metric_distance(gauss_graph, z, z) == 0.0
    assert metric_distance(gauss_graph, z, w) == metric_distance(gauss_graph, w, z)


def test_distance_outside_box_raises(gauss_graph):
    with pytest.raises(OutOfDomainError):
        metric_distance(gauss_graph, 0j, 5.0)


def test_triangle_inequality(power4_field):
    g = MetricGraph(power4_field, 2.0, 0.05)
    rng = np.random.default_rng(4)
    pts = rng.uniform(-1.8, 1.8, (30, 3, 2)) @ np.array([1, 1j])
    for z, u, w in pts:
        lhs = g.distance(z, w)
        assert lhs <= g.distance(z, u) + g.distance(u, w) + g.grid_tolerance


def test_refinement_does_not_increase_distance(power4_field):
    coarse = MetricGraph(power4_field, 2.0, 0.1)
    fine = MetricGraph(power4_field, 2.0, 0.05)
    for z, w in [(0j, 1.5 + 1.5j), (-1 + 0.3j, 1.2 - 0.9j), (0.5j, -1.7)]:
        assert fine.distance(z, w) <= coarse.distance(z, w) + coarse.grid_tolerance


def test_radial_distance_from_origin(gauss_field, power4_field):
    assert radial_distance_from_origin(gauss_field, 2.0) == pytest.approx(2.0 / RHO_G, rel=1e-9)
    g = MetricGraph(power4_field, 2.0, 0.05)
    # rays from 0 are geodesics for a radial density
    assert g.distance(0j, 1.5) == pytest.approx(radial_distance_from_origin(power4_field, 1.5),
                                                rel=0.02)


# ---- distance bounds ------------------------------------------------------------------------

def _pairs(rng, n, L):
    return [tuple(rng.uniform(-L, L, (2, 2)) @ [1, 1j]) for _ in range(n)]


def test_distance_bounds_gaussian(gauss_graph, gauss_field):
    rng = np.random.default_rng(5)
    rep = verify_distance_bounds(gauss_graph, gauss_field, _pairs(rng, 60, 3.5), 1.0)
    assert rep.violations == 0
    assert 0 < rep.delta_fit < 1
    assert rep.C_near < 1.05


def test_distance_bounds_needs_far_pairs(gauss_graph, gauss_field):
    with pytest.raises(InsufficientDataError):
        verify_distance_bounds(gauss_graph, gauss_field, [], 1.0)
    with pytest.raises(InsufficientDataError):
        verify_distance_bounds(gauss_graph, gauss_field, [(0j, 0.01)] * 20, 1.0)


def test_distance_bounds_power4_holdout(power4_field):
    g = MetricGraph(power4_field, 6.0, 0.1)
    rng = np.random.default_rng(6)
    fit = verify_distance_bounds(g, power4_field, _pairs(rng, 80, 4.2), 1.0)
    assert fit.violations == 0
    hold = _pairs(rng, 40, 4.2)
    x = np.array([abs(z - w) / power4_field(z) for z, w in hold])
    d = np.array([g.distance(z, w) for z, w in hold])
    C, dl = fit.C_fit * 1.01, fit.delta_fit
    far = x >= 1.0
    near = ~far
    viol = np.sum(d[far] * C < x[far] ** dl) + np.sum(d[far] > C * x[far] ** (2 - dl))
    viol += np.sum(d[near] * C < x[near]) + np.sum(d[near] > C * x[near])
    assert viol == 0
