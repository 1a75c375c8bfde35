"""Berezin transform, local averages and oscillation diagnostics.

The metric-ball oscillation ``omega`` is computed with the grid metric
``d_phi`` from :mod:`dfock.geometry`, which stands in for the Bergman
distance; :func:`beta_calibration` estimates the constant relating the two.
"""
import math
from collections import namedtuple
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import integrate
from scipy.interpolate import RegularGridInterpolator

from .errors import DivisionDomainError, InsufficientDataError, OutOfDomainError
from .geometry import STENCILS
from .kernels import _integration_radius, _kernel_scale, bergman_metric_density, weighted_kernel
from .quadrature import polar_integrate
from .symbols import SymbolFunction

__all__ = [
    "berezin", "BerezinField", "berezin_field", "average_hat", "mean_oscillation",
    "omega_oscillation", "OmegaValue", "OscillationReport", "oscillation_report",
    "classify_symbol", "build_cutoff", "build_regularizer_symbol", "beta_calibration",
    "radial_berezin_series",
]


# ---- Berezin transform -------------------------------------------------------

def _berezin_integrand(series, f, z):
    z = complex(z)
    diag = float(np.real(weighted_kernel(series, np.array([z]), np.array([z]))[0]))

    def kz2(w):
        return np.abs(weighted_kernel(series, w, z)) ** 2 / diag

    def integrand(w):
        k = kz2(w)
        fw = f(w)
        return np.where(k == 0, 0.0, fw * k)
    return kz2, integrand


def berezin(series, f, z, rtol=1e-6):
    """Berezin transform ``int f |k_z|^2 e^{-2 phi} dA`` at ``z``.

    ``k_z`` is the normalised kernel.  Symbols with jumps on circles about
    0 are integrated in polar coordinates about 0 (so the jumps fall on
    cell edges); others about ``z``.

    Raises
    ------
    DivergenceError
        If the integrand does not decay.
    """
    z = complex(z)
    kz2, integrand = _berezin_integrand(series, f, z)
    absint = lambda w: np.abs(integrand(w)) + kz2(w)
    rad = _integration_radius(absint, z, _kernel_scale(series, z))
    if f.breaks:
        a = abs(z)
        lo, hi = max(0.0, a - rad), a + rad
        if rad < a:
            half = math.asin(rad / a)
            th = math.atan2(z.imag, z.real)
            trange = (th - half, th + half)
        else:
            trange = (0.0, 2.0 * math.pi)
        res = polar_integrate(integrand, 0.0, hi, rtol=rtol, inner_radius=lo,
                              radial_breaks=f.breaks, theta_range=trange)
    else:
        res = polar_integrate(integrand, z, rad, rtol=rtol)
    return res.complex_value


def radial_berezin_series(series, f, a, diagonal=None):
    """Berezin transform of a radial symbol at ``|z| = a`` from the diagonal law.

    ``f~(z) = sum_k p_k d_k`` with ``p_k ∝ |z|^(2k) / nu_k`` and ``d_k`` the
    Toeplitz diagonal.  Used as an independent check of :func:`berezin`.
    """
    from .operators import radial_diagonal
    ks = series.degrees
    d = radial_diagonal(series, f, ks) if diagonal is None else diagonal
    if a == 0:
        return complex(d[0])
    L = 2 * ks * math.log(a) - series._lg
    p = np.exp(L - L.max())
    p /= p.sum()
    return complex(np.dot(p, d))


@dataclass
class BerezinField:
    """Berezin transform sampled on a grid, with interpolation.

    ``kind`` is ``"radial"`` (samples along the positive axis, linear in
    ``|z|``) or ``"box"`` (Cartesian grid, bilinear).  With ``extend``
    set, points beyond the grid take the value at its edge instead of
    raising :class:`OutOfDomainError`.
    """

    grid: np.ndarray
    values: np.ndarray
    kind: str
    symbol: SymbolFunction
    series: object
    axis: Optional[np.ndarray] = None
    extend: bool = False

    def __post_init__(self):
        if self.grid.shape != self.values.shape:
            raise ValueError("grid and values must have equal length")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("Berezin field has non-finite values")
        if self.kind == "box":
            n = self.axis.size
            V = self.values.reshape(n, n)
            self._re = RegularGridInterpolator((self.axis, self.axis), V.real)
            self._im = RegularGridInterpolator((self.axis, self.axis), V.imag)

    @property
    def radial(self):
        return self.kind == "radial"

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        if self.kind == "radial":
            r = np.abs(z)
            if not self.extend and np.any(r > self.grid.real.max() * (1 + 1e-12)):
                raise OutOfDomainError("point beyond the radial Berezin grid")
            x = self.grid.real
            return np.interp(r, x, self.values.real) + 1j * np.interp(r, x, self.values.imag)
        L = self.axis[-1]
        outside = np.any(np.abs(z.real) > L * (1 + 1e-12)) or np.any(np.abs(z.imag) > L * (1 + 1e-12))
        if outside and not self.extend:
            raise OutOfDomainError("point outside the Berezin grid box")
        pts = np.column_stack([np.clip(z.real.ravel(), -L, L), np.clip(z.imag.ravel(), -L, L)])
        return (self._re(pts) + 1j * self._im(pts)).reshape(z.shape)

    def to_csv(self, path):
        from .export import write_csv
        write_csv(path, ["re", "im", "re_btransform", "im_btransform"],
                  [(g.real, g.imag, v.real, v.imag) for g, v in zip(self.grid, self.values)])


def berezin_field(series, f, radii=None, box=None, rtol=1e-6):
    """Sample the Berezin transform of ``f``.

    Parameters
    ----------
    radii : array_like, optional
        Radii on the positive axis; allowed for radial ``f`` only.
    box : (float, int), optional
        ``(L, n)``: an ``n x n`` Cartesian grid on ``[-L, L]^2``.
    """
    if radii is not None:
        if not f.radial:
            raise ValueError("radial Berezin grids need a radial symbol")
        grid = np.asarray(radii, dtype=float).astype(complex)
        vals = np.array([berezin(series, f, g, rtol=rtol) for g in grid])
        return BerezinField(grid, vals, "radial", f, series)
    if box is None:
        raise ValueError("give radii or box")
    L, n = float(box[0]), int(box[1])
    axis = np.linspace(-L, L, n)
    X, Y = np.meshgrid(axis, axis, indexing="ij")
    grid = (X + 1j * Y).ravel()
    vals = np.array([berezin(series, f, g, rtol=rtol) for g in grid])
    return BerezinField(grid, vals, "box", f, series, axis)


# ---- averages over D(z) ---------------------------------------------------------

_GL_X, _GL_W = np.polynomial.legendre.leggauss(48)


def _crossed_breaks(f, z, rho):
    a = abs(z)
    return [b for b in f.breaks if a - rho < b < a + rho]


def _origin_polar_disk(g, z, rho, breaks, rtol):
    """Integral of ``g`` over ``D(z, rho)`` in polar coordinates about 0.

    Jumps on circles about the origin become radial break points, and the
    disk boundary becomes an exact angular limit at each radius.
    """
    a, t0 = abs(z), np.angle(z)

    def ring(s):
        if s <= 0.0:
            return 0.0
        if s + a <= rho:
            lo, hi = -math.pi, math.pi
        else:
            c = (s * s + a * a - rho * rho) / (2.0 * s * a)
            h = math.acos(min(1.0, max(-1.0, c)))
            lo, hi = -h, h
        th = t0 + 0.5 * (hi - lo) * _GL_X + 0.5 * (hi + lo)
        return s * 0.5 * (hi - lo) * (_GL_W @ g(s * np.exp(1j * th)))

    s_lo, s_hi = max(0.0, a - rho), a + rho
    pts = sorted(x for x in {*breaks, rho - a} if s_lo < x < s_hi)
    kw = dict(points=pts or None, epsrel=rtol, epsabs=0.0, limit=200)
    re_, _ = integrate.quad(lambda s: ring(s).real, s_lo, s_hi, **kw)
    im_, _ = integrate.quad(lambda s: ring(s).imag, s_lo, s_hi, **kw)
    return complex(re_, im_)


def _disk_integral(g, z, rho, breaks, rtol):
    if breaks:
        return _origin_polar_disk(g, z, rho, breaks, rtol)
    area = math.pi * rho * rho
    return polar_integrate(g, z, rho, rtol=rtol, atol=1e-12 * area).complex_value


def average_hat(field, f, z, rtol=1e-6):
    """Mean of ``f`` over the disk ``D(z, rho(z))``."""
    z = complex(z)
    rho = field(z)
    area = math.pi * rho * rho
    return _disk_integral(f, z, rho, _crossed_breaks(f, z, rho), rtol) / area


def mean_oscillation(field, f, z, p=2.0, rtol=1e-6):
    """``(mean over D(z) of |f - f^(z)|^p)^(1/p)``."""
    p = float(p)
    if p < 1:
        raise ValueError("p must be at least 1")
    z = complex(z)
    c = average_hat(field, f, z, rtol=rtol)
    rho = field(z)
    area = math.pi * rho * rho
    g = lambda w: np.abs(f(w) - c) ** p + 0j
    val = _disk_integral(g, z, rho, _crossed_breaks(f, z, rho), rtol).real
    return max(val, 0.0) ** (1.0 / p) / area ** (1.0 / p)


# ---- oscillation over metric balls ----------------------------------------------

OmegaValue = namedtuple("OmegaValue", "value truncated")


def _ball_points(graph, z, r, fractions=8):
    """Points of the grid-metric ball ``{d(z, .) < r}``: nodes and edge samples."""
    d = graph.distances_from(z, limit=r)
    inside = np.flatnonzero(d < r)
    pts = [graph.nodes[inside]]
    h = graph.grid_spacing
    n = graph.n
    ii, jj = inside // n, inside % n
    fr = np.arange(1, fractions) / fractions
    for dx, dy in STENCILS[graph.stencil]:
        for sx, sy in ((dx, dy), (-dx, -dy)):
            bi, bj = ii + sx, jj + sy
            ok = (bi >= 0) & (bi < n) & (bj >= 0) & (bj < n)
            a = inside[ok]
            if a.size == 0:
                continue
            start = graph.nodes[a]
            step = h * complex(sx, sy)
            wlen = np.abs(step) / graph.field.many(start + 0.5 * step)
            budget = r - d[a]
            reach = budget[:, None] > fr[None, :] * wlen[:, None]
            samp = start[:, None] + fr[None, :] * step
            pts.append(samp[reach])
    edge = (ii == 0) | (ii == n - 1) | (jj == 0) | (jj == n - 1)
    return np.concatenate(pts), bool(np.any(edge))


def omega_oscillation(graph, f, z, r=1.0):
    """``sup |f(z) - f(w)|`` over the grid-metric ball of radius ``r`` about ``z``.

    The ball is sampled at grid nodes and along grid edges out to the
    remaining path budget, so balls are nested in ``r``.  ``truncated`` is
    set when the ball touches the edge of the graph box.
    """
    z = complex(z)
    pts, truncated = _ball_points(graph, z, r)
    fz = complex(f(np.array([z]))[0])
    if pts.size == 0:
        return OmegaValue(0.0, truncated)
    return OmegaValue(float(np.max(np.abs(f(pts) - fz))), truncated)


@dataclass
class OscillationReport:
    """Per-point oscillation data grouped by annulus."""

    annuli: list
    points: list
    omega: list
    mean_osc: list
    hat_p: list
    p: float
    r: float
    truncated: bool

    def annulus_max(self, name):
        return [float(np.max(v)) if len(v) else 0.0 for v in getattr(self, name)]


def oscillation_report(field, graph, f, annuli, p=1.0, n_radii=2, n_angles=8, r=1.0):
    """Sample ``omega``, ``MO_p`` and ``(|f|^p)^`` on each annulus."""
    pts_all, om_all, mo_all, hat_all = [], [], [], []
    truncated = False
    absp = SymbolFunction(lambda w: np.abs(f(w)) ** p + 0j, f.radial, f"|{f.name}|^{p:g}",
                          breaks=f.breaks)
    for lo, hi in annuli:
        radii = lo + (hi - lo) * (np.arange(n_radii) + 0.5) / n_radii
        ang = 2 * np.pi * (np.arange(n_angles) + 0.25) / n_angles
        pts = (radii[:, None] * np.exp(1j * ang)[None, :]).ravel()
        om, mo, hat = [], [], []
        for z in pts:
            o = omega_oscillation(graph, f, z, r)
            truncated |= o.truncated
            om.append(o.value)
            mo.append(mean_oscillation(field, f, z, max(p, 1.0)))
            hat.append(abs(average_hat(field, absp, z)))
        pts_all.append(pts)
        om_all.append(np.array(om))
        mo_all.append(np.array(mo))
        hat_all.append(np.array(hat))
    return OscillationReport(list(annuli), pts_all, om_all, mo_all, hat_all, float(p), float(r),
                             truncated)


def _trend(values):
    v = np.asarray(values, dtype=float)
    bounded = bool(np.all(np.isfinite(v)) and v[-1] <= 1.1 * max(np.max(v[:-1]), 1e-12))
    vanishing = bool(np.all(v <= 1e-12) or v[-1] < 0.2 * v[0])
    return bounded, vanishing


def classify_symbol(report):
    """Advisory class tags from per-annulus suprema.

    A quantity is called bounded when the outermost annulus does not
    exceed 1.1 times the largest earlier one, and vanishing when it is below
    0.2 times the innermost one (or identically zero).  The tags are
    heuristics, not certificates.
    """
    if len(report.annuli) < 4:
        raise InsufficientDataError("classification needs at least 4 annuli")
    mids = np.array([0.5 * (a + b) for a, b in report.annuli])
    out = {}
    tags = []
    p = f"{report.p:g}"
    for key, name, btag, vtag in (("omega", "omega", "BO", "VO"),
                                  ("hat_p", "hat", f"BA^{p}", f"VA^{p}"),
                                  ("mean_osc", "MO", f"BMO^{p}", f"VMO^{p}")):
        v = report.annulus_max(key)
        out[f"sup_{name}"] = float(np.max(v))
        out[f"{name}_decay_slope"] = float(np.polyfit(mids, v, 1)[0])
        bounded, vanishing = _trend(v)
        if bounded:
            tags.append(btag)
            if vanishing:
                tags.append(vtag)
    out["sup_hat_p"] = out.pop("sup_hat")
    out["advisory_tags"] = tags
    return out


# ---- cutoff and regulariser symbols --------------------------------------------------

def _radial_distance_table(field, amax, n=4001):
    s = np.linspace(0.0, amax, n)
    inv = 1.0 / field.many(s)
    d = np.concatenate([[0.0], np.cumsum(0.5 * (inv[1:] + inv[:-1]) * np.diff(s))])
    return s, d


def build_cutoff(graph, R):
    """Cutoff ``h_R``: 1 for ``d(z, 0) < R``, ``2 - d/R`` up to ``2R``, then 0.

    ``d(z, 0)`` is the metric distance to the origin; for a radial density
    rays from 0 are geodesics, so it is the radial integral of ``1/rho``.

    Raises
    ------
    OutOfDomainError
        If the ball ``d < 2R`` does not fit in the graph box.
    """
    R = float(R)
    if not R > 0:
        raise ValueError("R must be positive")
    field = graph.field
    s, d = _radial_distance_table(field, graph.half_width)
    if d[-1] <= 2.0 * R:
        raise OutOfDomainError(f"the metric ball of radius 2R={2 * R:g} exceeds the graph box")
    r1 = float(np.interp(R, d, s))
    r2 = float(np.interp(2 * R, d, s))

    def prof(r):
        dd = np.interp(np.asarray(r, dtype=float), s, d, right=np.inf)
        return np.clip(2.0 - dd / R, 0.0, 1.0)
    sym = SymbolFunction(lambda w: prof(np.abs(w)) + 0j, True, f"cutoff:{R:g}", prof,
                         (r1, r2), True, {"R": R, "radius_inner": r1, "radius_outer": r2})
    return sym


def build_regularizer_symbol(bfield, R):
    """``g = 0`` on ``|z| < R`` and ``1 / f~`` (interpolated) on ``|z| >= R``.

    Raises
    ------
    DivisionDomainError
        If ``|f~| < 1e-9`` at a grid point with ``|z| >= R``.
    """
    R = float(R)
    need = np.abs(bfield.grid) >= R
    if np.any(need):
        mag = np.abs(bfield.values[need])
        i = int(np.argmin(mag))
        if mag[i] < 1e-9:
            pt = complex(bfield.grid[need][i])
            raise DivisionDomainError(
                f"Berezin transform {mag[i]:.3g} too small to invert at z={pt:.6g}", point=pt)

    def ev(w):
        w = np.asarray(w, dtype=complex)
        out = np.zeros(w.shape, dtype=complex)
        m = np.abs(w) >= R
        if np.any(m):
            out[m] = 1.0 / bfield(w[m])
        return out
    prof = None
    if bfield.radial:
        prof = lambda r: ev(np.asarray(r, dtype=float).astype(complex))
    name = f"regularizer({bfield.symbol.name},R={R:g})"
    return SymbolFunction(ev, bfield.radial, name, prof, (R,), bool(np.all(bfield.values.imag == 0)))


# ---- Bergman metric vs d_phi ------------------------------------------------------

BetaCalibration = namedtuple("BetaCalibration", "C C_min C_max radii ratios")


def beta_calibration(series, field, radii=None):
    """Ratio of the Bergman length element to ``|dz| / rho``.

    The Bergman metric density is ``(d d-bar log K(z, z))^(1/2)``; ``C`` is
    the median over ``radii`` of that density times ``rho``, so that
    ``beta ≈ C d_phi``.
    """
    if radii is None:
        radii = np.linspace(0.0, 4.0, 17)
    radii = np.asarray(radii, dtype=float)
    ratios = np.array([math.sqrt(bergman_metric_density(series, a)) * field.many([a])[0]
                       for a in radii])
    return BetaCalibration(float(np.median(ratios)), float(ratios.min()), float(ratios.max()),
                           radii, ratios)
