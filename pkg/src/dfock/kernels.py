"""Monomial norms, the reproducing kernel and pointwise kernel estimates.

For a radial weight the monomials are orthogonal, so the kernel is the
power series ``K(z, w) = sum_k (z conj(w))^k / nu_k`` with
``nu_k = ||z^k||^2 = 2 pi int_0^inf r^(2k+1) exp(-2 phi(r)) dr``.
Norms are stored as logarithms; they overflow doubles long before the
series stops mattering.
"""
import math
import threading
from collections import namedtuple
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .errors import (ConvergenceError, DivergenceError, EstimateViolationError,
                     InsufficientDataError, TruncationBudgetError)
from .quadrature import polar_integrate, scan_decay_radius

__all__ = [
    "KernelSeries", "KernelValue", "basis_norms", "degree_budget", "kernel_eval", "weighted_kernel",
    "kernel_norm_p", "bergman_project", "verify_kernel_bounds", "KernelBoundReport",
    "bergman_metric_density", "orthonormal_basis",
]

_DROP = 60.0        # log-drop from the peak treated as the end of an integrand
_WINDOW = 38.0      # log-drop below the largest term at which series terms are ignored
_LOG_PI = math.log(math.pi)

_norm_cache = {}
_norm_lock = threading.Lock()


# ---- monomial norms --------------------------------------------------------

def _moment_setup(weight, k):
    """Exponent, log-integrand and integration window for ``t^k e^{-2 phi(sqrt t)}``."""
    s = weight.singular_exponent
    e = k - s
    psi = lambda t: -2.0 * float(weight.smooth_phi_r(math.sqrt(t)))
    t_star = weight.peak_radius(k) ** 2
    if weight.kind == "custom_radial":
        t_star = min(t_star, weight.r_max ** 2)

    def g(t):
        return (e * math.log(t) if e != 0 else 0.0) + psi(t)

    g_star = g(t_star) if t_star > 0 else psi(0.0)
    step = max(1e-3 * t_star, 1e-3)
    t_hi = t_star + step
    limit_t = weight.r_max ** 2 if weight.kind == "custom_radial" else math.inf
    while g(t_hi) - g_star > -_DROP:
        if t_hi >= limit_t:
            raise DivergenceError("integrand has not decayed at the edge of the sampled range")
        step *= 2.0
        t_hi = min(t_star + step, limit_t)
        if step > 1e12 * (1.0 + t_star):
            raise DivergenceError("integrand does not decay")
    step = max(1e-3 * t_star, 1e-3)
    t_lo = t_star - step
    while t_lo > 0 and g(t_lo) - g_star > -_DROP:
        step *= 2.0
        t_lo = t_star - step
    return e, psi, g, g_star, t_star, max(t_lo, 0.0), t_hi


def _scaled_moment(weight, k, factor=None, breaks_t=(), epsrel=1e-13, epsabs=0.0):
    """``(g_star, I, err)`` with ``I = int factor(t) t^k e^{-2 phi(sqrt t)} e^{-g_star} dt``.

    The log of the integrand's peak, ``g_star``, is factored out.  Real
    ``factor`` only; ``breaks_t`` are points where it may jump.
    """
    e, psi, g, g_star, t_star, t_lo, t_hi = _moment_setup(weight, k)
    if factor is not None and any(0 < b < t_lo for b in breaks_t):
        t_lo = 0.0
    pts = sorted({t_lo, t_star, t_hi} | {b for b in breaks_t if t_lo < b < t_hi})
    fac = factor if factor is not None else (lambda t: 1.0)
    kw = dict(epsabs=epsabs, epsrel=epsrel, limit=400)
    total = err = 0.0
    for a, b in zip(pts[:-1], pts[1:]):
        if b <= a:
            continue
        if a == 0.0 and e < 1.0:
            # integrable power singularity (or kink) at 0
            if e != 0:
                v, ev = integrate.quad(lambda t: fac(t) * math.exp(psi(t) - g_star), a, b,
                                       weight="alg", wvar=(e, 0.0), **kw)
            else:
                v, ev = integrate.quad(lambda t: fac(t) * math.exp(psi(t) - g_star), a, b, **kw)
        else:
            v, ev = integrate.quad(lambda t: fac(t) * math.exp(g(t) - g_star), a, b, **kw)
        total, err = total + v, err + ev
    return g_star, total, err


def _log_norm_quad(weight, k):
    """``log nu_k`` by scipy quadrature in ``t = r^2``; NaN if not integrable."""
    if k - weight.singular_exponent <= -1.0:
        return math.nan, "non-integrable at the origin"
    try:
        g_star, total, err = _scaled_moment(weight, k)
    except DivergenceError as exc:
        return math.nan, str(exc)
    if not (total > 0 and math.isfinite(total)):
        return math.nan, "quadrature returned a non-positive value"
    if err > 1e-10 * total:
        return math.nan, f"quadrature error {err / total:.1e} above 1e-10"
    return _LOG_PI + g_star + math.log(total), None


def _mp_smooth_phi(weight, r, mp):
    k, a = weight.kind, weight.param
    if k == "gaussian":
        return a * r * r / 2
    if k == "power":
        return r ** a
    if k == "fock_sobolev":
        return r * r
    return None


def _log_norm_mp(weight, k, dps=30):
    """Extended-precision ``log nu_k`` as a decimal string (builtin kinds only)."""
    import mpmath as mp
    with mp.workdps(dps):
        s = mp.mpf(weight.singular_exponent)
        e = k - s
        t_star = mp.mpf(weight.peak_radius(k)) ** 2
        psi = lambda t: -2 * _mp_smooth_phi(weight, mp.sqrt(t), mp)
        g = lambda t: (e * mp.log(t) if e != 0 else 0) + psi(t)
        g_star = g(t_star) if t_star > 0 else psi(mp.mpf(0))
        width = mp.sqrt(1 + t_star)
        f = lambda t: mp.exp(g(t) - g_star) if t > 0 else (mp.exp(psi(t) - g_star) if e == 0 else 0)
        pts = [0, t_star] if t_star > 0 else [0]
        pts += [t_star + 4 * width, mp.inf]
        val = mp.quad(f, pts)
        return mp.nstr(mp.log(mp.pi) + g_star + mp.log(val), dps)


@dataclass
class KernelValue:
    """Kernel value with its certified truncation bound."""

    value: complex
    truncation_bound: float
    degree_used: int
    rounding_bound: float = 0.0


class KernelSeries:
    """Log-norms of the monomials ``z^k`` for ``valid_from <= k <= max_degree``.

    Attributes
    ----------
    weight : WeightModel
    max_degree : int
    log_norms : ndarray
        ``log ||z^k||^2`` indexed by ``k``; NaN for excluded degrees.
    valid_from : int
        First degree with a finite norm.
    entry_errors : dict
        Degrees whose quadrature failed, with a reason.
    """

    def __init__(self, weight, max_degree, log_norms, valid_from, entry_errors=None):
        self.weight = weight
        self.max_degree = int(max_degree)
        self.log_norms = np.asarray(log_norms, dtype=float)
        self.log_norms.setflags(write=False)
        self.valid_from = int(valid_from)
        self.entry_errors = dict(entry_errors or {})
        # the usable range ends before the first failed degree
        good = np.isfinite(self.log_norms[self.valid_from:])
        bad = np.flatnonzero(~good)
        self.top = self.valid_from + (int(bad[0]) if bad.size else good.size) - 1
        lg = self.log_norms[self.valid_from:self.top + 1]
        self._lg = lg
        self._inc = np.diff(lg)
        self._precise = {}
        self._lock = threading.Lock()

    @property
    def squared_norms(self):
        """``||z^k||^2`` (may overflow to ``inf`` at high degree)."""
        with np.errstate(over="ignore"):
            return np.exp(self.log_norms)

    @property
    def degrees(self):
        return np.arange(self.valid_from, self.top + 1)

    def __repr__(self):
        return (f"KernelSeries({self.weight.label}, max_degree={self.max_degree}, "
                f"valid_from={self.valid_from})")

    def precise_log_norms(self, upto):
        """Log-norms as ``np.longdouble`` refined by extended-precision quadrature
        for degrees below ``upto`` (builtin weights only)."""
        upto = min(int(upto), self.top + 1)
        out = self.log_norms[:self.top + 1].astype(np.longdouble)
        if self.weight.kind == "custom_radial":
            return out
        with self._lock:
            for k in range(self.valid_from, upto):
                if k not in self._precise:
                    self._precise[k] = np.longdouble(_log_norm_mp(self.weight, k))
        for k, v in self._precise.items():
            if k <= self.top:
                out[k] = v
        return out


def _weight_key(weight):
    if weight.kind == "custom_radial":
        return ("custom", id(weight))
    return (weight.kind, weight.param)


def degree_budget(weight, radius=6.0):
    """Basis size that carries kernels and Berezin transforms out to ``radius``.

    The kernel on ``|z| = r`` is dominated by degrees near ``r phi'(r)``.
    """
    if weight.kind == "custom_radial":
        radius = min(radius, weight.r_max)
    k = radius * float(weight.dphi_r(radius))
    return max(400, int(math.ceil(1.2 * k)) + 200)


def basis_norms(weight, max_degree):
    """Squared norms of the monomials up to ``max_degree``.

    Each ``nu_k`` is integrated in ``t = r^2`` around the peak of
    ``t^k exp(-2 phi)``, with the logarithm of the peak factored out.  For
    ``fock_sobolev`` degrees with ``2k + 1 - 2m <= -1`` are not integrable
    and are skipped (``valid_from``).

    Raises
    ------
    ConvergenceError
        If no degree up to ``max_degree`` has a finite norm.
    """
    max_degree = int(max_degree)
    if max_degree < 0:
        raise ValueError("max_degree must be nonnegative")
    key = _weight_key(weight)
    with _norm_lock:
        cached = _norm_cache.get(key)
    logs, errors = (list(cached[0]), dict(cached[1])) if cached else ([], {})
    for k in range(len(logs), max_degree + 1):
        v, msg = _log_norm_quad(weight, k)
        logs.append(v)
        if msg is not None and k >= weight.singular_exponent - 0.5:
            errors[k] = msg
    if len(logs) > (len(cached[0]) if cached else 0):
        with _norm_lock:
            _norm_cache[key] = (tuple(logs), errors)
    logs = np.array(logs[:max_degree + 1])
    finite = np.flatnonzero(np.isfinite(logs))
    if finite.size == 0:
        raise ConvergenceError(f"no finite monomial norm up to degree {max_degree}")
    errors = {k: v for k, v in errors.items() if k <= max_degree}
    return KernelSeries(weight, max_degree, logs, int(finite[0]), errors)


def orthonormal_basis(series, w, degrees):
    """``e_k(w) exp(-phi(w))`` for the given degrees, shape ``(len(w), len(degrees))``."""
    w = np.asarray(w, dtype=complex).ravel()
    degrees = np.asarray(degrees)
    r = np.abs(w)
    s = series.weight.singular_exponent
    with np.errstate(divide="ignore", invalid="ignore"):
        lr = np.log(r)
        ex = (degrees - s)[None, :] * lr[:, None]
        ex = np.where((degrees - s)[None, :] == 0, 0.0, ex)
        logmag = ex - 0.5 * series.log_norms[degrees][None, :] - series.weight.smooth_phi_r(r)[:, None]
        return np.exp(logmag + 1j * degrees[None, :] * np.angle(w)[:, None])


# ---- kernel evaluation -----------------------------------------------------

def _term_logs(series, ell):
    """``k*ell - log nu_k`` over the usable degrees."""
    return series.degrees * ell - series._lg


def _window(series, ell):
    """Degree window ``[lo, hi]`` holding the non-negligible terms for ``ell``."""
    if not np.isfinite(ell):
        return series.valid_from, series.valid_from
    L = _term_logs(series, ell)
    peak = int(np.argmax(L))
    keep = np.flatnonzero(L >= L[peak] - _WINDOW)
    return series.valid_from + int(keep[0]), series.valid_from + int(keep[-1])


def weighted_kernel(series, w, z, chunk=512):
    """``K(w, z) exp(-phi(w) - phi(z))`` on arrays (broadcast).

    Terms are summed in log space over a degree window that drops terms
    more than ``e^-38`` below the largest one.

    Raises
    ------
    TruncationBudgetError
        If a needed window runs past the computed degrees.
    """
    w, z = np.broadcast_arrays(np.asarray(w, dtype=complex), np.asarray(z, dtype=complex))
    shape = w.shape
    w = w.ravel()
    z = z.ravel()
    weight = series.weight
    s = weight.singular_exponent
    aw, az = np.abs(w), np.abs(z)
    with np.errstate(divide="ignore"):
        ell = np.log(aw) + np.log(az)
    shift = -weight.smooth_phi_r(aw) - weight.smooth_phi_r(az)
    phase = np.angle(w) - np.angle(z)
    out = np.zeros(w.size, dtype=complex)

    degenerate = ~np.isfinite(ell)
    if np.any(degenerate):
        k0 = series.valid_from
        e0 = k0 - s
        if e0 == 0:
            out[degenerate] = np.exp(shift[degenerate] - series._lg[0])
        elif e0 < 0:
            out[degenerate] = np.inf
    idx = np.flatnonzero(~degenerate)
    if idx.size:
        idx = idx[np.argsort(ell[idx], kind="stable")]
        for start in range(0, idx.size, chunk):
            sel = idx[start:start + chunk]
            lo, _ = _window(series, ell[sel[0]])
            _, hi = _window(series, ell[sel[-1]])
            if hi >= series.top and series.top < np.inf:
                L = _term_logs(series, ell[sel[-1]])
                if L[-1] >= L.max() - _WINDOW:
                    raise TruncationBudgetError(
                        f"kernel series needs degrees beyond {series.top} at "
                        f"|w z| = {math.exp(ell[sel[-1]]):.4g}; raise max_degree")
            ks = np.arange(lo, hi + 1)
            lg = series._lg[lo - series.valid_from:hi - series.valid_from + 1]
            ex = (ks - s)[None, :] * ell[sel][:, None]
            logmag = ex - lg[None, :] + shift[sel][:, None]
            terms = np.exp(logmag + 1j * ks[None, :] * phase[sel][:, None])
            out[sel] = terms.sum(axis=1)
    return out.reshape(shape)


def kernel_eval(series, z, w, tol=1e-14):
    """Reproducing kernel ``K(z, w)`` with a certified tail bound.

    Terms are summed in extended precision.  Since ``log nu_k`` is convex,
    consecutive term ratios never increase, so once the ratio is below 1
    (checked over a 5-term window) the tail is bounded by a geometric series.
    ``tol`` is relative to the magnitude of the partial sum.

    Returns
    -------
    KernelValue

    Raises
    ------
    TruncationBudgetError
        If the tail bound does not fall below ``tol`` by ``max_degree``.
    """
    z, w = complex(z), complex(w)
    k0, top = series.valid_from, series.top
    zeta = np.clongdouble(z) * np.conj(np.clongdouble(w))
    if zeta == 0:
        val = complex(np.exp(-series._lg[0])) if k0 == 0 else 0j
        return KernelValue(val, 0.0, k0)
    ks = np.arange(k0, top + 1)
    ell = np.log(np.abs(zeta))
    theta = np.angle(zeta)
    lg = series.precise_log_norms(0)[k0:top + 1]
    L = ks.astype(np.longdouble) * ell - lg
    ref = L.max()
    mag = np.exp(L - ref)
    terms = mag * (np.cos(ks * theta) + 1j * np.sin(ks * theta))
    # running sums and the geometric tail certificate
    with np.errstate(divide="ignore", invalid="ignore"):
        # 0/0 past the underflow point: both terms are negligible
        ratios = np.nan_to_num(mag[1:] / mag[:-1], nan=0.0)
    partial = np.cumsum(terms)
    n_used = None
    bound = np.inf
    for n in range(4, len(ks) - 1):
        if ratios[n] < 1.0 and np.all(ratios[n - 4:n + 1] < 1.0):
            b = mag[n + 1] / (1.0 - ratios[n])
            if b <= tol * abs(partial[n]):
                n_used, bound = n, b
                break
    if n_used is None:
        raise TruncationBudgetError(
            f"kernel tail bound not reached within degree {top} at |z w| = {abs(complex(zeta)):.4g}",
            partial_sum=complex(partial[-1]) * float(np.exp(min(ref, 700))))
    # extended-precision norms only matter under cancellation
    scale = float(np.sum(mag[:n_used + 1]))
    err_est = 2e-14 * scale
    if err_est > 1e-11 * abs(partial[n_used]) and series.weight.kind != "custom_radial":
        lg = series.precise_log_norms(k0 + n_used + 1)[k0:top + 1]
        L = ks.astype(np.longdouble) * ell - lg
        mag = np.exp(L - ref)
        terms = mag * (np.cos(ks * theta) + 1j * np.sin(ks * theta))
        partial = np.cumsum(terms)
        err_est = 1e-18 * scale * (n_used + 1)
    total = partial[n_used] * np.exp(ref)
    factor = float(np.exp(ref)) if ref < 11000 else math.inf
    return KernelValue(complex(total), float(bound) * factor, k0 + n_used,
                       float(err_est) * factor)


# ---- integrals against the kernel -----------------------------------------

def _integration_radius(integrand, center, start):
    radius, _ = scan_decay_radius(integrand, center, start, threshold=1e-15)
    if radius is None:
        raise DivergenceError(
            f"integrand has not decayed by radius {start * 4096:.3g} about {complex(center):.3g}")
    return radius


def _kernel_scale(series, z):
    """A length comparable to ``rho(z)``, from the kernel diagonal."""
    d = float(np.real(weighted_kernel(series, np.array([z]), np.array([z]))[0]))
    return 1.0 / math.sqrt(max(d, 1e-300))


def kernel_norm_p(series, z, p, rtol=1e-6, log=False):
    """``||K(., z)||_{p, phi}`` by adaptive polar cubature centred at ``z``.

    The integrand ``|K(w, z)|^p exp(-p phi(w))`` is integrated out to the
    radius where it falls below ``1e-15`` of its peak.  With ``log=True``
    the natural logarithm of the norm is returned (useful when
    ``phi(z)`` is large).
    """
    p = float(p)
    if not p > 0:
        raise ValueError("p must be positive")
    z = complex(z)
    f = lambda w: np.abs(weighted_kernel(series, w, z)) ** p
    radius = _integration_radius(f, z, _kernel_scale(series, z))
    val = polar_integrate(f, z, radius, rtol=rtol)
    phi_z = float(series.weight.phi_r(abs(z)))
    lognorm = math.log(float(val)) / p + phi_z
    return lognorm if log else math.exp(lognorm)


def bergman_project(series, f, z, rtol=1e-6, radius=None):
    """Bergman projection ``(P f)(z) = int K(z, w) f(w) exp(-2 phi(w)) dA(w)``.

    Parameters
    ----------
    series : KernelSeries
    f : callable
        Vectorised function of a complex array.
    z : complex

    Raises
    ------
    DivergenceError
        If ``f exp(-phi)`` times the kernel does not decay.
    """
    z = complex(z)
    weight = series.weight
    phi_z = float(weight.phi_r(abs(z)))

    def integrand(w):
        with np.errstate(over="ignore", invalid="ignore"):
            fw = np.asarray(f(w), dtype=complex) * np.exp(-weight.phi_r(np.abs(w)))
        kw = np.conj(weighted_kernel(series, w, z))
        return np.where(fw == 0, 0.0, kw * fw)

    if radius is None:
        start = max(abs(z), 0.0) + 4.0 * _kernel_scale(series, z)
        radius = _integration_radius(integrand, 0.0, start)
    breaks = tuple(b for b in getattr(f, "breaks", ()) if 0 < b < radius)
    res = polar_integrate(integrand, 0.0, radius, rtol=rtol, radial_breaks=breaks)
    # rtol is relative to the integral of |integrand|; when the phases cancel,
    # tighten it so the result itself meets rtol (at most 1e4-fold)
    gain = res.abs_integral / max(abs(res.complex_value), 1e-300)
    tight = max(rtol / gain, rtol * 1e-4, 1e-13) if gain > 0 else rtol
    if tight < 0.5 * rtol:
        res = polar_integrate(integrand, 0.0, radius, rtol=tight, radial_breaks=breaks)
    return res.complex_value * math.exp(phi_z)


def bergman_metric_density(series, z):
    """``Delta log K(z, z) / 4`` for the radial kernel.

    With ``t = |z|^2`` and weights ``p_k ∝ t^k / nu_k`` this equals
    ``Var_p[k] / t``; at the origin it is ``nu_0 / nu_1``.
    """
    a = abs(complex(z))
    lg = series._lg
    ks = series.degrees
    if a == 0.0:
        if series.valid_from != 0:
            return math.nan
        return math.exp(lg[0] - lg[1])
    t = a * a
    L = ks * math.log(t) - lg
    L = L - L.max()
    pk = np.exp(L)
    pk /= pk.sum()
    mean = np.dot(pk, ks)
    var = np.dot(pk, (ks - mean) ** 2)
    return var / t


# ---- pointwise estimates ---------------------------------------------------

KernelBoundReport = namedtuple(
    "KernelBoundReport",
    "C_fit eps_fit r0_fit near_diag_ratio_range violations slack n_pairs n_excluded")


def _kernel_pairs(series, field, pairs):
    z = np.array([p[0] for p in pairs], dtype=complex)
    w = np.array([p[1] for p in pairs], dtype=complex)
    kt = np.abs(weighted_kernel(series, w, z))
    dz = np.real(weighted_kernel(series, z, z))
    dw = np.real(weighted_kernel(series, w, w))
    rz = field.many(z)
    rw = field.many(w)
    return z, w, kt, dz, dw, rz, rw


def verify_kernel_bounds(series, field, grid, noise_floor=1e-11, eps_grid=None):
    """Fit ``|K(w,z)| e^{-phi(w)-phi(z)} rho(w) rho(z) <= C exp(-b x^eps)``.

    ``x = |z - w| / rho(z)``.  For each ``eps`` on the grid a linear program
    in ``(log C, b)`` with ``b >= 0`` minimises the total slack of the
    envelope over per-bin maxima; the ``eps`` with the least slack wins,
    ties broken towards larger ``eps``.  Pairs whose kernel value is below
    ``noise_floor`` times the diagonal scale carry no information and are
    excluded from the fit (reported in ``n_excluded``).

    The near-diagonal range is that of ``|K(w,z)| rho(z)^2 e^{-phi(w)-phi(z)}``
    over pairs with ``x < r0``; ``r0`` is the largest value in
    ``(0, 1]`` keeping max/min within a factor 10.

    Returns
    -------
    KernelBoundReport

    Raises
    ------
    EstimateViolationError
        If no ``eps`` admits a positive decay rate.
    """
    from scipy.optimize import linprog

    pairs = list(grid)
    if not pairs:
        raise InsufficientDataError("empty kernel grid")
    z, w, kt, dz, dw, rz, rw = _kernel_pairs(series, field, pairs)
    x = np.abs(z - w) / rz
    scaled = kt * rz * rw
    floor = noise_floor * np.sqrt(dz * dw) * rz * rw
    use = scaled > floor
    n_excluded = int(np.sum(~use))
    logs = np.log(scaled[use])
    xu = x[use]
    if eps_grid is None:
        eps_grid = np.round(np.arange(0.05, 2.0001, 0.05), 2)

    best = None
    if np.all(xu == 0) or np.ptp(logs) == 0 and np.all(xu == xu[0]):
        a = float(np.max(logs))
        best = (0.0, 2.0, a, 0.0)
    else:
        # per-bin maxima keep the LP small and the slack honest across scales
        keys = np.round(xu, 2)
        order = np.lexsort((-logs, keys))
        first = np.ones(order.size, dtype=bool)
        first[1:] = keys[order][1:] != keys[order][:-1]
        top_idx = order[first]          # the largest value in each x-bin
        for eps in eps_grid:
            xe = xu ** eps
            # minimise the slack on bin maxima subject to the envelope on all pairs
            c = np.array([top_idx.size, -xe[top_idx].sum()])
            A = np.column_stack([-np.ones(xu.size), xe])
            res = linprog(c, A_ub=A, b_ub=-logs, bounds=[(None, None), (0, None)],
                          method="highs")
            if res.status != 0:
                continue
            a, b = res.x
            # restore exact feasibility lost to the solver's tolerance
            a = max(a, float(np.max(logs + b * xe)))
            slack = float(np.mean(a - b * xe[top_idx] - logs[top_idx]))
            if b <= 1e-12:
                continue
            # prefer larger eps on ties (within 1e-9 relative slack)
            if best is None or slack < best[0] - 1e-9 * max(1.0, abs(best[0])) or (
                    abs(slack - best[0]) <= 1e-9 * max(1.0, abs(best[0])) and eps > best[1]):
                best = (slack, float(eps), float(a), float(b))
        if best is None:
            raise EstimateViolationError("no eps on the grid admits a positive decay rate")
    slack, eps, a, b = best
    # envelope with a round-off cushion
    envelope = a - b * xu ** eps + 1e-12 * (1 + abs(a))
    violations = int(np.sum(logs > envelope))

    # near-diagonal ratios
    ratio = kt * rz ** 2
    r0_fit = None
    rng = (math.nan, math.nan)
    for r0 in np.round(np.arange(1.0, 0.0, -0.05), 2):
        near = x < r0
        if not np.any(near):
            continue
        lo, hi = float(np.min(ratio[near])), float(np.max(ratio[near]))
        if lo > 0 and hi / lo <= 10.0:
            r0_fit, rng = float(r0), (lo, hi)
            break
    if r0_fit is None:
        near = x == 0
        if np.any(near):
            rng = (float(np.min(ratio[near])), float(np.max(ratio[near])))
            r0_fit = 0.0
    return KernelBoundReport(math.exp(a), eps, r0_fit, rng, violations, slack,
                             len(pairs), n_excluded)
