"""Radial weights, their Laplacian measure and the induced radius.

All weights here are radial, ``phi(z) = f(|z|)``.  The Laplacian is the flat
one, ``phi_xx + phi_yy``, which for radial functions reads
``f''(r) + f'(r)/r``.  The measure of a centred disk is available in closed
form through the radial mass ``M(s) = 2*pi*s*f'(s)`` (the absolutely
continuous part), and disks about other centres are reduced to a 1-D
integral of ``M`` along rays from the origin.
"""
import csv
import math
import threading
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import integrate, optimize
from scipy.interpolate import CubicSpline, PchipInterpolator

from .errors import (ConvergenceError, OutOfDomainError, SubharmonicityError,
                     UnresolvableRadiusError)

__all__ = [
    "WeightModel", "InducedRadiusField", "phi", "laplacian", "measure_of_disk",
    "induced_radius", "doubling_constant_estimate", "parse_weight_spec",
    "read_radial_csv",
]

_KINDS = ("gaussian", "power", "fock_sobolev", "custom_radial")


@dataclass(frozen=True, eq=False)
class WeightModel:
    """A subharmonic radial weight.

    Use the constructors :meth:`gaussian`, :meth:`power`, :meth:`fock_sobolev`
    and :meth:`custom_radial` rather than the raw initialiser.

    Attributes
    ----------
    kind : str
        One of ``gaussian``, ``power``, ``fock_sobolev``, ``custom_radial``.
    param : float
        ``alpha`` for the Gaussian weight, ``m`` for the others (unused for
        custom weights).
    atom_mass_at_origin : float
        Point mass of the Laplacian at 0 (``2*pi*m`` for ``fock_sobolev``).
    """

    kind: str
    param: float = 1.0
    atom_mass_at_origin: float = 0.0
    r_max: float = math.inf
    label: str = ""
    _samples: Optional[tuple] = field(default=None, repr=False)

    # ---- constructors -------------------------------------------------
    @classmethod
    def gaussian(cls, alpha=1.0):
        """``phi = alpha |z|^2 / 2``."""
        alpha = _positive(alpha, "alpha")
        return cls("gaussian", alpha, 0.0, math.inf, f"gaussian(alpha={alpha:g})")

    @classmethod
    def power(cls, m=2.0):
        """``phi = |z|^m``."""
        m = _positive(m, "m")
        return cls("power", m, 0.0, math.inf, f"power(m={m:g})")

    @classmethod
    def fock_sobolev(cls, m=1.0):
        """``phi = m log|z| + |z|^2``; the Laplacian has an atom ``2 pi m`` at 0."""
        m = _positive(m, "m")
        return cls("fock_sobolev", m, 2.0 * math.pi * m, math.inf,
                   f"fock_sobolev(m={m:g})")

    @classmethod
    def custom_radial(cls, r, phi_values, laplacian_values, label="custom_radial"):
        """Weight tabulated on a radial grid ``0 = r_0 < r_1 < ... < r_n``.

        ``phi`` is interpolated by a cubic spline; the Laplacian samples are
        interpolated separately (shape-preserving) and integrated for disk
        measures.
        """
        r = np.asarray(r, dtype=float)
        ph = np.asarray(phi_values, dtype=float)
        lap = np.asarray(laplacian_values, dtype=float)
        if r.ndim != 1 or r.size < 4 or ph.shape != r.shape or lap.shape != r.shape:
            raise ValueError("custom weight needs at least 4 matching (r, phi, laplacian) rows")
        if np.any(np.diff(r) <= 0):
            raise ValueError("custom weight radii must be strictly increasing")
        if r[0] != 0.0:
            raise ValueError("custom weight grid must start at r = 0")
        if not np.all(np.isfinite(ph)) or not np.all(np.isfinite(lap)):
            raise ValueError("custom weight samples must be finite")
        if np.any(lap < -1e-12 * max(1.0, np.max(np.abs(lap)))):
            bad = int(np.argmax(lap < 0))
            raise SubharmonicityError(f"negative Laplacian sample {lap[bad]:g} at r={r[bad]:g}")
        if not np.any(lap > 0):
            raise SubharmonicityError("Laplacian vanishes identically")
        lap = np.maximum(lap, 0.0)
        # phi is radial and smooth at 0, so phi'(0) = 0
        phi_spline = CubicSpline(r, ph, bc_type=((1, 0.0), "not-a-knot"))
        lap_interp = PchipInterpolator(r, lap)
        mass_density = PchipInterpolator(r, 2.0 * np.pi * lap * r)
        mass = mass_density.antiderivative()
        samples = (phi_spline, phi_spline.derivative(), lap_interp, mass)
        return cls("custom_radial", 0.0, 0.0, float(r[-1]), label, samples)

    # ---- radial profile ------------------------------------------------
    @property
    def singular_exponent(self):
        """Coefficient ``s`` of ``s log r`` in ``phi`` (nonzero for fock_sobolev)."""
        return self.param if self.kind == "fock_sobolev" else 0.0

    def _check_domain(self, r):
        if self.kind == "custom_radial" and np.any(r > self.r_max * (1 + 1e-12)):
            raise OutOfDomainError(
                f"radius {float(np.max(r)):g} beyond the sampled range [0, {self.r_max:g}]")

    def phi_r(self, r):
        """``phi`` as a function of ``r = |z|`` (vectorised)."""
        r = np.asarray(r, dtype=float)
        k, a = self.kind, self.param
        if k == "gaussian":
            return 0.5 * a * r * r
        if k == "power":
            return r ** a
        if k == "fock_sobolev":
            with np.errstate(divide="ignore"):
                return a * np.log(r) + r * r
        self._check_domain(r)
        return self._samples[0](r)

    def smooth_phi_r(self, r):
        """``phi`` minus its logarithmic part ``s log r``."""
        if self.kind == "fock_sobolev":
            r = np.asarray(r, dtype=float)
            return r * r
        return self.phi_r(r)

    def dphi_r(self, r):
        """Radial derivative ``f'(r)``."""
        r = np.asarray(r, dtype=float)
        k, a = self.kind, self.param
        if k == "gaussian":
            return a * r
        if k == "power":
            with np.errstate(divide="ignore", invalid="ignore"):
                out = a * r ** (a - 1.0)
            return np.where(r == 0, 0.0 if a > 1 else (a if a == 1 else np.inf), out)
        if k == "fock_sobolev":
            with np.errstate(divide="ignore"):
                return a / r + 2.0 * r
        self._check_domain(r)
        return self._samples[1](r)

    def lap_r(self, r):
        """Absolutely continuous Laplacian density at radius ``r``."""
        r = np.asarray(r, dtype=float)
        k, a = self.kind, self.param
        if k == "gaussian":
            return np.full_like(r, 2.0 * a)
        if k == "power":
            with np.errstate(divide="ignore", invalid="ignore"):
                out = a * a * r ** (a - 2.0)
            if a < 2:
                return np.where(r == 0, np.inf, out)
            return np.where(r == 0, 4.0 if a == 2 else 0.0, out)
        if k == "fock_sobolev":
            return np.full_like(r, 4.0)
        self._check_domain(r)
        return np.maximum(self._samples[2](r), 0.0)

    def mass_ac(self, s):
        """Absolutely continuous Laplacian mass of ``D(0, s)``."""
        s = np.asarray(s, dtype=float)
        s = np.maximum(s, 0.0)
        k, a = self.kind, self.param
        if k == "gaussian":
            return 2.0 * np.pi * a * s * s
        if k == "power":
            return 2.0 * np.pi * a * s ** a
        if k == "fock_sobolev":
            return 4.0 * np.pi * s * s
        self._check_domain(s)
        return self._samples[3](s)

    def mass(self, s):
        """Total Laplacian mass of the open disk ``D(0, s)``."""
        s = np.asarray(s, dtype=float)
        return self.mass_ac(s) + np.where(s > 0, self.atom_mass_at_origin, 0.0)

    def peak_radius(self, k):
        """Radius where ``r^k e^{-phi}`` peaks, i.e. the root of ``r f'(r) = k``."""
        k = float(k)
        if k <= 0:
            return 0.0
        if self.kind == "gaussian":
            return math.sqrt(k / self.param)
        if self.kind == "power":
            return (k / self.param) ** (1.0 / self.param)
        if self.kind == "fock_sobolev":
            return math.sqrt(max(k - self.param, 0.0) / 2.0)
        g = lambda r: r * float(self.dphi_r(r)) - k
        hi = self.r_max
        if g(hi) < 0:
            return hi
        return optimize.brentq(g, 0.0, hi, xtol=1e-14, rtol=1e-14)

    def to_spec(self):
        """Text form accepted by :func:`parse_weight_spec` (builtin kinds only)."""
        if self.kind == "gaussian":
            return f"kind=gaussian alpha={self.param!r}"
        if self.kind in ("power", "fock_sobolev"):
            return f"kind={self.kind} m={self.param!r}"
        return f"kind=custom_radial label={self.label}"


def _positive(x, name):
    x = float(x)
    if not (x > 0 and math.isfinite(x)):
        raise ValueError(f"{name} must be a positive finite number, got {x!r}")
    return x


def read_radial_csv(path):
    """Load a custom radial weight from a CSV file with header ``r,phi,laplacian``."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or [c.strip() for c in reader.fieldnames] != ["r", "phi", "laplacian"]:
            raise ValueError(f"{path}: expected header 'r,phi,laplacian'")
        rows = [(float(row["r"]), float(row["phi"]), float(row["laplacian"])) for row in reader]
    arr = np.array(rows, dtype=float)
    return WeightModel.custom_radial(arr[:, 0], arr[:, 1], arr[:, 2], label=f"custom_radial({path})")


def parse_weight_spec(text):
    """Parse ``kind=... key=value`` into a :class:`WeightModel`.

    Examples
    --------
    >>> parse_weight_spec("kind=power m=4").param
    4.0
    """
    fields_ = {}
    for tok in str(text).split():
        if "=" not in tok:
            raise ValueError(f"malformed weight token {tok!r} (expected key=value)")
        key, val = tok.split("=", 1)
        fields_[key.strip()] = val.strip()
    kind = fields_.pop("kind", None)
    if kind not in _KINDS:
        raise ValueError(f"unknown or missing weight kind {kind!r}; expected one of {_KINDS}")
    allowed = {"gaussian": {"alpha"}, "power": {"m"}, "fock_sobolev": {"m"},
               "custom_radial": {"file"}}[kind]
    extra = set(fields_) - allowed
    if extra:
        raise ValueError(f"unexpected weight parameter(s) {sorted(extra)} for kind {kind}")
    try:
        if kind == "gaussian":
            return WeightModel.gaussian(float(fields_.get("alpha", 1.0)))
        if kind == "power":
            return WeightModel.power(float(fields_.get("m", 2.0)))
        if kind == "fock_sobolev":
            return WeightModel.fock_sobolev(float(fields_.get("m", 1.0)))
    except (TypeError, ValueError) as exc:
        raise ValueError(f"bad weight parameter: {exc}") from None
    if "file" not in fields_:
        raise ValueError("custom_radial weight needs file=<path>")
    return read_radial_csv(fields_["file"])


# ---- pointwise evaluation -------------------------------------------------

def phi(weight, z):
    """Value of the weight at ``z`` (array input allowed)."""
    return weight.phi_r(np.abs(z))


def laplacian(weight, z):
    """Absolutely continuous density of ``Delta phi`` at ``z``.

    For ``fock_sobolev`` the atom at the origin is excluded; ask for
    ``weight.atom_mass_at_origin`` instead.
    """
    r = np.abs(z)
    if weight.kind == "fock_sobolev" and np.any(r == 0):
        raise OutOfDomainError("fock_sobolev Laplacian density is undefined at 0 (atom)")
    val = weight.lap_r(r)
    if np.any(val < 0):
        raise SubharmonicityError(f"negative Laplacian density {np.min(val):g}")
    return val if np.ndim(val) else float(val)


# ---- disk measures ----------------------------------------------------------

def measure_of_disk(weight, z, r, rtol=1e-10):
    """Laplacian measure of the open disk ``D(z, r)``.

    The disk is swept by rays from the origin; along each ray the measure of
    the covered segment is a difference of radial masses, so the area
    integral collapses to one angular integral.

    Parameters
    ----------
    weight : WeightModel
    z : complex
    r : float
        Disk radius, positive.
    rtol : float
        Relative tolerance of the angular quadrature.

    Raises
    ------
    ConvergenceError
        If the angular quadrature misses ``rtol``; ``best_estimate`` is set.
    """
    r = float(r)
    if not r > 0:
        raise ValueError("disk radius must be positive")
    a = abs(complex(z))
    M = weight.mass_ac
    if a == 0.0:
        val = float(M(r))
    elif a <= r:
        # origin inside: every ray exits once, at s(theta)
        def f(th):
            s = a * math.cos(th) + math.sqrt(max(r * r - (a * math.sin(th)) ** 2, 0.0))
            return float(M(s))
        pts = [0.5 * math.pi] if a == r else None
        val, err = integrate.quad(f, 0.0, math.pi, epsabs=0.0, epsrel=rtol,
                                  limit=200, points=pts)
        val /= math.pi
        err /= math.pi
        if err > 10 * rtol * abs(val) + 1e-300:
            raise ConvergenceError(f"disk measure quadrature error {err:.2e}", val, err)
    else:
        q = r / a

        def f(psi):
            cpsi = math.cos(psi)
            cth = math.sqrt(1.0 - (q * math.sin(psi)) ** 2)
            mid, half = a * cth, r * cpsi
            return float(M(mid + half) - M(mid - half)) * half / (a * cth)
        val, err = integrate.quad(f, 0.0, 0.5 * math.pi, epsabs=0.0, epsrel=rtol, limit=200)
        val /= math.pi
        err /= math.pi
        if err > 10 * rtol * abs(val) + 1e-300:
            raise ConvergenceError(f"disk measure quadrature error {err:.2e}", val, err)
    if a < r:
        val += weight.atom_mass_at_origin
    return val


def doubling_constant_estimate(weight, sample_points, radii):
    """Largest sampled ratio ``mu(D(z, 2r)) / mu(D(z, r))``.

    This is a lower bound for the doubling constant of the Laplacian measure.
    """
    pts = list(sample_points)
    radii = list(radii)
    if not pts or not radii:
        raise ValueError("need at least one sample point and one radius")
    best = 0.0
    for z in pts:
        for r in radii:
            small = measure_of_disk(weight, z, r)
            if small <= 0:
                return math.inf
            best = max(best, measure_of_disk(weight, z, 2.0 * r) / small)
    return best


# ---- induced radius ---------------------------------------------------------

def _solve_radius(weight, a, tol):
    """Radius ``rho`` with ``mu(D(a, rho)) = 1`` for a point at distance ``a``."""
    f = lambda r: measure_of_disk(weight, a, r) - 1.0
    lam = float(weight.lap_r(max(a, 1e-300))) if weight.kind != "custom_radial" or a <= weight.r_max else 0.0
    r = 1.0 / math.sqrt(math.pi * lam) if 0 < lam < math.inf else 1.0
    r = min(max(r, 1e-6), 1e6)
    if weight.atom_mass_at_origin >= 1.0:
        if a == 0.0:
            raise UnresolvableRadiusError(
                "the atom at the origin already exceeds unit mass; rho(0) is undefined")
    try:
        fr = f(r)
        lo = hi = None
        for _ in range(200):
            if fr >= 0:
                hi = r
                r *= 0.5
                fr = f(r)
                if fr < 0:
                    lo = r
                    break
            else:
                lo = r
                r *= 2.0
                fr = f(r)
                if fr >= 0:
                    hi = r
                    break
        if lo is None or hi is None:
            raise UnresolvableRadiusError(f"could not bracket rho at |z|={a:g}")
    except OutOfDomainError as exc:
        raise UnresolvableRadiusError(f"bracketing rho at |z|={a:g} left the weight's domain: {exc}") from None
    if weight.atom_mass_at_origin > 0 and lo <= a < hi:
        # the atom makes r -> mu(D) jump at r = |z|; rho may sit on the jump
        if f(a) < 0 <= f(a * (1 + 1e-15)):
            return a
    return optimize.brentq(f, lo, hi, xtol=1e-300, rtol=min(tol, 1e-12) * 0.5, maxiter=400)


class InducedRadiusField:
    """Cached evaluator of the induced radius ``rho(z)``.

    ``rho(z)`` is the radius with unit Laplacian mass, ``mu(D(z, rho)) = 1``.
    Point queries are solved exactly and memoised on a ``1e-6`` grid.
    :meth:`many` answers bulk queries from a radial interpolation table
    built to relative accuracy ``table_rtol``.

    Parameters
    ----------
    weight : WeightModel
    solver_tolerance : float
        Relative tolerance on ``mu(D(z, rho)) - 1``.
    """

    quantum = 1e-6

    def __init__(self, weight, solver_tolerance=1e-8, table_rtol=1e-7):
        self.weight = weight
        self.solver_tolerance = float(solver_tolerance)
        self.table_rtol = float(table_rtol)
        self.cache = {}
        self._lock = threading.Lock()
        self._table = None
        self._table_max = 0.0

    def _key(self, z):
        z = complex(z)
        return (round(z.real / self.quantum), round(z.imag / self.quantum))

    def __call__(self, z):
        return self.induced_radius(z)

    def induced_radius(self, z):
        """Exact (solver-accurate) ``rho(z)``."""
        key = self._key(z)
        val = self.cache.get(key)
        if val is None:
            zq = complex(key[0] * self.quantum, key[1] * self.quantum)
            val = _solve_radius(self.weight, abs(zq), self.solver_tolerance)
            with self._lock:
                self.cache[key] = val
        return val

    def radial(self, a):
        """``rho`` at distance ``a`` from the origin, without caching."""
        return _solve_radius(self.weight, float(a), self.solver_tolerance)

    # ---- bulk evaluation via a radial table ----
    def _build_table(self, amax):
        w = self.weight
        if w.kind == "gaussian":
            const = self.radial(0.0)
            self._table = lambda a: np.full(np.shape(a), const)
            self._table_max = math.inf
            return
        amax = max(amax, 1.0)
        if w.kind == "custom_radial":
            amax = min(amax, w.r_max)
        a0 = 0.0
        if w.atom_mass_at_origin >= 1.0:
            a0 = 1e-9
        nodes = np.unique(np.concatenate([
            np.linspace(a0, min(1.0, amax), 33),
            np.linspace(min(1.0, amax), amax, int(np.ceil(16 * amax)) + 1)]))
        vals = {float(x): self.radial(x) for x in nodes}
        pending = [(float(lo), float(hi)) for lo, hi in zip(nodes[:-1], nodes[1:])]
        for _ in range(60):
            xs = np.array(sorted(vals))
            interp = PchipInterpolator(xs, [vals[x] for x in xs])
            # the interpolant is local, so only intervals near a failure move
            failed = []
            for lo, hi in pending:
                m = 0.5 * (lo + hi)
                exact = self.radial(m)
                vals[m] = exact
                if abs(interp(m) - exact) > self.table_rtol * exact:
                    failed.append((lo, hi))
            if not failed:
                break
            xs = np.array(sorted(vals))
            flag = set()
            for lo, _hi in failed:
                i = int(np.searchsorted(xs, lo))
                flag.update(range(max(i - 2, 0), min(i + 4, xs.size - 1)))
            pending = [(float(xs[i]), float(xs[i + 1])) for i in sorted(flag)]
        else:
            raise ConvergenceError("radial rho table did not reach its tolerance")
        xs = np.array(sorted(vals))
        self._table = PchipInterpolator(xs, [vals[x] for x in xs])
        self._table_max = float(xs[-1])
        self._table_min = float(xs[0])

    def many(self, zs):
        """``rho`` at many points, via the radial table (relative error ``table_rtol``)."""
        zs = np.asarray(zs)
        a = np.abs(zs)
        amax = float(np.max(a)) if a.size else 0.0
        if self._table is None or amax > self._table_max:
            with self._lock:
                if self._table is None or amax > self._table_max:
                    self._build_table(max(amax * 1.25, 2 * self._table_max))
        if self.weight.atom_mass_at_origin >= 1.0 and np.any(a < self._table_min):
            raise UnresolvableRadiusError("rho is undefined at the origin for this weight")
        return np.asarray(self._table(a), dtype=float)


def induced_radius(field_, z):
    """``rho(z)`` from an :class:`InducedRadiusField` (cached)."""
    return field_.induced_radius(z)
