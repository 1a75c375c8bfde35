"""Adaptive cubature on disks in polar coordinates.

The integrators here are vectorised: the integrand receives a 1-D complex
array of plane points and must return an array of the same shape.  Cells in
the ``(t, theta)`` rectangle are refined by 2x2 bisection, using the
difference between a tensor Gauss-Legendre rule on a cell and on its four
children as the error indicator.
"""
from functools import lru_cache

import numpy as np

from .errors import ConvergenceError

__all__ = ["gauss_legendre", "polar_integrate", "scan_decay_radius", "PolarResult"]


@lru_cache(maxsize=None)
def gauss_legendre(n):
    """Nodes and weights of the n-point Gauss-Legendre rule on [-1, 1]."""
    x, w = np.polynomial.legendre.leggauss(n)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


class PolarResult(float):
    """Float subclass carrying the error estimate and cell count."""

    def __new__(cls, value, error=0.0, cells=0, abs_integral=0.0):
        obj = float.__new__(cls, np.real(value))
        obj.complex_value = complex(value)
        obj.error = float(error)
        obj.cells = int(cells)
        obj.abs_integral = float(abs_integral)
        return obj


def _cell_rule(func, center, t0, t1, a0, a1, order):
    """Tensor GL rule on many polar cells at once.

    Returns (integral, integral of |f|) per cell.
    """
    x, w = gauss_legendre(order)
    ht = 0.5 * (t1 - t0)
    ha = 0.5 * (a1 - a0)
    # (cells, order) node coordinates
    t = (0.5 * (t0 + t1))[:, None] + ht[:, None] * x[None, :]
    a = (0.5 * (a0 + a1))[:, None] + ha[:, None] * x[None, :]
    pts = center + t[:, :, None] * np.exp(1j * a[:, None, :])
    vals = np.asarray(func(pts.ravel()), dtype=complex).reshape(pts.shape)
    wt = (w[None, :] * ht[:, None] * t)[:, :, None] * (w[None, :] * ha[:, None])[:, None, :]
    return (vals * wt).sum(axis=(1, 2)), (np.abs(vals) * wt).sum(axis=(1, 2))


def _children(t0, t1, a0, a1):
    tm = 0.5 * (t0 + t1)
    am = 0.5 * (a0 + a1)
    ct0 = np.concatenate([t0, t0, tm, tm])
    ct1 = np.concatenate([tm, tm, t1, t1])
    ca0 = np.concatenate([a0, am, a0, am])
    ca1 = np.concatenate([am, a1, am, a1])
    return ct0, ct1, ca0, ca1


def polar_integrate(func, center, radius, rtol=1e-6, atol=0.0, radial_breaks=(),
                    n_radial=6, n_angular=8, order=6, max_cells=400_000,
                    inner_radius=0.0, theta_range=(0.0, 2.0 * np.pi)):
    """Integrate ``func`` over the disk (or annulus) about ``center``.

    Parameters
    ----------
    func : callable
        Vectorised integrand of a complex argument.
    center : complex
        Pole of the polar coordinates.
    radius : float
        Outer radius of the integration disk.
    rtol, atol : float
        Stop when the summed error indicator is below
        ``max(atol, rtol * integral of |func|)``.
    radial_breaks : sequence of float
        Radii (measured from ``center``) where the integrand may jump; they
        become initial cell edges.
    inner_radius : float
        Integrate over the annulus ``inner_radius <= |w - center| < radius``.
    theta_range : (float, float)
        Restrict to a sector; the integrand is assumed negligible outside.

    Returns
    -------
    PolarResult
        ``float(result)`` is the real part; ``result.complex_value`` holds the
        full complex value.

    Raises
    ------
    ConvergenceError
        If ``max_cells`` is exhausted; ``best_estimate`` carries the value.
    """
    center = complex(center)
    edges = [float(inner_radius), float(radius)]
    edges += [b for b in radial_breaks if inner_radius < b < radius]
    edges = np.unique(edges)
    t_edges = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        k = max(1, int(np.ceil(n_radial * (hi - lo) / (radius - inner_radius))))
        t_edges.append(np.linspace(lo, hi, k + 1)[:-1])
    t_edges = np.append(np.concatenate(t_edges), radius)
    a_edges = np.linspace(theta_range[0], theta_range[1], n_angular + 1)
    T0, A0 = np.meshgrid(t_edges[:-1], a_edges[:-1], indexing="ij")
    T1, A1 = np.meshgrid(t_edges[1:], a_edges[1:], indexing="ij")
    t0, t1, a0, a1 = T0.ravel(), T1.ravel(), A0.ravel(), A1.ravel()

    own, own_abs = _cell_rule(func, center, t0, t1, a0, a1, order)
    done_val = 0.0 + 0.0j
    done_abs = 0.0
    done_err = 0.0
    ncells = t0.size
    while True:
        ct0, ct1, ca0, ca1 = _children(t0, t1, a0, a1)
        cv, cabs = _cell_rule(func, center, ct0, ct1, ca0, ca1, order)
        m = t0.size
        ref = cv[:m] + cv[m:2 * m] + cv[2 * m:3 * m] + cv[3 * m:]
        ref_abs = cabs[:m] + cabs[m:2 * m] + cabs[2 * m:3 * m] + cabs[3 * m:]
        err = np.abs(ref - own)
        total_abs = done_abs + ref_abs.sum()
        tol = max(atol, rtol * total_abs)
        if done_err + err.sum() <= tol or not np.isfinite(err.sum()):
            value = done_val + ref.sum()
            if not np.isfinite(value):
                raise ConvergenceError("non-finite integrand values", value, np.inf)
            return PolarResult(value, done_err + err.sum(), ncells, total_abs)
        if ncells > max_cells:
            value = done_val + ref.sum()
            raise ConvergenceError(
                f"polar cubature did not converge within {max_cells} cells "
                f"(error {done_err + err.sum():.3e} > tol {tol:.3e})",
                value, done_err + err.sum())
        # split the largest-error cells until what is left fits half the budget
        order_idx = np.argsort(err)[::-1]
        cum_rest = err.sum() - np.cumsum(err[order_idx])
        budget = 0.5 * max(tol - done_err, 0.0)
        n_split = int(np.searchsorted(-cum_rest, -budget)) + 1
        n_split = min(max(n_split, 1), m)
        split = np.zeros(m, dtype=bool)
        split[order_idx[:n_split]] = True
        keep = ~split
        done_val += ref[keep].sum()
        done_abs += ref_abs[keep].sum()
        done_err += err[keep].sum()
        sel = np.concatenate([split, split, split, split])
        t0, t1, a0, a1 = ct0[sel], ct1[sel], ca0[sel], ca1[sel]
        own = cv[sel]
        ncells += 3 * n_split


def scan_decay_radius(func_abs, center, start, threshold=1e-14, cap_factor=4096.0,
                      n_angles=32, growth=2.0 ** 0.25):
    """Radius beyond which ``func_abs`` stays below ``threshold`` of its peak.

    ``func_abs`` is sampled on rings about ``center`` at radii growing
    geometrically from ``start``.  Returns ``(radius, peak)``; ``radius`` is
    ``None`` if the integrand had not decayed by ``start * cap_factor``.
    """
    angles = 2.0 * np.pi * (np.arange(n_angles) + 0.5) / n_angles
    ring = np.exp(1j * angles)
    peak = float(np.max(np.abs(func_abs(np.array([complex(center)])))))
    t = start / 8.0
    last_big = 0.0
    below = 0
    while t < start * cap_factor:
        v = np.abs(func_abs(center + t * ring))
        vmax = float(np.max(v))
        if vmax > peak:
            peak = vmax
        if vmax > threshold * peak:
            last_big = t
            below = 0
        else:
            below += 1
            # several consecutive quiet rings past the last loud one
            if below >= 4 and t > 2.0 * max(last_big, start):
                return max(last_big * growth ** 2, start), peak
        t *= growth
    return None, peak
