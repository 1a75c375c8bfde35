"""Lattices adapted to ``rho`` and the metric with density ``1/rho``.

The metric ``d_phi`` is the length metric of ``|dz| / rho(z)``.  It is
discretised on a regular grid whose edges join each node to its neighbours
along a fixed set of directions; an edge costs its length divided by
``rho`` at its midpoint.
"""
import math
from collections import namedtuple
from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import connected_components, dijkstra
from scipy.spatial import cKDTree

from .errors import InsufficientDataError, OutOfDomainError

try:
    import numba
except ImportError:  # pragma: no cover
    numba = None

__all__ = [
    "Lattice", "build_lattice", "covering_multiplicity", "check_lattice",
    "MetricGraph", "metric_distance", "verify_distance_bounds", "DistanceBoundReport",
    "ring_points", "radial_distance_from_origin",
]

# undirected stencil directions; each is used with both signs
_DIRS_8 = [(1, 0), (0, 1), (1, 1), (1, -1)]
_DIRS_16 = _DIRS_8 + [(2, 1), (1, 2), (2, -1), (1, -2)]
_DIRS_32 = _DIRS_16 + [(3, 1), (1, 3), (3, -1), (1, -3), (3, 2), (2, 3), (3, -2), (2, -3)]
STENCILS = {8: _DIRS_8, 16: _DIRS_16, 32: _DIRS_32}


# ---- point sets adapted to rho ---------------------------------------------

def ring_points(field, radius, spacing_factor):
    """Rings about 0 with radial and angular spacing ``spacing_factor * rho``.

    Points are returned ordered by modulus, then by angle in ``[0, 2 pi)``;
    the last ring sits exactly at ``radius``.
    """
    radii = [0.0]
    s = 0.0
    while s < radius:
        h = spacing_factor * float(field.many(np.array([s]))[0])
        s = min(s + h, radius)
        radii.append(s)
    radii = np.array(radii)
    rho = field.many(radii)
    pts = [np.zeros(1, dtype=complex)]
    for s, rh in zip(radii[1:], rho[1:]):
        n = max(6, int(math.ceil(2.0 * math.pi * s / (spacing_factor * rh))))
        pts.append(s * np.exp(2j * np.pi * np.arange(n) / n))
    return np.concatenate(pts)


def _greedy_python(x, y, sep_half, cell, kappa_r):
    n = x.size
    accepted = np.zeros(n, dtype=bool)
    grid = {}
    for i in range(n):
        cx, cy = int(math.floor(x[i] / cell)), int(math.floor(y[i] / cell))
        reach = int(math.ceil((sep_half[i] + sep_half.max()) / cell))
        ok = True
        for gx in range(cx - reach, cx + reach + 1):
            for gy in range(cy - reach, cy + reach + 1):
                for j in grid.get((gx, gy), ()):
                    lim = sep_half[i] + sep_half[j]
                    if (x[i] - x[j]) ** 2 + (y[i] - y[j]) ** 2 < lim * lim:
                        ok = False
                        break
                if not ok:
                    break
            if not ok:
                break
        if ok:
            accepted[i] = True
            grid.setdefault((cx, cy), []).append(i)
    return accepted


if numba is not None:
    @numba.njit(cache=True)
    def _greedy_numba(x, y, sep_half, cell, xmin, ymin, nx, ny):
        n = x.size
        accepted = np.zeros(n, dtype=np.bool_)
        head = -np.ones(nx * ny, dtype=np.int64)
        nxt = -np.ones(n, dtype=np.int64)
        smax = 0.0
        for i in range(n):
            cx = int((x[i] - xmin) / cell)
            cy = int((y[i] - ymin) / cell)
            reach = int(math.ceil((sep_half[i] + smax) / cell))
            ok = True
            for gx in range(max(cx - reach, 0), min(cx + reach + 1, nx)):
                if not ok:
                    break
                for gy in range(max(cy - reach, 0), min(cy + reach + 1, ny)):
                    j = head[gx * ny + gy]
                    while j >= 0:
                        lim = sep_half[i] + sep_half[j]
                        dx = x[i] - x[j]
                        dy = y[i] - y[j]
                        if dx * dx + dy * dy < lim * lim:
                            ok = False
                            break
                        j = nxt[j]
                    if not ok:
                        break
            if ok:
                accepted[i] = True
                c = cx * ny + cy
                nxt[i] = head[c]
                head[c] = i
                if sep_half[i] > smax:
                    smax = sep_half[i]
        return accepted


def _greedy(points, sep_half):
    x = np.ascontiguousarray(points.real)
    y = np.ascontiguousarray(points.imag)
    cell = max(2.0 * float(np.min(sep_half)), 1e-12)
    if numba is None:
        return _greedy_python(x, y, sep_half, cell, None)
    xmin, ymin = float(x.min()) - cell, float(y.min()) - cell
    nx = int((x.max() - xmin) / cell) + 2
    ny = int((y.max() - ymin) / cell) + 2
    while nx * ny > 5e7:   # keep the cell table bounded
        cell *= 2.0
        nx = int((x.max() - xmin) / cell) + 2
        ny = int((y.max() - ymin) / cell) + 2
    return _greedy_numba(x, y, np.ascontiguousarray(sep_half), cell, xmin, ymin, nx, ny)


@dataclass
class Lattice:
    """An ``r``-lattice of ``D(0, domain_radius)``.

    Attributes
    ----------
    points : ndarray of complex
    rho : ndarray
        ``rho`` at the points.
    r : float
    domain_radius : float
    kappa : float
        Greedy separation factor: points are at least
        ``kappa * (r/2) * (rho_i + rho_j)`` apart.
    """

    points: np.ndarray
    rho: np.ndarray
    r: float
    domain_radius: float
    kappa: float
    candidate_factor: float

    def __len__(self):
        return self.points.size

    def disjointness_violations(self):
        """Pairs with ``|a_i - a_j| < (r/5)(rho_i + rho_j)``."""
        tree = cKDTree(np.column_stack([self.points.real, self.points.imag]))
        reach = 0.4 * self.r * float(np.max(self.rho))
        ij = tree.query_pairs(reach, output_type="ndarray")
        if ij.size == 0:
            return 0
        i, j = ij[:, 0], ij[:, 1]
        gap = np.abs(self.points[i] - self.points[j])
        return int(np.sum(gap < 0.2 * self.r * (self.rho[i] + self.rho[j])))

    def uncovered(self, probes, rho_max=None, k=16):
        """Probes outside every ``D(a_j, r rho(a_j))``."""
        probes = np.asarray(probes, dtype=complex)
        if self.points.size == 1:
            return probes[np.abs(probes - self.points[0]) >= self.r * self.rho[0]]
        tree = cKDTree(np.column_stack([self.points.real, self.points.imag]))
        k = min(k, self.points.size)
        out = []
        for start in range(0, probes.size, 200_000):
            p = probes[start:start + 200_000]
            xy = np.column_stack([p.real, p.imag])
            d, idx = tree.query(xy, k=1)
            covered = d < self.r * self.rho[idx]
            if not np.all(covered):
                # the nearest centre may have a smaller disk than a farther one
                rest = np.flatnonzero(~covered)
                d, idx = tree.query(xy[rest], k=k)
                covered[rest] = np.any(d < self.r * self.rho[idx], axis=1)
            out.append(p[~covered])
        return np.concatenate(out)

    def to_csv(self, path):
        from .export import write_csv
        rows = [(i, p.real, p.imag, rh) for i, (p, rh) in enumerate(zip(self.points, self.rho))]
        write_csv(path, ["index", "re", "im", "rho"], rows)


def build_lattice(field, r, domain_radius, kappa=0.8, candidate_factor=0.2, probe_factor=0.1):
    """Greedy ``r``-lattice covering ``D(0, domain_radius)``.

    Candidates lie on rings about 0 with spacing ``candidate_factor * r *
    rho``, ordered by modulus then angle.  A candidate is accepted when it is
    at least ``kappa * (r/2) * (rho_c + rho_a)`` from every accepted point.
    Covering is then checked on a finer ring grid (spacing
    ``probe_factor * r * rho``); on failure the candidate grid is refined
    once.

    Raises
    ------
    RuntimeError
        If covering fails after the refinement.
    """
    r = float(r)
    domain_radius = float(domain_radius)
    if not (r > 0 and domain_radius > 0):
        raise ValueError("r and domain_radius must be positive")
    if not 0.4 < kappa < 1.0:
        raise ValueError("kappa must lie in (0.4, 1) for disjointness and covering")
    probes = ring_points(field, domain_radius, probe_factor * r)
    factor = candidate_factor
    for _attempt in range(2):
        cand = ring_points(field, domain_radius, factor * r)
        rho_c = field.many(cand)
        acc = _greedy(cand, 0.5 * kappa * r * rho_c)
        lat = Lattice(cand[acc], rho_c[acc], r, domain_radius, kappa, factor)
        if lat.uncovered(probes).size == 0:
            return lat
        factor *= 0.5
    raise RuntimeError(
        f"lattice covering failed on {lat.uncovered(probes).size} probes after refinement")


def check_lattice(lattice, field, probe_factor=0.1):
    """``(disjointness_violations, uncovered_probe_count)`` on a fresh probe grid."""
    probes = ring_points(field, lattice.domain_radius, probe_factor * lattice.r)
    return lattice.disjointness_violations(), int(lattice.uncovered(probes).size)


def covering_multiplicity(lattice, field, m, probes):
    """Largest number of disks ``D^r(a_j)`` meeting ``D^{m r}(z)`` over probes ``z``."""
    probes = np.asarray(list(probes) if not isinstance(probes, np.ndarray) else probes, dtype=complex)
    if probes.size == 0:
        return 0
    rho_p = field.many(probes)
    pts = lattice.points
    r = lattice.r
    tree = cKDTree(np.column_stack([pts.real, pts.imag]))
    amod = np.abs(pts)
    global_reach = r * float(np.max(lattice.rho))
    order = np.argsort(np.abs(probes))
    best = 0
    for start in range(0, order.size, 4096):
        sel = order[start:start + 4096]
        z, rz = probes[sel], rho_p[sel]
        a = np.abs(z)
        # lattice disks that can reach this band of probes
        reach = m * r * float(np.max(rz)) + global_reach
        band = (amod >= a.min() - reach) & (amod <= a.max() + reach)
        if not np.any(band):
            continue
        radius = m * r * rz + r * float(np.max(lattice.rho[band]))
        lists = tree.query_ball_point(np.column_stack([z.real, z.imag]), radius)
        counts = np.array([len(c) for c in lists])
        if counts.sum() == 0:
            continue
        j = np.concatenate([np.asarray(c, dtype=int) for c in lists])
        i = np.repeat(np.arange(sel.size), counts)
        hit = np.abs(pts[j] - z[i]) < r * lattice.rho[j] + m * r * rz[i]
        best = max(best, int(np.max(np.bincount(i[hit], minlength=sel.size))))
    return best


# ---- the metric d_phi ---------------------------------------------------------

def radial_distance_from_origin(field, a, n=2001):
    """``d_phi(0, z)`` for ``|z| = a``: rays from 0 are geodesics of a radial density."""
    s = np.linspace(0.0, float(a), n)
    from scipy.integrate import simpson
    return float(simpson(1.0 / field.many(s), x=s)) if a > 0 else 0.0


class MetricGraph:
    """Grid discretisation of ``d_phi`` on the box ``[-L, L]^2``.

    Parameters
    ----------
    field : InducedRadiusField
    half_width : float
        ``L``.
    grid_spacing : float
    stencil : {8, 16, 32}
        Number of edge directions per node.  Worst-case length anisotropy of
        straight segments is 8.2%, 2.8% and 1.3% respectively.
    """

    def __init__(self, field, half_width, grid_spacing, stencil=32):
        if stencil not in STENCILS:
            raise ValueError(f"stencil must be one of {sorted(STENCILS)}")
        self.field = field
        self.half_width = float(half_width)
        n = int(round(2.0 * self.half_width / grid_spacing))
        if n < 2:
            raise ValueError("grid spacing too coarse for the box")
        self.n = n + 1
        self.grid_spacing = 2.0 * self.half_width / n
        self.stencil = stencil
        h = self.grid_spacing
        ax = -self.half_width + h * np.arange(self.n)
        X, Y = np.meshgrid(ax, ax, indexing="ij")
        self.axis = ax
        self.nodes = (X + 1j * Y).ravel()
        self.node_rho = field.many(self.nodes)
        rows, cols, vals = [], [], []
        idx = np.arange(self.nodes.size).reshape(self.n, self.n)
        for dx, dy in STENCILS[stencil]:
            i0 = slice(max(0, -dx), self.n - max(0, dx))
            j0 = slice(max(0, -dy), self.n - max(0, dy))
            i1 = slice(max(0, dx), self.n - max(0, -dx))
            j1 = slice(max(0, dy), self.n - max(0, -dy))
            a = idx[i0, j0].ravel()
            b = idx[i1, j1].ravel()
            mid = 0.5 * (self.nodes[a] + self.nodes[b])
            length = h * math.hypot(dx, dy)
            rows.append(a)
            cols.append(b)
            vals.append(length / field.many(mid))
        self._rows = np.concatenate(rows)
        self._cols = np.concatenate(cols)
        self._vals = np.concatenate(vals)
        if not np.all(np.isfinite(self._vals)) or np.any(self._vals <= 0):
            raise ValueError("non-positive or non-finite edge weight")
        self.matrix = sparse.csr_matrix((self._vals, (self._rows, self._cols)),
                                        shape=(self.nodes.size,) * 2)
        ncomp, _ = connected_components(self.matrix, directed=False)
        if ncomp != 1:
            raise ValueError("metric graph is not connected")
        self.grid_tolerance = 2.0 * math.sqrt(2.0) * h / float(np.min(self.node_rho))
        self._tree = cKDTree(np.column_stack([self.nodes.real, self.nodes.imag]))

    # ---- helpers ----
    def contains(self, z):
        z = complex(z)
        L = self.half_width * (1 + 1e-12)
        return abs(z.real) <= L and abs(z.imag) <= L

    def _check(self, z):
        if not self.contains(z):
            raise OutOfDomainError(f"point {complex(z)} outside the graph box [-{self.half_width}, {self.half_width}]^2")

    def _attach(self, z):
        """Nodes within ``2h`` of ``z`` and straight-edge costs to them."""
        nb = self._tree.query_ball_point([z.real, z.imag], 2.0 * self.grid_spacing)
        nb = np.asarray(sorted(nb), dtype=int)
        mid = 0.5 * (self.nodes[nb] + z)
        cost = np.abs(self.nodes[nb] - z) / self.field.many(mid)
        return nb, cost

    def node_index(self, z):
        """Index of the grid node at ``z``, or ``None`` if ``z`` is not a node."""
        h = self.grid_spacing
        i = (z.real + self.half_width) / h
        j = (z.imag + self.half_width) / h
        if abs(i - round(i)) < 1e-9 and abs(j - round(j)) < 1e-9:
            return int(round(i)) * self.n + int(round(j))
        return None

    def _augmented(self, points):
        """Graph with virtual nodes for ``points`` appended; returns their indices."""
        N = self.nodes.size
        nodes = [self.node_index(p) for p in points]
        if all(k is not None for k in nodes):
            return self.matrix, nodes
        rows, cols, vals = [self._rows], [self._cols], [self._vals]
        index = []
        extra = 0
        for p in points:
            k = self.node_index(p)
            if k is not None:
                index.append(k)
                continue
            v = N + extra
            extra += 1
            nb, cost = self._attach(p)
            rows.append(np.full(nb.size, v))
            cols.append(nb)
            vals.append(cost)
            index.append(v)
        # direct edges between close virtual points
        virt = [(i, p) for i, p in zip(index, points) if i >= N]
        for a in range(len(virt)):
            for b in range(a + 1, len(virt)):
                (ia, pa), (ib, pb) = virt[a], virt[b]
                if abs(pa - pb) <= 2.0 * self.grid_spacing and ia != ib:
                    rows.append(np.array([ia]))
                    cols.append(np.array([ib]))
                    vals.append(np.array([abs(pa - pb) / float(self.field.many(np.array([0.5 * (pa + pb)]))[0]) + 1e-300]))
        M = sparse.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                              shape=(N + extra, N + extra))
        return M, index

    def distances_from(self, z, targets=None, limit=np.inf):
        """``d_phi`` from ``z`` to ``targets`` (default: every grid node)."""
        z = complex(z)
        self._check(z)
        tg = [] if targets is None else [complex(t) for t in targets]
        for t in tg:
            self._check(t)
        M, idx = self._augmented([z] + tg)
        d = dijkstra(M, directed=False, indices=idx[0], limit=limit)
        if targets is None:
            return d[:self.nodes.size]
        return d[idx[1:]]

    def distance(self, z, w):
        """Symmetric ``d_phi(z, w)``: endpoints are put in a canonical order."""
        z, w = complex(z), complex(w)
        self._check(z)
        self._check(w)
        if z == w:
            return 0.0
        a, b = sorted([z, w], key=lambda c: (c.real, c.imag))
        M, idx = self._augmented([a, b])
        d = dijkstra(M, directed=False, indices=idx[0])
        return float(d[idx[1]])

    def distance_field(self, z=0.0):
        """Distances from ``z`` to every node, shaped ``(n, n)`` (axis 0 is Re)."""
        return self.distances_from(z).reshape(self.n, self.n)

    def to_csv(self, path, z=0.0):
        from .export import write_csv
        d = self.distances_from(z)
        write_csv(path, ["re", "im", "d_phi_from_origin"],
                  [(p.real, p.imag, v) for p, v in zip(self.nodes, d)])


def metric_distance(graph, z, w):
    """Grid approximation of ``d_phi(z, w)``."""
    return graph.distance(z, w)


DistanceBoundReport = namedtuple(
    "DistanceBoundReport", "delta_fit C_fit violations C_near C_far n_near n_far")


def verify_distance_bounds(graph, field, samples, r, deltas=None):
    """Fit the envelopes relating ``d_phi`` to ``x = |z - w| / rho(z)``.

    Near pairs (``x < r``) give ``C`` with ``x / C <= d <= C x``; far pairs
    give ``delta`` and ``C`` with ``x^delta / C <= d <= C x^(2 - delta)``,
    ``delta`` chosen on a grid in ``(0, 1)`` to minimise ``C``.  The fits are
    the empirical envelopes, so violations only come from round-off.

    Raises
    ------
    InsufficientDataError
        With fewer than 10 far pairs.
    """
    samples = [(complex(a), complex(b)) for a, b in samples]
    z = np.array([s[0] for s in samples], dtype=complex)
    w = np.array([s[1] for s in samples], dtype=complex)
    rz = field.many(z) if z.size else np.zeros(0)
    x = np.abs(z - w) / rz if z.size else np.zeros(0)
    near = (x < r) & (x > 0)
    far = x >= r
    if int(np.sum(far)) < 10:
        raise InsufficientDataError(f"need at least 10 far pairs, got {int(np.sum(far))}")
    d = np.empty(z.size)
    # group by source to share Dijkstra runs
    order = {}
    for i, zi in enumerate(z):
        order.setdefault(zi, []).append(i)
    for zi, ids in order.items():
        d[ids] = graph.distances_from(zi, w[ids])
    C_near = 1.0
    if np.any(near):
        C_near = float(max(np.max(d[near] / x[near]), np.max(x[near] / d[near])))
    if deltas is None:
        deltas = np.round(np.arange(0.01, 1.0, 0.01), 2)
    xf, df = x[far], d[far]
    best = None
    for delta in deltas:
        c = float(max(np.max(xf ** delta / df), np.max(df / xf ** (2.0 - delta))))
        if best is None or c < best[1]:
            best = (float(delta), c)
    delta, C_far = best
    C = max(C_near, C_far)
    slack = 1.0 + 1e-12
    viol = 0
    if np.any(near):
        viol += int(np.sum(d[near] * C * slack < x[near]) + np.sum(d[near] > C * slack * x[near]))
    viol += int(np.sum(df * C * slack < xf ** delta) + np.sum(df > C * slack * xf ** (2.0 - delta)))
    return DistanceBoundReport(delta, C, viol, C_near, C_far, int(np.sum(near)), int(np.sum(far)))
