"""Batch front-end: ``dfock CONFIG.json [--out PREFIX]``.

The configuration is a flat JSON object naming a ``command`` and its
parameters.  Outputs are written as ``PREFIX + <file name>``.  Exit status
is 0 on success, 1 on numerical or domain errors (and on failed invariants
for ``verify-all``) and 2 on configuration errors.
"""
import argparse
import json
import math
import os
import re
import sys
from dataclasses import dataclass, field, fields

import numpy as np

from .errors import ConfigError, DfockError
from .export import write_json

COMMANDS = ("weight-info", "rho-map", "lattice", "distance-field", "kernel-check",
            "berezin-field", "classify", "toeplitz", "fredholm-probe", "hankel-probe",
            "verify-all")

NEEDS_SYMBOL = {"berezin-field", "classify", "toeplitz", "fredholm-probe", "hankel-probe"}


@dataclass
class RunConfig:
    """Validated run configuration; see ``README.md`` for every key."""

    command: str
    weight: str = "kind=gaussian alpha=1.0"
    out: str = "dfock_out/"
    seed: int = 0
    symbol: str = None
    sizes: list = field(default_factory=lambda: [16, 32, 64])
    annuli: list = None
    radii: list = None
    box: list = None
    r: float = 1.0
    domain_radius: float = 5.0
    kappa: float = 0.8
    half_width: float = 4.0
    grid_spacing: float = 0.05
    stencil: int = 32
    N: int = 32
    p: float = 2.0
    max_degree: int = None
    tolerance: float = 1e-6
    c_low: float = 0.125
    stabilization: float = 0.1
    grid_radius: float = 3.0
    grid_points: int = 7
    multiplicity_m: float = 1.0
    invariants: list = None


# ---- validation -----------------------------------------------------------------------

def _key_line(text, key):
    m = re.search(r'"%s"\s*:' % re.escape(key), text)
    return text.count("\n", 0, m.start()) + 1 if m else None


def _fail(text, key, msg):
    line = _key_line(text, key) if key else None
    where = f"line {line}, key '{key}'" if line else (f"key '{key}'" if key else "config")
    raise ConfigError(f"{where}: {msg}")


def _num(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)


def _positive(v):
    return _num(v) and v > 0


def _int(v, lo=1):
    return isinstance(v, int) and not isinstance(v, bool) and v >= lo


_CHECKS = {
    "command": (lambda v: v in COMMANDS, f"must be one of {', '.join(COMMANDS)}"),
    "weight": (lambda v: isinstance(v, str), "must be a weight spec string"),
    "out": (lambda v: isinstance(v, str) and v != "", "must be a non-empty path prefix"),
    "seed": (lambda v: _int(v, 0), "must be a non-negative integer"),
    "symbol": (lambda v: isinstance(v, str), "must be a symbol spec string"),
    "sizes": (lambda v: isinstance(v, list) and len(v) >= 1 and all(_int(x) for x in v),
              "must be a list of positive integers"),
    "annuli": (lambda v: isinstance(v, list) and len(v) >= 1 and all(
        isinstance(a, list) and len(a) == 2 and all(_num(x) for x in a) and 0 <= a[0] < a[1]
        for a in v), "must be a list of [inner, outer] pairs with 0 <= inner < outer"),
    "radii": (lambda v: isinstance(v, list) and len(v) >= 1 and all(_num(x) and x >= 0 for x in v),
              "must be a list of non-negative numbers"),
    "box": (lambda v: isinstance(v, list) and len(v) == 2 and _positive(v[0]) and _int(v[1], 2),
            "must be [half_width, points_per_axis] with points_per_axis >= 2"),
    "r": (_positive, "must be positive"),
    "domain_radius": (_positive, "must be positive"),
    "kappa": (lambda v: _num(v) and 0.4 < v < 1, "must lie in (0.4, 1)"),
    "half_width": (_positive, "must be positive"),
    "grid_spacing": (_positive, "must be positive"),
    "stencil": (lambda v: v in (8, 16, 32), "must be 8, 16 or 32"),
    "N": (_int, "must be a positive integer"),
    "p": (_positive, "must be positive"),
    "max_degree": (lambda v: _int(v, 8), "must be an integer >= 8"),
    "tolerance": (_positive, "must be positive"),
    "c_low": (_positive, "must be positive"),
    "stabilization": (_positive, "must be positive"),
    "grid_radius": (_positive, "must be positive"),
    "grid_points": (lambda v: _int(v, 2), "must be an integer >= 2"),
    "multiplicity_m": (_positive, "must be positive"),
    "invariants": (lambda v: isinstance(v, list) and all(isinstance(x, str) for x in v),
                   "must be a list of invariant names"),
}


def parse_config(text):
    """Parse and validate a flat JSON configuration.

    Raises
    ------
    ConfigError
        With the line and key of the first problem found.
    """
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"line {exc.lineno}, column {exc.colno}: invalid JSON: {exc.msg}") from None
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    known = {f.name for f in fields(RunConfig)}
    for key in data:
        if key not in known:
            _fail(text, key, "unknown key")
    if "command" not in data:
        raise ConfigError("missing required key 'command'")
    for key, value in data.items():
        ok, msg = _CHECKS[key]
        if value is None and key not in ("command",):
            continue
        if not ok(value):
            _fail(text, key, msg)
    cfg = RunConfig(**data)
    if cfg.command in NEEDS_SYMBOL and cfg.symbol is None:
        raise ConfigError(f"command '{cfg.command}' needs key 'symbol'")
    # semantic checks that need the library parsers
    from .symbols import parse_symbol
    from .weights import parse_weight_spec
    try:
        parse_weight_spec(cfg.weight)
    except (ValueError, OSError) as exc:
        _fail(text, "weight", str(exc))
    if cfg.symbol is not None and not cfg.symbol.startswith("cutoff:"):
        try:
            parse_symbol(cfg.symbol)
        except (ValueError, OSError, SyntaxError) as exc:
            _fail(text, "symbol", str(exc))
    if cfg.symbol is not None and cfg.symbol.startswith("cutoff:"):
        try:
            if not float(cfg.symbol[7:]) > 0:
                raise ValueError
        except ValueError:
            _fail(text, "symbol", "cutoff radius must be a positive number")
    if cfg.invariants is not None:
        from .verify import CHECKS
        bad = [n for n in cfg.invariants if n not in CHECKS]
        if bad:
            _fail(text, "invariants", f"unknown invariants {bad}")
    if cfg.command == "fredholm-probe":
        if len(cfg.sizes) < 3:
            _fail(text, "sizes", "the probe needs at least 3 sizes")
        if cfg.annuli is not None and len(cfg.annuli) < 3:
            _fail(text, "annuli", "the probe needs at least 3 annuli")
    return cfg


# ---- commands -------------------------------------------------------------------------

class _Run:
    """Lazily built library objects shared by a command."""

    def __init__(self, cfg):
        from .weights import InducedRadiusField, parse_weight_spec
        self.cfg = cfg
        self.weight = parse_weight_spec(cfg.weight)
        self.field = InducedRadiusField(self.weight)
        self.written = []

    def series(self, radius=6.0):
        from .kernels import basis_norms, degree_budget
        n = self.cfg.max_degree or degree_budget(self.weight, radius)
        return basis_norms(self.weight, n)

    def graph(self, half_width=None):
        from .geometry import MetricGraph
        return MetricGraph(self.field, half_width or self.cfg.half_width, self.cfg.grid_spacing,
                           self.cfg.stencil)

    def symbol(self, graph=None):
        from .symbols import parse_symbol
        from .transforms import build_cutoff
        spec = self.cfg.symbol
        if spec.startswith("cutoff:"):
            return build_cutoff(graph if graph is not None else self.graph(), float(spec[7:]))
        return parse_symbol(spec)

    def path(self, name):
        p = self.cfg.out + name
        d = os.path.dirname(p)
        if d:
            os.makedirs(d, exist_ok=True)
        self.written.append(p)
        return p

    def json(self, name, obj):
        write_json(self.path(name), obj)


def _box(cfg, default=(4.0, 41)):
    L, n = cfg.box if cfg.box is not None else default
    ax = np.linspace(-L, L, int(n))
    return (ax[:, None] + 1j * ax[None, :]).ravel()


def cmd_weight_info(run):
    from .errors import UnresolvableRadiusError
    from .weights import doubling_constant_estimate
    w = run.weight
    radii = run.cfg.radii if run.cfg.radii is not None else [0.0, 0.5, 1.0, 2.0, 4.0]
    table = []
    for a in radii:
        try:
            rho = run.field(complex(a))
        except UnresolvableRadiusError:
            rho = None
        lap = float(w.lap_r(a)) if a > 0 or w.kind != "fock_sobolev" else None
        table.append({"r": a, "rho": rho, "laplacian": lap, "phi": float(w.phi_r(a)) if a > 0
                      or w.singular_exponent == 0 else None})
    rho0 = table[0]["rho"] if radii and radii[0] == 0 else None
    samples = [1.0 + 0j, 2.0 + 1.0j, 3.0j] + ([0j] if w.atom_mass_at_origin == 0 else [])
    run.json("weight_info.json", {
        "weight": w.label, "spec": w.to_spec(), "kind": w.kind,
        "atom_mass_at_origin": w.atom_mass_at_origin,
        "singular_exponent": w.singular_exponent,
        "rho": rho0, "profile": table,
        "doubling_estimate": doubling_constant_estimate(w, samples, [0.25, 0.5, 1.0]),
    })


def cmd_rho_map(run):
    from .export import write_csv
    z = _box(run.cfg)
    rho = run.field.many(z)
    write_csv(run.path("rho_map.csv"), ["re", "im", "rho"],
              zip(z.real, z.imag, rho))


def cmd_lattice(run):
    from .geometry import build_lattice, check_lattice, covering_multiplicity, ring_points
    c = run.cfg
    lat = build_lattice(run.field, c.r, c.domain_radius, c.kappa)
    dis, unc = check_lattice(lat, run.field)
    probes = ring_points(run.field, c.domain_radius, 0.5 * c.r)
    mult = covering_multiplicity(lat, run.field, c.multiplicity_m, probes)
    lat.to_csv(run.path("lattice.csv"))
    run.json("lattice.json", {"weight": run.weight.label, "r": c.r,
                              "domain_radius": c.domain_radius, "kappa": c.kappa,
                              "points": len(lat), "disjointness_failures": dis,
                              "uncovered_probes": unc, "multiplicity_m": c.multiplicity_m,
                              "multiplicity": mult})


def cmd_distance_field(run):
    g = run.graph()
    g.to_csv(run.path("distance_field.csv"))


def cmd_kernel_check(run):
    from .export import write_csv
    from .kernels import kernel_eval, verify_kernel_bounds
    c = run.cfg
    s = run.series(math.sqrt(2.0) * c.grid_radius + 1.0)
    ax = np.linspace(-c.grid_radius, c.grid_radius, c.grid_points)
    pts = (ax[:, None] + 1j * ax[None, :]).ravel()
    pts = pts[np.abs(pts) <= c.grid_radius * (1 + 1e-12)]
    pairs = [(z, w) for z in pts for w in pts]
    rows = []
    for z, w in pairs:
        kv = kernel_eval(s, z, w)
        rows.append((z.real, z.imag, w.real, w.imag, kv.value.real, kv.value.imag,
                     kv.truncation_bound))
    write_csv(run.path("kernel_field.csv"),
              ["re_z", "im_z", "re_w", "im_w", "re_K", "im_K", "tail_bound"], rows)
    rep = verify_kernel_bounds(s, run.field, pairs)
    out = rep._asdict()
    out["weight"] = run.weight.label
    run.json("kernel_check.json", out)


def cmd_berezin_field(run):
    from .transforms import berezin_field
    c = run.cfg
    f = run.symbol()
    if c.radii is not None and f.radial:
        s = run.series(max(c.radii) + 2.0)
        bf = berezin_field(s, f, radii=c.radii, rtol=c.tolerance)
    else:
        L, n = c.box if c.box is not None else (3.0, 13)
        s = run.series(math.sqrt(2.0) * L + 2.0)
        bf = berezin_field(s, f, box=(L, n), rtol=c.tolerance)
    bf.to_csv(run.path("berezin_field.csv"))


def cmd_classify(run):
    from .transforms import classify_symbol, oscillation_report
    c = run.cfg
    annuli = c.annuli or [[0.5, 1.5], [1.5, 2.5], [2.5, 3.5], [3.5, 4.5]]
    outer = max(b for _, b in annuli)
    g = run.graph(max(c.half_width, outer + 1.5))
    f = run.symbol(g)
    run.series(outer + 2.0)
    rep = oscillation_report(run.field, g, f, annuli, p=max(c.p, 1.0), r=c.r)
    cls = classify_symbol(rep)
    by_annulus = {}
    for i, (a, b) in enumerate(annuli):
        by_annulus[f"{a:g}-{b:g}"] = {"omega_max": float(np.max(rep.omega[i])),
                                      "mean_osc_max": float(np.max(rep.mean_osc[i])),
                                      "hat_p_max": float(np.max(rep.hat_p[i]))}
    run.json("classify.json", {"symbol": f.name, "weight": run.weight.label,
                               "annuli": by_annulus, "classification": cls,
                               "ball_truncated": rep.truncated,
                               "note": "Bergman distance proxied by d_phi"})


def cmd_toeplitz(run):
    from .operators import smallest_singular_value, toeplitz_matrix
    c = run.cfg
    f = run.symbol()
    s = run.series()
    T = toeplitz_matrix(s, f, c.N)
    T.to_csv(run.path("toeplitz.csv"))
    sig = smallest_singular_value(T) if T.complete else None
    run.json("toeplitz.json", {"symbol": f.name, "weight": run.weight.label, "size": T.size,
                               "complete": T.complete, "diagonal": T.diagonal,
                               "errors": T.errors, "sigma_min": sig})
    if not T.complete:
        raise DfockError(f"truncation incomplete: {T.errors}")


def cmd_fredholm_probe(run):
    from .operators import fredholm_probe
    c = run.cfg
    annuli = c.annuli or [[2, 3], [3, 4], [4, 5]]
    f = run.symbol()
    s = run.series(max(b for _, b in annuli) + 1.0)
    rep = fredholm_probe(s, run.field, f, c.sizes, annuli,
                         {"c_low": c.c_low, "stabilization": c.stabilization})
    run.json("fredholm_probe.json", rep.to_dict())


def cmd_hankel_probe(run):
    from .operators import hankel_norm_probe
    c = run.cfg
    g = run.graph(max(c.half_width, 6.0)) if c.grid_spacing >= 0.1 else run.graph()
    f = run.symbol(g)
    s = run.series(8.0)
    h = hankel_norm_probe(s, f, c.p, graph=g)
    run.json("hankel_probe.json", {"symbol": f.name, "weight": run.weight.label, "p": c.p,
                                   "sup_ratio": h.sup_ratio, "bo_seminorm": h.bo_seminorm,
                                   "ratios": dict(zip(h.names, h.ratios)),
                                   "grid_radius": h.grid_radius, "degrees": h.degrees})


def cmd_verify_all(run):
    from .verify import run_invariants
    res = run_invariants(run.weight, run.cfg.invariants, run.cfg.seed, run.cfg.max_degree)
    run.json("verify_all.json", res)
    if not res["all_passed"]:
        failed = [k for k, v in res["invariants"].items() if not v["passed"]]
        return 1, f"failed invariants: {', '.join(failed)}"
    return 0, None


HANDLERS = {
    "weight-info": cmd_weight_info, "rho-map": cmd_rho_map, "lattice": cmd_lattice,
    "distance-field": cmd_distance_field, "kernel-check": cmd_kernel_check,
    "berezin-field": cmd_berezin_field, "classify": cmd_classify, "toeplitz": cmd_toeplitz,
    "fredholm-probe": cmd_fredholm_probe, "hankel-probe": cmd_hankel_probe,
    "verify-all": cmd_verify_all,
}


def execute(cfg, stderr=None):
    """Run a validated configuration; returns the exit status."""
    stderr = stderr or sys.stderr
    try:
        run = _Run(cfg)
        res = HANDLERS[cfg.command](run)
    except ConfigError as exc:
        print(f"dfock: config error: {exc}", file=stderr)
        return 2
    except (DfockError, ValueError, ArithmeticError, RuntimeError, OSError) as exc:
        print(f"dfock: {type(exc).__name__}: {exc}", file=stderr)
        return 1
    if res is not None and res[0] != 0:
        print(f"dfock: {res[1]}", file=stderr)
        return res[0]
    return 0


def main(argv=None):
    ap = argparse.ArgumentParser(prog="dfock", description="Doubling Fock space laboratory.")
    ap.add_argument("config", help="path to a flat JSON run configuration")
    ap.add_argument("--out", help="output path prefix (overrides the config)")
    args = ap.parse_args(argv)
    try:
        with open(args.config, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        print(f"dfock: config error: cannot read {args.config}: {exc.strerror}", file=sys.stderr)
        return 2
    try:
        cfg = parse_config(text)
    except ConfigError as exc:
        print(f"dfock: config error: {exc}", file=sys.stderr)
        return 2
    if args.out is not None:
        cfg.out = args.out
    return execute(cfg)


if __name__ == "__main__":
    sys.exit(main())
