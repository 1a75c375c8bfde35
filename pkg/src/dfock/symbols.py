"""Symbols for Toeplitz and Hankel operators.

A :class:`SymbolFunction` wraps a vectorised evaluator together with what
the integrators need to know: whether it is radial (then ``profile``
evaluates it as a function of ``|w|``) and where it jumps (``breaks``,
circles about the origin).
"""
import math
import re
from dataclasses import dataclass, field
from typing import Callable, Optional, Tuple

import numpy as np

__all__ = ["SymbolFunction", "parse_symbol", "BUILTINS"]


@dataclass(frozen=True, eq=False)
class SymbolFunction:
    """A bounded measurable function on the plane.

    Attributes
    ----------
    evaluator : callable
        Vectorised map from a complex array to a complex array.
    radial : bool
        True if the value depends only on ``|w|``.
    name : str
    profile : callable, optional
        For radial symbols, the value as a function of ``r = |w|``.
    breaks : tuple of float
        Radii of circles about 0 where the symbol may be discontinuous.
    real : bool
        True if the symbol is real-valued.
    """

    evaluator: Callable
    radial: bool
    name: str
    profile: Optional[Callable] = None
    breaks: Tuple[float, ...] = ()
    real: bool = True
    meta: dict = field(default_factory=dict)

    def __call__(self, w):
        w = np.asarray(w, dtype=complex)
        out = np.asarray(self.evaluator(w), dtype=complex)
        return np.broadcast_to(out, w.shape).copy() if out.shape != w.shape else out

    def radial_profile(self, r):
        """Value at radius ``r`` (radial symbols only)."""
        if not self.radial:
            raise ValueError(f"symbol {self.name!r} is not radial")
        r = np.asarray(r, dtype=float)
        if self.profile is not None:
            return np.asarray(self.profile(r), dtype=complex) * np.ones_like(r)
        return self(r.astype(complex))

    # ---- algebra ----
    def __add__(self, other):
        other = as_symbol(other)
        return _combine(self, other, 1.0, 1.0, f"{self.name}+{other.name}")

    __radd__ = __add__

    def __sub__(self, other):
        other = as_symbol(other)
        return _combine(self, other, 1.0, -1.0, f"{self.name}-({other.name})")

    def __mul__(self, c):
        if isinstance(c, SymbolFunction):
            prof = None
            if self.radial and c.radial:
                prof = lambda r, a=self, b=c: a.radial_profile(r) * b.radial_profile(r)
            return SymbolFunction(lambda w, a=self, b=c: a(w) * b(w), self.radial and c.radial,
                                  f"({self.name})*({c.name})", prof,
                                  tuple(sorted(set(self.breaks) | set(c.breaks))),
                                  self.real and c.real)
        c = complex(c)
        prof = (lambda r, a=self: c * a.radial_profile(r)) if self.radial else None
        return SymbolFunction(lambda w, a=self: c * a(w), self.radial, f"{_num(c)}*{self.name}",
                              prof, self.breaks, self.real and c.imag == 0)

    __rmul__ = __mul__

    def conj(self):
        prof = (lambda r, a=self: np.conj(a.radial_profile(r))) if self.radial else None
        return SymbolFunction(lambda w, a=self: np.conj(a(w)), self.radial, f"conj({self.name})",
                              prof, self.breaks, self.real)

    def check_radial(self, radii=(0.5, 1.0, 2.0, 3.0, 4.0), n_angles=8, tol=1e-12):
        """Spot-check radial symmetry at 8 angles on 5 radii (skipping jump radii)."""
        ang = np.exp(2j * np.pi * np.arange(n_angles) / n_angles)
        for r in radii:
            if any(abs(r - b) <= 1e-9 * max(1.0, b) for b in self.breaks):
                continue  # rounding puts samples on either side of a jump
            v = self(r * ang)
            if np.max(np.abs(v - v[0])) > tol * max(1.0, float(np.max(np.abs(v)))):
                return False
        return True


def _num(c):
    c = complex(c)
    return f"{c.real:g}" if c.imag == 0 else f"({c.real:g}{c.imag:+g}j)"


def as_symbol(x):
    if isinstance(x, SymbolFunction):
        return x
    return constant(complex(x))


def _combine(a, b, ca, cb, name):
    prof = None
    if a.radial and b.radial:
        prof = lambda r: ca * a.radial_profile(r) + cb * b.radial_profile(r)
    return SymbolFunction(lambda w: ca * a(w) + cb * b(w), a.radial and b.radial, name, prof,
                          tuple(sorted(set(a.breaks) | set(b.breaks))), a.real and b.real)


# ---- builtins ------------------------------------------------------------------

def constant(c):
    c = complex(c)
    return SymbolFunction(lambda w: np.full(np.shape(w), c), True, f"const:{_num(c)}",
                          lambda r: np.full(np.shape(r), c), (), c.imag == 0)


def indicator_inside(R):
    R = float(R)
    return SymbolFunction(lambda w: (np.abs(w) <= R).astype(complex), True,
                          f"indicator_inside:{R:g}", lambda r: (np.asarray(r) <= R).astype(float),
                          (R,), True)


def indicator_outside(R):
    R = float(R)
    return SymbolFunction(lambda w: (np.abs(w) > R).astype(complex), True,
                          f"indicator_outside:{R:g}", lambda r: (np.asarray(r) > R).astype(float),
                          (R,), True)


def sin_re():
    return SymbolFunction(lambda w: np.sin(np.real(w)) + 0j, False, "sin_re")


def sin_log_abs():
    """``sin(log(1 + |w|))``: vanishing oscillation, no limit at infinity."""
    prof = lambda r: np.sin(np.log1p(r))
    return SymbolFunction(lambda w: prof(np.abs(w)) + 0j, True, "sin_log_abs", prof)


def sin_re_decay():
    """``sin(Re w) / (1 + |w|)``: oscillates, and tends to 0 at infinity."""
    return SymbolFunction(lambda w: np.sin(np.real(w)) / (1.0 + np.abs(w)) + 0j, False,
                          "sin_re_decay")


def sin_abs():
    prof = lambda r: np.sin(r)
    return SymbolFunction(lambda w: prof(np.abs(w)) + 0j, True, "sin_abs", prof)


def arctan_re():
    """``arctan(Re w / (1 + |w|))``."""
    return SymbolFunction(lambda w: np.arctan(np.real(w) / (1.0 + np.abs(w))) + 0j, False,
                          "arctan_re")


def abs_sq():
    prof = lambda r: np.asarray(r) ** 2
    return SymbolFunction(lambda w: np.abs(w) ** 2 + 0j, True, "abs_sq", prof)


def re_part():
    return SymbolFunction(lambda w: np.real(w) + 0j, False, "re")


BUILTINS = {
    "const": (constant, True), "indicator_inside": (indicator_inside, True),
    "indicator_outside": (indicator_outside, True), "sin_re": (sin_re, False),
    "sin_log_abs": (sin_log_abs, False), "sin_re_decay": (sin_re_decay, False),
    "sin_abs": (sin_abs, False), "arctan_re": (arctan_re, False), "abs_sq": (abs_sq, False),
    "re": (re_part, False),
}

_SAFE = {
    "np": np, "pi": math.pi, "e": math.e, "sin": np.sin, "cos": np.cos, "tan": np.tan,
    "exp": np.exp, "log": np.log, "log1p": np.log1p, "sqrt": np.sqrt, "abs": np.abs,
    "real": np.real, "imag": np.imag, "conj": np.conj, "arctan": np.arctan,
    "arctan2": np.arctan2, "tanh": np.tanh, "where": np.where, "angle": np.angle,
    "minimum": np.minimum, "maximum": np.maximum,
}


def _expression_symbol(text, name):
    code = compile(text.strip(), name, "eval")
    for n in code.co_names:
        if n not in _SAFE and n != "w" and not hasattr(np, n):
            raise ValueError(f"name {n!r} not allowed in symbol expression")

    def ev(w):
        return eval(code, {"__builtins__": {}}, dict(_SAFE, w=w))
    sym = SymbolFunction(ev, False, name)
    try:
        probe = sym(np.array([0.3 + 0.4j, 2.0 - 1.0j]))
    except Exception as exc:
        raise ValueError(f"symbol expression {name!r} failed to evaluate: {exc}") from None
    real = bool(np.all(np.abs(np.imag(probe)) == 0))
    radial = sym.check_radial()
    prof = (lambda r: sym(np.asarray(r, dtype=complex))) if radial else None
    return SymbolFunction(ev, radial, name, prof, (), real)


def _term(tok):
    tok = tok.strip()
    m = re.fullmatch(r"(?:([-+0-9.eE]+)\s*\*\s*)?([A-Za-z_]+)(?::(.+))?", tok)
    if m is None:
        return constant(complex(tok.replace(" ", "")))
    coef, name, arg = m.groups()
    if name not in BUILTINS:
        raise ValueError(f"unknown symbol {name!r}; builtins are {sorted(BUILTINS)}")
    ctor, takes_arg = BUILTINS[name]
    if takes_arg:
        if arg is None:
            raise ValueError(f"symbol {name} needs an argument, e.g. {name}:1")
        sym = ctor(float(arg))
    else:
        if arg is not None:
            raise ValueError(f"symbol {name} takes no argument")
        sym = ctor()
    return sym if coef is None else float(coef) * sym


def parse_symbol(spec):
    """Build a symbol from its text form.

    Accepted forms: builtins (``const:c``, ``indicator_inside:R``,
    ``indicator_outside:R``, ``sin_re``, ``sin_log_abs``, ``sin_re_decay``,
    ``sin_abs``, ``arctan_re``, ``abs_sq``, ``re``), sums of them with
    optional numeric coefficients (``2+sin_log_abs``, ``0.5*sin_re+1``),
    ``expr:<numpy expression in w>`` or ``file:<path>`` holding such an
    expression.
    """
    spec = str(spec).strip()
    if not spec:
        raise ValueError("empty symbol spec")
    if spec.startswith("expr:"):
        return _expression_symbol(spec[5:], spec[5:].strip())
    if spec.startswith("file:"):
        path = spec[5:].strip()
        with open(path) as fh:
            return _expression_symbol(fh.read(), path)
    # split on '+' not inside a number exponent
    parts = re.split(r"(?<![0-9.][eE])\+", spec)
    parts = [p for p in parts if p.strip()]
    syms = [_term(p) for p in parts]
    out = syms[0]
    for s in syms[1:]:
        out = out + s
    if len(syms) > 1:
        out = SymbolFunction(out.evaluator, out.radial, spec, out.profile, out.breaks, out.real)
    return out
