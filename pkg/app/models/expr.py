"""
Expression catalogue for the continuous parts of representable functions.

Every node evaluates itself and its first derivative on numpy arrays, lists
the points of a closed interval where its derivative may change sign, and
gives an antiderivative node when the catalogue is closed under integration
for that node. Nodes are immutable and may be shared freely.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np
from numpy.polynomial import polynomial as P
from scipy.interpolate import CubicHermiteSpline, PPoly
from scipy.optimize import brentq

ArrayLike = np.ndarray | float

# Sampling density of the generic sign-change search.
_SCAN_POINTS = 257
# Safety factor applied to the sampled Lipschitz constant in bounds().
_SLACK_FACTOR = 1.5


def _arr(t: ArrayLike) -> np.ndarray:
    return np.asarray(t, dtype=float)


class Expr:
    """Base node. Subclasses are frozen dataclasses."""

    #: True when critical_points() returns every interior sign change of the derivative.
    exact_extrema: bool = True
    #: False only for fixture nodes whose variation is unbounded on some interval.
    bounded_variation: bool = True

    def value(self, t: ArrayLike) -> np.ndarray:
        raise NotImplementedError

    def deriv(self, t: ArrayLike) -> np.ndarray:
        raise NotImplementedError

    def antiderivative(self) -> Optional["Expr"]:
        return None

    def critical_points(self, u: float, v: float) -> np.ndarray:
        return scan_sign_changes(self.deriv, u, v)

    def bounds(self, u: float, v: float) -> Tuple[float, float]:
        """Enclosure of min/max of the node on [u, v]."""
        pts = np.concatenate(([u, v], self.critical_points(u, v)))
        vals = self.value(pts)
        lo, hi = float(np.min(vals)), float(np.max(vals))
        if not self.exact_extrema and v > u:
            grid = np.linspace(u, v, _SCAN_POINTS)
            gvals = self.value(grid)
            lo, hi = min(lo, float(gvals.min())), max(hi, float(gvals.max()))
            lip = float(np.max(np.abs(self.deriv(grid))))
            slack = _SLACK_FACTOR * lip * (v - u) / (2 * (_SCAN_POINTS - 1))
            lo, hi = lo - slack, hi + slack
        return lo, hi

    def __call__(self, t: ArrayLike) -> np.ndarray:
        return self.value(t)


def scan_sign_changes(fn: Callable[[np.ndarray], np.ndarray], u: float, v: float,
                      points: int = _SCAN_POINTS) -> np.ndarray:
    """Zeros of ``fn`` on (u, v) located by sampling and brentq refinement."""
    if v <= u:
        return np.empty(0)
    grid = np.linspace(u, v, points)
    vals = np.asarray(fn(grid), dtype=float)
    roots = list(grid[1:-1][vals[1:-1] == 0.0])
    sign = np.sign(vals)
    idx = np.nonzero(sign[:-1] * sign[1:] < 0)[0]
    for i in idx:
        try:
            roots.append(brentq(lambda s: float(fn(np.asarray(s))), grid[i], grid[i + 1], xtol=1e-15))
        except ValueError:
            roots.append(0.5 * (grid[i] + grid[i + 1]))
    return np.unique(np.asarray(roots, dtype=float))


def _inside(pts: np.ndarray, u: float, v: float) -> np.ndarray:
    pts = np.asarray(pts, dtype=float)
    return np.unique(pts[(pts > u) & (pts < v)])


# ================================
# Catalogue nodes
# ================================

@dataclass(frozen=True)
class Poly(Expr):
    """Polynomial with ascending coefficients"""

    coeffs: Tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "coeffs", tuple(float(c) for c in self.coeffs) or (0.0,))

    def value(self, t):
        return P.polyval(_arr(t), self.coeffs)

    def deriv(self, t):
        return P.polyval(_arr(t), P.polyder(self.coeffs)) if len(self.coeffs) > 1 else np.zeros_like(_arr(t))

    def antiderivative(self):
        return Poly(tuple(P.polyint(self.coeffs)))

    def critical_points(self, u, v):
        if len(self.coeffs) < 3:
            return np.empty(0)
        d = np.trim_zeros(np.asarray(P.polyder(self.coeffs)), "b")
        if d.size <= 1:
            return np.empty(0)
        roots = P.polyroots(d)
        scale = max(1.0, abs(u), abs(v))
        real = roots[np.abs(roots.imag) <= 1e-9 * scale].real
        return _inside(real, u, v)


@dataclass(frozen=True)
class Exp(Expr):
    """exp(alpha * t + beta)"""

    alpha: float
    beta: float = 0.0

    def value(self, t):
        return np.exp(self.alpha * _arr(t) + self.beta)

    def deriv(self, t):
        return self.alpha * self.value(t)

    def antiderivative(self):
        if self.alpha == 0.0:
            return Poly((0.0, math.exp(self.beta)))
        return Scale(1.0 / self.alpha, self)

    def critical_points(self, u, v):
        return np.empty(0)


@dataclass(frozen=True)
class Sin(Expr):
    """amp * sin(omega * t + phase)"""

    amp: float = 1.0
    omega: float = 1.0
    phase: float = 0.0

    def value(self, t):
        return self.amp * np.sin(self.omega * _arr(t) + self.phase)

    def deriv(self, t):
        return self.amp * self.omega * np.cos(self.omega * _arr(t) + self.phase)

    def antiderivative(self):
        if self.omega == 0.0:
            return Poly((0.0, self.amp * math.sin(self.phase)))
        return Cos(-self.amp / self.omega, self.omega, self.phase)

    def critical_points(self, u, v):
        return _trig_zeros(self.omega, self.phase - math.pi / 2, u, v, self.amp)


@dataclass(frozen=True)
class Cos(Expr):
    """amp * cos(omega * t + phase)"""

    amp: float = 1.0
    omega: float = 1.0
    phase: float = 0.0

    def value(self, t):
        return self.amp * np.cos(self.omega * _arr(t) + self.phase)

    def deriv(self, t):
        return -self.amp * self.omega * np.sin(self.omega * _arr(t) + self.phase)

    def antiderivative(self):
        if self.omega == 0.0:
            return Poly((0.0, self.amp * math.cos(self.phase)))
        return Sin(self.amp / self.omega, self.omega, self.phase)

    def critical_points(self, u, v):
        return _trig_zeros(self.omega, self.phase, u, v, self.amp)


def _trig_zeros(omega: float, phase: float, u: float, v: float, amp: float) -> np.ndarray:
    """Solutions of sin(omega*t + phase) = 0 inside (u, v)."""
    if omega == 0.0 or amp == 0.0:
        return np.empty(0)
    lo, hi = sorted((omega * u + phase, omega * v + phase))
    k = np.arange(math.ceil(lo / math.pi), math.floor(hi / math.pi) + 1)
    return _inside((k * math.pi - phase) / omega, u, v)


@dataclass(frozen=True)
class Sum(Expr):
    args: Tuple[Expr, ...]

    def _varying(self) -> Tuple[Expr, ...]:
        return tuple(a for a in self.args if not (isinstance(a, Poly) and len(a.coeffs) == 1))

    @property
    def exact_extrema(self):
        varying = self._varying()
        return all(isinstance(a, Poly) for a in varying) or len(varying) == 1 and varying[0].exact_extrema

    @property
    def bounded_variation(self):
        return all(a.bounded_variation for a in self.args)

    def value(self, t):
        t = _arr(t)
        return sum((a.value(t) for a in self.args), np.zeros_like(t))

    def deriv(self, t):
        t = _arr(t)
        return sum((a.deriv(t) for a in self.args), np.zeros_like(t))

    def antiderivative(self):
        parts = [a.antiderivative() for a in self.args]
        return None if any(p is None for p in parts) else Sum(tuple(parts))

    def critical_points(self, u, v):
        varying = self._varying()
        if all(isinstance(a, Poly) for a in varying):
            return collapse_polys(varying).critical_points(u, v) if varying else np.empty(0)
        if len(varying) == 1:
            return varying[0].critical_points(u, v)
        return scan_sign_changes(self.deriv, u, v)


@dataclass(frozen=True)
class Prod(Expr):
    args: Tuple[Expr, ...]

    @property
    def exact_extrema(self):
        return all(isinstance(a, Poly) for a in self.args)

    @property
    def bounded_variation(self):
        return all(a.bounded_variation for a in self.args)

    def value(self, t):
        t = _arr(t)
        out = np.ones_like(t)
        for a in self.args:
            out = out * a.value(t)
        return out

    def deriv(self, t):
        t = _arr(t)
        vals = [a.value(t) for a in self.args]
        total = np.zeros_like(t)
        for i, a in enumerate(self.args):
            term = a.deriv(t)
            for j, v in enumerate(vals):
                if j != i:
                    term = term * v
            total = total + term
        return total

    def antiderivative(self):
        if all(isinstance(a, Poly) for a in self.args):
            return collapse_polys(self.args, multiply=True).antiderivative()
        for i, a in enumerate(self.args):
            if isinstance(a, Sum):
                rest = self.args[:i] + self.args[i + 1:]
                parts = [mul(x, *rest).antiderivative() for x in a.args]
                return None if any(p is None for p in parts) else Sum(tuple(parts))
        return None

    def critical_points(self, u, v):
        if all(isinstance(a, Poly) for a in self.args):
            return collapse_polys(self.args, multiply=True).critical_points(u, v)
        return scan_sign_changes(self.deriv, u, v)


@dataclass(frozen=True)
class Scale(Expr):
    c: float
    arg: Expr

    @property
    def exact_extrema(self):
        return self.arg.exact_extrema

    @property
    def bounded_variation(self):
        return self.arg.bounded_variation

    def value(self, t):
        return self.c * self.arg.value(t)

    def deriv(self, t):
        return self.c * self.arg.deriv(t)

    def antiderivative(self):
        inner = self.arg.antiderivative()
        return None if inner is None else Scale(self.c, inner)

    def critical_points(self, u, v):
        return np.empty(0) if self.c == 0.0 else self.arg.critical_points(u, v)


@dataclass(frozen=True)
class AffineCompose(Expr):
    """arg(a * t + b)"""

    a: float
    b: float
    arg: Expr

    @property
    def exact_extrema(self):
        return self.arg.exact_extrema

    @property
    def bounded_variation(self):
        return self.arg.bounded_variation

    def value(self, t):
        return self.arg.value(self.a * _arr(t) + self.b)

    def deriv(self, t):
        return self.a * self.arg.deriv(self.a * _arr(t) + self.b)

    def antiderivative(self):
        if self.a == 0.0:
            return Poly((0.0, float(self.arg.value(self.b))))
        inner = self.arg.antiderivative()
        return None if inner is None else Scale(1.0 / self.a, AffineCompose(self.a, self.b, inner))

    def critical_points(self, u, v):
        if self.a == 0.0:
            return np.empty(0)
        s0, s1 = sorted((self.a * u + self.b, self.a * v + self.b))
        inner = self.arg.critical_points(s0, s1)
        return _inside((inner - self.b) / self.a, u, v)


# ================================
# Internal nodes (not reachable from documents)
# ================================

@dataclass(frozen=True, eq=False)
class Tabulated(Expr):
    """Piecewise cubic held by a scipy PPoly; extrapolates past its knots."""

    poly: PPoly

    @classmethod
    def hermite(cls, x: np.ndarray, y: np.ndarray, dydx: np.ndarray) -> "Tabulated":
        return cls(CubicHermiteSpline(x, y, dydx, extrapolate=True))

    def value(self, t):
        return np.asarray(self.poly(_arr(t)), dtype=float)

    def deriv(self, t):
        return np.asarray(self.poly(_arr(t), 1), dtype=float)

    def antiderivative(self):
        return Tabulated(self.poly.antiderivative())

    def critical_points(self, u, v):
        d = self.poly.derivative()
        roots = d.roots(discontinuity=False, extrapolate=True)
        return _inside(roots[np.isfinite(roots)], u, v)


_APPLY_FNS = ("abs", "abspow", "exp", "recip")


@dataclass(frozen=True)
class Apply(Expr):
    """Pointwise map of a node: |u|, |u|^p, exp(u) or 1/u."""

    fn: str
    arg: Expr
    param: float = 1.0

    def __post_init__(self):
        if self.fn not in _APPLY_FNS:
            raise ValueError(f"unknown pointwise map '{self.fn}'")

    exact_extrema = False

    @property
    def bounded_variation(self):
        return self.arg.bounded_variation

    def value(self, t):
        return apply_scalar_map(self.fn, self.param, self.arg.value(t))

    def deriv(self, t):
        u = self.arg.value(t)
        du = self.arg.deriv(t)
        if self.fn == "abs":
            return np.sign(u) * du
        if self.fn == "abspow":
            p = self.param
            return p * np.abs(u) ** (p - 1.0) * np.sign(u) * du
        if self.fn == "exp":
            return np.exp(u) * du
        return -du / (u * u)

    def critical_points(self, u, v):
        pts = [self.arg.critical_points(u, v)]
        if self.fn in ("abs", "abspow"):
            pts.append(scan_sign_changes(self.arg.value, u, v))
        return np.unique(np.concatenate(pts))


def apply_scalar_map(fn: str, param: float, u: np.ndarray) -> np.ndarray:
    u = _arr(u)
    if fn == "abs":
        return np.abs(u)
    if fn == "abspow":
        return np.abs(u) ** param
    if fn == "exp":
        return np.exp(u)
    if fn == "recip":
        return 1.0 / u
    raise ValueError(f"unknown pointwise map '{fn}'")


@dataclass(frozen=True)
class Chirp(Expr):
    """t * cos(pi / (2 t)) with the value 0 at t = 0; unbounded variation near 0."""

    exact_extrema = False
    bounded_variation = False

    def value(self, t):
        t = _arr(t)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = t * np.cos(np.pi / (2.0 * t))
        return np.where(t == 0.0, 0.0, out)

    def deriv(self, t):
        t = _arr(t)
        with np.errstate(divide="ignore", invalid="ignore"):
            w = np.pi / (2.0 * t)
            out = np.cos(w) + w * np.sin(w)
        return np.where(t == 0.0, 0.0, out)


# ================================
# Helpers
# ================================

def const(c: float) -> Poly:
    return Poly((float(c),))


def is_zero(e: Expr) -> bool:
    return isinstance(e, Poly) and all(c == 0.0 for c in e.coeffs)


def collapse_polys(args: Tuple[Expr, ...], multiply: bool = False) -> Poly:
    coeffs = np.array([1.0 if multiply else 0.0])
    for a in args:
        assert isinstance(a, Poly)
        coeffs = P.polymul(coeffs, a.coeffs) if multiply else P.polyadd(coeffs, a.coeffs)
    return Poly(tuple(coeffs))


def add(*args: Expr) -> Expr:
    """Sum with constant folding; returns a single node."""
    polys = [a for a in args if isinstance(a, Poly)]
    rest = [a for a in args if not isinstance(a, Poly)]
    if polys:
        merged = collapse_polys(tuple(polys))
        if not is_zero(merged) or not rest:
            rest.append(merged)
    return rest[0] if len(rest) == 1 else Sum(tuple(rest))


def mul(*args: Expr) -> Expr:
    polys = [a for a in args if isinstance(a, Poly)]
    rest = [a for a in args if not isinstance(a, Poly)]
    if polys:
        merged = collapse_polys(tuple(polys), multiply=True)
        if is_zero(merged):
            return const(0.0)
        if len(merged.coeffs) == 1 and rest:
            node = rest[0] if len(rest) == 1 else Prod(tuple(rest))
            return scale(merged.coeffs[0], node)
        rest.append(merged)
    return rest[0] if len(rest) == 1 else Prod(tuple(rest))


def scale(c: float, e: Expr) -> Expr:
    if c == 1.0:
        return e
    if isinstance(e, Poly):
        return Poly(tuple(c * x for x in e.coeffs))
    return Scale(float(c), e)



def derivative(e: Expr) -> Optional[Expr]:
    """Symbolic first derivative, or None when the node has no closed form."""
    if isinstance(e, Poly):
        return Poly(tuple(P.polyder(e.coeffs))) if len(e.coeffs) > 1 else const(0.0)
    if isinstance(e, Exp):
        return scale(e.alpha, e)
    if isinstance(e, Sin):
        return Cos(e.amp * e.omega, e.omega, e.phase)
    if isinstance(e, Cos):
        return Sin(-e.amp * e.omega, e.omega, e.phase)
    if isinstance(e, Scale):
        d = derivative(e.arg)
        return None if d is None else scale(e.c, d)
    if isinstance(e, AffineCompose):
        d = derivative(e.arg)
        return None if d is None else scale(e.a, AffineCompose(e.a, e.b, d))
    if isinstance(e, Sum):
        parts = [derivative(a) for a in e.args]
        return None if any(p is None for p in parts) else add(*parts)
    if isinstance(e, Prod):
        terms = []
        for i, a in enumerate(e.args):
            d = derivative(a)
            if d is None:
                return None
            terms.append(mul(d, *(b for j, b in enumerate(e.args) if j != i)))
        return add(*terms)
    if isinstance(e, Tabulated):
        return Tabulated(e.poly.derivative())
    if isinstance(e, Apply):
        d = derivative(e.arg)
        if d is None:
            return None
        if e.fn == "exp":
            return mul(e, d)
        if e.fn == "recip":
            return scale(-1.0, mul(d, e, e))
    return None
