"""
Representable functions on [a, b]: a piecewise-smooth continuous part, a
jump part (finite records plus an optional geometric series) and a finite
set of point overrides.

Values follow the saltus convention: f_d(a) = 0 and for t > a

    f_d(t) = sigma_a^+ + sum_{a < x < t} (sigma_x^- + sigma_x^+) + sigma_t^-

with f(t) = f(a) to the left of a and f(t) = f(b) to the right of b.
Jump locations are exact decimal tokens; location equality between two
functions is token equality.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation
from typing import Any, Callable, Dict, Iterable, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from pydantic import ValidationError

from app.config import settings
from app.models import expr as E
from app.schemas.requests import FuncDocument
from app.utils.errors import (
    BudgetExceeded,
    DomainError,
    DomainMismatch,
    InvariantError,
    SchemaError,
    UnsupportedProduct,
)
from app.utils.logger import logger

# Relative size below which a recomputed jump is treated as round-off.
_ZERO_JUMP = 1e-13


def to_token(x: float | str | Decimal) -> Decimal:
    """Exact decimal token of a location (shortest repr for floats)."""
    if isinstance(x, Decimal):
        return x
    if isinstance(x, str):
        return Decimal(x)
    return Decimal(repr(float(x)))


def token_str(tok: Decimal) -> str:
    s = format(tok.normalize(), "f")
    return "0" if s in ("-0", "") else s


# ================================
# Domain types
# ================================

@dataclass(frozen=True)
class SmoothPiece:
    u: float
    v: float
    expr: E.Expr


@dataclass(frozen=True)
class JumpRecord:
    loc: Decimal
    left: float
    right: float

    @property
    def x(self) -> float:
        return float(self.loc)

    @property
    def sigma(self) -> float:
        return self.left + self.right


@dataclass(frozen=True)
class JumpSeries:
    """
    Geometric jump generator. Locations t_k = a + c r^k ("left", accumulating
    at a) or t_k = b - c r^k ("right", accumulating at b); magnitudes
    m_k = A q^k carried as right jumps; k = 0, 1, 2, ...
    """

    side: str
    c: float
    r: float
    A: float
    q: float
    a: float
    b: float
    kind: str = "geometric"

    def location(self, k: np.ndarray | int) -> np.ndarray:
        k = np.asarray(k, dtype=float)
        off = self.c * self.r ** k
        return self.a + off if self.side == "left" else self.b - off

    def magnitude(self, k: np.ndarray | int) -> np.ndarray:
        return self.A * self.q ** np.asarray(k, dtype=float)

    def tail_bound(self, n: int) -> float:
        """Sum of |jumps| over k > n."""
        return abs(self.A) * abs(self.q) ** (n + 1) / (1.0 - abs(self.q))

    @property
    def total_mass(self) -> float:
        return abs(self.A) / (1.0 - abs(self.q))

    def terms_for(self, tol: float) -> int:
        """Smallest n with tail_bound(n) <= tol."""
        if self.A == 0.0 or self.q == 0.0:
            return 0
        n = math.ceil(math.log(tol * (1.0 - abs(self.q)) / abs(self.A)) / math.log(abs(self.q)) - 1.0)
        n = max(n, 0)
        while self.tail_bound(n) > tol:
            n += 1
        return n

    def records(self, n: int) -> List[JumpRecord]:
        k = np.arange(n + 1)
        xs, ms = self.location(k), self.magnitude(k)
        return [JumpRecord(to_token(x), 0.0, float(m)) for x, m in zip(xs, ms) if m != 0.0]

    def index_of(self, x: float) -> Optional[int]:
        """Generator index whose location equals x exactly, if any."""
        off = x - self.a if self.side == "left" else self.b - x
        if off <= 0.0 or off > self.c:
            return None
        k = int(round(math.log(off / self.c) / math.log(self.r)))
        for cand in (k - 1, k, k + 1):
            if cand >= 0 and float(self.location(cand)) == x:
                return cand
        return None

    def same_geometry(self, other: "JumpSeries") -> bool:
        return (self.side, self.c, self.r, self.q, self.a, self.b) == (
            other.side, other.c, other.r, other.q, other.a, other.b)


class Limits(NamedTuple):
    left_limit: float
    right_limit: float
    left: float
    right: float
    sigma: float


@dataclass(frozen=True, eq=False)
class RepFunc:
    """Immutable representable function; lookup tables are built eagerly."""

    a: float
    b: float
    pieces: Tuple[SmoothPiece, ...] = ()
    c0: float = 0.0
    jumps: Tuple[JumpRecord, ...] = ()
    series: Optional[JumpSeries] = None
    overrides: Tuple[Tuple[Decimal, float], ...] = ()
    series_tol: float = field(default_factory=lambda: settings.series_tol)

    def __post_init__(self):
        set_ = lambda k, v: object.__setattr__(self, k, v)
        set_("pieces", tuple(self.pieces))
        set_("jumps", tuple(sorted(self.jumps, key=lambda r: r.loc)))
        set_("overrides", tuple(sorted(self.overrides, key=lambda o: o[0])))

        records = list(self.jumps)
        n_terms = -1
        if self.series is not None:
            n_terms = self.series.terms_for(self.series_tol)
            records.extend(self.series.records(n_terms))
        records.sort(key=lambda r: r.x)
        set_("_records", tuple(records))
        set_("_series_terms", n_terms + 1)
        set_("_X", np.array([r.x for r in records], dtype=float))
        set_("_cumL", np.concatenate(([0.0], np.cumsum([r.left for r in records]))))
        set_("_cumR", np.concatenate(([0.0], np.cumsum([r.right for r in records]))))
        set_("_inner", np.array([p.v for p in self.pieces[:-1]], dtype=float))
        set_("_ovX", np.array([float(t) for t, _ in self.overrides], dtype=float))
        set_("_ovV", np.array([v for _, v in self.overrides], dtype=float))

    # ---------- structure ----------

    @property
    def records(self) -> Tuple[JumpRecord, ...]:
        """Finite records plus the series truncated at series_tol, sorted by location."""
        return self._records

    @property
    def series_terms(self) -> int:
        return self._series_terms

    @property
    def series_tail(self) -> float:
        if self.series is None:
            return 0.0
        return self.series.tail_bound(self._series_terms - 1)

    @property
    def has_jumps(self) -> bool:
        return bool(self.jumps) or self.series is not None

    @property
    def is_bv(self) -> bool:
        return all(p.expr.bounded_variation for p in self.pieces)

    @property
    def is_continuous(self) -> bool:
        return not self.has_jumps and not self.overrides

    def tokens(self) -> Dict[float, Decimal]:
        out = {r.x: r.loc for r in self._records}
        out.update({float(t): t for t, _ in self.overrides})
        return out

    def jump_mass(self) -> float:
        mass = sum(abs(r.left) + abs(r.right) for r in self.jumps)
        return mass + (self.series.total_mass if self.series is not None else 0.0)

    def breakpoints(self, with_overrides: bool = True) -> np.ndarray:
        """All special points: ends, piece breakpoints, jump and override locations."""
        pts = [np.array([self.a, self.b]), self._inner, self._X]
        if with_overrides:
            pts.append(self._ovX)
        return np.unique(np.concatenate(pts))

    def piece_at(self, t: float, side: str = "right") -> E.Expr:
        if not self.pieces:
            return E.const(0.0)
        return self.pieces[int(np.searchsorted(self._inner, t, side=side))].expr

    def expr_on(self, u: float, v: float) -> E.Expr:
        """Expression equal to the core on the open cell (u, v) free of special points."""
        mid = 0.5 * (u + v)
        return E.add(E.const(self.c0 + float(self.disc_value(mid))), self.piece_at(mid))

    # ---------- evaluation ----------

    def _by_piece(self, t: np.ndarray, side: str, method: str) -> np.ndarray:
        out = np.zeros_like(t)
        if not self.pieces:
            return out
        idx = np.searchsorted(self._inner, t, side=side)
        for i in np.unique(idx):
            mask = idx == i
            out[mask] = getattr(self.pieces[i].expr, method)(t[mask])
        return out

    def cont_value(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        return self.c0 + self._by_piece(np.atleast_1d(t), "right", "value").reshape(t.shape)

    def cont_deriv(self, t, side: str = "right") -> np.ndarray:
        t = np.asarray(t, dtype=float)
        return self._by_piece(np.atleast_1d(t), side, "deriv").reshape(t.shape)

    def disc_value(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        return self._cumL[np.searchsorted(self._X, t, "right")] + self._cumR[np.searchsorted(self._X, t, "left")]

    def core_value(self, t) -> np.ndarray:
        return self.cont_value(t) + self.disc_value(t)

    def value(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        out = self.core_value(t)
        if self._ovX.size:
            flat = np.atleast_1d(out).copy()
            tt = np.atleast_1d(t)
            pos = np.searchsorted(self._ovX, tt)
            pos = np.clip(pos, 0, self._ovX.size - 1)
            hit = self._ovX[pos] == tt
            flat[hit] = self._ovV[pos[hit]]
            out = flat.reshape(np.shape(t))
        return out

    def __call__(self, t) -> np.ndarray:
        return self.value(t)

    def left_limit(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        i = np.searchsorted(self._X, t, "left")
        return self.cont_value(t) + self._cumL[i] + self._cumR[i]

    def right_limit(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        i = np.searchsorted(self._X, t, "right")
        return self.cont_value(t) + self._cumL[i] + self._cumR[i]

    def extended(self, t) -> np.ndarray:
        """Value with the constant extension beyond [a, b]."""
        return self.value(np.clip(np.asarray(t, dtype=float), self.a, self.b))

    def jump_at(self, t: float) -> Tuple[float, float]:
        i = int(np.searchsorted(self._X, t))
        if i < self._X.size and self._X[i] == t:
            return self._records[i].left, self._records[i].right
        return 0.0, 0.0

    def cell_bounds(self, u: float, v: float) -> Tuple[float, float]:
        """Enclosure of inf/sup of f over the closed cell [u, v]."""
        pts = self.breakpoints()
        inner = pts[(pts > u) & (pts < v)]
        nodes = np.concatenate(([u], inner, [v]))
        vals = self.value(nodes)
        lo, hi = float(vals.min()), float(vals.max())
        for s, e in zip(nodes[:-1], nodes[1:]):
            if e <= s:
                continue
            base = self.c0 + float(self.disc_value(0.5 * (s + e)))
            plo, phi = self.piece_at(0.5 * (s + e)).bounds(s, e)
            lo, hi = min(lo, base + plo), max(hi, base + phi)
        tail = self.series_tail
        return lo - tail, hi + tail

    def sup_norm(self) -> float:
        lo, hi = self.cell_bounds(self.a, self.b)
        return max(abs(lo), abs(hi))

    # ---------- derived functions ----------

    def replace(self, **changes: Any) -> "RepFunc":
        fields = dict(a=self.a, b=self.b, pieces=self.pieces, c0=self.c0, jumps=self.jumps,
                      series=self.series, overrides=self.overrides, series_tol=self.series_tol)
        fields.update(changes)
        return RepFunc(**fields)

    def core(self) -> "RepFunc":
        return self.replace(overrides=())

    def continuous_part(self) -> "RepFunc":
        return RepFunc(self.a, self.b, self.pieces, self.c0, series_tol=self.series_tol)

    def truncated(self) -> "RepFunc":
        """Series folded into finite records at series_tol."""
        if self.series is None:
            return self
        return self.replace(jumps=_merge_records(self.jumps, self.series.records(self._series_terms - 1)),
                            series=None)

    def absorbed(self) -> "RepFunc":
        """Overrides turned into jump records (removable jumps in the interior)."""
        if not self.overrides:
            return self
        f = self if self.series is None else self.truncated()
        c0 = f.c0
        recs: Dict[Decimal, List[float]] = {r.loc: [r.left, r.right] for r in f.jumps}
        for tok, val in f.overrides:
            x = float(tok)
            d = val - float(f.core_value(x))
            left, right = recs.get(tok, [0.0, 0.0])
            if x == f.a:
                c0 += d
                recs[tok] = [0.0, right - d]
            elif x == f.b:
                recs[tok] = [left + d, 0.0]
            else:
                recs[tok] = [left + d, right - d]
        jumps = tuple(JumpRecord(k, l, r) for k, (l, r) in recs.items() if l != 0.0 or r != 0.0)
        return f.replace(c0=c0, jumps=jumps, overrides=())

    def restrict(self, c: float, d: float) -> "RepFunc":
        """f on [c, d] in saltus form with the constant extension at the new ends."""
        if not (self.a <= c < d <= self.b):
            raise DomainError(f"[{c}, {d}] is not a subinterval of [{self.a}, {self.b}]")
        f = self.truncated()
        pieces = []
        for p in f.pieces:
            u, v = max(p.u, c), min(p.v, d)
            if u < v:
                pieces.append(SmoothPiece(u, v, p.expr))
        jumps = []
        for r in f.jumps:
            if c < r.x < d:
                jumps.append(r)
            elif r.x == c and r.right != 0.0:
                jumps.append(JumpRecord(r.loc, 0.0, r.right))
            elif r.x == d and r.left != 0.0:
                jumps.append(JumpRecord(r.loc, r.left, 0.0))
        overrides = tuple(o for o in f.overrides if c <= float(o[0]) <= d)
        return RepFunc(c, d, tuple(pieces), f.c0 + float(f.disc_value(c)), tuple(jumps), None,
                       overrides, self.series_tol)


def _merge_records(*groups: Iterable[JumpRecord]) -> Tuple[JumpRecord, ...]:
    acc: Dict[Decimal, List[float]] = {}
    for group in groups:
        for r in group:
            cur = acc.setdefault(r.loc, [0.0, 0.0])
            cur[0] += r.left
            cur[1] += r.right
    return tuple(JumpRecord(k, l, r) for k, (l, r) in sorted(acc.items()) if l != 0.0 or r != 0.0)


@dataclass(frozen=True)
class StepFunc:
    breakpoints: Tuple[float, ...]
    values: Tuple[float, ...]
    node_values: Tuple[float, ...]

    def value(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        bk = np.asarray(self.breakpoints)
        idx = np.clip(np.searchsorted(bk, t, "left"), 0, len(bk) - 1)
        on_node = bk[idx] == t
        cell = np.clip(idx - 1, 0, len(self.values) - 1)
        return np.where(on_node, np.asarray(self.node_values)[idx], np.asarray(self.values)[cell])

    def to_repfunc(self) -> RepFunc:
        bk, vals, nodes = self.breakpoints, self.values, self.node_values
        jumps = [JumpRecord(to_token(bk[0]), 0.0, vals[0] - nodes[0])]
        for k in range(1, len(bk) - 1):
            jumps.append(JumpRecord(to_token(bk[k]), nodes[k] - vals[k - 1], vals[k] - nodes[k]))
        jumps.append(JumpRecord(to_token(bk[-1]), nodes[-1] - vals[-1], 0.0))
        jumps = [j for j in jumps if j.left != 0.0 or j.right != 0.0]
        return RepFunc(bk[0], bk[-1], (), nodes[0], tuple(jumps))


# ================================
# Constructors
# ================================

def constant(k: float, a: float, b: float) -> RepFunc:
    return RepFunc(a, b, (), float(k))


def identity_on(a: float, b: float) -> RepFunc:
    return RepFunc(a, b, (SmoothPiece(a, b, E.Poly((0.0, 1.0))),))


def unit_step(c: float | str, a: float, b: float, height: float = 1.0) -> RepFunc:
    """The unit function: 0 for t <= c, height for t > c."""
    return RepFunc(a, b, (), 0.0, (JumpRecord(to_token(c), 0.0, height),))


def from_expr(e: E.Expr, a: float, b: float) -> RepFunc:
    return RepFunc(a, b, (SmoothPiece(a, b, e),))


def _ptr(*parts: Any) -> str:
    return "/" + "/".join(str(p) for p in parts)


def _build_expr(node: Any) -> E.Expr:
    kind = node.kind
    if kind == "poly":
        return E.Poly(tuple(node.coeffs))
    if kind == "exp":
        return E.Exp(node.alpha, node.beta)
    if kind == "sin":
        return E.Sin(node.amp, node.omega, node.phase)
    if kind == "cos":
        return E.Cos(node.amp, node.omega, node.phase)
    if kind == "sum":
        return E.Sum(tuple(_build_expr(a) for a in node.args))
    if kind == "prod":
        return E.Prod(tuple(_build_expr(a) for a in node.args))
    if kind == "scale":
        return E.Scale(node.c, _build_expr(node.arg))
    if kind == "affine_compose":
        return E.AffineCompose(node.a, node.b, _build_expr(node.arg))
    raise SchemaError(f"unknown expression kind '{kind}'")


def _parse_token(raw: str, pointer: str) -> Decimal:
    try:
        tok = Decimal(raw)
    except (InvalidOperation, TypeError):
        raise SchemaError(f"'{raw}' is not a decimal string", pointer=pointer)
    if not tok.is_finite():
        raise SchemaError(f"'{raw}' is not a finite decimal", pointer=pointer)
    return tok


def make_func(spec: Dict[str, Any] | FuncDocument, series_tol: Optional[float] = None) -> RepFunc:
    """Validate a function-description document and build the RepFunc."""
    try:
        doc = spec if isinstance(spec, FuncDocument) else FuncDocument.model_validate(spec)
    except ValidationError as exc:
        first = exc.errors()[0]
        raise SchemaError(f"{first['msg']}", pointer=_ptr(*first["loc"]))

    a, b = doc.domain
    if not a < b:
        raise InvariantError(f"domain [{a}, {b}] must satisfy a < b", pointer="/domain")
    tol = settings.continuity_tol

    pieces: List[SmoothPiece] = []
    for i, spec_piece in enumerate(doc.continuous):
        u, v = spec_piece.on
        if not u < v:
            raise InvariantError(f"piece [{u}, {v}] must satisfy u < v", pointer=_ptr("continuous", i, "on"))
        expected = a if i == 0 else pieces[-1].v
        if u != expected:
            raise InvariantError(f"pieces must tile [a, b]: expected start {expected}, got {u}",
                                 pointer=_ptr("continuous", i, "on"))
        pieces.append(SmoothPiece(u, v, _build_expr(spec_piece.expr)))
    if pieces and pieces[-1].v != b:
        raise InvariantError(f"pieces must end at b = {b}", pointer=_ptr("continuous", len(pieces) - 1, "on"))
    for i in range(1, len(pieces)):
        x = pieces[i].u
        lhs, rhs = float(pieces[i - 1].expr.value(x)), float(pieces[i].expr.value(x))
        if abs(lhs - rhs) > tol * max(1.0, abs(lhs), abs(rhs)):
            raise InvariantError(f"continuous part breaks at {x}: {lhs} vs {rhs}", pointer=_ptr("continuous", i))

    seen: Dict[Decimal, str] = {}
    floats: Dict[float, Decimal] = {}

    def claim(tok: Decimal, pointer: str) -> float:
        x = float(tok)
        if not a <= x <= b:
            raise InvariantError(f"location {tok} outside [{a}, {b}]", pointer=pointer)
        if tok in seen:
            raise InvariantError(f"location {tok} already used at {seen[tok]}", pointer=pointer)
        if x in floats:
            raise InvariantError(f"locations {floats[x]} and {tok} are indistinguishable in binary", pointer=pointer)
        seen[tok], floats[x] = pointer, tok
        return x

    jumps: List[JumpRecord] = []
    for i, j in enumerate(doc.jumps):
        pointer = _ptr("jumps", i, "t")
        tok = _parse_token(j.t, pointer)
        x = claim(tok, pointer)
        if x == a and j.left != 0.0:
            raise InvariantError("left jump at a must be 0", pointer=_ptr("jumps", i, "left"))
        if x == b and j.right != 0.0:
            raise InvariantError("right jump at b must be 0", pointer=_ptr("jumps", i, "right"))
        jumps.append(JumpRecord(tok, float(j.left), float(j.right)))

    overrides: List[Tuple[Decimal, float]] = []
    for i, o in enumerate(doc.overrides):
        pointer = _ptr("overrides", i, "t")
        tok = _parse_token(o.t, pointer)
        claim(tok, pointer)
        overrides.append((tok, float(o.value)))

    series = None
    if doc.series is not None:
        s = doc.series
        if not 0.0 < s.r < 1.0:
            raise InvariantError("series ratio r must lie in (0, 1)", pointer="/series/r")
        if not abs(s.q) < 1.0:
            raise InvariantError("series magnitude ratio q must satisfy |q| < 1", pointer="/series/q")
        if not 0.0 < s.c < b - a:
            raise InvariantError("series offset c must lie in (0, b - a)", pointer="/series/c")
        series = JumpSeries(s.side, s.c, s.r, s.A, s.q, a, b)
        for tok, pointer in seen.items():
            if series.index_of(float(tok)) is not None:
                raise InvariantError(f"location {tok} coincides with a series location", pointer=pointer)

    f = RepFunc(a, b, tuple(pieces), float(doc.c0), tuple(jumps), series, tuple(overrides),
                settings.series_tol if series_tol is None else series_tol)
    logger.debug(f"🧩 Built function on [{a}, {b}]: {len(pieces)} pieces, {len(jumps)} jumps, "
                 f"series={'yes' if series else 'no'}, {len(overrides)} overrides")
    return f


# ================================
# Pointwise calculus
# ================================

def _check_domain(f: RepFunc, t) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    if np.any((t < f.a) | (t > f.b)) or np.any(np.isnan(t)):
        raise DomainError(f"point outside [{f.a}, {f.b}]")
    return t


def evaluate(f: RepFunc, t):
    """f(t) honoring overrides; float for scalar input."""
    out = f.value(_check_domain(f, t))
    return float(out) if np.ndim(out) == 0 else out


def limits_and_jumps(f: RepFunc, t: float) -> Limits:
    _check_domain(f, t)
    core = float(f.core_value(t))
    lo, hi = float(f.left_limit(t)), float(f.right_limit(t))
    left, right = core - lo, hi - core
    return Limits(lo, hi, left, right, left + right)


def decompose(f: RepFunc) -> Tuple[RepFunc, RepFunc]:
    """(f_c, f_d) with f_d(a) = 0; overrides stay with f_d."""
    fc = f.continuous_part()
    overrides = tuple((tok, v - float(fc.value(float(tok)))) for tok, v in f.overrides)
    fd = RepFunc(f.a, f.b, (), 0.0, f.jumps, f.series, overrides, f.series_tol)
    return fc, fd


def rl_split(f: RepFunc) -> Tuple[RepFunc, RepFunc]:
    """(f_plus, f_minus): right-continuous part from left jumps, left-continuous remainder."""
    lefts = tuple(JumpRecord(r.loc, r.left, 0.0) for r in f.jumps if r.left != 0.0)
    rights = tuple(JumpRecord(r.loc, 0.0, r.right) for r in f.jumps if r.right != 0.0)
    f_plus = RepFunc(f.a, f.b, (), 0.0, lefts, None, (), f.series_tol)
    overrides = tuple((tok, v - float(f_plus.value(float(tok)))) for tok, v in f.overrides)
    f_minus = RepFunc(f.a, f.b, f.pieces, f.c0, rights, f.series, overrides, f.series_tol)
    return f_plus, f_minus


def _same_domain(f: RepFunc, g: RepFunc) -> None:
    if f.a != g.a or f.b != g.b:
        raise DomainMismatch(f"domains differ: [{f.a}, {f.b}] vs [{g.a}, {g.b}]")


def _merged_pieces(fs: Sequence[RepFunc], combine: Callable[[Sequence[E.Expr]], E.Expr]) -> Tuple[SmoothPiece, ...]:
    if not any(f.pieces for f in fs):
        return ()
    a, b = fs[0].a, fs[0].b
    edges = np.unique(np.concatenate([[a, b]] + [f._inner for f in fs]))
    out = []
    for u, v in zip(edges[:-1], edges[1:]):
        mid = 0.5 * (u + v)
        out.append(SmoothPiece(float(u), float(v), combine([f.piece_at(mid) for f in fs])))
    return tuple(out)


def scale(f: RepFunc, c: float) -> RepFunc:
    c = float(c)
    series = None
    if f.series is not None and c != 0.0:
        s = f.series
        series = JumpSeries(s.side, s.c, s.r, c * s.A, s.q, s.a, s.b)
    return RepFunc(
        f.a, f.b,
        tuple(SmoothPiece(p.u, p.v, E.scale(c, p.expr)) for p in f.pieces),
        c * f.c0,
        tuple(JumpRecord(r.loc, c * r.left, c * r.right) for r in f.jumps if c != 0.0),
        series,
        tuple((tok, c * v) for tok, v in f.overrides),
        f.series_tol,
    )


def add(f: RepFunc, g: RepFunc) -> RepFunc:
    _same_domain(f, g)
    series = f.series or g.series
    extra: List[JumpRecord] = []
    if f.series is not None and g.series is not None:
        if f.series.same_geometry(g.series):
            s = f.series
            series = JumpSeries(s.side, s.c, s.r, s.A + g.series.A, s.q, s.a, s.b)
        else:
            logger.debug("➕ Folding the second jump series into finite records")
            g = g.truncated()
    if series is not None:
        clash = [r for r in (f.jumps + g.jumps) if series.index_of(r.x) is not None]
        if clash:
            extra = series.records((f if f.series else g).series_terms - 1)
            series = None
    pieces = _merged_pieces((f, g), lambda es: E.add(*es))
    jumps = _merge_records(f.jumps, g.jumps, extra)
    out = RepFunc(f.a, f.b, pieces, f.c0 + g.c0, jumps, series, (), f.series_tol)
    return _with_overrides(out, (f, g), lambda vals: vals[0] + vals[1])


def _with_overrides(out: RepFunc, operands: Sequence[RepFunc],
                    scalar: Callable[[Sequence[np.ndarray]], np.ndarray]) -> RepFunc:
    """Attach override values of the combined function, absorbing collisions with jumps."""
    toks: Dict[Decimal, float] = {}
    for f in operands:
        for tok, _ in f.overrides:
            toks[tok] = float(tok)
    if not toks:
        return out
    overrides = []
    for tok, x in sorted(toks.items()):
        val = float(scalar([np.asarray(f.value(x)) for f in operands]))
        if val != float(out.core_value(x)):
            overrides.append((tok, val))
    candidate = out.replace(overrides=tuple(overrides))
    collide = {r.loc for r in out.records} & {t for t, _ in overrides}
    if collide or any(float(t) in (out.a, out.b) and out.jump_at(float(t)) != (0.0, 0.0) for t, _ in overrides):
        keep = tuple(o for o in overrides if o[0] not in collide)
        hit = out.replace(overrides=tuple(o for o in overrides if o[0] in collide)).absorbed()
        return hit.replace(overrides=keep)
    return candidate


def pointwise(operands: Sequence[RepFunc], node: Callable[[Sequence[E.Expr]], E.Expr],
              scalar: Callable[[Sequence[np.ndarray]], np.ndarray]) -> RepFunc:
    """
    Cellwise builder for nonlinear combinations. Between consecutive special
    points every operand is one expression plus a constant, so the result is
    ``node`` of those; jumps are recomputed from one-sided limits.
    """
    f0 = operands[0]
    for f in operands[1:]:
        _same_domain(f0, f)
    if any(f.series is not None for f in operands):
        raise UnsupportedProduct("pointwise products and maps need finite jump lists")

    a, b = f0.a, f0.b
    toks: Dict[float, Decimal] = {}
    for f in operands:
        toks.update(f.tokens())
    jump_x = {r.x for f in operands for r in f.records}
    pts = np.unique(np.concatenate([f.breakpoints() for f in operands]))

    cells = [node([f.expr_on(u, v) for f in operands]) for u, v in zip(pts[:-1], pts[1:])]
    core = np.asarray(scalar([f.core_value(pts) for f in operands]), dtype=float)
    full = np.asarray(scalar([f.value(pts) for f in operands]), dtype=float)

    records: List[JumpRecord] = []
    overrides: List[Tuple[Decimal, float]] = []
    shift = np.zeros(len(cells))
    for j, x in enumerate(pts):
        lo = float(cells[j - 1].value(x)) if j > 0 else None
        hi = float(cells[j].value(x)) if j < len(cells) else None
        node_val = core[j]
        left = node_val - lo if lo is not None else 0.0
        right = hi - node_val if hi is not None else 0.0
        scale_ = _ZERO_JUMP * (1.0 + abs(node_val))
        keep = (x in jump_x and (left != 0.0 or right != 0.0)) or abs(left) + abs(right) > scale_
        tok = toks.get(float(x), to_token(float(x)))
        if full[j] != core[j]:
            if keep:
                node_val = full[j]
                left = node_val - lo if lo is not None else 0.0
                right = hi - node_val if hi is not None else 0.0
            else:
                overrides.append((tok, float(full[j])))
        if keep:
            records.append(JumpRecord(tok, left, right))
            shift[j:] += left + right

    pieces = tuple(SmoothPiece(float(u), float(v), E.add(cells[k], E.const(-shift[k])))
                   for k, (u, v) in enumerate(zip(pts[:-1], pts[1:])))
    return RepFunc(a, b, pieces, 0.0, tuple(records), None, tuple(overrides), f0.series_tol)


def mul(f: RepFunc, g: RepFunc) -> RepFunc:
    return pointwise((f, g), lambda es: E.mul(*es), lambda vals: vals[0] * vals[1])


def map_values(f: RepFunc, fn: str, param: float = 1.0) -> RepFunc:
    """|f|, |f|^p, exp(f) or 1/f as a representable function."""
    return pointwise((f,), lambda es: E.Apply(fn, es[0], param), lambda vals: E.apply_scalar_map(fn, param, vals[0]))


def abs_of(f: RepFunc) -> RepFunc:
    return map_values(f, "abs")


def pow_abs(f: RepFunc, p: float) -> RepFunc:
    return map_values(f, "abspow", p)


def exp_of(f: RepFunc) -> RepFunc:
    return map_values(f, "exp")


def reciprocal(f: RepFunc) -> RepFunc:
    return map_values(f, "recip")


def combine(op: str, f: RepFunc, g: RepFunc | float) -> RepFunc:
    """add | scale | mul; a real second operand scales (or shifts, for add)."""
    if op == "scale":
        if isinstance(g, RepFunc):
            raise UnsupportedProduct("scale expects a real factor")
        return scale(f, g)
    if not isinstance(g, RepFunc):
        g = scale(f, float(g)) if op == "mul" else constant(float(g), f.a, f.b)
        return g if op == "mul" else add(f, g)
    if op == "add":
        return add(f, g)
    if op == "mul":
        return mul(f, g)
    raise InvariantError(f"unknown combinator '{op}'")


def subtract(f: RepFunc, g: RepFunc) -> RepFunc:
    return add(f, scale(g, -1.0))


# ================================
# Step approximation
# ================================

def step_approx(f: RepFunc, eps: float, max_cells: Optional[int] = None) -> StepFunc:
    """
    Step function within eps of f in sup norm (series tail included).

    Every cell between consecutive breakpoints of f is bisected until the
    oscillation of f over it is at most 2 (eps - tail); the cell then takes
    the midrange value and the nodes keep the exact values of f. The identity
    on [0, 1] with eps = 0.1 therefore gives 8 cells.
    """
    if eps <= 0.0:
        raise DomainError("eps must be positive")
    max_cells = max_cells or 64 * settings.max_cells
    g = f
    tail = 0.0
    if f.series is not None:
        n = f.series.terms_for(eps / 4.0)
        if n > 10 ** 6:
            raise BudgetExceeded(f"series needs {n} terms to reach {eps}")
        tail = f.series.tail_bound(n)
        g = f.replace(jumps=_merge_records(f.jumps, f.series.records(n)), series=None)
    budget = 2.0 * (eps - tail) * (1.0 - 1e-9)

    pts = g.breakpoints()
    nodes = [float(pts[0])]
    values: List[float] = []
    stack = [(float(u), float(v)) for u, v in zip(pts[:-1], pts[1:])][::-1]
    while stack:
        u, v = stack.pop()
        base = g.c0 + float(g.disc_value(0.5 * (u + v)))
        lo, hi = g.piece_at(0.5 * (u + v)).bounds(u, v)
        if hi - lo > budget:
            if len(nodes) > max_cells:
                raise BudgetExceeded(f"step approximation needs more than {max_cells} cells")
            m = 0.5 * (u + v)
            stack.extend([(m, v), (u, m)])
            continue
        values.append(base + 0.5 * (lo + hi))
        nodes.append(v)
    node_values = tuple(float(x) for x in g.value(np.asarray(nodes)))
    logger.debug(f"🪜 Step approximation with {len(values)} cells (eps={eps})")
    return StepFunc(tuple(nodes), tuple(values), node_values)


# ================================
# Serialization
# ================================

def expr_to_node(e: E.Expr) -> Dict[str, Any]:
    if isinstance(e, E.Poly):
        return {"kind": "poly", "coeffs": list(e.coeffs)}
    if isinstance(e, E.Exp):
        return {"kind": "exp", "alpha": e.alpha, "beta": e.beta}
    if isinstance(e, (E.Sin, E.Cos)):
        return {"kind": "sin" if isinstance(e, E.Sin) else "cos", "amp": e.amp, "omega": e.omega, "phase": e.phase}
    if isinstance(e, (E.Sum, E.Prod)):
        return {"kind": "sum" if isinstance(e, E.Sum) else "prod", "args": [expr_to_node(x) for x in e.args]}
    if isinstance(e, E.Scale):
        return {"kind": "scale", "c": e.c, "arg": expr_to_node(e.arg)}
    if isinstance(e, E.AffineCompose):
        return {"kind": "affine_compose", "a": e.a, "b": e.b, "arg": expr_to_node(e.arg)}
    raise SchemaError(f"{type(e).__name__} nodes have no document form")


def to_document(f: RepFunc) -> Dict[str, Any]:
    """Function-description document for f (catalogue nodes only)."""
    doc: Dict[str, Any] = {
        "domain": [f.a, f.b],
        "c0": f.c0,
        "continuous": [{"on": [p.u, p.v], "expr": expr_to_node(p.expr)} for p in f.pieces],
        "jumps": [{"t": token_str(r.loc), "left": r.left, "right": r.right} for r in f.jumps],
        "overrides": [{"t": token_str(t), "value": v} for t, v in f.overrides],
    }
    if f.series is not None:
        s = f.series
        doc["series"] = {"kind": "geometric", "side": s.side, "c": s.c, "r": s.r, "A": s.A, "q": s.q}
    return doc
