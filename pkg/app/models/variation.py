"""
Total variation, the variation function and Jordan decomposition, partition
sums and the g-measure of open sets.

The jump part contributes sum(|sigma^-| + |sigma^+|) (series in closed form).
The continuous part is the integral of |f'|, which on every monotone segment
between consecutive critical points equals |f(s_{i+1}) - f(s_i)|.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from app.config import settings
from app.models import expr as E
from app.models.funcrep import JumpRecord, JumpSeries, RepFunc, SmoothPiece, subtract
from app.models.quadrature import integrate_cells
from app.utils.errors import DomainError, InfiniteVariation, InvariantError, NotIncreasing
from app.utils.logger import logger

INFINITE_SUSPECTED = "INFINITE_SUSPECTED"

# Dyadic levels of the divergence heuristic.
_LEVELS = range(6, 13)
# Increment ratio above which partition lower bounds are taken to keep growing.
_GROWTH_RATIO = 0.5


@dataclass(frozen=True)
class Partition:
    points: Tuple[float, ...]

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.size < 2 or np.any(np.diff(pts) <= 0):
            raise InvariantError("partition points must be strictly increasing")
        object.__setattr__(self, "points", tuple(float(p) for p in pts))

    @classmethod
    def uniform(cls, a: float, b: float, n: int) -> "Partition":
        return cls(tuple(np.linspace(a, b, n + 1)))

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.points)

    def mesh(self) -> float:
        return float(np.max(np.diff(self.array)))

    def check(self, f: RepFunc) -> None:
        if self.points[0] != f.a or self.points[-1] != f.b:
            raise InvariantError(f"partition must run from {f.a} to {f.b}")


@dataclass(frozen=True)
class VariationResult:
    value: float | str
    lo: float
    hi: float
    parts: Tuple[float, float]
    simplified_jump_sum: float = 0.0
    diagnostics: Dict[str, Any] = field(default_factory=dict)

    @property
    def infinite(self) -> bool:
        return self.value == INFINITE_SUSPECTED

    @property
    def enclosure(self) -> Tuple[float, float]:
        return self.lo, self.hi

    @property
    def error_bound(self) -> float:
        return self.hi - self.lo


def partition_sum(f: RepFunc, tau: Partition | Sequence[float]) -> float:
    """v_tau(f) = sum |f(t_k) - f(t_{k-1})|."""
    tau = tau if isinstance(tau, Partition) else Partition(tuple(tau))
    tau.check(f)
    return float(np.sum(np.abs(np.diff(f.value(tau.array)))))


def _segments(e: E.Expr, u: float, v: float) -> np.ndarray:
    return np.concatenate(([u], e.critical_points(u, v), [v]))


def _piece_variation(p: SmoothPiece, tol: float) -> Tuple[float, float, float]:
    """(value, lo, hi) for one piece."""
    nodes = _segments(p.expr, p.u, p.v)
    seg = float(np.sum(np.abs(np.diff(p.expr.value(nodes)))))
    if p.expr.exact_extrema:
        slack = 4 * np.spacing(max(seg, 1.0)) * nodes.size
        return seg, seg - slack, seg + slack
    vals, errs = integrate_cells(lambda t: np.abs(p.expr.deriv(t)), nodes, tol)
    quad, err = float(vals.sum()), float(errs.sum())
    return max(seg, quad), max(seg, quad - err), max(seg, quad + err)


def _divergence_probe(p: SmoothPiece, budget: float, tol: float) -> Tuple[bool, float, List[float]]:
    """Dyadic partition lower bounds; True when they keep growing or pass the budget."""
    sums = []
    for k in _LEVELS:
        grid = np.linspace(p.u, p.v, 2 ** k + 1)
        sums.append(float(np.sum(np.abs(np.diff(p.expr.value(grid))))))
        if sums[-1] > budget:
            return True, sums[-1], sums
    inc = np.diff(sums)
    ratios = inc[1:] / np.where(inc[:-1] == 0.0, np.inf, inc[:-1])
    growing = bool(np.all(ratios[-3:] >= _GROWTH_RATIO) and inc[-1] > tol)
    return growing, sums[-1], sums


def jump_variation(f: RepFunc) -> Tuple[float, float]:
    """(sum |sigma^-| + |sigma^+|, sum |sigma|) for an override-free function."""
    full = sum(abs(r.left) + abs(r.right) for r in f.jumps)
    simple = sum(abs(r.sigma) for r in f.jumps)
    if f.series is not None:
        full += f.series.total_mass
        simple += f.series.total_mass
    return full, simple


def total_variation(f: RepFunc, tol: Optional[float] = None,
                    divergence_budget: Optional[float] = None) -> VariationResult:
    tol = settings.tol if tol is None else tol
    budget = settings.divergence_budget if divergence_budget is None else divergence_budget
    g = f.absorbed()

    vd, simple = jump_variation(g)
    if abs(simple - vd) > 1e-12 * max(1.0, vd):
        logger.warning(f"⚠️ Simplified jump sum {simple:.12g} differs from the full jump variation {vd:.12g}: "
                       f"some values sit outside their one-sided limits")

    vc, lo, hi = 0.0, 0.0, 0.0
    share = tol / max(len(g.pieces), 1)
    for p in g.pieces:
        if not p.expr.bounded_variation:
            growing, lower, sums = _divergence_probe(p, budget, tol)
            if growing:
                logger.warning(f"⚠️ Variation on [{p.u}, {p.v}] looks unbounded: partition sums {sums[-3:]}")
                return VariationResult(INFINITE_SUSPECTED, lower + vd, float("inf"), (float("inf"), vd), simple,
                                       {"partition_sums": sums})
            pv, plo, phi = lower, lower, lower + (sums[-1] - sums[-2])
        else:
            pv, plo, phi = _piece_variation(p, share)
        vc, lo, hi = vc + pv, lo + plo, hi + phi

    value = vc + vd
    logger.debug(f"📏 Variation: continuous {vc:.12g}, jumps {vd:.12g}")
    return VariationResult(value, lo + vd, hi + vd, (vc, vd), simple,
                           {"pieces": len(g.pieces), "jumps": len(g.jumps),
                            "series": g.series is not None})


def total_variation_on(f: RepFunc, c: float, d: float, **kwargs: Any) -> VariationResult:
    return total_variation(f.restrict(c, d), **kwargs)


def _running_pieces(p: SmoothPiece, start: float) -> Tuple[List[SmoothPiece], float]:
    """Pieces of t -> start + V_u^t(expr) split at critical points; returns (pieces, end value)."""
    nodes = _segments(p.expr, p.u, p.v)
    vals = p.expr.value(nodes)
    out = []
    acc = start
    for s, e, ys, ye in zip(nodes[:-1], nodes[1:], vals[:-1], vals[1:]):
        if e <= s:
            continue
        sign = 1.0 if ye >= ys else -1.0
        out.append(SmoothPiece(float(s), float(e), E.add(E.const(acc - sign * ys), E.scale(sign, p.expr))))
        acc += abs(ye - ys)
    return out, acc


def variation_function(f: RepFunc) -> Tuple[RepFunc, RepFunc]:
    """(f_pi, f_nu) with f_pi(t) = V_a^t(f), f_nu = f_pi - f, both increasing."""
    if total_variation(f).infinite:
        raise InfiniteVariation("variation function needs finite total variation")
    g = f.absorbed()
    pieces: List[SmoothPiece] = []
    acc = 0.0
    for p in g.pieces:
        new, acc = _running_pieces(p, acc)
        pieces.extend(new)
    jumps = tuple(JumpRecord(r.loc, abs(r.left), abs(r.right)) for r in g.jumps)
    series = None
    if g.series is not None:
        s = g.series
        series = JumpSeries(s.side, s.c, s.r, abs(s.A), abs(s.q), s.a, s.b)
    f_pi = RepFunc(g.a, g.b, tuple(pieces), 0.0, jumps, series, (), g.series_tol)
    return f_pi, subtract(f_pi, g)


def ensure_increasing(g: RepFunc, tol: Optional[float] = None) -> None:
    """NotIncreasing unless V(g) - (g(b) - g(a)), the variation of g_nu, is within tol."""
    tol = settings.increasing_tol if tol is None else tol
    var = total_variation(g)
    rise = float(g.value(g.b) - g.value(g.a))
    if var.infinite or var.value - rise > tol * max(1.0, abs(rise)):
        raise NotIncreasing(f"function is not increasing (variation {var.value} vs rise {rise})")


def g_measure_open(g: RepFunc, intervals: Sequence[Tuple[float, float]]) -> float:
    """mu_g(G) = sum (g(b_k-) - g(a_k+)) for G the union of disjoint open intervals."""
    ensure_increasing(g)
    ivs = sorted((float(u), float(v)) for u, v in intervals)
    for i, (u, v) in enumerate(ivs):
        if not (g.a <= u < v <= g.b):
            raise DomainError(f"interval ({u}, {v}) is not inside [{g.a}, {g.b}]")
        if i and u < ivs[i - 1][1]:
            raise DomainError(f"intervals ({ivs[i - 1][0]}, {ivs[i - 1][1]}) and ({u}, {v}) overlap")
    us = np.array([u for u, _ in ivs])
    vs = np.array([v for _, v in ivs])
    return float(np.sum(g.left_limit(vs) - g.right_limit(us)))
