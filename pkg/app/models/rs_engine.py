"""
Classical Riemann-Stieltjes integration.

rs_integral encloses the integral by Darboux sums against the increasing
parts g_pi and g_nu of g, bisecting the cells with the largest
oscillation-times-increment until S - s <= tol or the depth cap. Only the
Darboux pair decides CERTIFIED. Finite jumps of g enter as exact point
masses f(x) sigma_x. The reduction
int f g_c' dt + sum f(t_k) sigma_{t_k}(g) supplies the reported point,
clipped into the enclosure.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Any, Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from app.config import settings
from app.models.funcrep import RepFunc, token_str
from app.models.quadrature import integrate_cells
from app.models.variation import Partition, ensure_increasing, total_variation, variation_function
from app.utils.errors import DomainMismatch, InfiniteVariation, InvariantError, NonexistentIntegral
from app.utils.logger import logger


class EnclosureStatus(str, Enum):
    CERTIFIED = "CERTIFIED"
    NONEXISTENT = "NONEXISTENT"
    BUDGET = "BUDGET"


@dataclass(frozen=True)
class Enclosure:
    lo: float
    hi: float
    depth: int
    status: EnclosureStatus
    cells: int = 0
    darboux: Tuple[float, float] = (float("-inf"), float("inf"))
    partition: Tuple[float, ...] = ()
    point: Optional[float] = None

    @property
    def value(self) -> float:
        if self.point is None:
            return 0.5 * (self.lo + self.hi)
        return min(max(self.point, self.lo), self.hi)

    @property
    def error_bound(self) -> float:
        return max(self.hi - self.value, self.value - self.lo)


@dataclass(frozen=True)
class TaggedPartition:
    partition: Partition
    tags: Tuple[float, ...]

    def __post_init__(self):
        pts = self.partition.points
        if len(self.tags) != len(pts) - 1:
            raise InvariantError("one tag per cell is required")
        for k, xi in enumerate(self.tags):
            if not pts[k] <= xi <= pts[k + 1]:
                raise InvariantError(f"tag {xi} is outside cell [{pts[k]}, {pts[k + 1]}]")

    @classmethod
    def midpoints(cls, partition: Partition) -> "TaggedPartition":
        pts = partition.array
        return cls(partition, tuple(0.5 * (pts[:-1] + pts[1:])))

    @classmethod
    def random(cls, partition: Partition, rng: np.random.Generator) -> "TaggedPartition":
        pts = partition.array
        return cls(partition, tuple(rng.uniform(pts[:-1], pts[1:])))


class ExistsResult(NamedTuple):
    status: str
    loc: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.status == "OK"


class ByPartsResult(NamedTuple):
    lhs: float
    rhs: float
    error_bound: float


class ReductionResult(NamedTuple):
    value: float
    error_bound: float
    series_terms: int


def _same_domain(f: RepFunc, g: RepFunc) -> None:
    if f.a != g.a or f.b != g.b:
        raise DomainMismatch(f"domains differ: [{f.a}, {f.b}] vs [{g.a}, {g.b}]")


def stieltjes_sum(f: RepFunc, g: RepFunc, tp: TaggedPartition) -> float:
    _same_domain(f, g)
    tp.partition.check(f)
    return float(np.sum(f.value(np.asarray(tp.tags)) * np.diff(g.value(tp.partition.array))))


def _darboux_cells(f: RepFunc, g: RepFunc, edges: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    bounds = np.array([f.cell_bounds(u, v) for u, v in zip(edges[:-1], edges[1:])]).reshape(-1, 2)
    dg = np.diff(g.value(edges))
    return bounds[:, 0], bounds[:, 1], dg


def darboux_bounds(f: RepFunc, g: RepFunc, tau: Partition | Sequence[float],
                   check_increasing: bool = True) -> Tuple[float, float]:
    """(s_tau, S_tau) for increasing g."""
    _same_domain(f, g)
    tau = tau if isinstance(tau, Partition) else Partition(tuple(tau))
    tau.check(f)
    if check_increasing:
        ensure_increasing(g)
    m, M, dg = _darboux_cells(f, g, tau.array)
    return float(np.sum(m * dg)), float(np.sum(M * dg))


def discontinuities(f: RepFunc) -> Dict[str, str]:
    """token string -> 'jump' | 'override' for the finite discontinuity set."""
    out = {token_str(r.loc): "jump" for r in f.records if r.left != 0.0 or r.right != 0.0}
    out.update({token_str(t): "override" for t, _ in f.overrides})
    return out


def rs_exists_check(f: RepFunc, g: RepFunc) -> ExistsResult:
    """OK, CommonDiscontinuity(loc) or MeasureFail(loc) (a removable discontinuity is involved)."""
    _same_domain(f, g)
    df, dg = discontinuities(f), discontinuities(g)
    common = sorted(set(df) & set(dg), key=float)
    # Series points beyond truncation still collide exactly with the other side.
    if f.series is not None:
        common += sorted((t for t in dg if f.series.index_of(float(t)) is not None and t not in df), key=float)
    if g.series is not None:
        common += sorted((t for t in df if g.series.index_of(float(t)) is not None and t not in dg), key=float)
    if f.series is not None and g.series is not None and f.series.same_geometry(g.series):
        common.append(token_str(f.records[0].loc) if f.records else "series")
    if not common:
        return ExistsResult("OK")
    loc = common[0]
    if df.get(loc) == "jump" and dg.get(loc, "jump") == "jump":
        return ExistsResult("CommonDiscontinuity", loc)
    return ExistsResult("MeasureFail", loc)


def _require_exists(f: RepFunc, g: RepFunc) -> None:
    check = rs_exists_check(f, g)
    if not check.ok:
        raise NonexistentIntegral(f"f and g are both discontinuous at {check.loc}", loc=check.loc, kind=check.status)


def continuous_part_integral(f: RepFunc, g: RepFunc, tol: Optional[float] = None) -> Tuple[float, float]:
    """(value, error) of int f dg_c = int f g_c' dt, split at all special points of f and g."""
    tol = settings.quad_tol if tol is None else tol
    if not g.pieces:
        return 0.0, 0.0
    edges = np.unique(np.concatenate((f.breakpoints(), g.breakpoints())))
    vals, errs = integrate_cells(lambda t: f.core_value(t) * g.cont_deriv(t), edges, tol)
    return float(vals.sum()), float(errs.sum())


def rs_reduce(f: RepFunc, g: RepFunc, tol: Optional[float] = None) -> ReductionResult:
    """int f g_c' dt + sum f(t_k) sigma_{t_k}(g); series tail folded into the error."""
    _require_exists(f, g)
    value, err = continuous_part_integral(f, g, tol)
    recs = g.absorbed().records if g.overrides else g.records
    if recs:
        xs = np.array([r.x for r in recs])
        sig = np.array([r.sigma for r in recs])
        value += float(np.sum(f.value(xs) * sig))
    if g.series is not None:
        err += f.sup_norm() * g.series_tail
    if f.series is not None:
        err += f.series_tail * total_variation(g.continuous_part()).value
    return ReductionResult(value, err, g.series_terms)


def _refine(f: RepFunc, h: RepFunc, edges: np.ndarray, tol: float, max_depth: int,
            max_cells: int) -> Tuple[float, float, np.ndarray, int]:
    """Adaptive Darboux sums of f against increasing h; bisects the cells carrying half the gap."""
    m, M, dh = _darboux_cells(f, h, edges)
    cells: List[List[float]] = [[u, v, 0, lo, hi, d] for u, v, lo, hi, d
                                in zip(edges[:-1], edges[1:], m, M, dh)]
    while True:
        w = np.array([(c[4] - c[3]) * c[5] for c in cells])
        gap = float(w.sum())
        if gap <= tol:
            break
        order = [i for i in np.argsort(-w) if cells[i][2] < max_depth]
        if not order:
            break
        cum = np.cumsum(w[order])
        pick = set(order[: int(np.searchsorted(cum, 0.5 * gap)) + 1])
        if len(cells) + len(pick) > max_cells:
            break
        refined = []
        for i, (u, v, depth, lo, hi, d) in enumerate(cells):
            if i not in pick:
                refined.append([u, v, depth, lo, hi, d])
                continue
            mid = 0.5 * (u + v)
            for s, e in ((u, mid), (mid, v)):
                clo, chi = f.cell_bounds(s, e)
                refined.append([s, e, depth + 1, clo, chi, float(h.value(e) - h.value(s))])
        cells = refined
    s = float(sum(c[3] * c[5] for c in cells))
    S = float(sum(c[4] * c[5] for c in cells))
    out_edges = np.array([c[0] for c in cells] + [cells[-1][1]])
    return s, S, out_edges, int(max(c[2] for c in cells))


def _split_point_masses(f: RepFunc, h: RepFunc) -> Tuple[RepFunc, float]:
    """(remainder of h, exact sum of f(x) sigma_x(h) over its finite jumps); f is continuous there."""
    h = h.absorbed() if h.overrides else h
    if h.series is not None or not h.jumps:
        return h, 0.0
    xs = np.array([r.x for r in h.jumps])
    sig = np.array([r.sigma for r in h.jumps])
    return h.continuous_part(), float(np.sum(f.value(xs) * sig))


def rs_integral(f: RepFunc, g: RepFunc, tol: Optional[float] = None, max_depth: Optional[int] = None,
                max_cells: Optional[int] = None) -> Enclosure:
    tol = settings.tol if tol is None else tol
    max_depth = settings.max_depth if max_depth is None else max_depth
    max_cells = settings.max_cells if max_cells is None else max_cells
    _require_exists(f, g)
    if total_variation(g).infinite:
        raise InfiniteVariation("the integrator must have finite variation")

    g_pi, g_nu = variation_function(g)
    edges = np.unique(np.concatenate((f.breakpoints(), g_pi.breakpoints())))
    lo = hi = point = 0.0
    depth, cells = 0, 0
    final_edges = edges
    for sign, h in ((1.0, g_pi), (-1.0, g_nu)):
        if not h.pieces and not h.has_jumps and h.c0 == 0.0:
            continue
        estimate = rs_reduce(f, h).value
        rest, mass = _split_point_masses(f, h)
        s, S, part_edges, d = _refine(f, rest, edges, 0.5 * tol, max_depth, max_cells)
        s, S = s + mass, S + mass
        slack = 1e-12 * max(1.0, abs(estimate))
        if not s - slack <= estimate <= S + slack:
            logger.warning(f"⚠️ Quadrature estimate {estimate} falls outside Darboux bounds [{s}, {S}]")
        estimate = min(max(estimate, s), S)
        if sign > 0:
            lo, hi, point = lo + s, hi + S, point + estimate
        else:
            lo, hi, point = lo - S, hi - s, point - estimate
        depth, cells = max(depth, d), max(cells, len(part_edges) - 1)
        final_edges = np.union1d(final_edges, part_edges)

    status = EnclosureStatus.CERTIFIED if hi - lo <= tol else EnclosureStatus.BUDGET
    if status is EnclosureStatus.BUDGET:
        logger.warning(f"⚠️ RS enclosure width {hi - lo:.3e} exceeds tol {tol:.1e} (depth {depth}, {cells} cells)")
    else:
        logger.debug(f"∫ RS enclosure [{lo:.15g}, {hi:.15g}] depth {depth}, {cells} cells")
    return Enclosure(lo, hi, depth, status, cells, (lo, hi), tuple(float(x) for x in final_edges), point)


def rs_by_parts(f: RepFunc, g: RepFunc, **kwargs: Any) -> ByPartsResult:
    """(int f dg + int g df, f(b)g(b) - f(a)g(a))."""
    _same_domain(f, g)
    i1 = rs_integral(f, g, **kwargs)
    i2 = rs_integral(g, f, **kwargs)
    rhs = float(f.value(f.b) * g.value(g.b) - f.value(f.a) * g.value(g.a))
    return ByPartsResult(i1.value + i2.value, rhs, i1.error_bound + i2.error_bound)
