"""
One-sided epsilon-averages.

y_eps(t) = (1/eps) int_t^{t+eps} y_+(s) ds + (1/eps) int_{t-eps}^t y_-(s) ds

where y = y_+ + y_- is the rl-split and y is extended by its end values
outside [a, b]. The result has no jumps: a left jump at x becomes a ramp
on [x - eps, x], a right jump a ramp on [x, x + eps].
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from app.config import settings
from app.models import expr as E
from app.models.funcrep import RepFunc, SmoothPiece, rl_split
from app.models.quadrature import integrate_cells
from app.models.star_engine import shared_jump_correction, star_integral, variation_of_indefinite
from app.models.variation import total_variation
from app.utils.errors import DomainError, EpsTooLarge, InvariantError
from app.utils.logger import logger


def _running_integral(f: RepFunc, grid: int) -> Tuple[List[E.Expr], E.Expr]:
    """Per-piece expressions of C(t) = int_a^t (f_c - c0) ds and the linear extension left of a."""
    out: List[E.Expr] = []
    acc = 0.0
    spacing = (f.b - f.a) / grid
    for p in f.pieces:
        anti = p.expr.antiderivative()
        if anti is not None:
            c = E.add(E.const(acc - float(anti.value(p.u))), anti)
        else:
            knots = np.linspace(p.u, p.v, max(2, int(np.ceil((p.v - p.u) / spacing)) + 1))
            vals, _ = integrate_cells(p.expr.value, knots, settings.quad_tol)
            c = E.Tabulated.hermite(knots, acc + np.concatenate(([0.0], np.cumsum(vals))), p.expr.value(knots))
        out.append(c)
        acc = float(c.value(p.v))
    slope = float(f.pieces[0].expr.value(f.a)) if f.pieces else 0.0
    return out, E.Poly((-slope * f.a, slope))


def _ramp(start: float, eps: float, height: float, u: float, v: float) -> E.Expr:
    """height * clip((t - start) / eps, 0, 1) on the cell [u, v]."""
    if v <= start:
        return E.const(0.0)
    if u >= start + eps:
        return E.const(height)
    return E.Poly((-height * start / eps, height / eps))


def mollify(y: RepFunc, eps: float) -> RepFunc:
    if eps <= 0.0:
        raise DomainError("eps must be positive")
    if eps >= 0.5 * (y.b - y.a):
        raise EpsTooLarge(f"eps={eps} must be below half the domain length {0.5 * (y.b - y.a)}")
    if y.overrides:
        logger.warning(f"⚠️ Dropping {len(y.overrides)} isolated value(s) before averaging")
        y = y.core()
    y = y.truncated()
    y_plus, y_minus = rl_split(y)
    a, b = y.a, y.b

    cum, ext = _running_integral(y_minus, settings.tab_grid)
    inner = np.array([p.v for p in y.pieces[:-1]])

    def c_expr(t: float) -> E.Expr:
        if t < a or not y.pieces:
            return ext if y.pieces else E.const(0.0)
        return cum[int(np.searchsorted(inner, t, side="right"))]

    lefts = [(r.x, r.left) for r in y_plus.jumps]
    rights = [(r.x, r.right) for r in y_minus.jumps]
    pts = [a, b]
    for p in y.pieces:
        pts += [p.u, p.u + eps]
    for x, _ in lefts:
        pts += [x - eps, x]
    for x, _ in rights:
        pts += [x, x + eps]
    edges = np.unique(np.clip(pts, a, b))

    pieces = []
    for u, v in zip(edges[:-1], edges[1:]):
        u, v = float(u), float(v)
        mid = 0.5 * (u + v)
        terms = [_ramp(x - eps, eps, h, u, v) for x, h in lefts]
        terms += [_ramp(x, eps, h, u, v) for x, h in rights]
        if y.pieces:
            now, back = c_expr(mid), c_expr(mid - eps)
            terms.append(E.scale(1.0 / eps, E.add(now, E.scale(-1.0, E.AffineCompose(1.0, -eps, back)))))
        pieces.append(SmoothPiece(u, v, E.add(*terms) if terms else E.const(0.0)))
    logger.debug(f"🌫️ Averaged over {len(pieces)} cells (eps={eps})")
    return RepFunc(a, b, tuple(pieces), y.c0, (), None, (), y.series_tol)


# ================================
# Convergence report
# ================================

@dataclass(frozen=True)
class MollifyReport:
    eps_grid: Tuple[float, ...]
    int_dev: Tuple[float, ...]
    var_dev: Tuple[float, ...]
    phi_var_dev: Tuple[float, ...]
    sup_dev: Tuple[float, ...]
    int_dev_corrected: Tuple[float, ...]
    reference: float
    limit_correction: float
    notes: Dict[str, str] = field(default_factory=dict)

    def rows(self) -> List[Dict[str, float]]:
        return self.to_frame().to_dict(orient="records")

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            "eps": self.eps_grid,
            "int_dev": self.int_dev,
            "int_dev_corrected": self.int_dev_corrected,
            "var_dev": self.var_dev,
            "phi_var_dev": self.phi_var_dev,
            "sup_dev": self.sup_dev,
        })


def _sample_grid(f: RepFunc, eps: float, n: int = 2001) -> np.ndarray:
    """Grid on [a + eps, b - eps] outside the eps-neighborhoods of jumps."""
    t = np.linspace(f.a + eps, f.b - eps, n)
    keep = np.ones_like(t, dtype=bool)
    for r in f.truncated().absorbed().jumps:
        keep &= np.abs(t - r.x) >= eps
    return t[keep]


def _sup_deviation(f: RepFunc, f_eps: RepFunc, eps: float) -> float:
    t = _sample_grid(f, eps)
    if t.size == 0:
        return 0.0
    return float(np.max(np.abs(f_eps.value(t) - f.value(t))))


def _report_row(x: RepFunc, g: RepFunc, eps: float, reference: float, phi_var: float,
                var_g: float, correction: float, tol: Optional[float] = None) -> Tuple[float, ...]:
    x_eps, g_eps = mollify(x, eps), mollify(g, eps)
    value = star_integral(x_eps, g_eps, tol).value
    v_g = total_variation(g_eps, tol).value
    v_phi = variation_of_indefinite(x_eps, g_eps, tol).value
    sup = max(_sup_deviation(x, x_eps, eps), _sup_deviation(g, g_eps, eps))
    return (abs(value - reference), abs(value - reference - correction), abs(v_g - var_g),
            abs(v_phi - phi_var), sup)


def mollify_convergence_report(x: RepFunc, g: RepFunc, eps_grid: Sequence[float],
                               n_jobs: Optional[int] = None, tol: Optional[float] = None) -> MollifyReport:
    grid = tuple(float(e) for e in eps_grid)
    if not grid:
        raise InvariantError("eps grid is empty")
    if any(e1 <= e2 for e1, e2 in zip(grid[:-1], grid[1:])):
        raise InvariantError("eps grid must be strictly decreasing")
    n_jobs = settings.n_jobs if n_jobs is None else n_jobs

    reference = star_integral(x, g, tol).value
    phi_var = variation_of_indefinite(x, g, tol).value
    var_g = total_variation(g, tol).value
    # ramp-against-ramp products meet halfway at a shared jump
    correction = shared_jump_correction(x, g, weight=0.5)
    notes = {}
    if x.overrides or g.overrides:
        notes["overrides"] = "isolated values were dropped before averaging"

    logger.info(f"📊 Mollification report over {len(grid)} eps values (n_jobs={n_jobs})")
    rows = Parallel(n_jobs=n_jobs)(
        delayed(_report_row)(x, g, eps, reference, phi_var, var_g, correction, tol) for eps in grid
    )
    cols = list(zip(*rows))
    return MollifyReport(grid, cols[0], cols[2], cols[3], cols[4], cols[1], reference, correction, notes)
