"""
Linear scalar equations with measure coefficients

    x^(n) + p_1' x^(n-1) + ... + p_n' x = p_{n+1}',    (x, x', ..., x^(n-1))(a) = gamma

solved through quasi-derivatives: the triangular matrix H built from the
coefficient antiderivatives turns the problem into the first-order system
y' = A y + F with absolutely continuous y, and x is recovered pointwise from
(x, ..., x^(n-1)) = H^{-1} (y + h0).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.integrate import solve_ivp
from scipy.linalg import solve_triangular

from app.config import settings
from app.models import expr as E
from app.models.funcrep import (
    RepFunc,
    SmoothPiece,
    add,
    constant,
    exp_of,
    from_expr,
    identity_on,
    mul,
    reciprocal,
    scale,
)
from app.models.mollify import mollify
from app.models.star_engine import star_indefinite
from app.models.variation import total_variation
from app.utils.errors import ConditionViolation, DomainMismatch, InvariantError, SingularPivot, StepFailure
from app.utils.logger import logger

CLASSICAL = "A"
SIGMA_CONTINUOUS = "C"
REGULATED = "C_delta"
CONTINUOUS_INTEGRATORS = "D"

_SAMPLES = 20
_RESIDUAL_TOL = 1e-9

Matrix = Dict[Tuple[int, int], RepFunc]


# ================================
# Coefficients
# ================================

def classify(p: Sequence[RepFunc]) -> str:
    """Strongest condition class the coefficient antiderivatives satisfy."""
    p1, rest = p[0], p[1:]
    if all(not f.has_jumps and not f.overrides and f.is_bv for f in p):
        return CLASSICAL
    rest_bv = all(not total_variation(f).infinite for f in rest)
    if p1.overrides:
        if rest_bv:
            return SIGMA_CONTINUOUS
        raise ConditionViolation("p_1 with isolated values needs p_2, ..., p_{n+1} of bounded variation")
    if rest_bv:
        return REGULATED
    if not total_variation(p1).infinite:
        return CONTINUOUS_INTEGRATORS
    raise ConditionViolation("p_1 and some p_k (k >= 2) both have unbounded variation")


@dataclass(frozen=True)
class CoefficientSet:
    n: int
    p: Tuple[RepFunc, ...]
    condition_class: str

    @classmethod
    def create(cls, p: Sequence[RepFunc]) -> "CoefficientSet":
        p = tuple(p)
        n = len(p) - 1
        if n < 2:
            raise InvariantError("order n >= 2 needs at least three coefficient functions")
        for k, f in enumerate(p[1:], start=2):
            if (f.a, f.b) != (p[0].a, p[0].b):
                raise DomainMismatch(f"p_{k} lives on [{f.a}, {f.b}], p_1 on [{p[0].a}, {p[0].b}]")
        return cls(n, p, classify(p))

    @property
    def a(self) -> float:
        return self.p[0].a

    @property
    def b(self) -> float:
        return self.p[0].b

    def coefficient(self, k: int) -> RepFunc:
        """p_k, 1-based."""
        return self.p[k - 1]

    def mollified(self, eps: float) -> "CoefficientSet":
        return CoefficientSet.create([mollify(f, eps) for f in self.p])

    def events(self) -> np.ndarray:
        """Jump and isolated-value locations of all coefficients."""
        pts = [np.array([r.x for r in f.truncated().records] + [float(t) for t, _ in f.overrides])
               for f in self.p]
        return np.unique(np.concatenate(pts))


# ================================
# H, P and the first-order system
# ================================

def _running_riemann(f: RepFunc) -> RepFunc:
    """t -> int_a^t f(s) ds."""
    return star_indefinite(f, identity_on(f.a, f.b))


def _ratio(f: RepFunc, g: RepFunc) -> RepFunc:
    return mul(f, reciprocal(g))


def build_H(coeffs: CoefficientSet) -> Matrix:
    n, a, b = coeffs.n, coeffs.a, coeffs.b
    p1 = coeffs.coefficient(1).truncated()
    H: Matrix = {(1, 1): constant(1.0, a, b)}
    hnn = exp_of(add(p1, constant(-float(p1.value(a)), a, b)))
    H[n, n] = hnn
    for k in range(2, n + 1):
        H[n, n - k + 1] = star_indefinite(hnn, coeffs.coefficient(k).truncated())
    for k in range(n - 1, 1, -1):
        below = H[k + 1, k + 1]
        H[k, k] = exp_of(_running_riemann(_ratio(H[k + 1, k], below)))
        for i in range(2, k + 1):
            H[k, k - i + 1] = _running_riemann(_ratio(mul(H[k, k], H[k + 1, k - i + 1]), below))
    for k in range(1, n + 1):
        _check_positive(H[k, k], f"h_{k}{k}")
    logger.debug(f"🧮 Built H for n={n} ({len(H)} entries)")
    return H


def build_P(H: Matrix, n: int) -> Matrix:
    """
    P from H: p00 = 1, p_kk = h_{k+1,k+1} / h_kk (h_{n+1,n+1} = h_nn), p10 = h21,
    and row k >= 2 by back substitution in the triangular system

        sum_nu p_k,nu h_{nu+1,1} = 0,
        sum_nu p_k,nu h_{nu+1,j+1} + p_kk h_kj = 0    (j = 1, ..., k-1).
    """
    a, b = H[1, 1].a, H[1, 1].b
    h = dict(H)
    h[n + 1, n + 1] = H[n, n]
    P: Matrix = {(0, 0): constant(1.0, a, b)}
    for k in range(1, n + 1):
        P[k, k] = _ratio(h[k + 1, k + 1], h[k, k])
        _check_positive(P[k, k], f"p_{k}{k}")
    P[1, 0] = H[2, 1]
    for k in range(2, n + 1):
        for j in range(k - 1, -1, -1):
            acc = mul(P[k, k], h[k, j]) if j >= 1 else constant(0.0, a, b)
            for nu in range(j + 1, k):
                acc = add(acc, mul(P[k, nu], h[nu + 1, j + 1]))
            P[k, j] = scale(_ratio(acc, h[j + 1, j + 1]), -1.0)
    residual = triangular_residual(H, P, n)
    if residual > _RESIDUAL_TOL:
        raise SingularPivot(f"triangular systems for P are off by {residual:.3e}")
    logger.debug(f"🧮 Built P, triangular residual {residual:.2e}")
    return P


def _sample_times(f: RepFunc, count: int = _SAMPLES) -> np.ndarray:
    return np.linspace(f.a, f.b, count)


def triangular_residual(H: Matrix, P: Matrix, n: int) -> float:
    """Largest relative residual of the systems defining row k of P, k = 2..n, at sampled times."""
    t = _sample_times(H[1, 1])
    worst = 0.0
    for k in range(2, n + 1):
        for j in range(0, k):
            lhs = np.zeros_like(t)
            size = np.zeros_like(t)
            for nu in range(j, k):
                term = P[k, nu].value(t) * H[nu + 1, j + 1].value(t)
                lhs += term
                size += np.abs(term)
            if j >= 1:
                term = P[k, k].value(t) * H[k, j].value(t)
                lhs += term
                size += np.abs(term)
            worst = max(worst, float(np.max(np.abs(lhs) / (1.0 + size))))
    return worst


def _check_positive(f: RepFunc, name: str) -> None:
    t = np.unique(np.concatenate((_sample_times(f), f.breakpoints())))
    low = min(float(np.min(f.left_limit(t))), float(np.min(f.right_limit(t))), float(np.min(f.value(t))))
    if not low > 0.0:
        raise SingularPivot(f"{name} is not positive (min sampled value {low:.6g})")


@dataclass(frozen=True)
class QdeSystem:
    n: int
    a: float
    b: float
    H: Matrix
    P: Matrix
    A: Tuple[Tuple[Optional[RepFunc], ...], ...]
    F: Tuple[Optional[RepFunc], ...]
    h0: RepFunc
    xi: np.ndarray
    events: Tuple[float, ...]
    breakpoints: Tuple[float, ...]
    condition_class: str = REGULATED

    def H_at(self, t: float, side: str = "+") -> np.ndarray:
        m = np.zeros((self.n, self.n))
        for (i, j), f in self.H.items():
            m[i - 1, j - 1] = float(_at(f, t, side))
        return m

    def h0_at(self, t: float, side: str = "+") -> np.ndarray:
        out = np.zeros(self.n)
        out[-1] = float(_at(self.h0, t, side))
        return out

    def A_at(self, t: float, side: str = "+") -> np.ndarray:
        return np.array([[0.0 if e is None else float(_at(e, t, side)) for e in row] for row in self.A])

    def F_at(self, t: float, side: str = "+") -> np.ndarray:
        return np.array([0.0 if e is None else float(_at(e, t, side)) for e in self.F])

    def recover(self, t: float, y: np.ndarray, side: str = "+") -> np.ndarray:
        """(x, x', ..., x^(n-1)) = H^{-1} (y + h0) by forward substitution."""
        return solve_triangular(self.H_at(t, side), y + self.h0_at(t, side), lower=True)


def _at(f: RepFunc, t: float, side: str) -> float:
    if side == "+":
        return f.right_limit(t)
    if side == "-":
        return f.left_limit(t)
    return f.value(t)


def assemble_system(coeffs: CoefficientSet, H: Matrix, P: Matrix, gamma: Sequence[float]) -> QdeSystem:
    n, a, b = coeffs.n, coeffs.a, coeffs.b
    gamma = np.asarray(gamma, dtype=float)
    if gamma.shape != (n,):
        raise InvariantError(f"gamma needs {n} components, got {gamma.size}")

    A: List[List[Optional[RepFunc]]] = [[None] * n for _ in range(n)]
    for i in range(1, n + 1):
        inv = reciprocal(P[i, i])
        if i < n:
            A[i - 1][i] = inv
        for j in range(1, i + 1):
            A[i - 1][j - 1] = scale(mul(P[i, j - 1], inv), -1.0)

    h0 = star_indefinite(H[n, n], coeffs.coefficient(n + 1).truncated())
    # F = A h0 with h0 = (0, ..., 0, h_n0)
    F = tuple(None if A[i][n - 1] is None else mul(h0, A[i][n - 1]) for i in range(n))
    xi = np.array([[float(H[i, j].value(a)) if (i, j) in H else 0.0 for j in range(1, n + 1)]
                   for i in range(1, n + 1)]) @ gamma

    entries = list(H.values()) + [h0] + [e for row in A for e in row if e is not None]
    events = np.unique(np.concatenate([coeffs.events()] + [
        np.array([r.x for r in f.truncated().records]) for f in entries]))
    events = events[(events > a) & (events < b)]
    bps = np.unique(np.concatenate([np.array([a, b]), events] + [f.breakpoints() for f in entries]))
    logger.debug(f"🧩 Assembled system: {events.size} events, {bps.size} breakpoints")
    return QdeSystem(n, a, b, H, P, tuple(tuple(r) for r in A), F, h0, xi,
                     tuple(float(x) for x in events), tuple(float(x) for x in bps), coeffs.condition_class)


# ================================
# Time stepping
# ================================

@dataclass
class Trajectory:
    n: int
    t: np.ndarray
    side: List[str]
    y: np.ndarray
    x: np.ndarray
    events: Tuple[float, ...]
    segments: List[Tuple[float, float, object]] = field(default_factory=list, repr=False)
    system: Optional[QdeSystem] = field(default=None, repr=False)

    def _segment(self, t: float, side: str):
        for lo, hi, sol in self.segments:
            if (side == "+" and lo <= t < hi) or (side != "+" and lo < t <= hi):
                return sol
        return self.segments[0][2] if t <= self.segments[0][0] else self.segments[-1][2]

    def y_at(self, t: float, side: str = "+") -> np.ndarray:
        return np.asarray(self._segment(t, side).sol(t), dtype=float)

    def state_at(self, t: float, side: str = "+") -> np.ndarray:
        """(x, x', ..., x^(n-1)) at t, one-sided at events."""
        if self.system is None:
            return self.y_at(t, side)
        return self.system.recover(t, self.y_at(t, side), side)

    def states(self, ts: np.ndarray) -> np.ndarray:
        return np.array([self.state_at(float(s)) for s in ts])

    def to_frame(self) -> pd.DataFrame:
        data = {"t": self.t, "side": self.side}
        for i in range(self.n):
            data[f"y{i + 1}"] = self.y[:, i]
        data["x"] = self.x[:, 0]
        for i in range(1, self.n):
            data[f"x{i}"] = self.x[:, i]
        return pd.DataFrame(data)


def _integrate(rhs, y0: np.ndarray, bps: Sequence[float], tol: float) -> List[Tuple[float, float, object]]:
    segments = []
    y = np.asarray(y0, dtype=float)
    for lo, hi in zip(bps[:-1], bps[1:]):
        sol = solve_ivp(rhs(lo), (lo, hi), y, method="RK45", rtol=tol, atol=tol, dense_output=True)
        if not sol.success:
            raise StepFailure(f"integration failed on [{lo}, {hi}]: {sol.message}", loc=str(lo))
        segments.append((lo, hi, sol))
        y = sol.y[:, -1]
    return segments


def solve_cauchy(system: QdeSystem, tol: Optional[float] = None) -> Trajectory:
    tol = settings.ode_tol if tol is None else tol

    def rhs(lo: float):
        def fun(t, y):
            side = "+" if t <= lo else "-"
            return system.A_at(t, side) @ y + system.F_at(t, side)
        return fun

    bps = list(system.breakpoints)
    segments = _integrate(rhs, system.xi, bps, tol)
    events = set(system.events)
    ts, sides, ys, xs = [], [], [], []
    for k, (lo, hi, sol) in enumerate(segments):
        for j, s in enumerate(sol.t):
            s = float(s)
            if j == 0 and k > 0 and lo not in events:
                continue
            side = "+" if j == 0 and lo in events else "-" if j == len(sol.t) - 1 and hi in events else ""
            y = sol.y[:, j]
            ts.append(s)
            sides.append(side)
            ys.append(y)
            xs.append(system.recover(s, y, side))
    logger.info(f"📈 Solved order-{system.n} problem: {len(ts)} rows, {len(events)} events")
    return Trajectory(system.n, np.array(ts), sides, np.array(ys), np.array(xs), tuple(sorted(events)),
                      segments, system)


def solve_problem(coeffs: CoefficientSet, gamma: Sequence[float], tol: Optional[float] = None) -> Trajectory:
    H = build_H(coeffs)
    P = build_P(H, coeffs.n)
    return solve_cauchy(assemble_system(coeffs, H, P, gamma), tol)


def solve_classical(coeffs: CoefficientSet, gamma: Sequence[float], tol: Optional[float] = None) -> Trajectory:
    """Direct integration of (x, ..., x^(n-1))' = M (x, ..., x^(n-1)) + m for jump-free coefficients."""
    if coeffs.condition_class != CLASSICAL:
        raise ConditionViolation("the direct solver needs absolutely continuous coefficients")
    tol = settings.ode_tol if tol is None else tol
    n = coeffs.n

    def rhs(lo: float):
        def fun(t, u):
            side = "right" if t <= lo else "left"
            du = np.empty(n)
            du[:-1] = u[1:]
            du[-1] = float(coeffs.coefficient(n + 1).cont_deriv(t, side)) - sum(
                float(coeffs.coefficient(k).cont_deriv(t, side)) * u[n - k] for k in range(1, n + 1))
            return du
        return fun

    bps = np.unique(np.concatenate([f.breakpoints() for f in coeffs.p]))
    segments = _integrate(rhs, np.asarray(gamma, dtype=float), list(bps), tol)
    t = np.concatenate([seg[2].t if k == 0 else seg[2].t[1:] for k, seg in enumerate(segments)])
    y = np.concatenate([seg[2].y.T if k == 0 else seg[2].y.T[1:] for k, seg in enumerate(segments)])
    return Trajectory(n, t, [""] * t.size, y, y.copy(), (), segments, None)


# ================================
# Checks and experiments
# ================================

def _derivative_of(f: RepFunc) -> RepFunc:
    if f.has_jumps or f.overrides:
        raise ConditionViolation("quasi-derivatives by definition need jump-free entries")
    pieces = []
    for p in f.pieces:
        d = E.derivative(p.expr)
        if d is None:
            raise ConditionViolation(f"no closed-form derivative on [{p.u}, {p.v}]")
        pieces.append(SmoothPiece(p.u, p.v, d))
    return RepFunc(f.a, f.b, tuple(pieces), 0.0, series_tol=f.series_tol)


def quasi_derivative_check(coeffs: CoefficientSet, P: Matrix, H: Matrix, x_coeffs: Sequence[float]) -> float:
    """
    Max deviation between the quasi-derivatives of the polynomial x by the
    recursion  q_0 = x,  q_k = p_kk q_{k-1}' + sum_{i<k} p_ki q_i  and H (x, ..., x^(n-1)).
    """
    if coeffs.condition_class != CLASSICAL:
        raise ConditionViolation("the quasi-derivative check needs absolutely continuous coefficients")
    n, a, b = coeffs.n, coeffs.a, coeffs.b
    x = E.Poly(tuple(float(c) for c in x_coeffs))
    derivs = [x]
    for _ in range(1, n):
        derivs.append(E.derivative(derivs[-1]))
    q = [from_expr(x, a, b)]
    for k in range(1, n):
        nxt = mul(P[k, k], _derivative_of(q[k - 1]))
        for i in range(k):
            nxt = add(nxt, mul(P[k, i], q[i]))
        q.append(nxt)
    t = _sample_times(q[0])
    worst = 0.0
    for k in range(n):
        expected = sum(H[k + 1, j + 1].value(t) * derivs[j].value(t) for j in range(k + 1))
        worst = max(worst, float(np.max(np.abs(q[k].value(t) - expected))))
    return worst


@dataclass(frozen=True)
class DeltaReport:
    eps_grid: Tuple[float, ...]
    deviation: Tuple[float, ...]
    events: Tuple[float, ...]

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"eps": self.eps_grid, "deviation": self.deviation})


def delta_correctness(coeffs: CoefficientSet, gamma: Sequence[float], eps_grid: Sequence[float],
                      tol: Optional[float] = None, samples: int = 801) -> DeltaReport:
    """Sup deviation of the classical solutions with averaged coefficients from the measure solution."""
    if coeffs.condition_class not in (CLASSICAL, REGULATED):
        raise ConditionViolation(
            f"averaged problems converge only for regulated p_1 without isolated values and p_k of "
            f"bounded variation (class {coeffs.condition_class})")
    grid = tuple(float(e) for e in eps_grid)
    if any(e1 <= e2 for e1, e2 in zip(grid[:-1], grid[1:])):
        raise InvariantError("eps grid must be strictly decreasing")

    reference = solve_problem(coeffs, gamma, tol)
    events = coeffs.events()
    t_all = np.linspace(coeffs.a, coeffs.b, samples)
    out = []
    for eps in grid:
        keep = np.ones_like(t_all, dtype=bool)
        for x in events:
            keep &= (t_all < x - eps) | (t_all > x + eps)
        t = t_all[keep]
        approx = solve_problem(coeffs.mollified(eps), gamma, tol)
        dev = float(np.max(np.abs(approx.states(t) - reference.states(t)))) if t.size else 0.0
        logger.info(f"🎯 eps={eps:g}: deviation {dev:.3e}")
        out.append(dev)
    return DeltaReport(grid, tuple(out), tuple(float(x) for x in events))
