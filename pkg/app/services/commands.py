"""
Command dispatchers shared by the CLI and the HTTP routers

Every dispatcher takes parsed inputs and returns an Outcome: the Report
plus an optional table for CSV export.
"""

from typing import Dict, NamedTuple, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from app.config import settings
from app.models.funcrep import RepFunc, step_approx, to_document
from app.models.mollify import mollify, mollify_convergence_report
from app.models.qde import CoefficientSet, delta_correctness, solve_problem
from app.models.rs_engine import EnclosureStatus, rs_integral
from app.models.star_engine import (
    functional_norm_witness,
    holder_check,
    minkowski_check,
    star_by_parts_residual,
    star_fubini,
    star_integral,
    star_integral_on,
)
from app.models.variation import g_measure_open, total_variation, total_variation_on
from app.schemas.responses import Report
from app.utils.errors import CalculusError, SchemaError
from app.utils.logger import logger

Inputs = Dict[str, str]

COMMANDS = (
    "variation", "rs-int", "star-int", "by-parts-check", "fubini-check", "holder", "minkowski",
    "norm-witness", "mollify", "mollify-report", "ode-solve", "delta-correct", "step-approx",
)


class Outcome(NamedTuple):
    report: Report
    table: Optional[pd.DataFrame] = None


def _check_status(holds: bool) -> str:
    return "OK" if holds else "VIOLATED"


def error_report(command: str, exc: CalculusError, inputs: Optional[Inputs] = None) -> Report:
    status = "NONEXISTENT" if exc.exit_code == 2 else "BUDGET" if exc.exit_code == 4 else "ERROR"
    diagnostics = {"error_code": exc.error_code}
    if exc.pointer is not None:
        diagnostics["pointer"] = exc.pointer
    if getattr(exc, "kind", None):
        diagnostics["kind"] = exc.kind
    return Report(command=command, status=status, inputs=inputs or {}, detail=exc.detail, loc=exc.loc,
                  diagnostics=diagnostics)


def exit_code_for(report: Report) -> int:
    return {"NONEXISTENT": 2, "BUDGET": 4, "ERROR": 3}.get(report.status, 0)


# ================================
# Variation
# ================================

def run_variation(f: RepFunc, inputs: Inputs, tol: Optional[float] = None,
                  intervals: Optional[Sequence[Tuple[float, float]]] = None, c: Optional[float] = None) -> Outcome:
    res = total_variation(f, tol=tol)
    diagnostics = {
        "continuous": res.parts[0],
        "jumps": res.parts[1],
        "simplified_jump_sum": res.simplified_jump_sum,
        **res.diagnostics,
    }
    if c is not None and not res.infinite:
        diagnostics["split"] = [total_variation_on(f, f.a, c, tol=tol).value,
                                total_variation_on(f, c, f.b, tol=tol).value]
    if intervals:
        diagnostics["g_measure"] = g_measure_open(f, intervals)
    if res.infinite:
        report = Report(command="variation", status=res.value, inputs=inputs, value=None,
                        diagnostics=diagnostics, detail=f"partition sums exceed {res.lo:.6g} and keep growing")
        return Outcome(report)
    return Outcome(Report(command="variation", inputs=inputs, value=res.value, error_bound=res.error_bound,
                          diagnostics=diagnostics))


def run_step_approx(f: RepFunc, eps: float, inputs: Inputs) -> Outcome:
    step = step_approx(f, eps)
    table = pd.DataFrame({"u": step.breakpoints[:-1], "v": step.breakpoints[1:], "value": step.values})
    report = Report(command="step-approx", inputs=inputs, value={
        "breakpoints": list(step.breakpoints), "values": list(step.values), "node_values": list(step.node_values),
    }, error_bound=eps, diagnostics={"cells": len(step.values)})
    return Outcome(report, table)


# ================================
# Integrals
# ================================

def run_rs_int(f: RepFunc, g: RepFunc, inputs: Inputs, tol: Optional[float] = None,
               max_depth: Optional[int] = None) -> Outcome:
    enc = rs_integral(f, g, tol=tol, max_depth=max_depth)
    status = "CERTIFIED" if enc.status is EnclosureStatus.CERTIFIED else "BUDGET"
    return Outcome(Report(command="rs-int", status=status, inputs=inputs, value=enc.value,
                          error_bound=enc.error_bound, diagnostics={
                              "enclosure": [enc.lo, enc.hi], "depth": enc.depth, "cells": enc.cells,
                              "darboux": list(enc.darboux)}))


def run_star_int(f: RepFunc, g: RepFunc, inputs: Inputs, tol: Optional[float] = None,
                 c: Optional[float] = None) -> Outcome:
    res = star_integral(f, g, tol)
    diagnostics = {"terms": list(res.terms), "role": res.role, "series_terms": res.series_terms}
    if c is not None:
        parts = [star_integral_on(f, g, f.a, c, tol), star_integral_on(f, g, c, f.b, tol)]
        diagnostics["split"] = [p.value for p in parts]
    return Outcome(Report(command="star-int", inputs=inputs, value=res.value, error_bound=res.error_bound,
                          diagnostics=diagnostics))


def run_by_parts(f: RepFunc, g: RepFunc, inputs: Inputs, tol: Optional[float] = None) -> Outcome:
    res = star_by_parts_residual(f, g, tol)
    return Outcome(Report(command="by-parts-check", status=_check_status(abs(res.residual) <= res.error_bound),
                          inputs=inputs, value=res.residual, error_bound=res.error_bound,
                          diagnostics={"shared_jump_correction": res.correction}))


def run_fubini(kernel: Sequence[Tuple[RepFunc, RepFunc]], f: RepFunc, g: RepFunc, inputs: Inputs,
               tol: Optional[float] = None) -> Outcome:
    res = star_fubini(kernel, f, g, tol)
    ok = abs(res.lhs - res.rhs) <= res.error_bound
    return Outcome(Report(command="fubini-check", status=_check_status(ok), inputs=inputs,
                          value=[res.lhs, res.rhs], error_bound=res.error_bound,
                          diagnostics={"terms": len(kernel), "difference": res.lhs - res.rhs}))


def run_inequality(command: str, x: RepFunc, y: RepFunc, g: RepFunc, p: float, inputs: Inputs,
                   tol: Optional[float] = None) -> Outcome:
    check = holder_check if command == "holder" else minkowski_check
    res = check(x, y, g, p, tol)
    return Outcome(Report(command=command, status=_check_status(res.holds), inputs=inputs,
                          value=[res.lhs, res.rhs], error_bound=res.error_bound, diagnostics={"p": p}))


def run_norm_witness(g: RepFunc, eps: float, inputs: Inputs, tol: Optional[float] = None) -> Outcome:
    res = functional_norm_witness(g, eps, tol)
    return Outcome(Report(command="norm-witness", inputs=inputs, value=res.norm_est, error_bound=res.error_bound,
                          diagnostics={"variation": res.variation, "attainable": res.attainable,
                                       "partition": list(res.partition), "witness": to_document(res.witness)}))


# ================================
# Mollification
# ================================

def _samples(f: RepFunc, n: int = 201) -> pd.DataFrame:
    t = np.linspace(f.a, f.b, n)
    return pd.DataFrame({"t": t, "value": f.value(t)})


def run_mollify(y: RepFunc, eps: float, inputs: Inputs) -> Outcome:
    y_eps = mollify(y, eps)
    table = _samples(y_eps)
    try:
        value = to_document(y_eps)
    except SchemaError:
        logger.debug("📄 Averaged function has tabulated pieces, reporting samples")
        value = table.to_dict(orient="list")
    return Outcome(Report(command="mollify", inputs=inputs, value=value, error_bound=0.0,
                          diagnostics={"pieces": len(y_eps.pieces), "overrides_dropped": len(y.overrides)}), table)


def run_mollify_report(x: RepFunc, g: RepFunc, eps_grid: Sequence[float], inputs: Inputs,
                       n_jobs: Optional[int] = None, tol: Optional[float] = None) -> Outcome:
    rep = mollify_convergence_report(x, g, eps_grid, n_jobs, tol)
    table = rep.to_frame()
    return Outcome(Report(command="mollify-report", inputs=inputs, value=table.to_dict(orient="records"),
                          error_bound=0.0, diagnostics={"reference": rep.reference,
                                                        "limit_correction": rep.limit_correction, **rep.notes}),
                   table)


# ================================
# ODE
# ================================

def run_ode_solve(coeffs: CoefficientSet, gamma: Sequence[float], inputs: Inputs,
                  tol: Optional[float] = None) -> Outcome:
    traj = solve_problem(coeffs, gamma, tol)
    table = traj.to_frame()
    final = traj.x[-1].tolist()
    return Outcome(Report(command="ode-solve", inputs=inputs, value=final, error_bound=tol or settings.ode_tol,
                          diagnostics={"condition_class": coeffs.condition_class, "events": list(traj.events),
                                       "rows": len(table)}), table)


def run_delta_correct(coeffs: CoefficientSet, gamma: Sequence[float], eps_grid: Sequence[float], inputs: Inputs,
                      tol: Optional[float] = None) -> Outcome:
    rep = delta_correctness(coeffs, gamma, eps_grid, tol)
    table = rep.to_frame()
    decreasing = all(d1 > d2 for d1, d2 in zip(rep.deviation[:-1], rep.deviation[1:]))
    return Outcome(Report(command="delta-correct", status="OK" if decreasing else "NOT_DECREASING",
                          inputs=inputs, value=list(rep.deviation), error_bound=tol or settings.ode_tol,
                          diagnostics={"eps_grid": list(rep.eps_grid), "events": list(rep.events)}), table)

