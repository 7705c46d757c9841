"""
Measure-coefficient ODE endpoints
"""

from fastapi import APIRouter, Depends

from app.schemas.requests import DeltaCorrectRequest, OdeProblem
from app.schemas.responses import Report
from app.services import commands
from app.services.document_loader import build_problem, digest
from app.utils.auth import verify_api_key
from app.utils.logger import logger

router = APIRouter(dependencies=[Depends(verify_api_key)])


@router.post(
    "/solve",
    response_model=Report,
    summary="Solve Cauchy Problem",
    description="Trajectory of the solution and its quasi-derivatives with both one-sided states at events"
)
def solve(problem: OdeProblem):
    coeffs, gamma = build_problem(problem)
    inputs = {"spec": digest(problem.model_dump_json().encode())}
    logger.info(f"📐 ODE order {problem.n}, class {coeffs.condition_class}")
    return commands.run_ode_solve(coeffs, gamma, inputs, problem.tol).report


@router.post(
    "/delta-correct",
    response_model=Report,
    summary="Delta-Correctness Check",
    description="Deviation of mollified-coefficient solutions from the measure solution along an eps grid"
)
def delta_correct(request: DeltaCorrectRequest):
    coeffs, gamma = build_problem(request.problem, request.series_tol)
    inputs = {"spec": digest(request.problem.model_dump_json().encode())}
    return commands.run_delta_correct(coeffs, gamma, request.eps_grid, inputs,
                                      request.problem.tol or request.tol).report
