"""
Variation endpoints
"""

from fastapi import APIRouter, Depends

from app.schemas.requests import FuncRequest, GMeasureRequest, StepApproxRequest
from app.schemas.responses import Report
from app.services import commands
from app.routers.integrals import load_funcs
from app.utils.auth import verify_api_key

router = APIRouter(dependencies=[Depends(verify_api_key)])


@router.post(
    "",
    response_model=Report,
    summary="Total Variation",
    description="Total variation with its continuous and jump parts"
)
def variation(request: FuncRequest):
    funcs, inputs = load_funcs(request.series_tol, f=request.f)
    return commands.run_variation(funcs["f"], inputs, request.tol).report


@router.post(
    "/g-measure",
    response_model=Report,
    summary="Measure Of Open Sets",
    description="Total variation of g over finite unions of open intervals"
)
def g_measure(request: GMeasureRequest):
    funcs, inputs = load_funcs(request.series_tol, f=request.g)
    return commands.run_variation(funcs["f"], inputs, request.tol, intervals=request.intervals).report


@router.post(
    "/step-approx",
    response_model=Report,
    summary="Step Approximation",
    description="Step function within eps of a regulated function in sup norm"
)
def step_approx(request: StepApproxRequest):
    funcs, inputs = load_funcs(request.series_tol, f=request.f)
    return commands.run_step_approx(funcs["f"], request.eps, inputs).report
