"""
Mollification endpoints
"""

from fastapi import APIRouter, Depends

from app.config import settings
from app.schemas.requests import MollifyReportRequest, MollifyRequest
from app.schemas.responses import Report
from app.services import commands
from app.routers.integrals import load_funcs
from app.utils.auth import verify_api_key

router = APIRouter(dependencies=[Depends(verify_api_key)])


@router.post(
    "",
    response_model=Report,
    summary="Mollify",
    description="One-sided eps-average of a regulated function"
)
def mollify(request: MollifyRequest):
    funcs, inputs = load_funcs(request.series_tol, y=request.y)
    return commands.run_mollify(funcs["y"], request.eps, inputs).report


@router.post(
    "/report",
    response_model=Report,
    summary="Mollification Convergence Report",
    description="Deviations of integral, variation and sup norm along a decreasing eps grid"
)
def mollify_report(request: MollifyReportRequest):
    funcs, inputs = load_funcs(request.series_tol, x=request.x, g=request.g)
    return commands.run_mollify_report(funcs["x"], funcs["g"], request.eps_grid, inputs, settings.n_jobs,
                                       request.tol).report
