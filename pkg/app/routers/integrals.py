"""
Stieltjes integral and inequality endpoints
"""

from typing import Dict, Optional, Tuple

from fastapi import APIRouter, Depends

from app.models.funcrep import RepFunc
from app.schemas.requests import (
    FubiniRequest,
    FuncDocument,
    InequalityRequest,
    NormWitnessRequest,
    PairRequest,
)
from app.schemas.responses import Report
from app.services import commands
from app.services.document_loader import digest, document_loader, kernel_pairs
from app.utils.auth import verify_api_key
from app.utils.logger import logger

router = APIRouter(dependencies=[Depends(verify_api_key)])


def load_funcs(series_tol: Optional[float], **docs: FuncDocument) -> Tuple[Dict[str, RepFunc], Dict[str, str]]:
    """Parse request-embedded documents; returns functions and their digests by name"""
    funcs, inputs = {}, {}
    for name, doc in docs.items():
        funcs[name], inputs[name] = document_loader.load_document(doc, series_tol)
    return funcs, inputs


@router.post(
    "/rs",
    response_model=Report,
    summary="Riemann-Stieltjes Integral",
    description="Certified enclosure of the Riemann-Stieltjes integral of f with respect to g"
)
def rs_integral(request: PairRequest):
    funcs, inputs = load_funcs(request.series_tol, f=request.f, g=request.g)
    outcome = commands.run_rs_int(funcs["f"], funcs["g"], inputs, request.tol, request.max_depth)
    if outcome.report.status == "BUDGET":
        logger.warning("⚠️  rs enclosure stopped at the depth cap")
    return outcome.report


@router.post(
    "/star",
    response_model=Report,
    summary="*-Integral",
    description="Integral of f with respect to g defined for every regulated f and bounded-variation g"
)
def star_integral(request: PairRequest):
    funcs, inputs = load_funcs(request.series_tol, f=request.f, g=request.g)
    return commands.run_star_int(funcs["f"], funcs["g"], inputs, request.tol).report


@router.post(
    "/by-parts",
    response_model=Report,
    summary="Integration By Parts Check",
    description="Residual of the by-parts formula with its shared-jump correction"
)
def by_parts(request: PairRequest):
    funcs, inputs = load_funcs(request.series_tol, f=request.f, g=request.g)
    return commands.run_by_parts(funcs["f"], funcs["g"], inputs, request.tol).report


@router.post(
    "/fubini",
    response_model=Report,
    summary="Fubini Check",
    description="Both iterated integrals of a separable kernel"
)
def fubini(request: FubiniRequest):
    funcs, inputs = load_funcs(request.series_tol, f=request.f, g=request.g)
    inputs["kernel"] = digest(request.kernel.model_dump_json().encode())
    kernel = kernel_pairs(request.kernel, request.series_tol)
    return commands.run_fubini(kernel, funcs["f"], funcs["g"], inputs, request.tol).report


@router.post(
    "/holder",
    response_model=Report,
    summary="Hoelder Inequality Check",
    description="Both sides of the Hoelder inequality for an increasing integrator"
)
def holder(request: InequalityRequest):
    funcs, inputs = load_funcs(request.series_tol, x=request.x, y=request.y, g=request.g)
    return commands.run_inequality("holder", funcs["x"], funcs["y"], funcs["g"], request.p, inputs,
                                   request.tol).report


@router.post(
    "/minkowski",
    response_model=Report,
    summary="Minkowski Inequality Check",
    description="Both sides of the Minkowski inequality for an increasing integrator"
)
def minkowski(request: InequalityRequest):
    funcs, inputs = load_funcs(request.series_tol, x=request.x, y=request.y, g=request.g)
    return commands.run_inequality("minkowski", funcs["x"], funcs["y"], funcs["g"], request.p, inputs,
                                   request.tol).report


@router.post(
    "/norm-witness",
    response_model=Report,
    summary="Functional Norm Witness",
    description="Regulated witness of norm at most one whose integral comes within eps of the variation of g"
)
def norm_witness(request: NormWitnessRequest):
    funcs, inputs = load_funcs(request.series_tol, g=request.g)
    return commands.run_norm_witness(funcs["g"], request.eps, inputs, request.tol).report
