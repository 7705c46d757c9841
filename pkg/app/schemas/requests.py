"""
Pydantic request models: the function-description document, the ODE
problem document and the HTTP request bodies built on them
"""

from __future__ import annotations

from typing import Annotated, List, Literal, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


# ================================
# Expression nodes
# ================================

class PolyNode(_Strict):
    kind: Literal["poly"]
    coeffs: List[float] = Field(..., min_length=1, description="Ascending coefficients")


class ExpNode(_Strict):
    kind: Literal["exp"]
    alpha: float = Field(..., description="exp(alpha * t + beta)")
    beta: float = 0.0


class TrigNode(_Strict):
    kind: Literal["sin", "cos"]
    amp: float = 1.0
    omega: float = 1.0
    phase: float = 0.0


class CombineNode(_Strict):
    kind: Literal["sum", "prod"]
    args: List["ExprNode"] = Field(..., min_length=1)


class ScaleNode(_Strict):
    kind: Literal["scale"]
    c: float
    arg: "ExprNode"


class AffineNode(_Strict):
    kind: Literal["affine_compose"]
    a: float = Field(..., description="arg(a * t + b)")
    b: float
    arg: "ExprNode"


ExprNode = Annotated[
    Union[PolyNode, ExpNode, TrigNode, CombineNode, ScaleNode, AffineNode],
    Field(discriminator="kind"),
]

CombineNode.model_rebuild()
ScaleNode.model_rebuild()
AffineNode.model_rebuild()


# ================================
# Function-description document
# ================================

class PieceSpec(_Strict):
    on: Tuple[float, float] = Field(..., description="Closed subinterval [u, v]")
    expr: ExprNode


class JumpSpec(_Strict):
    t: str = Field(..., description="Location as a decimal string")
    left: float = 0.0
    right: float = 0.0


class SeriesSpec(_Strict):
    kind: Literal["geometric"]
    side: Literal["left", "right"]
    c: float
    r: float
    A: float
    q: float


class OverrideSpec(_Strict):
    t: str = Field(..., description="Location as a decimal string")
    value: float


class FuncDocument(_Strict):
    """Representable function on [a, b]"""

    domain: Tuple[float, float]
    c0: float = 0.0
    continuous: List[PieceSpec] = Field(default_factory=list)
    jumps: List[JumpSpec] = Field(default_factory=list)
    series: Optional[SeriesSpec] = None
    overrides: List[OverrideSpec] = Field(default_factory=list)

    model_config = ConfigDict(
        extra="forbid",
        json_schema_extra={
            "example": {
                "domain": [0, 1],
                "c0": 0,
                "continuous": [],
                "jumps": [{"t": "0.5", "left": 0, "right": 1}],
            }
        },
    )


class OdeProblem(_Strict):
    """Cauchy problem with measure coefficients given by their antiderivatives p_1..p_{n+1}"""

    n: int = Field(..., ge=2, description="Order of the equation")
    domain: Tuple[float, float]
    p: List[FuncDocument] = Field(..., description="p_1 .. p_{n+1}")
    gamma: List[float] = Field(..., description="Initial values x(a), x'(a), ...")
    tol: Optional[float] = Field(None, gt=0, description="Integrator tolerance")


class KernelTerm(_Strict):
    u: FuncDocument = Field(..., description="Factor in the outer variable t")
    v: FuncDocument = Field(..., description="Factor in the inner variable s")


class KernelDocument(_Strict):
    """Separable kernel h(t, s) = sum_i u_i(t) v_i(s)"""

    terms: List[KernelTerm] = Field(..., min_length=1)


# ================================
# HTTP request bodies
# ================================

class NumericOptions(_Strict):
    tol: Optional[float] = Field(None, gt=0, description="Target enclosure width")
    series_tol: Optional[float] = Field(None, gt=0, description="Jump series tail tolerance")
    max_depth: Optional[int] = Field(None, ge=1, description="Bisection depth cap")


class FuncRequest(NumericOptions):
    f: FuncDocument


class StepApproxRequest(NumericOptions):
    f: FuncDocument
    eps: float = Field(..., gt=0)


class GMeasureRequest(NumericOptions):
    g: FuncDocument
    intervals: List[Tuple[float, float]] = Field(..., min_length=1)


class PairRequest(NumericOptions):
    f: FuncDocument
    g: FuncDocument


class FubiniRequest(NumericOptions):
    f: FuncDocument = Field(..., description="Outer integrator on [a, b]")
    g: FuncDocument = Field(..., description="Inner integrator on [c, d]")
    kernel: KernelDocument


class InequalityRequest(NumericOptions):
    x: FuncDocument
    y: FuncDocument
    g: FuncDocument
    p: float = Field(..., description="Exponent, must exceed 1")


class NormWitnessRequest(NumericOptions):
    g: FuncDocument
    eps: float = Field(1e-3, gt=0)


class MollifyRequest(NumericOptions):
    y: FuncDocument
    eps: float = Field(..., gt=0)


class MollifyReportRequest(NumericOptions):
    x: FuncDocument
    g: FuncDocument
    eps_grid: List[float] = Field(..., min_length=1)


class DeltaCorrectRequest(NumericOptions):
    problem: OdeProblem
    eps_grid: List[float] = Field(default_factory=lambda: [0.1, 0.05, 0.025])
