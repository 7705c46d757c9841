"""
Exception hierarchy shared by the engines, the CLI and the HTTP layer.

Every class carries an ``error_code`` (stable string for reports) and an
``exit_code`` (CLI process status).
"""

from typing import Any, Dict, Optional


class CalculusError(Exception):
    """Base class for all engine errors"""

    error_code = "CALCULUS_ERROR"
    exit_code = 3
    http_status = 422

    def __init__(self, detail: str, pointer: Optional[str] = None, loc: Optional[str] = None):
        super().__init__(detail)
        self.detail = detail
        self.pointer = pointer
        self.loc = loc

    def to_dict(self) -> Dict[str, Any]:
        payload: Dict[str, Any] = {"detail": self.detail, "error_code": self.error_code}
        if self.pointer is not None:
            payload["pointer"] = self.pointer
        if self.loc is not None:
            payload["loc"] = self.loc
        return payload


# ================================
# Validation family (exit 3)
# ================================

class SchemaError(CalculusError):
    error_code = "SCHEMA_ERROR"


class InvariantError(CalculusError):
    error_code = "INVARIANT_ERROR"


class DocumentIOError(CalculusError):
    error_code = "IO_ERROR"


class DomainError(CalculusError):
    error_code = "DOMAIN_ERROR"


class DomainMismatch(CalculusError):
    error_code = "DOMAIN_MISMATCH"


class UnsupportedProduct(CalculusError):
    error_code = "UNSUPPORTED_PRODUCT"


class UnsupportedPair(CalculusError):
    error_code = "UNSUPPORTED_PAIR"


class UnsupportedKernel(CalculusError):
    error_code = "UNSUPPORTED_KERNEL"


class BadExponent(CalculusError):
    error_code = "BAD_EXPONENT"


class EpsTooLarge(CalculusError):
    error_code = "EPS_TOO_LARGE"


class ConditionViolation(CalculusError):
    error_code = "CONDITION_VIOLATION"


class NotIncreasing(CalculusError):
    error_code = "NOT_INCREASING"


class InfiniteVariation(CalculusError):
    error_code = "INFINITE_VARIATION"


class SingularPivot(CalculusError):
    error_code = "SINGULAR_PIVOT"


# ================================
# Nonexistence (exit 2)
# ================================

class NonexistentIntegral(CalculusError):
    """The Riemann-Stieltjes integral does not exist for the pair"""

    error_code = "NONEXISTENT"
    exit_code = 2
    http_status = 409

    def __init__(self, detail: str, loc: str, kind: str = "CommonDiscontinuity"):
        super().__init__(detail, loc=loc)
        self.kind = kind

    def to_dict(self) -> Dict[str, Any]:
        payload = super().to_dict()
        payload["kind"] = self.kind
        return payload


# ================================
# Budget family (exit 4)
# ================================

class BudgetExceeded(CalculusError):
    error_code = "BUDGET_EXCEEDED"
    exit_code = 4
    http_status = 503


class StepFailure(CalculusError):
    error_code = "STEP_FAILURE"
    exit_code = 4
    http_status = 503
