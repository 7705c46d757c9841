"""

Pydantic response models for API

"""

from pydantic import BaseModel, Field, ConfigDict
from typing import Dict, Any, Optional
from datetime import datetime


class Report(BaseModel):
    """Result of one engine command (shared by the CLI and the HTTP API)"""
    command: str = Field(..., description="Command name")
    status: str = Field("OK", description="OK | CERTIFIED | BUDGET | NONEXISTENT | INFINITE_SUSPECTED | ERROR")
    inputs: Dict[str, str] = Field(default_factory=dict, description="sha256 digests of the input documents")
    value: Optional[Any] = Field(None, description="Scalar, vector or table")
    error_bound: Optional[float] = Field(None, description="Bound on |value - exact|")
    diagnostics: Dict[str, Any] = Field(default_factory=dict, description="Partitions, depth, series terms, events")
    detail: Optional[str] = Field(None, description="Error message when status is not OK")
    loc: Optional[str] = Field(None, description="Offending location token")

    model_config = ConfigDict(
        json_schema_extra={
            "example": {
                "command": "star-int",
                "status": "OK",
                "inputs": {"f": "3b1f...", "g": "9c04..."},
                "value": 1.0,
                "error_bound": 2.1e-15,
                "diagnostics": {"terms": [0.5, 0.0, 0.5, 0.0], "role": "standard"},
            }
        }
    )


class HealthResponse(BaseModel):
    """Response model for health check"""
    status: str = Field(..., description="Service status")
    version: str = Field(..., description="API version")
    engines_loaded: Dict[str, bool] = Field(..., description="Engine import status")
    cached_documents: int = Field(0, description="Parsed documents held in cache")
    uptime: Optional[str] = Field(None, description="Service uptime")
    memory_usage_mb: Optional[float] = Field(None, description="Memory usage in MB")
    timestamp: datetime = Field(default_factory=datetime.utcnow)


class ErrorResponse(BaseModel):
    """Response model for errors"""
    detail: str = Field(..., description="Error message")
    error_code: Optional[str] = Field(None, description="Error code")
    loc: Optional[str] = Field(None, description="Offending location token")
    pointer: Optional[str] = Field(None, description="JSON pointer into the input document")
    timestamp: datetime = Field(default_factory=datetime.utcnow)