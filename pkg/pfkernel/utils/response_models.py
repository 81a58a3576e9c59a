"""
API request and response models
Pydantic schemas for the HTTP service
"""
from typing import List, Literal, Optional, Tuple, Union

from pydantic import BaseModel, Field

from pfkernel.core.kernels import KernelParams, PFParams


class BaseResponse(BaseModel):
    """Base response"""
    status: str = Field(..., description="success or error")
    message: Optional[str] = Field(None, description="human readable message")


class ErrorResponse(BaseResponse):
    """Error response"""
    status: Literal["error"] = "error"
    error: Optional[str] = Field(None, description="machine readable error code")


class DiagramPayload(BaseModel):
    """Diagram as a list of [birth, death] pairs; death may be null for essential points."""
    points: List[Tuple[float, Optional[float]]] = Field(default_factory=list)
    homology_dimension: int = Field(0, ge=0)


class PersistenceRequest(BaseModel):
    points: List[List[float]] = Field(..., min_length=1, description="point cloud rows")
    max_dim: int = Field(1, ge=0, le=1)
    max_scale: Optional[float] = Field(None, gt=0, description="largest filtration value (default unbounded)")


class PersistenceResponse(BaseResponse):
    status: Literal["success"] = "success"
    diagrams: List[DiagramPayload] = Field(default_factory=list)


class DistanceRequest(BaseModel):
    diagram_i: DiagramPayload
    diagram_j: DiagramPayload
    sigma: float = Field(..., gt=0)
    accel: str = Field("exact", pattern="^(exact|fgt)$")
    epsilon: float = Field(1e-6, gt=0, lt=1)
    essential: str = Field("drop", description="drop or cap:<value>")


class DistanceResponse(BaseResponse):
    status: Literal["success"] = "success"
    value: float
    support_size: int
    accel_used: bool


class GramRequest(BaseModel):
    diagrams: List[DiagramPayload] = Field(..., min_length=1)
    params: KernelParams
    essential: str = "drop"


class GramResponse(BaseResponse):
    status: Literal["success"] = "success"
    kernel: str
    values: List[List[float]]


class KfdrRequest(BaseModel):
    diagrams: List[DiagramPayload] = Field(..., min_length=4, description="sequence in acquisition order")
    params: PFParams
    gamma: float = Field(1e-3, gt=0)
    essential: str = "drop"


class KfdrResponse(BaseResponse):
    status: Literal["success"] = "success"
    scores: List[Tuple[int, float]]
    change_point: int


# each endpoint answers with its success model or an ErrorResponse, told apart by status
PersistenceResult = Union[PersistenceResponse, ErrorResponse]
DistanceResult = Union[DistanceResponse, ErrorResponse]
GramResult = Union[GramResponse, ErrorResponse]
KfdrResult = Union[KfdrResponse, ErrorResponse]
