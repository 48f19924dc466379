"""Pydantic request/response models for the HTTP service."""

from __future__ import annotations

from typing import Literal, Optional

from pydantic import BaseModel, Field


class MeasureModel(BaseModel):
    dim: int
    points: list[list[float]]
    weights: Optional[list[float]] = None


class ReferenceSpec(BaseModel):
    """Reference discretization: deterministic grid or seeded Monte-Carlo."""

    kind: Literal["ball-grid", "ball-mc", "cube"]
    rings: Optional[int] = None
    spokes: Optional[int] = None
    count: Optional[int] = None
    dim: int = 2
    seed: int = 0


class SampleRequest(BaseModel):
    family: str
    n: int = Field(gt=0)
    dim: Optional[int] = None
    seed: int = 0
    parameters: dict = Field(default_factory=dict)


class SampleResponse(BaseModel):
    measure: MeasureModel


class FitRequest(BaseModel):
    data: MeasureModel
    reference: ReferenceSpec
    solver: Literal["assignment", "semidiscrete"] = "assignment"
    tol_mass: float = 1e-3
    max_iters: int = 5000
    store: bool = True


class FitResponse(BaseModel):
    model_id: str
    model: dict
    metadata: dict


class ModelSummary(BaseModel):
    model_id: str
    mode: str
    profile: str
    dim: int
    data_size: int
    reference_size: int


class DepthRequest(BaseModel):
    model_id: Optional[str] = None
    model: Optional[dict] = None
    queries: list[list[float]]


class DepthReportModel(BaseModel):
    query: list[float]
    vector_rank: list[float]
    scalar_rank: float
    sign: list[float]
    depth: float
    extrapolated: bool


class DepthResponse(BaseModel):
    reports: list[DepthReportModel]


class ContourRequest(BaseModel):
    model_id: Optional[str] = None
    model: Optional[dict] = None
    taus: list[float]
    spokes: int = 128


class ContourSet(BaseModel):
    tau: float
    points: list[list[float]]


class ContourResponse(BaseModel):
    contours: list[ContourSet]


class RegionRequest(BaseModel):
    model_id: Optional[str] = None
    model: Optional[dict] = None
    tau: float


class RegionResponse(BaseModel):
    tau: float
    points: list[list[float]]


class FigureRequest(BaseModel):
    model_id: Optional[str] = None
    model: Optional[dict] = None
    taus: Optional[list[float]] = None
    alpha: float = 0.3
    spokes: int = 181


class FigureResponse(BaseModel):
    svg: str


class ConvergeRequest(BaseModel):
    family: str
    dim: Optional[int] = None
    parameters: dict = Field(default_factory=dict)
    sizes: list[int]
    seeds: list[int]
    band: tuple[float, float]
    taus: list[float] = Field(default_factory=lambda: [0.5])
    probe_count: int = 400


class ConvergeResponse(BaseModel):
    band: tuple[float, float]
    probe_count: int
    rows: list[dict]


class ErrorPayload(BaseModel):
    code: str
    message: str
    stage: str
