"""Request and response bodies for the HTTP service.

Requests reuse the run schema from ``eprb.config`` (without local-output
settings, which stay a command-line concern). Responses mirror the
workflow dicts field for field.
"""

from __future__ import annotations

from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict

from ..config import RunParams

__all__ = [
    "RunParams",
    "CertifyRequest",
    "ChshRequest",
    "HealthResponse",
    "DistributionResponse",
    "SimulateResponse",
    "CertifyResponse",
    "AuditCheckOut",
    "AuditReportOut",
    "AuditResponse",
    "ScanPointOut",
    "ScanResponse",
    "ChshResponse",
]


class CertifyRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    bind: Optional[str] = None


class ChshRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    a1_deg: float
    a2_deg: float
    b1_deg: float
    b2_deg: float
    model: Optional[str] = None
    bind: Optional[str] = None
    weights: Optional[list[float]] = None
    grandma_mode: Literal["labeled", "continuous"] = "labeled"


class HealthResponse(BaseModel):
    status: str
    version: str


class DistributionResponse(BaseModel):
    theta_deg: float
    phi_deg: float
    probabilities: dict[str, float]
    p_opposite: float
    correlation: float


class SimulateResponse(BaseModel):
    model: str
    policy: str
    n: int
    seed: int
    counts: dict[str, int]
    p_hat: dict[str, float]
    p_opposite: float
    p_opposite_ci: list[float]
    files: Optional[dict[str, str]] = None


class ChshBlock(BaseModel):
    settings_deg: dict[str, float]
    exact_value: float
    deterministic_values: list[int]
    deterministic_bound: float


class CertifyResponse(BaseModel):
    binding: dict[str, float]
    fractions: list[str]
    floor: str
    ceiling: str
    floor_value: float
    quantum_average: float
    quantum_below_floor: bool
    chsh: ChshBlock
    files: Optional[dict[str, str]] = None


class AuditCheckOut(BaseModel):
    name: str
    passed: bool
    metric: float
    threshold: float
    detail: str


class AuditReportOut(BaseModel):
    title: str
    passed: bool
    checks: list[AuditCheckOut]


class AuditResponse(BaseModel):
    model: str
    passed: bool
    reports: list[AuditReportOut]
    files: Optional[dict[str, str]] = None


class ScanPointOut(BaseModel):
    delta_deg: float
    n: int
    opposite_count: int
    p_opposite_emp: float
    ci_lo: float
    ci_hi: float
    p_opposite_qm: float
    mermin_floor: float


class ScanResponse(BaseModel):
    model: str
    n_per_point: int
    seed: int
    points: list[ScanPointOut]
    within_bands: list[bool]
    pass_fraction: float
    files: Optional[dict[str, str]] = None


class ChshResponse(BaseModel):
    settings_deg: dict[str, float]
    exact_value: float
    deterministic_bound: float
    model: Optional[str] = None
    model_value: Optional[float] = None
