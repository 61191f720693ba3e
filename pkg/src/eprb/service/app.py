"""HTTP service exposing the workflows.

A thin layer: endpoints validate the request body, call the matching
workflow and let the response schema shape the output. Domain errors map
to 400 with the error message; request-shape errors get FastAPI's
standard 422.
"""

from __future__ import annotations

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import __version__, workflows
from ..config import RunConfig, RunParams
from ..core import EprbError
from . import schemas


def create_app() -> FastAPI:
    app = FastAPI(
        title="eprb",
        version=__version__,
        description="Simulate and audit the two-particle spin-correlation experiment.",
    )

    @app.exception_handler(EprbError)
    async def handle_domain_error(request: Request, exc: EprbError) -> JSONResponse:
        return JSONResponse(status_code=400, content={"detail": str(exc)})

    @app.get("/health", response_model=schemas.HealthResponse)
    def health() -> dict:
        return {"status": "ok", "version": __version__}

    @app.get("/quantum/distribution", response_model=schemas.DistributionResponse)
    def quantum_distribution(theta_deg: float, phi_deg: float) -> dict:
        return workflows.distribution_report(theta_deg, phi_deg)

    @app.post("/simulate", response_model=schemas.SimulateResponse)
    def simulate(request: RunParams) -> dict:
        return workflows.simulate_run(RunConfig(**request.model_dump()))

    @app.post("/certify", response_model=schemas.CertifyResponse)
    def certify(request: schemas.CertifyRequest) -> dict:
        return workflows.certify_report(RunConfig(bind=request.bind))

    @app.post("/audit", response_model=schemas.AuditResponse)
    def audit(request: RunParams) -> dict:
        return workflows.audit_battery(RunConfig(**request.model_dump()))

    @app.post("/scan", response_model=schemas.ScanResponse)
    def scan(request: RunParams) -> dict:
        return workflows.scan_curve(RunConfig(**request.model_dump()))

    @app.post("/chsh", response_model=schemas.ChshResponse)
    def chsh(request: schemas.ChshRequest) -> dict:
        params = None
        if request.model is not None:
            params = RunParams(
                model=request.model,
                bind=request.bind,
                weights=request.weights,
                grandma_mode=request.grandma_mode,
            )
        return workflows.chsh_report(
            request.a1_deg, request.a2_deg, request.b1_deg, request.b2_deg,
            params=params,
        )

    return app


app = create_app()
