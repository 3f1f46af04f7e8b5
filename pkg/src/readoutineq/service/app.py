"""FastAPI application exposing the simulation endpoints."""

from __future__ import annotations

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import __version__
from ..errors import ConfigError, NumericalInstabilityError
from . import handlers
from .models import (
    SCHEMA_VERSION,
    AnalyzeRequest,
    AnalyzeResponse,
    LandscapeRequest,
    LandscapeResponse,
    MonteCarloRequest,
    MonteCarloResponse,
    SenmCheckRequest,
    SenmCheckResponse,
)


def create_app() -> FastAPI:
    app = FastAPI(title="readoutineq", version=__version__)

    @app.exception_handler(ConfigError)
    async def _config_error(request: Request, exc: ConfigError) -> JSONResponse:
        return JSONResponse(status_code=400, content={"detail": str(exc)})

    @app.exception_handler(NumericalInstabilityError)
    async def _numerical_error(
        request: Request, exc: NumericalInstabilityError
    ) -> JSONResponse:
        return JSONResponse(status_code=500, content={"detail": str(exc)})

    @app.get("/health")
    def health() -> dict:
        return {"status": "ok", "schema_version": SCHEMA_VERSION, "version": __version__}

    @app.post("/analyze", response_model=AnalyzeResponse)
    def analyze(req: AnalyzeRequest) -> AnalyzeResponse:
        return handlers.run_analyze(req)

    @app.post("/montecarlo", response_model=MonteCarloResponse)
    def montecarlo(req: MonteCarloRequest) -> MonteCarloResponse:
        return handlers.run_montecarlo(req)

    @app.post("/landscape", response_model=LandscapeResponse)
    def landscape(req: LandscapeRequest) -> LandscapeResponse:
        return handlers.run_landscape(req)

    @app.post("/senm/check", response_model=SenmCheckResponse)
    def senm_check(req: SenmCheckRequest) -> SenmCheckResponse:
        return handlers.run_senm_check(req)

    return app


app = create_app()
