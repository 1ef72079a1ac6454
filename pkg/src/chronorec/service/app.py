"""FastAPI app exposing the pipeline commands over HTTP.

The service operates on server-local workspace directories; requests carry
the workspace path and the pipeline config. The CLI is a thin client of this
API (in-process by default, remote with --url).
"""

from __future__ import annotations

import logging

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

import chronorec
from chronorec import pipeline
from chronorec.errors import DataError, NumericalError
from chronorec.service.schemas import (
    CommandRequest,
    CommandResponse,
    HealthResponse,
    QueryRequest,
    QueryResponse,
    SweepRequest,
)

log = logging.getLogger(__name__)


def create_app() -> FastAPI:
    app = FastAPI(title="chronorec", version=chronorec.__version__)

    @app.exception_handler(DataError)
    async def data_error(request: Request, exc: DataError) -> JSONResponse:
        return JSONResponse(status_code=422, content={"kind": "data", "message": str(exc)})

    @app.exception_handler(NumericalError)
    async def numerical_error(request: Request, exc: NumericalError) -> JSONResponse:
        return JSONResponse(
            status_code=500, content={"kind": "numerical", "message": str(exc)}
        )

    @app.get("/health", response_model=HealthResponse)
    def health() -> HealthResponse:
        return HealthResponse(status="ok", name="chronorec", version=chronorec.__version__)

    def _run(command: str, req: CommandRequest, result: dict) -> CommandResponse:
        return CommandResponse(
            command=command,
            workspace=req.workspace,
            config_hash=req.config.config_hash(),
            result=result,
        )

    @app.post("/ingest", response_model=CommandResponse)
    def ingest(req: CommandRequest) -> CommandResponse:
        return _run("ingest", req, pipeline.cmd_ingest(req.workspace, req.config))

    @app.post("/slices", response_model=CommandResponse)
    def slices(req: CommandRequest) -> CommandResponse:
        return _run("slices", req, pipeline.cmd_slices(req.workspace, req.config))

    @app.post("/embed", response_model=CommandResponse)
    def embed(req: CommandRequest) -> CommandResponse:
        return _run("embed", req, pipeline.cmd_embed(req.workspace, req.config))

    @app.post("/profile", response_model=CommandResponse)
    def profile(req: CommandRequest) -> CommandResponse:
        return _run("profile", req, pipeline.cmd_profile(req.workspace, req.config))

    @app.post("/train", response_model=CommandResponse)
    def train(req: CommandRequest) -> CommandResponse:
        return _run("train", req, pipeline.cmd_train(req.workspace, req.config))

    @app.post("/recommend", response_model=CommandResponse)
    def recommend(req: CommandRequest) -> CommandResponse:
        return _run("recommend", req, pipeline.cmd_recommend(req.workspace, req.config))

    @app.post("/evaluate", response_model=CommandResponse)
    def evaluate(req: CommandRequest) -> CommandResponse:
        return _run("evaluate", req, pipeline.cmd_evaluate(req.workspace, req.config))

    @app.post("/synth", response_model=CommandResponse)
    def synth(req: CommandRequest) -> CommandResponse:
        return _run("synth", req, pipeline.cmd_synth(req.workspace, req.config))

    @app.post("/sweep-k", response_model=CommandResponse)
    def sweep_k(req: SweepRequest) -> CommandResponse:
        return _run(
            "sweep-k", req, pipeline.cmd_sweep_k(req.workspace, req.config, req.k_values)
        )

    @app.post("/dispersion", response_model=CommandResponse)
    def dispersion(req: CommandRequest) -> CommandResponse:
        return _run("dispersion", req, pipeline.cmd_dispersion(req.workspace, req.config))

    @app.post("/query", response_model=QueryResponse)
    def query(req: QueryRequest) -> QueryResponse:
        result = pipeline.recommend_query(
            req.workspace, req.abstract, req.year, req.config, method=req.method
        )
        return QueryResponse(**result)

    return app
