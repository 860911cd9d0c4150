"""HTTP front end: one POST endpoint per command, each returning a ``Report``."""

from __future__ import annotations

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse, Response

from .. import __version__
from .handlers import EXIT_CODES, handle
from .schemas import (
    DecomposeRequest,
    DpRequest,
    OracleRequest,
    ErrorOut,
    ReduceSatRequest,
    Report,
    SensitivityRequest,
    report_json_schema,
)

HTTP_STATUS = {"usage": 400, "data": 422, "computation": 500, "internal": 500}

app = FastAPI(title="tsens", version=__version__)


def _respond(report: Report) -> Response:
    status = HTTP_STATUS[report.error.kind] if report.error else 200
    return Response(report.to_json(), status_code=status, media_type="application/json")


@app.exception_handler(RequestValidationError)
def _invalid_request(request: Request, exc: RequestValidationError) -> Response:
    problems = "; ".join(
        f"{'.'.join(str(p) for p in e.get('loc', ()))}: {e.get('msg', '')}" for e in exc.errors()
    )
    report = Report(
        command=request.url.path.strip("/"),
        error=ErrorOut(kind="usage", type="RequestValidationError", message=problems, exit_code=EXIT_CODES["usage"]),
    )
    return _respond(report)


@app.get("/health")
def health() -> dict:
    return {"status": "ok", "version": __version__}


@app.get("/schema")
def schema() -> JSONResponse:
    return JSONResponse(report_json_schema())


@app.post("/decompose", response_model=Report)
def decompose(req: DecomposeRequest) -> Response:
    return _respond(handle("decompose", req))


@app.post("/sensitivity", response_model=Report)
def sensitivity(req: SensitivityRequest) -> Response:
    return _respond(handle("sensitivity", req))


@app.post("/dp-answer", response_model=Report)
def dp_answer(req: DpRequest) -> Response:
    return _respond(handle("dp-answer", req))


@app.post("/oracle", response_model=Report)
def oracle(req: OracleRequest) -> Response:
    return _respond(handle("oracle", req))


@app.post("/reduce-sat", response_model=Report)
def reduce_sat(req: ReduceSatRequest) -> Response:
    return _respond(handle("reduce-sat", req))
