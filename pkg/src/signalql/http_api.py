"""REST surface: query execution plus log management.

Query responses come straight from ResultTable.to_json_bytes, so the body is
byte-stable for a given result: same names, same row order, same bytes. The
layer adds no semantics of its own; every body is the library's own
serialization of the result or diagnostic.
"""

from __future__ import annotations

import io
import json

from fastapi import FastAPI, File, Form, UploadFile
from fastapi.responses import JSONResponse, Response
from pydantic import BaseModel

from . import __version__
from .engine import Engine
from .errors import (
    DuplicateLogId,
    InvalidIngestConfig,
    QueryError,
    ResourceLimitExceeded,
    SignalError,
    UnknownLog,
)
from .ingest import CsvIngestConfig, ingest_csv, ingest_xes
from .store import EventLog

DEFAULT_MAX_UPLOAD_BYTES = 64 * 1024 * 1024


class QueryRequest(BaseModel):
    query: str
    logId: str | None = None


def _status_for(err: SignalError) -> int:
    if isinstance(err, UnknownLog):
        return 404
    if isinstance(err, DuplicateLogId):
        return 409
    if isinstance(err, ResourceLimitExceeded):
        return 413
    return 400


def _error_body(err: SignalError) -> dict:
    if isinstance(err, QueryError):
        return {"error": err.diagnostic()}
    body: dict = {"code": err.code, "message": err.message}
    row = getattr(err, "row", None)
    if row is not None:
        body["row"] = row
    return {"error": body}


def _log_summary(log: EventLog) -> dict:
    return {
        "logId": log.log_id,
        "cases": log.n_cases,
        "events": log.n_events,
        "schema": log.schema.to_dict(),
    }


def create_app(
    engine: Engine | None = None,
    max_upload_bytes: int = DEFAULT_MAX_UPLOAD_BYTES,
) -> FastAPI:
    eng = engine if engine is not None else Engine()
    app = FastAPI(title="signal", version=__version__)
    app.state.engine = eng

    @app.exception_handler(SignalError)
    async def signal_error(_, err: SignalError):
        return JSONResponse(status_code=_status_for(err), content=_error_body(err))

    @app.post("/signal/queries")
    def run_query(req: QueryRequest):
        result = eng.run(req.query, current=req.logId)
        return Response(content=result.to_json_bytes(), media_type="application/json")

    @app.get("/logs")
    def list_logs():
        return {"logs": [_log_summary(l) for l in eng.catalog.list_logs()]}

    @app.get("/logs/{log_id}")
    def get_log(log_id: str):
        return _log_summary(eng.catalog.get(log_id))

    @app.delete("/logs/{log_id}", status_code=204)
    def delete_log(log_id: str):
        eng.drop(log_id)
        return Response(status_code=204)

    @app.post("/logs", status_code=201)
    def upload_log(
        file: UploadFile = File(...),
        logId: str = Form(...),
        format: str | None = Form(None),
        config: str | None = Form(None),
    ):
        data = file.file.read(max_upload_bytes + 1)
        if len(data) > max_upload_bytes:
            return JSONResponse(
                status_code=413,
                content={
                    "error": {
                        "code": "UploadTooLarge",
                        "message": f"upload exceeds {max_upload_bytes} bytes",
                    }
                },
            )
        fmt = format
        if fmt is None:
            name = file.filename or ""
            fmt = "xes" if name.lower().endswith(".xes") else "csv"
        if fmt == "csv":
            if config is None:
                raise InvalidIngestConfig("csv uploads need a config form field")
            try:
                raw = json.loads(config)
            except ValueError as exc:
                raise InvalidIngestConfig(f"config is not valid JSON: {exc}") from None
            log = ingest_csv(io.BytesIO(data), CsvIngestConfig.from_dict(raw), logId)
        elif fmt == "xes":
            log = ingest_xes(io.BytesIO(data), logId)
        else:
            raise InvalidIngestConfig(f"unknown format {fmt!r}; expected csv or xes")
        eng.add_log(log, make_current=False)
        return _log_summary(log)

    return app


app = create_app()
