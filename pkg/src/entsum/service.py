"""HTTP JSON API over preloaded summaries.

Endpoints:
    GET  /healthz                      liveness probe
    GET  /summaries                    ids and metadata of loaded summaries
    GET  /summaries/{id}/schema        attribute domains and 2D coverage
    POST /summaries/{id}/query {sql}   counting-query answer

Every non-2xx response carries exactly one error object
{code, message, detail}; codes are PARSE_ERROR, UNKNOWN_SUMMARY,
PLAN_TOO_LARGE, and INTERNAL.  Summaries are loaded (and their cached
partition value re-verified) before the service accepts traffic; a reload
re-reads the same paths.
"""

from __future__ import annotations

import logging
import threading
from concurrent.futures import ThreadPoolExecutor
from concurrent.futures import TimeoutError as FutureTimeout
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .errors import ParseError, PlanTooLargeError, QueryError
from .query import Summary, answer, load_summary, parse_query

logger = logging.getLogger(__name__)


@dataclass
class ServiceConfig:
    port: int = 8080
    summary_paths: list[str] = field(default_factory=list)
    max_concurrent: int = 8
    request_timeout_ms: int = 30_000
    ui_dir: Optional[str] = None


def _error(status: int, code: str, message: str, detail: str = "") -> JSONResponse:
    return JSONResponse(
        status_code=status,
        content={"error": {"code": code, "message": message, "detail": detail}},
    )


def _summary_meta(sid: str, summary: Summary) -> dict:
    return {
        "id": sid,
        "n": summary.n,
        "attributes": [a.name for a in summary.schema.attributes],
        "statistic_count": summary.stats.k,
        "pairs": [
            [summary.schema.attributes[i].name for i in pair]
            for pair in summary.stats.pairs
        ],
        "meta": summary.meta,
    }


def _schema_view(sid: str, summary: Summary) -> dict:
    schema = summary.schema
    attributes = []
    for i, a in enumerate(schema.attributes):
        entry = {"name": a.name, "kind": a.kind, "size": a.size}
        if a.kind == "categorical":
            entry["values"] = list(a.values)
        else:
            entry.update({"lo": a.lo, "hi": a.hi, "buckets": a.buckets})
        entry["labels"] = [a.value_label(v) for v in range(a.size)]
        attributes.append(entry)
    return {
        "id": sid,
        "n": summary.n,
        "attributes": attributes,
        "pairs": [
            [schema.attributes[i].name for i in pair]
            for pair in summary.stats.pairs
        ],
        "two_d_count": len(summary.stats.two_d),
    }


def create_app(config: ServiceConfig) -> FastAPI:
    """Load every configured summary, then expose the query API."""
    app = FastAPI(title="entsum", docs_url=None, redoc_url=None)
    from fastapi.middleware.cors import CORSMiddleware

    # the explorer may be served from another origin during development
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"],
        allow_headers=["*"])
    state_lock = threading.Lock()
    summaries: dict[str, Summary] = {}

    def load_all() -> None:
        loaded = {}
        for path in config.summary_paths:
            sid = Path(path).stem
            loaded[sid] = load_summary(path)
            logger.info("loaded summary %s from %s", sid, path)
        with state_lock:
            summaries.clear()
            summaries.update(loaded)

    load_all()
    app.state.reload = load_all
    executor = ThreadPoolExecutor(max_workers=max(1, config.max_concurrent))

    @app.get("/healthz")
    def healthz():
        return {"status": "ok", "summaries": sorted(summaries)}

    @app.get("/summaries")
    def list_summaries():
        with state_lock:
            return [_summary_meta(sid, s) for sid, s in sorted(summaries.items())]

    @app.get("/summaries/{sid}/schema")
    def get_schema(sid: str):
        with state_lock:
            summary = summaries.get(sid)
        if summary is None:
            return _error(404, "UNKNOWN_SUMMARY", f"no summary named {sid!r}")
        return _schema_view(sid, summary)

    @app.post("/summaries/{sid}/query")
    async def post_query(sid: str, request: Request):
        with state_lock:
            summary = summaries.get(sid)
        if summary is None:
            return _error(404, "UNKNOWN_SUMMARY", f"no summary named {sid!r}")
        try:
            body = await request.json()
        except Exception:
            return _error(400, "PARSE_ERROR", "request body must be JSON")
        sql = body.get("sql") if isinstance(body, dict) else None
        if not isinstance(sql, str) or not sql.strip():
            return _error(400, "PARSE_ERROR", "missing 'sql' string in request body")
        try:
            plan = parse_query(sql, summary.schema)
        except ParseError as e:
            return _error(400, "PARSE_ERROR", str(e))
        future = executor.submit(answer, summary, plan)
        try:
            out = future.result(timeout=config.request_timeout_ms / 1000.0)
        except FutureTimeout:
            future.cancel()
            return _error(500, "INTERNAL", "query timed out",
                          f"timeout {config.request_timeout_ms} ms")
        except PlanTooLargeError as e:
            return _error(400, "PLAN_TOO_LARGE", str(e))
        except QueryError as e:
            return _error(400, "PARSE_ERROR", str(e))
        except Exception as e:  # keep the service alive on engine bugs
            logger.exception("query failed")
            return _error(500, "INTERNAL", "query execution failed", str(e))
        return {
            "groups": [
                {"values": list(r.values), "raw": r.raw, "rounded": r.rounded}
                for r in out.rows
            ],
            "wall_ms": out.wall_ms,
        }

    if config.ui_dir:
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=config.ui_dir, html=True), name="ui")

    return app


def serve(config: ServiceConfig) -> None:
    """Run the service until interrupted; SIGHUP reloads the summaries."""
    import signal

    import uvicorn

    app = create_app(config)

    def handle_hup(signum, frame):
        logger.info("reload signal received")
        try:
            app.state.reload()
        except Exception:
            logger.exception("reload failed; keeping previous summaries")

    try:
        signal.signal(signal.SIGHUP, handle_hup)
    except (ValueError, AttributeError):
        pass  # not on the main thread or platform lacks SIGHUP

    uvicorn.run(app, host="127.0.0.1", port=config.port, log_level="warning")
