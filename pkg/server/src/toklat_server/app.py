"""FastAPI application implementing the scoring wire protocol.

POST /v1/next_logprobs {"context": [ids]}
    -> {"logprobs": [float; vocab_size + 1]}   (last entry = end of sequence)
POST /v1/score {"context": [ids], "sequences": [[ids], ...], "include_eos": bool}
    -> {"logprobs": [float; one per sequence]}

Every error is `{"error": string}` with a 4xx status (503 under overload).
The server performs no constrained generation: it is a plain logit oracle,
and all lattice logic lives in the client toolkit.
"""

from __future__ import annotations

import functools
import threading
from typing import Any

import anyio.to_thread
from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from starlette.exceptions import HTTPException as StarletteHTTPException

from .backends import Backend, build_backend
from .config import ServerConfig


def _validate_ids(value: Any, what: str, vocab_size: int) -> list[int]:
    if not isinstance(value, list) or not all(
        isinstance(x, int) and not isinstance(x, bool) and 0 <= x < vocab_size
        for x in value
    ):
        raise _BadRequest(f"'{what}' must be a list of token ids in [0, {vocab_size})")
    return value


class _BadRequest(Exception):
    def __init__(self, message: str):
        self.message = message


def create_app(config: ServerConfig, backend: Backend | None = None) -> FastAPI:
    backend = backend or build_backend(config.model, config.device)
    app = FastAPI(title="toklat scoring service", docs_url=None, redoc_url=None)
    app.state.backend = backend
    app.state.config = config
    slots = threading.BoundedSemaphore(config.max_concurrent_requests)
    app.state.slots = slots  # exposed for overload tests

    @app.exception_handler(_BadRequest)
    async def bad_request(_: Request, exc: _BadRequest):
        return JSONResponse(status_code=400, content={"error": exc.message})

    @app.exception_handler(RequestValidationError)
    async def invalid_request(_: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400, content={"error": str(exc.errors()[:1])})

    @app.exception_handler(StarletteHTTPException)
    async def http_error(_: Request, exc: StarletteHTTPException):
        return JSONResponse(
            status_code=exc.status_code, content={"error": str(exc.detail)}
        )

    async def _body(request: Request) -> dict:
        try:
            payload = await request.json()
        except Exception:
            raise _BadRequest("body must be a JSON object") from None
        if not isinstance(payload, dict):
            raise _BadRequest("body must be a JSON object")
        return payload

    @app.post("/v1/next_logprobs")
    async def next_logprobs(request: Request):
        payload = await _body(request)
        context = _validate_ids(
            payload.get("context"), "context", backend.vocab_size
        )
        if not slots.acquire(blocking=False):
            return JSONResponse(status_code=503, content={"error": "overloaded"})
        try:
            values = await anyio.to_thread.run_sync(backend.next_logprobs, context)
        finally:
            slots.release()
        return {"logprobs": values}

    @app.post("/v1/score")
    async def score(request: Request):
        payload = await _body(request)
        context = _validate_ids(payload.get("context"), "context", backend.vocab_size)
        sequences = payload.get("sequences")
        if not isinstance(sequences, list):
            raise _BadRequest("'sequences' must be a list of token-id lists")
        for seq in sequences:
            _validate_ids(seq, "sequences", backend.vocab_size)
        include_eos = payload.get("include_eos", False)
        if not isinstance(include_eos, bool):
            raise _BadRequest("'include_eos' must be a boolean")
        if not slots.acquire(blocking=False):
            return JSONResponse(status_code=503, content={"error": "overloaded"})
        try:
            step = app.state.config.max_batch_size

            def run() -> list[float]:
                out: list[float] = []
                for i in range(0, len(sequences), step):
                    out.extend(
                        backend.score(context, sequences[i : i + step], include_eos)
                    )
                return out

            out = await anyio.to_thread.run_sync(functools.partial(run))
        finally:
            slots.release()
        return {"logprobs": out}

    return app


def serve(config: ServerConfig) -> None:
    import uvicorn

    uvicorn.run(
        create_app(config), host=config.host, port=config.port, log_level="warning"
    )
