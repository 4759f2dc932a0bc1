"""HTTP server implementing the generation wire protocol.

Endpoints:

    POST /generate   {prompt, seed, steps, guidance_scale,
                      conditioning_scale, edge_map_png_base64}
                     -> {image_png_base64}, RGB PNG matching the edge map's
                     dimensions
    POST /describe   {instruction, max_tokens, seed} -> {text}
    GET  /healthz    {"status": "ok", ...}; never blocked by generations

Malformed requests get HTTP 400, model failures 500, saturation of the
generation queue 503. Generations run in the worker thread pool behind a
concurrency gate so health checks stay responsive during long jobs.
"""

from __future__ import annotations

import base64
import io
import threading

import numpy as np
from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from PIL import Image
from pydantic import BaseModel, Field

from .config import ServerConfig
from .models import load_diffusion_model, load_language_model


class GenerateBody(BaseModel):
    prompt: str
    seed: int
    steps: int = Field(ge=1)
    guidance_scale: float = Field(ge=0.0)
    conditioning_scale: float = Field(ge=0.0)
    edge_map_png_base64: str


class DescribeBody(BaseModel):
    instruction: str
    max_tokens: int = Field(default=64, ge=1)
    seed: int = 0


class _Gate:
    """Bounded concurrency with a bounded wait queue; full queue -> busy."""

    def __init__(self, max_concurrency: int, max_queue: int, timeout_s: float):
        self._slots = threading.Semaphore(max_concurrency)
        self._waiting = 0
        self._limit = max_queue
        self._timeout = timeout_s
        self._lock = threading.Lock()

    def __enter__(self):
        if self._slots.acquire(blocking=False):
            return self
        with self._lock:
            if self._waiting >= self._limit:
                raise _Busy()
            self._waiting += 1
        try:
            if not self._slots.acquire(timeout=self._timeout):
                raise _Busy()
        finally:
            with self._lock:
                self._waiting -= 1
        return self

    def __exit__(self, *exc):
        self._slots.release()
        return False


class _Busy(Exception):
    pass


def _decode_edge_png(payload: str) -> np.ndarray:
    try:
        raw = base64.b64decode(payload, validate=True)
    except Exception as exc:
        raise ValueError(f"edge_map_png_base64 is not valid base64: {exc}") from exc
    try:
        with Image.open(io.BytesIO(raw)) as im:
            return np.asarray(im.convert("L"), dtype=np.uint8)
    except Exception as exc:
        raise ValueError(f"edge map payload is not a decodable image: {exc}") from exc


def _encode_png(pixels: np.ndarray) -> str:
    buf = io.BytesIO()
    Image.fromarray(pixels, mode="RGB").save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


def create_app(config: ServerConfig | None = None) -> FastAPI:
    config = config or ServerConfig.from_env()
    diffusion = load_diffusion_model(config)
    language = load_language_model(config)
    gate = _Gate(config.max_concurrency, config.max_queue, config.queue_timeout_s)

    app = FastAPI(title="meshprompt-backend", docs_url=None, redoc_url=None)

    @app.exception_handler(RequestValidationError)
    async def _validation_to_400(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400, content={"error": str(exc.errors())})

    @app.get("/healthz")
    async def healthz():
        return {
            "status": "ok",
            "diffusion_model": diffusion.name,
            "llm_model": language.name,
        }

    @app.post("/generate")
    def generate(body: GenerateBody):
        try:
            edge = _decode_edge_png(body.edge_map_png_base64)
        except ValueError as exc:
            return JSONResponse(status_code=400, content={"error": str(exc)})
        try:
            with gate:
                pixels = diffusion.generate(
                    edge=edge,
                    prompt=body.prompt,
                    seed=body.seed,
                    steps=body.steps,
                    guidance_scale=body.guidance_scale,
                    conditioning_scale=body.conditioning_scale,
                )
        except _Busy:
            return JSONResponse(status_code=503, content={"error": "generation queue is full"})
        except Exception as exc:
            return JSONResponse(status_code=500, content={"error": f"model failure: {exc}"})
        if pixels.shape[:2] != edge.shape:
            return JSONResponse(
                status_code=500,
                content={"error": "model returned mismatched dimensions"},
            )
        return {"image_png_base64": _encode_png(pixels)}

    @app.post("/describe")
    def describe(body: DescribeBody):
        try:
            text = language.describe(body.instruction, body.seed, body.max_tokens)
        except Exception as exc:
            return JSONResponse(status_code=500, content={"error": f"model failure: {exc}"})
        return {"text": text}

    return app
