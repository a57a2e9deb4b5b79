"""FastAPI application implementing the sidecar wire protocol.

GET /health  -> {"status": "ok", "model": ..., "dim": 1024}
POST /embed  -> headers X-Width/X-Height, body raw RGB24 row-major;
                response 1024 little-endian f32 (4096 bytes).
Errors are JSON {"error", "detail"} with 4xx/5xx status.
"""

from __future__ import annotations

import numpy as np
from fastapi import FastAPI, Request, Response
from fastapi.responses import JSONResponse

from .model import (
    EMBED_DIM,
    MODEL_NAME,
    SidecarConfig,
    extract_penultimate,
    load_backbone,
    preprocess,
)


def _error(status: int, error: str, detail: str) -> JSONResponse:
    return JSONResponse(status_code=status, content={"error": error, "detail": detail})


def create_app(config: SidecarConfig) -> FastAPI:
    backbone = load_backbone(config.weights_path)
    app = FastAPI(title="gamevqa-sidecar", docs_url=None, redoc_url=None)

    @app.get("/health")
    def health():
        return {"status": "ok", "model": MODEL_NAME, "dim": EMBED_DIM}

    @app.post("/embed")
    async def embed(request: Request):
        try:
            width = int(request.headers["x-width"])
            height = int(request.headers["x-height"])
        except (KeyError, ValueError):
            return _error(400, "bad-request", "X-Width and X-Height headers required")
        if width <= 0 or height <= 0:
            return _error(400, "bad-request", f"invalid dimensions {width}x{height}")
        body = await request.body()
        expected = width * height * 3
        if len(body) != expected:
            return _error(
                400, "bad-payload",
                f"body is {len(body)} bytes, expected {expected} for {width}x{height} RGB24",
            )
        rgb = np.frombuffer(body, dtype=np.uint8).reshape(height, width, 3)
        try:
            vec = extract_penultimate(backbone, preprocess(rgb, config.input_size))
        except ValueError as exc:
            return _error(400, "bad-payload", str(exc))
        return Response(content=vec.tobytes(), media_type="application/octet-stream")

    return app
