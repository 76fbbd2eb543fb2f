"""HTTP surface of the inference service.

Endpoints (JSON over HTTP/1.1, base64 with standard alphabet and padding):

    GET  /v1/info                       -> model ids, dim, max_batch
    POST /v1/caption {image_b64,prompt} -> {caption}
    POST /v1/embed/text  {texts}        -> {embeddings, dim}
    POST /v1/embed/image {images_b64}   -> {embeddings, dim}

Status codes: 400 undecodable input or empty list/string, 413 over
max_batch, 422 empty generation, 503 while models are loading.
"""

import base64
import binascii
import io
from contextlib import asynccontextmanager

import numpy as np
from fastapi import FastAPI, HTTPException
from PIL import Image, UnidentifiedImageError
from pydantic import BaseModel

from .backends import Backend


class CaptionRequest(BaseModel):
    image_b64: str
    prompt: str = ""


class EmbedTextRequest(BaseModel):
    texts: list[str]


class EmbedImageRequest(BaseModel):
    images_b64: list[str]


def _decode_image(data_b64: str, where: str) -> Image.Image:
    try:
        raw = base64.b64decode(data_b64, validate=True)
    except (binascii.Error, ValueError) as exc:
        raise HTTPException(400, f"{where}: invalid base64: {exc}") from exc
    try:
        image = Image.open(io.BytesIO(raw))
        image.load()
        return image
    except (UnidentifiedImageError, OSError) as exc:
        raise HTTPException(400, f"{where}: undecodable image: {exc}") from exc


def _rows_as_lists(matrix: np.ndarray) -> list[list[float]]:
    norms = np.linalg.norm(matrix, axis=1, keepdims=True)
    norms[norms == 0] = 1.0
    return (matrix / norms).tolist()


def create_app(backend: Backend, max_batch: int = 64) -> FastAPI:
    @asynccontextmanager
    async def lifespan(app: FastAPI):
        backend.load()
        app.state.ready = True
        yield

    app = FastAPI(title="capmatch inference service", lifespan=lifespan)
    app.state.ready = False
    app.state.backend = backend
    app.state.max_batch = max_batch

    def require_ready():
        if not app.state.ready:
            raise HTTPException(503, "models are loading")

    @app.get("/v1/info")
    def info():
        require_ready()
        return {
            "caption_model_id": backend.caption_model_id,
            "embed_model_id": backend.embed_model_id,
            "dim": backend.dim,
            "max_batch": max_batch,
        }

    @app.post("/v1/caption")
    def caption(req: CaptionRequest):
        require_ready()
        image = _decode_image(req.image_b64, "image_b64")
        try:
            text = backend.caption(image, req.prompt)
        except Exception as exc:  # inference failure
            raise HTTPException(500, f"caption inference failed: {exc}") from exc
        if not text or not text.strip():
            raise HTTPException(422, "model generated an empty caption")
        return {"caption": text}

    @app.post("/v1/embed/text")
    def embed_text(req: EmbedTextRequest):
        require_ready()
        if not req.texts:
            raise HTTPException(400, "texts must be non-empty")
        if len(req.texts) > max_batch:
            raise HTTPException(413, f"batch of {len(req.texts)} exceeds max_batch {max_batch}")
        for i, text in enumerate(req.texts):
            if not text:
                raise HTTPException(400, f"texts[{i}] is empty")
        try:
            matrix = backend.embed_texts(req.texts)
        except Exception as exc:
            raise HTTPException(500, f"text embedding failed: {exc}") from exc
        return {"embeddings": _rows_as_lists(np.asarray(matrix)), "dim": backend.dim}

    @app.post("/v1/embed/image")
    def embed_image(req: EmbedImageRequest):
        require_ready()
        if not req.images_b64:
            raise HTTPException(400, "images_b64 must be non-empty")
        if len(req.images_b64) > max_batch:
            raise HTTPException(
                413, f"batch of {len(req.images_b64)} exceeds max_batch {max_batch}"
            )
        images = [
            _decode_image(b, f"images_b64[{i}]") for i, b in enumerate(req.images_b64)
        ]
        try:
            matrix = backend.embed_images(images)
        except Exception as exc:
            raise HTTPException(500, f"image embedding failed: {exc}") from exc
        return {"embeddings": _rows_as_lists(np.asarray(matrix)), "dim": backend.dim}

    return app
