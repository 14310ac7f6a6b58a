"""HTTP inference service consumed by the browser studio.

Endpoints: GET /health, GET /styles, POST /generate, POST /retrieve.
Requests carry base64 PNG payloads; the service never mutates checkpoints
or indexes and answers 503 until the model bundle is attached.
"""

from __future__ import annotations

import base64
import io
from dataclasses import dataclass, field

import numpy as np
from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import PlainTextResponse
from PIL import Image
from pydantic import BaseModel

from .data import MADE_UP, GlyphImage
from .errors import MissingReferenceImage, UnknownStyle
from .model import StyleModel
from .rag import StyleIndex, generate_with_rag, retrieve_reference


@dataclass
class ServeContext:
    model: StyleModel
    image_size: int
    indexes: dict[str, StyleIndex] = field(default_factory=dict)
    reference_loader: object = None
    default_refs: dict[str, int] = field(default_factory=dict)

    def styles(self) -> list[str]:
        return sorted(set(self.indexes) | set(self.default_refs))


class GenerateRequest(BaseModel):
    content: str
    style: str
    use_rag: bool = False


class RetrieveRequest(BaseModel):
    content: str
    style_id: str
    k: int = 1


def decode_image(payload: str, image_size: int) -> GlyphImage:
    """base64 PNG -> grayscale glyph resized to the model's input size."""
    try:
        raw = base64.b64decode(payload, validate=True)
        with Image.open(io.BytesIO(raw)) as im:
            gray = im.convert("L")
            if gray.size != (image_size, image_size):
                gray = gray.resize((image_size, image_size), Image.LANCZOS)
            pixels = np.asarray(gray, dtype=np.float32) / 255.0
    except HTTPException:
        raise
    except Exception as exc:
        raise HTTPException(status_code=400, detail=f"malformed image payload: {exc}") from exc
    return GlyphImage(pixels, MADE_UP, "")


def encode_image(glyph: GlyphImage) -> str:
    buf = io.BytesIO()
    arr = np.round(glyph.pixels * 255.0).astype(np.uint8)
    Image.fromarray(arr, mode="L").save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


def format_charcode(charcode: int) -> str:
    return f"U+{charcode:04X}"


def create_app(context: ServeContext | None = None) -> FastAPI:
    app = FastAPI(title="fontstyler")
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )
    app.state.context = context

    def ctx() -> ServeContext:
        if app.state.context is None:
            raise HTTPException(status_code=503, detail="model is still loading")
        return app.state.context

    @app.get("/health", response_class=PlainTextResponse)
    def health() -> str:
        return "ok"

    @app.get("/styles")
    def styles() -> list[str]:
        return ctx().styles()

    @app.post("/generate")
    def generate(req: GenerateRequest) -> dict:
        c = ctx()
        content = decode_image(req.content, c.image_size)
        reference_code: int | None = None
        if req.use_rag:
            try:
                output, reference_code = generate_with_rag(
                    content, req.style, c.model, c.indexes, c.reference_loader
                )
            except UnknownStyle as exc:
                raise HTTPException(status_code=404, detail=str(exc)) from exc
            except MissingReferenceImage as exc:
                raise HTTPException(status_code=404, detail=str(exc)) from exc
        elif req.style in c.default_refs:
            reference_code = c.default_refs[req.style]
            try:
                reference = c.reference_loader(req.style, reference_code)
            except MissingReferenceImage as exc:
                raise HTTPException(status_code=404, detail=str(exc)) from exc
            output = c.model.generate(content, reference)
        else:
            # not a known id: the style field may carry a base64 PNG reference
            try:
                style_img = decode_image(req.style, c.image_size)
            except HTTPException as exc:
                raise HTTPException(
                    status_code=404,
                    detail=f"unknown style {req.style[:48]!r} (and not a decodable image)",
                ) from exc
            output = c.model.generate(content, style_img)
        body = {"image": encode_image(output)}
        if reference_code is not None:
            body["reference_charcode"] = format_charcode(reference_code)
        return body

    @app.post("/retrieve")
    def retrieve(req: RetrieveRequest) -> dict:
        c = ctx()
        index = c.indexes.get(req.style_id)
        if index is None:
            raise HTTPException(status_code=404, detail=f"unknown style {req.style_id!r}")
        if req.k < 1:
            raise HTTPException(status_code=400, detail="k must be >= 1")
        content = decode_image(req.content, c.image_size)
        ranked = retrieve_reference(content, index, req.k, model=c.model)
        return {
            "results": [
                {"charcode": code, "label": format_charcode(code), "distance": dist}
                for code, dist in ranked
            ]
        }

    return app
