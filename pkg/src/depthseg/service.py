"""HTTP inference service.

POST /segment is stateless: each request carries the full prompt history,
so interactive refinement is expressed client-side by resending all prior
clicks plus the new one.  The server keeps no per-client state.
"""

from __future__ import annotations

import base64
import binascii
import io
import threading
import time

import numpy as np
from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field
from typing import Literal, Optional

from .data.rle import encode_rle, rle_to_string
from .data.types import DEPTH_SOURCE_EXTERNAL, DepthMap, RgbImage, mask_bitmap
from .errors import ContractViolation
from .models.accounting import count_parameters, estimate_macs
from .models.decoder import binarize
from .models.prompts import PromptSet
from .models.segmenter import Segmenter


class PromptPayload(BaseModel):
    points: list[tuple[float, float, int]] = Field(default_factory=list)
    boxes: list[tuple[float, float, float, float]] = Field(default_factory=list)


class SegmentRequest(BaseModel):
    image: str
    depth: Optional[str] = None
    prompts: PromptPayload
    variant: Literal["rgb_only", "depth_aware"] = "depth_aware"
    model_id: str = "default"


class SegmentResponse(BaseModel):
    mask: str
    height: int
    width: int
    predicted_iou: float
    alpha: Optional[float]
    timing_ms: float
    warnings: list[str]


def _error(status: int, message: str, field: str | None = None) -> JSONResponse:
    body = {"error": message}
    if field is not None:
        body["field"] = field
    return JSONResponse(status_code=status, content=body)


def _decode_image(b64: str, field: str) -> np.ndarray:
    from PIL import Image, UnidentifiedImageError

    try:
        raw = base64.b64decode(b64, validate=True)
        with Image.open(io.BytesIO(raw)) as img:
            return np.asarray(img.convert("RGB"))
    except (binascii.Error, UnidentifiedImageError, OSError, ValueError) as exc:
        raise _DecodeError(field, f"not a decodable raster: {exc}") from exc


def _decode_depth(b64: str) -> np.ndarray:
    # Raw values, same convention as loading a depth PNG from disk; depth
    # preparation min-max normalizes, so the absolute scale is irrelevant.
    from PIL import Image, UnidentifiedImageError

    try:
        raw = base64.b64decode(b64, validate=True)
        with Image.open(io.BytesIO(raw)) as img:
            if img.mode in ("I", "I;16"):
                return np.asarray(img, dtype=np.float32)
            return np.asarray(img.convert("L"), dtype=np.float32)
    except (binascii.Error, UnidentifiedImageError, OSError, ValueError) as exc:
        raise _DecodeError("depth", f"not a decodable raster: {exc}") from exc


class _DecodeError(Exception):
    def __init__(self, field: str, message: str):
        super().__init__(message)
        self.field = field


def _model_info(model: Segmenter) -> dict:
    return {
        "params": count_parameters(model),
        "macs": estimate_macs(model, (3, 128, 128)),
        "alpha": float(model.fusion.value) if model.config.use_depth else None,
        "preset": model.config.encoder.preset,
    }


def create_app(registry: dict[str, dict[str, Segmenter | None]],
               static_dir=None) -> FastAPI:
    """Build the app around a {model_id: {variant: model}} registry.

    A registry value of None marks a model that is still loading (503).
    """
    app = FastAPI(title="depthseg")
    app.add_middleware(CORSMiddleware, allow_origins=["*"],
                       allow_methods=["*"], allow_headers=["*"])

    locks = {mid: {var: threading.Lock() for var in variants}
             for mid, variants in registry.items()}
    info_cache: dict[tuple[str, str], dict] = {}
    for mid, variants in registry.items():
        for var, model in variants.items():
            if model is not None:
                info_cache[(mid, var)] = _model_info(model)

    @app.exception_handler(RequestValidationError)
    async def malformed(request: Request, exc: RequestValidationError):
        err = exc.errors()[0]
        field = ".".join(str(p) for p in err["loc"] if p != "body")
        return _error(400, err["msg"], field or "body")

    @app.get("/healthz")
    def healthz():
        return {"status": "ok"}

    @app.get("/model-info")
    def model_info(model_id: str = "default"):
        variants = registry.get(model_id)
        if variants is None:
            return _error(404, f"unknown model_id {model_id!r}")
        detail = {}
        for var, model in variants.items():
            if model is None:
                detail[var] = None
                continue
            if (model_id, var) not in info_cache:
                info_cache[(model_id, var)] = _model_info(model)
            detail[var] = info_cache[(model_id, var)]
        top = detail.get("depth_aware") or detail.get("rgb_only")
        if top is None:
            return _error(503, "models are still loading")
        return {**top, "variants": detail}

    @app.post("/segment")
    def segment(req: SegmentRequest):
        variants = registry.get(req.model_id)
        if variants is None:
            return _error(404, f"unknown model_id {req.model_id!r}")
        if req.variant not in variants:
            return _error(404, f"model {req.model_id!r} has no "
                               f"{req.variant!r} variant")
        model = variants[req.variant]
        if model is None:
            return _error(503, f"{req.variant} model is still loading")

        warnings: list[str] = []
        try:
            pixels = _decode_image(req.image, "image")
            image = RgbImage(pixels=pixels.astype(np.float32) / 255.0)
            depth = None
            if req.depth is not None:
                values = _decode_depth(req.depth)
                if values.shape != image.shape:
                    return _error(400, f"depth shape {values.shape} does not "
                                       f"match image {image.shape}", "depth")
                depth = DepthMap(values=values, source=DEPTH_SOURCE_EXTERNAL)
            prompts = PromptSet(points=[tuple(p) for p in req.prompts.points],
                                boxes=[tuple(b) for b in req.prompts.boxes])
        except _DecodeError as exc:
            return _error(400, str(exc), exc.field)
        except ContractViolation as exc:
            return _error(400, str(exc), "prompts")

        try:
            prompts.validate_bounds(image.height, image.width)
        except ContractViolation as exc:
            return _error(422, str(exc), "prompts")

        start = time.perf_counter()
        with locks[req.model_id][req.variant]:
            model.set_image(image, depth)
            if model.depth_fallback_used:
                warnings.append("depth missing; substituted an all-zero map")
            pred = model.predict(prompts)
        elapsed_ms = (time.perf_counter() - start) * 1e3

        bitmap = mask_bitmap(binarize(pred))
        alpha = float(model.fusion.value) if model.config.use_depth else None
        return SegmentResponse(
            mask=rle_to_string(encode_rle(bitmap)),
            height=image.height, width=image.width,
            predicted_iou=pred.predicted_iou, alpha=alpha,
            timing_ms=elapsed_ms, warnings=warnings,
        )

    if static_dir is not None:
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=static_dir, html=True))

    return app


__all__ = ["SegmentRequest", "SegmentResponse", "create_app"]
