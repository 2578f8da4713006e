"""Local HTTP service exposing render/query/edit for the viewer.

Reads run against an immutable scene snapshot; edits copy the scene, apply
the change, persist the checkpoint atomically, then swap the snapshot in one
assignment. A second edit arriving while one is in flight gets 409 rather
than queueing, so the UI can surface the conflict.
"""

from __future__ import annotations

import json
import threading

import numpy as np
from fastapi import FastAPI, Query, Request
from fastapi.responses import JSONResponse, Response

from . import editing
from .dataset_io import encode_image_png, save_checkpoint
from .errors import (FormatError, InvalidParameterError, SplatError,
                     UnavailableEncoderError)
from .render import RenderSettings, render
from .scene import Camera, Scene
from .semantics import DEFAULT_THRESHOLD, embed_query, resolve_query


def rle_encode(mask: np.ndarray) -> dict:
    """Row-major run-length encoding of a boolean mask.

    Runs alternate zeros/ones and always start with a zero-run (possibly of
    length 0), e.g. a mask starting with 1 encodes as [0, n1, n0, ...].
    """
    flat = np.asarray(mask, dtype=bool).ravel()
    if flat.size == 0:
        return {"size": list(mask.shape), "counts": []}
    change = np.flatnonzero(flat[1:] != flat[:-1]) + 1
    runs = np.diff(np.concatenate([[0], change, [flat.size]]))
    counts = runs.tolist()
    if flat[0]:
        counts = [0] + counts
    return {"size": list(mask.shape), "counts": counts}


def _camera_from_pose(pose: dict) -> Camera:
    required = ("camera_to_world", "fx", "fy", "cx", "cy", "width", "height")
    missing = [k for k in required if k not in pose]
    if missing:
        raise InvalidParameterError(f"pose missing keys {missing}")
    return Camera.from_camera_to_world(
        np.asarray(pose["camera_to_world"], dtype=np.float64),
        fx=float(pose["fx"]), fy=float(pose["fy"]), cx=float(pose["cx"]),
        cy=float(pose["cy"]), width=int(pose["width"]), height=int(pose["height"]))


def create_app(scene: Scene, cameras: list[Camera] | None = None,
               lookup: dict[str, np.ndarray] | None = None,
               encoder_url: str | None = None,
               checkpoint_path=None) -> FastAPI:
    app = FastAPI(title="semsplat service")
    app.state.snapshot = scene
    app.state.edit_lock = threading.Lock()
    settings = RenderSettings()
    cameras = cameras or []

    @app.exception_handler(SplatError)
    async def _splat_error(request: Request, exc: SplatError):
        status = 503 if isinstance(exc, UnavailableEncoderError) else 400
        return JSONResponse(status_code=status, content={"error": str(exc)})

    def camera_for(frame: int | None, pose: dict | None) -> Camera:
        if pose is not None:
            return _camera_from_pose(pose)
        if frame is None:
            raise InvalidParameterError("provide either frame or pose")
        if not 0 <= frame < len(cameras):
            raise InvalidParameterError(
                f"frame {frame} out of range; service has {len(cameras)} frames")
        return cameras[frame]

    @app.get("/health")
    def health():
        return {"status": "ok", "num_gaussians": len(app.state.snapshot.gaussians)}

    @app.get("/render")
    def render_view(frame: int | None = Query(default=None),
                    pose: str | None = Query(default=None)):
        pose_dict = None
        if pose is not None:
            try:
                pose_dict = json.loads(pose)
            except json.JSONDecodeError as e:
                raise InvalidParameterError(f"pose is not valid JSON: {e}") from e
        camera = camera_for(frame, pose_dict)
        out = render(app.state.snapshot, camera, settings)
        return Response(content=encode_image_png(out.color), media_type="image/png")

    @app.post("/query")
    async def query(request: Request):
        body = await request.json()
        prompt = body.get("prompt")
        threshold = float(body.get("threshold", DEFAULT_THRESHOLD))
        if not 0.0 <= threshold <= 1.0:
            raise InvalidParameterError("threshold must lie in [0, 1]")
        camera = camera_for(body.get("frame", 0 if cameras else None),
                            body.get("pose"))
        vec = embed_query(prompt, lookup=lookup, encoder_url=encoder_url)
        result = resolve_query(app.state.snapshot, vec, camera, threshold,
                               settings, query_text=prompt)
        return {
            "query": result.query,
            "threshold_used": result.threshold_used,
            "ranked": [{
                "label": hit.label,
                "relevancy": hit.relevancy,
                "mask": rle_encode(hit.pixel_mask),
                "gaussian_ids": hit.gaussian_ids.tolist(),
                "centroid3d": hit.centroid3d.tolist(),
            } for hit in result.ranked],
        }

    @app.post("/edit")
    async def edit(request: Request):
        body = await request.json()
        op = body.get("op")
        if op not in ("recolor", "delete", "translate"):
            raise InvalidParameterError(f"unknown edit op {op!r}")
        if not app.state.edit_lock.acquire(blocking=False):
            return JSONResponse(status_code=409,
                                content={"error": "another edit is in progress"})
        try:
            scene = app.state.snapshot.copy()
            if "ids" in body:
                ids = np.asarray(body["ids"], dtype=np.int64)
            elif "label" in body:
                ids = editing.select_by_label(scene, body["label"])
            else:
                raise InvalidParameterError("edit needs 'label' or 'ids'")
            params = body.get("params", {})
            if op == "recolor":
                if "rgb" not in params:
                    raise InvalidParameterError("recolor needs params.rgb")
                editing.recolor(scene, ids, params["rgb"])
            elif op == "delete":
                editing.delete(scene, ids)
            else:
                if "offset" not in params:
                    raise InvalidParameterError("translate needs params.offset")
                editing.translate(scene, ids, params["offset"])
            if checkpoint_path is not None:
                save_checkpoint(scene, checkpoint_path)
            app.state.snapshot = scene
            return {"ok": True, "edited": int(ids.size),
                    "num_gaussians": len(scene.gaussians)}
        finally:
            app.state.edit_lock.release()

    @app.get("/scene/summary")
    def summary():
        scene = app.state.snapshot
        return {
            "num_gaussians": len(scene.gaussians),
            "sh_degree": scene.sh_degree,
            "dictionary": list(scene.dictionary.entries),
            "negative_phrases": list(scene.embeddings.negative_phrases),
            "embedding_dim": scene.embeddings.dim,
            "background_color": [float(v) for v in scene.background_color],
            "num_frames": len(cameras),
        }

    return app
