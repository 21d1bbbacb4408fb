"""HTTP service streaming model chunks and rendering frames.

Endpoints:
    GET  /healthz          -> 200 "ok"
    GET  /model/meta       -> JSON: arch, encoding, chunk sizes + checksums
    GET  /model/chunk/{k}  -> raw chunk payload bytes
    POST /render           -> PNG frame; timing and MAC counts in headers

/render body:
    {
      "pose": [12 floats, 3x4 row-major world-from-camera],
      "width": int, "height": int,
      "fx": float, "fy": float, "cx": float, "cy": float,
      "policy": {"mode": "fixed"|"distance"|"foveated"|"dithered", ...},
      "return_lodmap": false   # true -> LODMap as an 8-bit grayscale PNG
    }

Policy fields mirror RenderPolicy: k, from_k, to_k, fraction, dither_seed,
gaze_px, radii, distance_center, distance_radius, train_full_height_px,
use_occupancy, occupancy_threshold, reduced_precision.
"""

from __future__ import annotations

import io
from pathlib import Path

import numpy as np
from fastapi import FastAPI, HTTPException
from fastapi.responses import JSONResponse, PlainTextResponse, Response
from PIL import Image
from pydantic import BaseModel, Field, ValidationError

from . import modelfile
from .geometry import Camera
from .render import RenderPolicy, render


class PolicyBody(BaseModel):
    mode: str = "fixed"
    k: int = 4
    from_k: int = 1
    to_k: int = 4
    fraction: float = 1.0
    dither_seed: int = 0
    gaze_px: tuple[float, float] = (0.0, 0.0)
    radii: tuple[float, ...] = ()
    distance_center: tuple[float, float, float] = (0.0, 0.0, 0.0)
    distance_radius: float = 1.0
    train_full_height_px: int = 192
    use_occupancy: bool = False
    occupancy_threshold: float = 0.1
    reduced_precision: bool = False


class RenderBody(BaseModel):
    pose: list[float] = Field(min_length=12, max_length=12)
    width: int = Field(ge=1)
    height: int = Field(ge=1)
    fx: float = Field(gt=0)
    fy: float = Field(gt=0)
    cx: float
    cy: float
    policy: PolicyBody = PolicyBody()
    return_lodmap: bool = False


def png_bytes(rgba: np.ndarray) -> bytes:
    q = np.clip(np.rint(np.asarray(rgba, dtype=np.float64) * 255.0), 0, 255).astype(np.uint8)
    buf = io.BytesIO()
    Image.fromarray(q, mode="RGBA").save(buf, format="PNG")
    return buf.getvalue()


def create_app(model_path) -> FastAPI:
    data = Path(model_path).read_bytes()
    header, payload_start = modelfile.parse_header(data)
    num_lods = len(header["chunks"])
    net = modelfile.load_prefix(data, num_lods)
    occupancy = modelfile.load_occupancy(data)
    encoding = modelfile.load_encoding(data)

    app = FastAPI(title="proglf model service")

    @app.get("/healthz")
    def healthz():
        return PlainTextResponse("ok")

    @app.get("/model/meta")
    def meta():
        return JSONResponse(
            {
                "arch": header["arch"],
                "encoding": header["encoding"],
                "chunks": header["chunks"],
                "has_occupancy": header.get("occupancy") is not None,
            }
        )

    @app.get("/model/chunk/{k}")
    def chunk(k: int):
        if not 1 <= k <= num_lods:
            raise HTTPException(status_code=404, detail=f"no chunk {k}; model has {num_lods}")
        entry = header["chunks"][k - 1]
        start = payload_start + entry["offset"]
        return Response(
            content=data[start : start + entry["size"]],
            media_type="application/octet-stream",
        )

    @app.post("/render")
    def render_frame(body: RenderBody):
        pose = np.asarray(body.pose, dtype=np.float64).reshape(3, 4)
        try:
            cam = Camera(
                width_px=body.width,
                height_px=body.height,
                fx=body.fx,
                fy=body.fy,
                cx=body.cx,
                cy=body.cy,
                rotation=pose[:, :3],
                translation=pose[:, 3],
            )
            policy = RenderPolicy(**body.policy.model_dump())
            result = render(net, cam, policy, occupancy=occupancy, encoding=encoding)
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        headers = {
            "X-Render-Total-Ms": f"{result.timings_ms['total_ms']:.3f}",
            "X-Render-Network-Ms": f"{result.timings_ms['network_ms']:.3f}",
            "X-Network-Macs": str(result.mac_counts["network"]),
            "X-Occupancy-Macs": str(result.mac_counts["occupancy"]),
        }
        if body.return_lodmap:
            buf = io.BytesIO()
            Image.fromarray(result.lod_map, mode="L").save(buf, format="PNG")
            return Response(content=buf.getvalue(), media_type="image/png", headers=headers)
        return Response(content=png_bytes(result.rgba), media_type="image/png", headers=headers)

    return app


def serve(model_path, host: str = "127.0.0.1", port: int = 8000):
    import uvicorn

    uvicorn.run(create_app(model_path), host=host, port=port)
