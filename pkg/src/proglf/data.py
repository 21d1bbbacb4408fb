"""Image pyramids, dataset ingestion, and the synthetic capture oracle.

Images are linear-light RGBA in [0,1]; 8-bit quantization only happens at
the PNG boundary. Each view carries a four-level pyramid at 1/8, 1/4,
1/2, and full scale produced by area (box-filter) downsampling, which is
what supervises the lower LODs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np
from PIL import Image

from .geometry import Camera, EncodingConfig, encode_rays, look_at, ray_grid_for_camera

PYRAMID_FACTORS = (Fraction(1, 8), Fraction(1, 4), Fraction(1, 2), Fraction(1, 1))


@dataclass
class ViewImage:
    rgba: np.ndarray  # H x W x 4 in [0,1]
    camera: Camera
    split: str = "train"

    def __post_init__(self):
        rgba = np.asarray(self.rgba, dtype=np.float32)
        if rgba.ndim != 3 or rgba.shape[2] != 4:
            raise ValueError("view image must be H x W x 4 RGBA")
        if rgba.shape[:2] != (self.camera.height_px, self.camera.width_px):
            raise ValueError(
                f"image size {rgba.shape[1]}x{rgba.shape[0]} does not match camera "
                f"{self.camera.width_px}x{self.camera.height_px}"
            )
        if self.split not in ("train", "validation", "test"):
            raise ValueError(f"unknown split {self.split!r}")
        self.rgba = rgba


def area_downsample(image: np.ndarray, factor) -> np.ndarray:
    """Box-filter downsample: each output pixel is the mean of its block."""
    f = Fraction(factor).limit_denominator(1_000_000)
    if f.numerator != 1:
        raise ValueError("factor must be a reciprocal like 1/2, 1/4, 1/8")
    block = f.denominator
    arr = np.asarray(image)
    # accumulate in float64; keep a floating input's dtype on output
    dtype = arr.dtype if np.issubdtype(arr.dtype, np.floating) else np.float32
    if block == 1:
        return arr.astype(dtype).copy()
    img = arr.astype(np.float64)
    h, w = img.shape[:2]
    if h % block or w % block:
        raise ValueError(f"image {w}x{h} not divisible by {block}")
    out = img.reshape(h // block, block, w // block, block, -1).mean(axis=(1, 3))
    return out.astype(dtype)


def build_pyramid(view: ViewImage) -> list[np.ndarray]:
    """Levels at 1/8, 1/4, 1/2, and full scale (coarsest first)."""
    h, w = view.rgba.shape[:2]
    if h % 8 or w % 8:
        raise ValueError(f"base image {w}x{h} must be divisible by 8")
    return [area_downsample(view.rgba, f) for f in PYRAMID_FACTORS[:-1]] + [view.rgba]


def bilinear_sample(image: np.ndarray, u, v) -> np.ndarray:
    """Bilinear lookup at continuous pixel coords; texel i is centered at i+0.5.

    Clamp-at-edge addressing; (u, v) must lie inside [0, W] x [0, H].
    """
    img = np.asarray(image, dtype=np.float32)
    h, w = img.shape[:2]
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if np.any(u < 0) or np.any(u > w) or np.any(v < 0) or np.any(v > h):
        raise ValueError("sample coordinates out of image bounds")
    x = u - 0.5
    y = v - 0.5
    x0 = np.clip(np.floor(x), 0, w - 1).astype(np.int64)
    y0 = np.clip(np.floor(y), 0, h - 1).astype(np.int64)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = np.clip(x - x0, 0.0, 1.0)[..., None]
    fy = np.clip(y - y0, 0.0, 1.0)[..., None]
    top = img[y0, x0] * (1 - fx) + img[y0, x1] * fx
    bot = img[y1, x0] * (1 - fx) + img[y1, x1] * fx
    return (top * (1 - fy) + bot * fy).astype(np.float32)


# ---------------------------------------------------------------------------
# synthetic scene oracle


@dataclass
class SyntheticScene:
    """Textured sphere on a transparent background.

    The texture mixes a checkerboard with a band of fine stripes so the
    full-resolution views carry frequencies that alias at 1/8 scale.
    """

    center: tuple[float, float, float] = (0.0, 0.0, 0.0)
    radius: float = 0.5
    checker_frequency: float = 6.0
    stripe_frequency: float = 60.0
    color_a: tuple[float, float, float] = (0.9, 0.25, 0.2)
    color_b: tuple[float, float, float] = (0.15, 0.4, 0.85)

    def to_dict(self) -> dict:
        return {
            "center": list(self.center),
            "radius": self.radius,
            "checker_frequency": self.checker_frequency,
            "stripe_frequency": self.stripe_frequency,
            "color_a": list(self.color_a),
            "color_b": list(self.color_b),
        }

    @staticmethod
    def from_dict(d: dict) -> "SyntheticScene":
        return SyntheticScene(
            center=tuple(d["center"]),
            radius=float(d["radius"]),
            checker_frequency=float(d["checker_frequency"]),
            stripe_frequency=float(d["stripe_frequency"]),
            color_a=tuple(d["color_a"]),
            color_b=tuple(d["color_b"]),
        )


def _sphere_shade(scene: SyntheticScene, normals: np.ndarray, view_dirs: np.ndarray) -> np.ndarray:
    theta = np.arccos(np.clip(normals[:, 1], -1.0, 1.0))
    phi = np.arctan2(normals[:, 2], normals[:, 0])
    checker = (
        np.floor(theta * scene.checker_frequency / np.pi)
        + np.floor((phi + np.pi) * scene.checker_frequency / np.pi)
    ) % 2
    ca = np.asarray(scene.color_a)
    cb = np.asarray(scene.color_b)
    rgb = np.where(checker[:, None] > 0.5, ca, cb)
    # fine stripes in an equatorial band: the aliasing-prone content
    band = np.abs(theta - np.pi / 2) < 0.6
    stripes = 0.5 + 0.5 * np.sign(np.sin(phi * scene.stripe_frequency))
    rgb = np.where(band[:, None], rgb * (0.35 + 0.65 * stripes[:, None]), rgb)
    # simple head-on diffuse term so geometry is visible
    lambert = np.clip(-np.einsum("ij,ij->i", normals, view_dirs), 0.0, 1.0)
    return np.clip(rgb * (0.25 + 0.75 * lambert[:, None]), 0.0, 1.0)


def trace_rays(scene: SyntheticScene, origins: np.ndarray, dirs: np.ndarray) -> np.ndarray:
    """Analytic ray-sphere intersection; RGBA with alpha 1 on hits."""
    c = np.asarray(scene.center, dtype=np.float64)
    oc = origins - c
    b = np.einsum("ij,ij->i", oc, dirs)
    disc = b * b - (np.einsum("ij,ij->i", oc, oc) - scene.radius**2)
    hit = disc >= 0
    out = np.zeros((len(dirs), 4), dtype=np.float32)
    if np.any(hit):
        t = -b[hit] - np.sqrt(disc[hit])
        front = t > 0
        idx = np.flatnonzero(hit)[front]
        t = t[front]
        p = origins[idx] + dirs[idx] * t[:, None]
        normals = (p - c) / scene.radius
        out[idx, :3] = _sphere_shade(scene, normals, dirs[idx])
        out[idx, 3] = 1.0
    return out


def render_oracle(
    scene: SyntheticScene, cam: Camera, supersample: int = 1, jitter_seed: int = 0
) -> ViewImage:
    """Ray-trace the scene; supersample > 1 averages s^2 jittered rays per pixel."""
    h, w = cam.height_px, cam.width_px
    if supersample <= 1:
        dirs, _ = ray_grid_for_camera(cam)
        origins = np.broadcast_to(cam.translation, dirs.shape)
        rgba = trace_rays(scene, origins, dirs).reshape(h, w, 4)
        return ViewImage(rgba=rgba, camera=cam, split="train")
    s = int(supersample)
    rng = np.random.default_rng(jitter_seed)
    acc = np.zeros((h * w, 4), dtype=np.float64)
    uu, vv = np.meshgrid(np.arange(w, dtype=np.float64), np.arange(h, dtype=np.float64))
    uu = uu.reshape(-1)
    vv = vv.reshape(-1)
    for i in range(s):
        for j in range(s):
            # stratified jitter inside each subpixel cell
            ju = (i + rng.random(h * w)) / s
            jv = (j + rng.random(h * w)) / s
            x = (uu + ju - cam.cx) / cam.fx
            y = (vv + jv - cam.cy) / cam.fy
            dirs = np.stack([x, y, np.ones_like(x)], axis=-1) @ cam.rotation.T
            dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
            origins = np.broadcast_to(cam.translation, dirs.shape)
            acc += trace_rays(scene, origins, dirs)
    rgba = (acc / (s * s)).reshape(h, w, 4).astype(np.float32)
    return ViewImage(rgba=rgba, camera=cam, split="train")


def orbit_camera(
    width: int, height: int, azimuth: float, elevation: float, distance: float,
    target=(0.0, 0.0, 0.0), fov_scale: float = 1.2,
) -> Camera:
    """Camera on a sphere around `target`, looking at it, +z forward."""
    target = np.asarray(target, dtype=np.float64)
    eye = target + distance * np.array(
        [
            np.cos(elevation) * np.cos(azimuth),
            np.sin(elevation),
            np.cos(elevation) * np.sin(azimuth),
        ]
    )
    R, t = look_at(eye, target)
    f = fov_scale * max(width, height)
    return Camera(
        width_px=width,
        height_px=height,
        fx=f,
        fy=f,
        cx=width / 2.0,
        cy=height / 2.0,
        rotation=R,
        translation=t,
    )


def synthesize_views(
    scene: SyntheticScene,
    num_views: int = 24,
    width: int = 256,
    height: int = 192,
    distance: float = 1.5,
    supersample: int = 2,
    seed: int = 0,
) -> list[ViewImage]:
    """Desk-scale stand-in for a multi-camera capture rig."""
    views = []
    elevations = (-0.35, 0.0, 0.35)
    for i in range(num_views):
        az = 2.0 * np.pi * i / num_views
        el = elevations[i % len(elevations)]
        cam = orbit_camera(width, height, az, el, distance)
        view = render_oracle(scene, cam, supersample=supersample, jitter_seed=seed + i)
        views.append(view)
    assign_splits_round_robin(views)
    return views


def assign_splits_round_robin(views: list[ViewImage], ratio: tuple[int, int, int] = (18, 1, 1)):
    """18:1:1 train/validation/test assignment by pose index."""
    period = sum(ratio)
    for i, view in enumerate(views):
        r = i % period
        if r < ratio[0]:
            view.split = "train"
        elif r < ratio[0] + ratio[1]:
            view.split = "validation"
        else:
            view.split = "test"


# ---------------------------------------------------------------------------
# dataset container


class LightFieldDataset:
    """Views plus precomputed pyramids and lazily cached ray features."""

    def __init__(self, views: list[ViewImage], encoding: EncodingConfig | None = None):
        if not views:
            raise ValueError("dataset needs at least one view")
        self.views = views
        self.encoding = encoding or EncodingConfig()
        self._pyramids = [build_pyramid(v) for v in views]
        self._features: dict[int, np.ndarray] = {}
        self._pools: dict[int, tuple[np.ndarray, np.ndarray]] = {}

    @property
    def num_scales(self) -> int:
        return len(PYRAMID_FACTORS)

    def split_indices(self, split: str) -> list[int]:
        return [i for i, v in enumerate(self.views) if v.split == split]

    def pyramid(self, vi: int) -> list[np.ndarray]:
        return self._pyramids[vi]

    def pixel_pools(self, vi: int) -> tuple[np.ndarray, np.ndarray]:
        """Flat pixel indices with alpha > 0 (foreground) and the rest."""
        if vi not in self._pools:
            alpha = self.views[vi].rgba[:, :, 3].reshape(-1)
            fg = np.flatnonzero(alpha > 0)
            bg = np.flatnonzero(alpha <= 0)
            self._pools[vi] = (fg, bg)
        return self._pools[vi]

    def view_features(self, vi: int) -> np.ndarray:
        if vi not in self._features:
            dirs, moments = ray_grid_for_camera(self.views[vi].camera)
            self._features[vi] = encode_rays(dirs, moments, self.encoding)
        return self._features[vi]

    def targets_for_pixels(self, vi: int, pixels: np.ndarray) -> np.ndarray:
        """num_scales x n x 4 targets for flat full-res pixel indices."""
        view = self.views[vi]
        w = view.camera.width_px
        u = (pixels % w).astype(np.float64) + 0.5
        v = (pixels // w).astype(np.float64) + 0.5
        out = np.empty((self.num_scales, len(pixels), 4), dtype=np.float32)
        for c, factor in enumerate(PYRAMID_FACTORS):
            level = self._pyramids[vi][c]
            if factor == 1:
                out[c] = view.rgba.reshape(-1, 4)[pixels]
            else:
                f = float(factor)
                out[c] = bilinear_sample(level, u * f, v * f)
        return out


# ---------------------------------------------------------------------------
# disk format


def save_png(path, rgba: np.ndarray):
    q = np.clip(np.rint(np.asarray(rgba, dtype=np.float64) * 255.0), 0, 255).astype(np.uint8)
    Image.fromarray(q, mode="RGBA").save(path)


def load_png(path) -> np.ndarray:
    img = Image.open(path).convert("RGBA")
    return np.asarray(img, dtype=np.float32) / 255.0


def save_dataset(views: list[ViewImage], out_dir, scene: SyntheticScene | None = None) -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    entries = []
    for i, view in enumerate(views):
        name = f"view_{i:03d}.png"
        save_png(out_dir / name, view.rgba)
        entry = view.camera.to_dict()
        entry["image"] = name
        entry["split"] = view.split
        entries.append(entry)
    manifest = {"cameras": entries}
    if scene is not None:
        manifest["scene"] = scene.to_dict()
    path = out_dir / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2))
    return path


def load_dataset(manifest_path, encoding: EncodingConfig | None = None) -> LightFieldDataset:
    manifest_path = Path(manifest_path)
    if not manifest_path.exists():
        raise FileNotFoundError(f"manifest not found: {manifest_path}")
    manifest = json.loads(manifest_path.read_text())
    views = []
    missing_split = False
    for entry in manifest["cameras"]:
        cam = Camera.from_dict(entry)
        img_path = manifest_path.parent / entry["image"]
        if not img_path.exists():
            raise FileNotFoundError(f"image not found for view {entry['image']}")
        rgba = load_png(img_path)
        if rgba.shape[:2] != (cam.height_px, cam.width_px):
            raise ValueError(
                f"view {entry['image']}: image is {rgba.shape[1]}x{rgba.shape[0]} but camera "
                f"says {cam.width_px}x{cam.height_px}"
            )
        split = entry.get("split")
        if split is None:
            missing_split = True
            split = "train"
        views.append(ViewImage(rgba=rgba, camera=cam, split=split))
    if missing_split:
        assign_splits_round_robin(views)
    return LightFieldDataset(views, encoding=encoding)
