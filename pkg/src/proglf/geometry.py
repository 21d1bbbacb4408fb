"""Cameras, ray generation, and the Plucker ray parameterization.

A ray through origin o with unit direction d is represented by the
6-vector (d, o x d). The moment o x d is invariant to sliding the origin
along the ray, so the pair identifies an oriented line in space.

Conventions fixed here and relied on everywhere else:
  - camera-forward axis is +z in camera space
  - pixel (u, v) emits its ray through the half-pixel center (u+0.5, v+0.5)
  - ray directions are normalized before the moment is computed
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from fractions import Fraction

import numpy as np

ORTHO_TOL = 1e-6


@dataclass(frozen=True)
class Camera:
    """Pinhole camera with a rigid world-from-camera pose."""

    width_px: int
    height_px: int
    fx: float
    fy: float
    cx: float
    cy: float
    rotation: np.ndarray  # 3x3, world_from_camera
    translation: np.ndarray  # 3, world_from_camera (camera center in world)

    def __post_init__(self):
        if self.width_px < 1 or self.height_px < 1:
            raise ValueError("camera resolution must be at least 1x1")
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("focal lengths must be positive")
        R = np.asarray(self.rotation, dtype=np.float64).reshape(3, 3)
        t = np.asarray(self.translation, dtype=np.float64).reshape(3)
        if not np.allclose(R.T @ R, np.eye(3), atol=ORTHO_TOL):
            raise ValueError("rotation is not orthonormal")
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", t)

    def to_dict(self) -> dict:
        pose = np.concatenate([self.rotation, self.translation[:, None]], axis=1)
        return {
            "width_px": self.width_px,
            "height_px": self.height_px,
            "fx": self.fx,
            "fy": self.fy,
            "cx": self.cx,
            "cy": self.cy,
            "pose_3x4": [float(v) for v in pose.reshape(-1)],
        }

    @staticmethod
    def from_dict(d: dict) -> "Camera":
        pose = np.asarray(d["pose_3x4"], dtype=np.float64).reshape(3, 4)
        return Camera(
            width_px=int(d["width_px"]),
            height_px=int(d["height_px"]),
            fx=float(d["fx"]),
            fy=float(d["fy"]),
            cx=float(d["cx"]),
            cy=float(d["cy"]),
            rotation=pose[:, :3],
            translation=pose[:, 3],
        )


@dataclass(frozen=True)
class PluckerRay:
    direction: np.ndarray  # unit 3-vector
    moment: np.ndarray  # origin x direction

    def __post_init__(self):
        d = np.asarray(self.direction, dtype=np.float64).reshape(3)
        m = np.asarray(self.moment, dtype=np.float64).reshape(3)
        if abs(np.linalg.norm(d) - 1.0) > ORTHO_TOL:
            raise ValueError("direction is not unit length")
        if abs(float(d @ m)) > ORTHO_TOL:
            raise ValueError("direction and moment are not orthogonal")
        object.__setattr__(self, "direction", d)
        object.__setattr__(self, "moment", m)

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.direction, self.moment])


@dataclass(frozen=True)
class EncodingConfig:
    """Sin/cos frequency encoding of the 6 Plucker components.

    Default (2 frequencies, no raw passthrough) yields a 24-dim feature,
    the input width the default architecture expects.
    """

    num_frequencies: int = 2
    include_raw: bool = False

    @property
    def encoded_dim(self) -> int:
        return 6 * 2 * self.num_frequencies + (6 if self.include_raw else 0)


def make_plucker(origin, direction) -> PluckerRay:
    """Build the Plucker ray through `origin` along `direction`."""
    o = np.asarray(origin, dtype=np.float64).reshape(3)
    d = np.asarray(direction, dtype=np.float64).reshape(3)
    n = np.linalg.norm(d)
    if n == 0.0:
        raise ValueError("ray direction must be nonzero")
    d = d / n
    return PluckerRay(direction=d, moment=np.cross(o, d))


def ray_grid_for_camera(cam: Camera) -> tuple[np.ndarray, np.ndarray]:
    """Directions and moments for every pixel center, row-major.

    Returns (directions, moments), each height_px*width_px x 3. Vectorized
    form of rays_for_camera; the two agree element-wise.
    """
    u = np.arange(cam.width_px, dtype=np.float64) + 0.5
    v = np.arange(cam.height_px, dtype=np.float64) + 0.5
    uu, vv = np.meshgrid(u, v)  # height x width
    x = (uu - cam.cx) / cam.fx
    y = (vv - cam.cy) / cam.fy
    dirs_cam = np.stack([x, y, np.ones_like(x)], axis=-1).reshape(-1, 3)
    dirs = dirs_cam @ cam.rotation.T
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    moments = np.cross(np.broadcast_to(cam.translation, dirs.shape), dirs)
    return dirs, moments


def rays_for_camera(cam: Camera) -> list[list[PluckerRay]]:
    """Per-pixel Plucker rays as a height_px x width_px nested list."""
    dirs, moments = ray_grid_for_camera(cam)
    rays = [
        [
            PluckerRay(dirs[r * cam.width_px + c], moments[r * cam.width_px + c])
            for c in range(cam.width_px)
        ]
        for r in range(cam.height_px)
    ]
    return rays


def scale_intrinsics(cam: Camera, factor) -> Camera:
    """Scale resolution and intrinsics by `factor`; pose is unchanged."""
    f = Fraction(factor).limit_denominator(1_000_000)
    w = f * cam.width_px
    h = f * cam.height_px
    if w.denominator != 1 or h.denominator != 1 or w < 1 or h < 1:
        raise ValueError(
            f"scale {factor} of {cam.width_px}x{cam.height_px} is not an integer resolution"
        )
    ff = float(f)
    return replace(
        cam,
        width_px=int(w),
        height_px=int(h),
        fx=cam.fx * ff,
        fy=cam.fy * ff,
        cx=cam.cx * ff,
        cy=cam.cy * ff,
    )


def encode_rays(dirs: np.ndarray, moments: np.ndarray, cfg: EncodingConfig) -> np.ndarray:
    """Encode n rays into n x encoded_dim float32 features.

    Component order: for each Plucker component p (dx, dy, dz, mx, my, mz)
    and frequency j in [0, num_frequencies): sin(2^j pi p), cos(2^j pi p).
    Raw components, when enabled, are appended after the frequency block.
    """
    p = np.concatenate(
        [np.atleast_2d(dirs).astype(np.float64), np.atleast_2d(moments).astype(np.float64)],
        axis=1,
    )  # n x 6
    parts = []
    for comp in range(6):
        for j in range(cfg.num_frequencies):
            arg = (2.0**j) * np.pi * p[:, comp]
            parts.append(np.sin(arg))
            parts.append(np.cos(arg))
    if cfg.include_raw:
        parts.extend(p[:, comp] for comp in range(6))
    return np.stack(parts, axis=1).astype(np.float32)


def encode_ray(ray: PluckerRay, cfg: EncodingConfig) -> np.ndarray:
    return encode_rays(ray.direction[None, :], ray.moment[None, :], cfg)[0]


def look_at(eye, target, up=(0.0, -1.0, 0.0)) -> tuple[np.ndarray, np.ndarray]:
    """World-from-camera pose with +z pointing from eye toward target.

    Default up follows the y-down image convention. Returns (rotation,
    translation) for a Camera.
    """
    eye = np.asarray(eye, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    fwd = target - eye
    n = np.linalg.norm(fwd)
    if n == 0.0:
        raise ValueError("eye and target coincide")
    fwd = fwd / n
    up = np.asarray(up, dtype=np.float64)
    right = np.cross(up, fwd)
    rn = np.linalg.norm(right)
    if rn < 1e-9:
        right = np.cross(np.array([1.0, 0.0, 0.0]), fwd)
        rn = np.linalg.norm(right)
    right = right / rn
    down = np.cross(fwd, right)
    R = np.stack([right, down, fwd], axis=1)  # columns: camera x, y, z in world
    return R, eye.copy()
