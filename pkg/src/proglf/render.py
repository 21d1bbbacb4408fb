"""Adaptive image synthesis: per-pixel LOD maps, dithered transitions,
foveation, distance LOD, occupancy-based empty-ray skipping, and MAC-exact
benchmarking.

A LODMap entry of 0 means the pixel was skipped (empty ray); skipped
pixels are written as transparent black.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .geometry import Camera, EncodingConfig, encode_rays, ray_grid_for_camera
from .network import (
    ProgressiveMLP,
    forward_batch,
    hidden_mac_count_per_ray,
    mac_count_per_ray,
)


@dataclass
class RenderPolicy:
    mode: str = "fixed"  # fixed | distance | foveated | dithered
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

    def __post_init__(self):
        if self.mode not in ("fixed", "distance", "foveated", "dithered"):
            raise ValueError(f"unknown render mode {self.mode!r}")
        if not 0.0 <= self.fraction <= 1.0:
            raise ValueError("dither fraction must lie in [0, 1]")
        if self.radii and any(b <= a for a, b in zip(self.radii, self.radii[1:])):
            raise ValueError("foveation radii must be strictly increasing")
        if not 0.0 < self.occupancy_threshold < 1.0:
            raise ValueError("occupancy threshold must lie in (0, 1)")


@dataclass
class RenderResult:
    rgba: np.ndarray  # H x W x 4
    lod_map: np.ndarray  # H x W uint8, 0 = skipped
    timings_ms: dict[str, float] = field(default_factory=dict)
    mac_counts: dict[str, int] = field(default_factory=dict)

    def report(self) -> dict:
        return {"timings_ms": self.timings_ms, "mac_counts": self.mac_counts}


def dither_mask(width: int, height: int, fraction: float, frame_seed: int) -> np.ndarray:
    """Boolean mask with exactly round(fraction*N) pixels set.

    Built from a seed-keyed permutation prefix, so masks at increasing
    fractions are nested under the same seed.
    """
    if not 0.0 <= fraction <= 1.0:
        raise ValueError("fraction must lie in [0, 1]")
    n = width * height
    count = int(round(fraction * n))
    perm = np.random.default_rng(frame_seed).permutation(n)
    mask = np.zeros(n, dtype=bool)
    mask[perm[:count]] = True
    return mask.reshape(height, width)


def lod_map_foveated(
    width: int, height: int, gaze_px: tuple[float, float], radii, num_lods: int = 4
) -> np.ndarray:
    """Top LOD within radii[0] of the gaze, stepping down one LOD per ring."""
    radii = tuple(radii)
    if len(radii) != num_lods - 1:
        raise ValueError(f"need {num_lods - 1} radii for {num_lods} LODs")
    gx, gy = gaze_px
    if not (0 <= gx < width and 0 <= gy < height):
        raise ValueError("gaze point outside the image")
    xx, yy = np.meshgrid(np.arange(width) + 0.5, np.arange(height) + 0.5)
    r = np.hypot(xx - gx, yy - gy)
    lod = np.full((height, width), 1, dtype=np.uint8)
    for i in reversed(range(len(radii))):
        lod[r <= radii[i]] = num_lods - i
    return lod


def lod_for_distance(
    cam: Camera,
    object_center,
    object_radius: float,
    train_full_height_px: int,
    num_lods: int = 4,
) -> int:
    """Pick the LOD whose training resolution matches the projected size."""
    center = np.asarray(object_center, dtype=np.float64)
    fwd = cam.rotation[:, 2]
    depth = float(fwd @ (center - cam.translation))
    if depth <= 0:
        raise ValueError("object is behind the camera")
    d_px = 2.0 * object_radius * cam.fy / depth
    drop = int(np.floor(np.log2(train_full_height_px / max(d_px, 1.0))))
    return int(np.clip(num_lods - drop, 1, num_lods))


def build_lod_map(cam: Camera, policy: RenderPolicy, num_lods: int) -> np.ndarray:
    w, h = cam.width_px, cam.height_px
    if policy.mode == "fixed":
        if not 1 <= policy.k <= num_lods:
            raise ValueError(f"fixed LOD {policy.k} out of range")
        return np.full((h, w), policy.k, dtype=np.uint8)
    if policy.mode == "distance":
        k = lod_for_distance(
            cam,
            policy.distance_center,
            policy.distance_radius,
            policy.train_full_height_px,
            num_lods,
        )
        return np.full((h, w), k, dtype=np.uint8)
    if policy.mode == "foveated":
        return lod_map_foveated(w, h, policy.gaze_px, policy.radii, num_lods)
    mask = dither_mask(w, h, policy.fraction, policy.dither_seed)
    lod = np.full((h, w), policy.from_k, dtype=np.uint8)
    lod[mask] = policy.to_k
    return lod


def render(
    net: ProgressiveMLP,
    cam: Camera,
    policy: RenderPolicy,
    occupancy: ProgressiveMLP | None = None,
    encoding: EncodingConfig | None = None,
) -> RenderResult:
    """Render one frame, batching pixels per LOD value."""
    encoding = encoding or EncodingConfig()
    num_lods = net.arch.num_lods
    timings = {}
    macs = {"network": 0, "occupancy": 0}

    t0 = time.perf_counter()
    lod_map = build_lod_map(cam, policy, num_lods)
    dirs, moments = ray_grid_for_camera(cam)
    feats = encode_rays(dirs, moments, encoding)
    timings["ray_gen_ms"] = (time.perf_counter() - t0) * 1000.0

    flat_lod = lod_map.reshape(-1).astype(np.int64)
    t1 = time.perf_counter()
    if policy.use_occupancy and occupancy is not None:
        prob = forward_batch(occupancy, feats, occupancy.arch.num_lods)[:, 0]
        macs["occupancy"] = len(feats) * mac_count_per_ray(occupancy.arch, occupancy.arch.num_lods)
        flat_lod[prob < policy.occupancy_threshold] = 0
    timings["occupancy_ms"] = (time.perf_counter() - t1) * 1000.0

    eval_net = net
    if policy.reduced_precision and not net.reduced_precision:
        eval_net = ProgressiveMLP(
            arch=net.arch, weights=net.weights, biases=net.biases, reduced_precision=True
        )

    out = np.zeros((len(feats), 4), dtype=np.float32)
    t2 = time.perf_counter()
    for k in np.unique(flat_lod):
        if k == 0:
            continue
        sel = flat_lod == k
        out[sel] = forward_batch(eval_net, feats[sel], int(k))
        macs["network"] += int(sel.sum()) * mac_count_per_ray(net.arch, int(k))
    timings["network_ms"] = (time.perf_counter() - t2) * 1000.0
    timings["total_ms"] = (time.perf_counter() - t0) * 1000.0

    return RenderResult(
        rgba=out.reshape(cam.height_px, cam.width_px, 4),
        lod_map=flat_lod.reshape(cam.height_px, cam.width_px).astype(np.uint8),
        timings_ms=timings,
        mac_counts=macs,
    )


def benchmark(
    net: ProgressiveMLP,
    cams: list[Camera],
    lod: int,
    repetitions: int = 3,
    occupancy: ProgressiveMLP | None = None,
    use_occupancy: bool = False,
    encoding: EncodingConfig | None = None,
) -> dict:
    """Wall-clock stats (first repetition discarded as warm-up) plus MACs."""
    if repetitions < 3:
        raise ValueError("need at least 3 repetitions (first is warm-up)")
    policy = RenderPolicy(mode="fixed", k=lod, use_occupancy=use_occupancy)
    times = []
    mac_net = 0
    for rep in range(repetitions):
        for cam in cams:
            res = render(net, cam, policy, occupancy=occupancy, encoding=encoding)
            if rep > 0:
                times.append(res.timings_ms["total_ms"])
            mac_net = res.mac_counts["network"]
    times = np.asarray(times)
    return {
        "lod": lod,
        "frames_timed": int(len(times)),
        "ms_per_frame_mean": float(times.mean()),
        "ms_per_frame_p50": float(np.percentile(times, 50)),
        "ms_per_frame_p95": float(np.percentile(times, 95)),
        "network_macs_per_frame": int(mac_net),
        "mac_per_ray": mac_count_per_ray(net.arch, lod),
        "hidden_mac_per_ray": hidden_mac_count_per_ray(net.arch, lod),
    }
