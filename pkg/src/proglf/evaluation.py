"""Per-LOD PSNR/SSIM evaluation over a dataset split.

Each LOD is rendered at its target scale (scaled intrinsics) and compared
against the matching pyramid level, cropped to the subject bounding box.
"""

from __future__ import annotations

import math

import numpy as np

from . import quality
from .geometry import scale_intrinsics
from .network import ProgressiveMLP
from .render import RenderPolicy, render


def evaluate(
    net: ProgressiveMLP,
    dataset,
    split: str = "test",
    occupancy: ProgressiveMLP | None = None,
    crop_padding_px: int = 2,
) -> dict:
    top = dataset.num_scales
    indices = dataset.split_indices(split)
    if not indices:
        raise ValueError(f"no views in split {split!r}")
    per_view = []
    for vi in indices:
        view = dataset.views[vi]
        entry = {"view": vi, "lods": {}}
        for lod in range(1, top + 1):
            factor = 1.0 / (2 ** (top - lod))
            cam = scale_intrinsics(view.camera, factor) if factor != 1.0 else view.camera
            ref = dataset.pyramid(vi)[lod - 1]
            result = render(
                net,
                cam,
                RenderPolicy(mode="fixed", k=lod),
                occupancy=occupancy,
                encoding=dataset.encoding,
            )
            try:
                crop = quality.crop_from_mask(ref[:, :, 3], padding_px=crop_padding_px)
            except ValueError:
                crop = None
            p = quality.psnr(result.rgba, ref, crop)
            try:
                s = quality.ssim(result.rgba, ref, crop)
            except ValueError:  # crop smaller than the SSIM window
                try:
                    s = quality.ssim(result.rgba, ref)
                except ValueError:  # whole level smaller than the window
                    s = math.nan
            entry["lods"][str(lod)] = {"psnr_db": p, "ssim": s}
        per_view.append(entry)
    means = {}
    for lod in range(1, top + 1):
        ps = [e["lods"][str(lod)]["psnr_db"] for e in per_view]
        ss = [e["lods"][str(lod)]["ssim"] for e in per_view]
        finite = [p for p in ps if math.isfinite(p)]
        finite_s = [s for s in ss if not math.isnan(s)]
        means[str(lod)] = {
            "psnr_db": float(np.mean(finite)) if finite else math.inf,
            "ssim": float(np.mean(finite_s)) if finite_s else math.nan,
        }
    return {"split": split, "per_view": per_view, "mean": means}
