"""PSNR, SSIM, and subject cropping for the evaluation protocol.

Metrics run over RGB only (references are matted composites) and, when a
crop is given, over the tight subject bounding box. PSNR of identical
images is reported as +inf (math.inf), the documented sentinel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class CropRect:
    x: int
    y: int
    width: int
    height: int

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError("crop must be at least 1x1")
        if self.x < 0 or self.y < 0:
            raise ValueError("crop origin must be non-negative")

    def apply(self, image: np.ndarray) -> np.ndarray:
        h, w = image.shape[:2]
        if self.x + self.width > w or self.y + self.height > h:
            raise ValueError("crop exceeds image bounds")
        return image[self.y : self.y + self.height, self.x : self.x + self.width]


def crop_from_mask(alpha: np.ndarray, padding_px: int = 2) -> CropRect:
    """Tight bounding box of alpha > 0, padded and clamped to bounds."""
    alpha = np.asarray(alpha)
    if alpha.ndim == 3:
        alpha = alpha[:, :, -1]
    ys, xs = np.nonzero(alpha > 0)
    if len(ys) == 0:
        raise ValueError("no subject: image is fully transparent")
    h, w = alpha.shape
    x0 = max(int(xs.min()) - padding_px, 0)
    y0 = max(int(ys.min()) - padding_px, 0)
    x1 = min(int(xs.max()) + padding_px, w - 1)
    y1 = min(int(ys.max()) + padding_px, h - 1)
    return CropRect(x=x0, y=y0, width=x1 - x0 + 1, height=y1 - y0 + 1)


def _rgb(image: np.ndarray) -> np.ndarray:
    img = np.asarray(image, dtype=np.float64)
    if img.ndim == 2:
        img = img[:, :, None]
    return img[:, :, :3]


def psnr(a: np.ndarray, b: np.ndarray, crop: CropRect | None = None) -> float:
    """10 log10(1 / MSE) over RGB; +inf for identical inputs."""
    a = _rgb(a)
    b = _rgb(b)
    if a.shape != b.shape:
        raise ValueError(f"image shapes differ: {a.shape} vs {b.shape}")
    if crop is not None:
        a = crop.apply(a)
        b = crop.apply(b)
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(1.0 / mse)


def _gaussian_kernel(sigma: float, radius: int) -> np.ndarray:
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-0.5 * (x / sigma) ** 2)
    return k / k.sum()


def _filter2d(img: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    # separable correlation with edge-replicate padding
    r = (len(kernel) - 1) // 2
    p = np.pad(img, ((r, r), (0, 0)), mode="edge")
    rows = np.zeros_like(img)
    for i, kv in enumerate(kernel):
        rows += kv * p[i : i + img.shape[0], :]
    p = np.pad(rows, ((0, 0), (r, r)), mode="edge")
    out = np.zeros_like(img)
    for i, kv in enumerate(kernel):
        out += kv * p[:, i : i + img.shape[1]]
    return out


def ssim(
    a: np.ndarray,
    b: np.ndarray,
    crop: CropRect | None = None,
    sigma: float = 1.5,
    k1: float = 0.01,
    k2: float = 0.03,
) -> float:
    """Mean local SSIM on luma with an 11x11 Gaussian window, range 1."""
    a = _rgb(a)
    b = _rgb(b)
    if a.shape != b.shape:
        raise ValueError(f"image shapes differ: {a.shape} vs {b.shape}")
    if crop is not None:
        a = crop.apply(a)
        b = crop.apply(b)
    luma = np.array([0.2126, 0.7152, 0.0722])
    if a.shape[2] == 3:
        x = a @ luma
        y = b @ luma
    else:
        x = a[:, :, 0]
        y = b[:, :, 0]
    radius = 5  # 11x11 window
    if min(x.shape) < 2 * radius + 1:
        raise ValueError("image smaller than the 11x11 SSIM window")
    kernel = _gaussian_kernel(sigma, radius)
    c1 = k1**2
    c2 = k2**2
    ux = _filter2d(x, kernel)
    uy = _filter2d(y, kernel)
    uxx = _filter2d(x * x, kernel)
    uyy = _filter2d(y * y, kernel)
    uxy = _filter2d(x * y, kernel)
    vx = uxx - ux * ux
    vy = uyy - uy * uy
    vxy = uxy - ux * uy
    s = ((2 * ux * uy + c1) * (2 * vxy + c2)) / ((ux**2 + uy**2 + c1) * (vx + vy + c2))
    # mean over the interior where the window fits fully
    interior = s[radius:-radius, radius:-radius]
    return float(interior.mean())
