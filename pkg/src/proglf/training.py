"""Training for the progressive MLP.

Gradients are hand-derived reverse-mode: each step runs a forward pass at
the top LOD plus one at a randomly chosen lower LOD, and the two squared
L2 terms are summed for a single backward pass. Parameters outside the
lower slice only receive gradient from the top-LOD term.
"""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, field

import numpy as np

from . import quality
from .geometry import EncodingConfig, encode_rays, ray_grid_for_camera, scale_intrinsics
from .network import ArchSpec, ProgressiveMLP, forward_batch, init

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    batch_size: int = 8192
    foreground_fraction: float = 0.67
    background_fraction: float = 0.33
    epochs: int = 100
    images_per_batch_group: int = 2
    foreground_ray_coverage: float = 0.50
    learning_rate: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    seed: int = 0
    mode: str = "combined"  # combined | single_scale | coarse_to_fine
    eval_every: int = 0  # epochs between validation PSNR evals; 0 disables

    def __post_init__(self):
        if abs(self.foreground_fraction + self.background_fraction - 1.0) > 1e-9:
            raise ValueError("foreground and background fractions must sum to 1")
        if self.batch_size < 1 or self.epochs < 1:
            raise ValueError("batch_size and epochs must be >= 1")
        if self.mode not in ("combined", "single_scale", "coarse_to_fine"):
            raise ValueError(f"unknown training mode {self.mode!r}")


@dataclass
class RayBatch:
    features: np.ndarray  # b x input_dim
    targets: np.ndarray  # num_lods x b x 4, RGBA in [0,1]
    foreground: np.ndarray  # b bools


# ---------------------------------------------------------------------------
# manual reverse mode


def _sliced(net: ProgressiveMLP, lod: int, dtype):
    w = net.arch.width(lod)
    n = net.arch.num_weight_layers
    layers = []
    for i in range(n):
        W, b = net.weights[i], net.biases[i]
        if i == 0:
            layers.append((W[:w, :].astype(dtype), b[:w].astype(dtype)))
        elif i == n - 1:
            layers.append((W[:, :w].astype(dtype), b.astype(dtype)))
        else:
            layers.append((W[:w, :w].astype(dtype), b[:w].astype(dtype)))
    return layers


def _forward_cache(layers, x):
    """Forward pass keeping post-ReLU activations for the backward pass."""
    acts = [x]
    h = x
    for W, b in layers[:-1]:
        h = np.maximum(h @ W.T + b, 0.0)
        acts.append(h)
    W, b = layers[-1]
    z = h @ W.T + b
    with np.errstate(over="ignore"):
        y = 1.0 / (1.0 + np.exp(-z))
    return y, acts


def _backward(layers, acts, dz):
    """Gradients per layer given dL/dz at the output pre-activation."""
    grads = [None] * len(layers)
    for i in reversed(range(len(layers))):
        W, _ = layers[i]
        h_prev = acts[i]
        grads[i] = (dz.T @ h_prev, dz.sum(axis=0))
        if i > 0:
            dz = (dz @ W) * (acts[i] > 0)
    return grads


def zero_grads(arch: ArchSpec, dtype=np.float32):
    fw = arch.full_width
    shapes = (
        [(fw, arch.input_dim)]
        + [(fw, fw)] * arch.num_hidden
        + [(arch.output_dim, fw)]
    )
    gW = [np.zeros(s, dtype=dtype) for s in shapes]
    gb = [np.zeros(s[0], dtype=dtype) for s in shapes]
    gb[-1] = np.zeros(arch.output_dim, dtype=dtype)
    return gW, gb


def _accumulate(arch: ArchSpec, gW, gb, layer_grads, lod):
    w = arch.width(lod)
    n = arch.num_weight_layers
    for i, (dW, db) in enumerate(layer_grads):
        if i == 0:
            gW[i][:w, :] += dW
            gb[i][:w] += db
        elif i == n - 1:
            gW[i][:, :w] += dW
            gb[i] += db
        else:
            gW[i][:w, :w] += dW
            gb[i][:w] += db


def lod_term_loss_and_grads(net, X, Y, lod, gW, gb, dtype=np.float32):
    """One squared-L2 term: mean_i ||f_lod(x_i) - y_i||^2, accumulated in place."""
    layers = _sliced(net, lod, dtype)
    y, acts = _forward_cache(layers, X)
    resid = y - Y
    b = X.shape[0]
    loss = float((resid**2).sum() / b)
    dz = (2.0 / b) * resid * y * (1.0 - y)
    _accumulate(net.arch, gW, gb, _backward(layers, acts, dz), lod)
    return loss


def combined_loss_and_grads(net: ProgressiveMLP, batch: RayBatch, k: int, dtype=np.float32):
    """Loss and gradients for the top-LOD term plus the LOD-k term."""
    top = net.arch.num_lods
    if not 1 <= k < top:
        raise ValueError(f"k must be a lower LOD in [1, {top - 1}], got {k}")
    X = np.asarray(batch.features, dtype=dtype)
    gW, gb = zero_grads(net.arch, dtype)
    loss = lod_term_loss_and_grads(net, X, batch.targets[top - 1].astype(dtype), top, gW, gb, dtype)
    loss += lod_term_loss_and_grads(net, X, batch.targets[k - 1].astype(dtype), k, gW, gb, dtype)
    return loss, (gW, gb)


def loss_and_grads_for_lods(net, batch: RayBatch, lods, dtype=np.float32):
    """Sum of squared-L2 terms over an explicit list of LODs."""
    X = np.asarray(batch.features, dtype=dtype)
    gW, gb = zero_grads(net.arch, dtype)
    loss = 0.0
    for lod in lods:
        loss += lod_term_loss_and_grads(
            net, X, batch.targets[lod - 1].astype(dtype), lod, gW, gb, dtype
        )
    return loss, (gW, gb)


def _zero_slice(arrays_W, arrays_b, arch: ArchSpec, upto_lod: int):
    """Zero the entries inside the LOD-`upto_lod` slice (freeze support)."""
    w = arch.width(upto_lod)
    n = arch.num_weight_layers
    for i in range(n):
        if i == 0:
            arrays_W[i][:w, :] = 0
            arrays_b[i][:w] = 0
        elif i == n - 1:
            arrays_W[i][:, :w] = 0
            arrays_b[i][:] = 0
        else:
            arrays_W[i][:w, :w] = 0
            arrays_b[i][:w] = 0


# ---------------------------------------------------------------------------
# Adam


@dataclass
class AdamState:
    m_W: list
    v_W: list
    m_b: list
    v_b: list
    step: int = 0

    @staticmethod
    def for_arch(arch: ArchSpec) -> "AdamState":
        mW, mb = zero_grads(arch)
        vW, vb = zero_grads(arch)
        return AdamState(m_W=mW, v_W=vW, m_b=mb, v_b=vb)


def adam_step(net: ProgressiveMLP, grads, state: AdamState, cfg: TrainConfig):
    """One bias-corrected Adam update, in place."""
    gW, gb = grads
    state.step += 1
    t = state.step
    bc1 = 1.0 - cfg.beta1**t
    bc2 = 1.0 - cfg.beta2**t
    for params, gs, ms, vs in (
        (net.weights, gW, state.m_W, state.v_W),
        (net.biases, gb, state.m_b, state.v_b),
    ):
        for p, g, m, v in zip(params, gs, ms, vs):
            if p.shape != g.shape:
                raise ValueError("gradient shape mismatch")
            m *= cfg.beta1
            m += (1.0 - cfg.beta1) * g
            v *= cfg.beta2
            v += (1.0 - cfg.beta2) * (g * g)
            p -= (cfg.learning_rate * (m / bc1) / (np.sqrt(v / bc2) + cfg.epsilon)).astype(
                p.dtype
            )


# ---------------------------------------------------------------------------
# batch sampling


def sample_batch(dataset, view_indices, rng, cfg: TrainConfig) -> RayBatch:
    """Draw one batch from the given image group.

    round(foreground_fraction * b) rays come from foreground pixels, the
    remainder from background. Top-LOD targets read full-resolution
    pixels; lower-LOD targets are bilinear samples of the pyramid levels.
    """
    b = cfg.batch_size
    n_fg = int(round(cfg.foreground_fraction * b))
    fg_pools = []
    bg_pools = []
    for vi in view_indices:
        fg, bg = dataset.pixel_pools(vi)
        fg_pools.append((vi, fg))
        bg_pools.append((vi, bg))
    total_fg = sum(len(p) for _, p in fg_pools)
    total_bg = sum(len(p) for _, p in bg_pools)
    if total_fg == 0:
        log.warning("image group %s has no foreground pixels; sampling background only", view_indices)
        n_fg = 0
    elif total_bg == 0:
        n_fg = b
    n_bg = b - n_fg

    def draw(pools, n):
        views = np.concatenate([np.full(len(p), vi, dtype=np.int64) for vi, p in pools])
        pix = np.concatenate([p for _, p in pools])
        idx = rng.integers(0, len(pix), size=n)
        return views[idx], pix[idx]

    parts = []
    if n_fg > 0:
        parts.append(draw(fg_pools, n_fg))
    if n_bg > 0:
        parts.append(draw(bg_pools, n_bg))
    views = np.concatenate([p[0] for p in parts])
    pixels = np.concatenate([p[1] for p in parts])

    feats = np.empty((b, dataset.encoding.encoded_dim), dtype=np.float32)
    targets = np.empty((dataset.num_scales, b, 4), dtype=np.float32)
    fg_flags = np.zeros(b, dtype=bool)
    fg_flags[:n_fg] = True
    for vi in np.unique(views):
        sel = views == vi
        feats[sel] = dataset.view_features(vi)[pixels[sel]]
        targets[:, sel, :] = dataset.targets_for_pixels(vi, pixels[sel])
    return RayBatch(features=feats, targets=targets, foreground=fg_flags)


# ---------------------------------------------------------------------------
# training loops


def _validation_psnr(net, dataset, lods):
    """Mean PSNR per LOD over validation views, each at its target scale."""
    out = {}
    top = dataset.num_scales
    for lod in lods:
        factor = 1.0 / (2 ** (top - lod))
        vals = []
        for vi in dataset.split_indices("validation"):
            view = dataset.views[vi]
            cam = scale_intrinsics(view.camera, factor) if factor != 1.0 else view.camera
            dirs, moments = ray_grid_for_camera(cam)
            feats = encode_rays(dirs, moments, dataset.encoding)
            pred = forward_batch(net, feats, lod).reshape(cam.height_px, cam.width_px, 4)
            ref = dataset.pyramid(vi)[lod - 1]
            vals.append(quality.psnr(pred, ref))
        if vals:
            out[lod] = float(np.mean([v for v in vals if np.isfinite(v)] or [np.inf]))
    return out


def _epoch_groups(dataset, rng, cfg: TrainConfig):
    idx = np.array(dataset.split_indices("train"))
    rng.shuffle(idx)
    g = cfg.images_per_batch_group
    return [idx[i : i + g] for i in range(0, len(idx), g)]


def _steps_for_group(dataset, group, cfg: TrainConfig) -> int:
    fg = sum(len(dataset.pixel_pools(vi)[0]) for vi in group)
    per_batch = max(1, int(round(cfg.foreground_fraction * cfg.batch_size)))
    return max(1, int(round(cfg.foreground_ray_coverage * fg / per_batch)))


def train(dataset, arch: ArchSpec, cfg: TrainConfig, log_path=None):
    """Full training run; returns (net, list of per-epoch log records)."""
    if not dataset.split_indices("train"):
        raise ValueError("dataset has no training views")
    if arch.num_lods != dataset.num_scales:
        raise ValueError("architecture LOD count must match dataset scale count")
    if arch.input_dim != dataset.encoding.encoded_dim:
        raise ValueError("architecture input_dim must match the ray encoding")
    net = init(arch, cfg.seed)
    state = AdamState.for_arch(arch)
    rng = np.random.default_rng(cfg.seed + 1)
    top = arch.num_lods
    records = []
    logf = open(log_path, "w") if log_path else None

    phase_epochs = None
    frozen_upto = 0
    frozen_snapshot = None
    if cfg.mode == "coarse_to_fine":
        phase_epochs = max(1, cfg.epochs // top)

    step_idx = 0
    try:
        for epoch in range(cfg.epochs):
            if cfg.mode == "coarse_to_fine":
                phase_lod = min(epoch // phase_epochs + 1, top)
                new_frozen = phase_lod - 1
                if new_frozen > frozen_upto:
                    frozen_upto = new_frozen
                    frozen_snapshot = net.copy()
            epoch_losses = []
            t0 = time.perf_counter()
            for group in _epoch_groups(dataset, rng, cfg):
                for _ in range(_steps_for_group(dataset, group, cfg)):
                    batch = sample_batch(dataset, list(group), rng, cfg)
                    if cfg.mode == "combined":
                        k = int(rng.integers(1, top))
                        loss, grads = combined_loss_and_grads(net, batch, k)
                    elif cfg.mode == "single_scale":
                        loss, grads = loss_and_grads_for_lods(net, batch, [top])
                    else:  # coarse_to_fine
                        loss, grads = loss_and_grads_for_lods(net, batch, [phase_lod])
                        if frozen_upto >= 1:
                            _zero_slice(grads[0], grads[1], arch, frozen_upto)
                    adam_step(net, grads, state, cfg)
                    if cfg.mode == "coarse_to_fine" and frozen_upto >= 1:
                        _restore_slice(net, frozen_snapshot, frozen_upto)
                    epoch_losses.append(loss)
                    step_idx += 1
            rec = {
                "epoch": epoch,
                "step": step_idx,
                "loss": float(np.mean(epoch_losses)),
                "seconds": time.perf_counter() - t0,
            }
            if cfg.eval_every and (epoch + 1) % cfg.eval_every == 0:
                rec["val_psnr"] = _validation_psnr(net, dataset, range(1, top + 1))
            records.append(rec)
            if logf:
                logf.write(json.dumps(rec) + "\n")
                logf.flush()
            log.info("epoch %d loss %.6f", epoch, rec["loss"])
    finally:
        if logf:
            logf.close()
    net.check_finite()
    return net, records


def _restore_slice(net: ProgressiveMLP, snapshot: ProgressiveMLP, upto_lod: int):
    w = net.arch.width(upto_lod)
    n = net.arch.num_weight_layers
    for i in range(n):
        if i == 0:
            net.weights[i][:w, :] = snapshot.weights[i][:w, :]
            net.biases[i][:w] = snapshot.biases[i][:w]
        elif i == n - 1:
            net.weights[i][:, :w] = snapshot.weights[i][:, :w]
            net.biases[i][:] = snapshot.biases[i]
        else:
            net.weights[i][:w, :w] = snapshot.weights[i][:w, :w]
            net.biases[i][:w] = snapshot.biases[i][:w]


# ---------------------------------------------------------------------------
# occupancy network


def occupancy_arch(input_dim: int = 24) -> ArchSpec:
    return ArchSpec(input_dim=input_dim, output_dim=1, num_weight_layers=3, lod_widths=(16,))


def train_occupancy(dataset, cfg: TrainConfig, steps: int = 1000) -> ProgressiveMLP:
    """Tiny ray classifier: sigmoid output vs foreground flag, BCE loss."""
    if not dataset.split_indices("train"):
        raise ValueError("dataset has no training views")
    arch = occupancy_arch(dataset.encoding.encoded_dim)
    net = init(arch, cfg.seed + 7)
    state = AdamState.for_arch(arch)
    occ_cfg = TrainConfig(
        batch_size=cfg.batch_size,
        learning_rate=1e-3,
        seed=cfg.seed,
        foreground_fraction=0.5,
        background_fraction=0.5,
    )
    rng = np.random.default_rng(cfg.seed + 11)
    train_idx = list(dataset.split_indices("train"))
    for _ in range(steps):
        group = list(rng.choice(train_idx, size=min(2, len(train_idx)), replace=False))
        batch = sample_batch(dataset, group, rng, occ_cfg)
        X = batch.features.astype(np.float32)
        t = batch.foreground.astype(np.float32)[:, None]
        layers = _sliced(net, 1, np.float32)
        y, acts = _forward_cache(layers, X)
        # sigmoid + BCE: dL/dz = (y - t) / b
        dz = (y - t) / X.shape[0]
        gW, gb = zero_grads(arch)
        _accumulate(arch, gW, gb, _backward(layers, acts, dz), 1)
        adam_step(net, (gW, gb), state, occ_cfg)
    net.check_finite()
    return net
