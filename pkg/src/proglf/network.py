"""Progressive width-sliced MLP.

One parameter store serves every level of detail: evaluating LOD k uses
the top-left w_k x w_k submatrix of each hidden layer, the first w_k rows
of the input layer, the first w_k columns of the output layer, and the
first w_k bias entries. Lower LODs are therefore strict parameter subsets
of higher ones.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class ArchSpec:
    input_dim: int = 24
    output_dim: int = 4
    num_weight_layers: int = 10  # 1 input + hidden + 1 output
    lod_widths: tuple[int, ...] = (128, 256, 384, 512)

    def __post_init__(self):
        widths = tuple(int(w) for w in self.lod_widths)
        object.__setattr__(self, "lod_widths", widths)
        if any(b <= a for a, b in zip(widths, widths[1:])):
            raise ValueError("lod_widths must be strictly increasing")
        if self.num_weight_layers < 3:
            raise ValueError("need at least input, one hidden, and output layer")
        if min(self.input_dim, self.output_dim, *widths) < 1:
            raise ValueError("all dimensions must be >= 1")

    @property
    def num_lods(self) -> int:
        return len(self.lod_widths)

    @property
    def num_hidden(self) -> int:
        return self.num_weight_layers - 2

    @property
    def full_width(self) -> int:
        return self.lod_widths[-1]

    def width(self, lod: int) -> int:
        self.check_lod(lod)
        return self.lod_widths[lod - 1]

    def check_lod(self, lod: int):
        if not 1 <= lod <= self.num_lods:
            raise ValueError(f"LOD {lod} out of range [1, {self.num_lods}]")

    def to_dict(self) -> dict:
        return {
            "input_dim": self.input_dim,
            "output_dim": self.output_dim,
            "num_weight_layers": self.num_weight_layers,
            "lod_widths": list(self.lod_widths),
        }

    @staticmethod
    def from_dict(d: dict) -> "ArchSpec":
        return ArchSpec(
            input_dim=int(d["input_dim"]),
            output_dim=int(d["output_dim"]),
            num_weight_layers=int(d["num_weight_layers"]),
            lod_widths=tuple(int(w) for w in d["lod_widths"]),
        )


@dataclass
class ProgressiveMLP:
    """Full-width parameter store; weights[i]/biases[i] for layer i.

    Layer 0 (input): full_width x input_dim. Layers 1..num_hidden:
    full_width x full_width. Last layer: output_dim x full_width.
    """

    arch: ArchSpec
    weights: list[np.ndarray] = field(repr=False)
    biases: list[np.ndarray] = field(repr=False)
    reduced_precision: bool = False

    def check_finite(self):
        for a in self.weights + self.biases:
            if not np.all(np.isfinite(a)):
                raise ValueError("non-finite parameter encountered")

    def copy(self) -> "ProgressiveMLP":
        return ProgressiveMLP(
            arch=self.arch,
            weights=[w.copy() for w in self.weights],
            biases=[b.copy() for b in self.biases],
            reduced_precision=self.reduced_precision,
        )


def init(arch: ArchSpec, seed: int) -> ProgressiveMLP:
    """Uniform(-a, a) weights with a = sqrt(6 / fan_in); zero biases.

    fan_in is the full-width input dimension of each layer so one store
    can serve every LOD.
    """
    rng = np.random.default_rng(seed)
    fw = arch.full_width
    shapes = (
        [(fw, arch.input_dim)]
        + [(fw, fw)] * arch.num_hidden
        + [(arch.output_dim, fw)]
    )
    weights = []
    biases = []
    for rows, cols in shapes:
        a = np.sqrt(6.0 / cols)
        weights.append(rng.uniform(-a, a, size=(rows, cols)).astype(np.float32))
        biases.append(np.zeros(rows, dtype=np.float32))
    return ProgressiveMLP(arch=arch, weights=weights, biases=biases)


def _sliced_layers(net: ProgressiveMLP, w: int):
    """Views of the parameters actually used at width w, in layer order."""
    arch = net.arch
    n = arch.num_weight_layers
    for i in range(n):
        W, b = net.weights[i], net.biases[i]
        if i == 0:
            yield W[:w, :], b[:w]
        elif i == n - 1:
            yield W[:, :w], b
        else:
            yield W[:w, :w], b[:w]


def _as_compute(a: np.ndarray, reduced: bool) -> np.ndarray:
    # reduced precision: 16-bit storage rounding, 32-bit accumulation
    return a.astype(np.float16).astype(np.float32) if reduced else a


def forward_batch(net: ProgressiveMLP, features: np.ndarray, lod: int) -> np.ndarray:
    """Evaluate n rays at one LOD; returns n x output_dim in (0, 1)."""
    arch = net.arch
    arch.check_lod(lod)
    x = np.asarray(features, dtype=np.float32)
    if x.ndim == 1:
        x = x[None, :]
    if x.shape[1] != arch.input_dim:
        raise ValueError(f"expected {arch.input_dim} features, got {x.shape[1]}")
    w = arch.width(lod)
    layers = list(_sliced_layers(net, w))
    h = x
    for W, b in layers[:-1]:
        W = _as_compute(W, net.reduced_precision)
        b = _as_compute(b, net.reduced_precision)
        h = np.maximum(h @ W.T + b, 0.0)
    W, b = layers[-1]
    W = _as_compute(W, net.reduced_precision)
    b = _as_compute(b, net.reduced_precision)
    z = h @ W.T + b
    with np.errstate(over="ignore"):
        return 1.0 / (1.0 + np.exp(-z))


def forward(net: ProgressiveMLP, features: np.ndarray, lod: int) -> np.ndarray:
    return forward_batch(net, np.asarray(features)[None, :], lod)[0]


def param_count(arch: ArchSpec, lod: int) -> int:
    """Number of parameters the forward pass touches at this LOD."""
    w = arch.width(lod)
    n_in = w * arch.input_dim + w
    n_hidden = arch.num_hidden * (w * w + w)
    n_out = arch.output_dim * w + arch.output_dim
    return n_in + n_hidden + n_out


def mac_count_per_ray(arch: ArchSpec, lod: int) -> int:
    """Multiply-accumulates for one forward pass at this LOD."""
    w = arch.width(lod)
    return w * arch.input_dim + arch.num_hidden * w * w + arch.output_dim * w


def hidden_mac_count_per_ray(arch: ArchSpec, lod: int) -> int:
    w = arch.width(lod)
    return arch.num_hidden * w * w


def slice_lod(net: ProgressiveMLP, lod: int) -> ProgressiveMLP:
    """Standalone net at width w_k containing exactly the LOD-k slice."""
    arch = net.arch
    arch.check_lod(lod)
    w = arch.width(lod)
    sub_arch = ArchSpec(
        input_dim=arch.input_dim,
        output_dim=arch.output_dim,
        num_weight_layers=arch.num_weight_layers,
        lod_widths=arch.lod_widths[:lod],
    )
    weights = [W.copy() for W, _ in _sliced_layers(net, w)]
    biases = [b.copy() for _, b in _sliced_layers(net, w)]
    return ProgressiveMLP(
        arch=sub_arch,
        weights=weights,
        biases=biases,
        reduced_precision=net.reduced_precision,
    )
