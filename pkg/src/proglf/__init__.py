"""Progressive multi-scale light field networks.

A single MLP whose nested neuron subsets encode a light field at four
anti-aliased scales, with training, adaptive LOD rendering, and a
prefix-decodable streaming format.
"""

from .geometry import Camera, EncodingConfig, PluckerRay, make_plucker
from .network import ArchSpec, ProgressiveMLP, forward, forward_batch, param_count, slice_lod

__all__ = [
    "Camera",
    "EncodingConfig",
    "PluckerRay",
    "make_plucker",
    "ArchSpec",
    "ProgressiveMLP",
    "forward",
    "forward_batch",
    "param_count",
    "slice_lod",
]
