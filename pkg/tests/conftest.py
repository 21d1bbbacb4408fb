import numpy as np
import pytest

from proglf import data
from proglf.network import ArchSpec, init


@pytest.fixture(scope="session")
def scene():
    return data.SyntheticScene()


@pytest.fixture(scope="session")
def small_dataset(scene):
    """8 views at 64x48: quick enough for unit tests, 4-octave pyramid intact."""
    views = data.synthesize_views(
        scene, num_views=8, width=64, height=48, supersample=2, seed=0
    )
    views[6].split = "validation"
    views[7].split = "test"
    return data.LightFieldDataset(views)


@pytest.fixture(scope="session")
def toy_arch():
    return ArchSpec(input_dim=2, output_dim=1, num_weight_layers=3, lod_widths=(2, 3, 4))


@pytest.fixture
def default_net():
    return init(ArchSpec(), seed=0)
