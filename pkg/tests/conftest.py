import sys
from pathlib import Path

import numpy as np
import pytest
import torch

sys.path.insert(0, str(Path(__file__).parent))  # make oracles importable

torch.set_num_threads(1)


@pytest.fixture(scope="session")
def sr_corpus():
    from lossforge.data import make_synthetic_corpus

    return make_synthetic_corpus(3, 8, 80, rng_seed=11)


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)


def random_pyramid(rng, base=4, channels=(4, 8, 16, 32), scale=1.0, torch_dtype=torch.float64):
    """A synthetic 4-level pyramid of random feature maps (no network)."""
    from lossforge.lossnet import FeaturePyramid

    levels = []
    size = base * 8
    for c in channels:
        arr = rng.standard_normal((1, c, size, size)) * scale
        levels.append(torch.tensor(arr, dtype=torch_dtype))
        size //= 2
    return FeaturePyramid(levels)
