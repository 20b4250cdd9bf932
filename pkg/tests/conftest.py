import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from bmadex.simulate import SimConfig, generate_dataset  # noqa: E402


@pytest.fixture(scope="session")
def small_sim():
    """One small confounded dataset shared by fast tests."""
    cfg = SimConfig(n=40, genes=400, f_s=0.1, f_g=0.1, f_d=0.0, seed=11)
    dataset, truth = generate_dataset(cfg, replicate=0)
    return cfg, dataset, truth


@pytest.fixture
def rng():
    return np.random.default_rng(20120817)
