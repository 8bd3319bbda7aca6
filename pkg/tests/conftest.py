import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent.parent))

from src.state_space import random_density  # noqa: E402


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def random_qutrit(rng):
    return random_density(3, rng)


def unit_vector(rng, size):
    v = rng.standard_normal(size)
    return v / np.linalg.norm(v)
