import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from oracles import complex_gaussian  # noqa: E402


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def channels(rng):
    """100 random 7x7 complex Gaussian matrices."""
    return complex_gaussian(rng, (100, 7, 7))
