import sys
from math import pi
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from singclt import spectral, weights  # noqa: E402


@pytest.fixture
def ref_model():
    """Discrete time, one component with alpha = 0.7 at kappa = pi/2."""
    return spectral.single_component(0.7, pi / 2)


@pytest.fixture
def const_weights():
    return weights.weights_from_components([weights.constant()])


@pytest.fixture
def cos_weights():
    return weights.weights_from_components([weights.cosine(1.3)])
