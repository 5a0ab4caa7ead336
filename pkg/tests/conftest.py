import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from models import ModelSpec  # noqa: E402
from spectral_law import PointMass, Rademacher, Semicircle  # noqa: E402


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: acceptance-scale run (deselect with -m 'not slow')")


@pytest.fixture
def rademacher_model():
    return ModelSpec(0.1, Rademacher(), PointMass(0.3))


@pytest.fixture
def semicircle_model():
    return ModelSpec(0.1, Semicircle(), PointMass(0.3))
