import pytest

from tkflen.model import ModelParams
from tkflen.simulate import SimConfig


@pytest.fixture
def half():
    return ModelParams(0.5)


@pytest.fixture
def cfg():
    return SimConfig(seed=12345, threads=1)
