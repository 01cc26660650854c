import numpy as np
import pytest

from vsystem.models import VParams


@pytest.fixture
def wide_aligned() -> VParams:
    return VParams(gamma=1.0, delta=10.0, p=1.0, nbar=1e3)


@pytest.fixture
def wide_misaligned() -> VParams:
    return VParams(gamma=1.0, delta=10.0, p=0.9, nbar=1e3)


@pytest.fixture
def narrow_aligned() -> VParams:
    return VParams(gamma=1.0, delta=0.1, p=1.0, nbar=1e3)


@pytest.fixture
def narrow_misaligned() -> VParams:
    return VParams(gamma=1.0, delta=0.1, p=0.9, nbar=1e3)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240611)
