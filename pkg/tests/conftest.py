import numpy as np
import pytest

from infosale import treasure_box


@pytest.fixture
def box():
    return treasure_box()


@pytest.fixture
def rng():
    return np.random.default_rng(20260816)
