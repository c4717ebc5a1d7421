import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from disloclab.grid import GridSpec, field_from_function


@pytest.fixture
def grid_1d():
    return GridSpec(1, (-3.0,), 0.01, (601,))


@pytest.fixture
def hat_1d(grid_1d):
    return field_from_function(grid_1d, lambda x: np.maximum(1.0 - np.abs(x), -1.0))
