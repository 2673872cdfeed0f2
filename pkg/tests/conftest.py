import sys
from pathlib import Path

import numpy as np
import pytest

ROOT = Path(__file__).resolve().parent.parent
if str(ROOT) not in sys.path:
    sys.path.insert(0, str(ROOT))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def unit_square():
    from polytope import Polytope
    return Polytope([[0.0, 1.0, 1.0, 0.0], [0.0, 0.0, 1.0, 1.0]])


@pytest.fixture
def segment():
    from polytope import Polytope
    return Polytope([[0.0, 1.0]])


@pytest.fixture
def hexagon():
    from polytope import Polytope, build_regular_polygon_with_apex
    return Polytope(build_regular_polygon_with_apex(6, periodic=False).vertices[:2, :6])
