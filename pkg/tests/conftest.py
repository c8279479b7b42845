import numpy as np
import pytest

from rlcthermo.circuits import two_rc
from rlcthermo.statespace import build_model
from rlcthermo.units import NATURAL


@pytest.fixture
def rng():
    return np.random.default_rng(20240531)


@pytest.fixture
def conduction_model():
    """Two-RC circuit with R=C=L=1, T1=2, T2=1 in natural units."""
    return build_model(two_rc(R=1.0, C=1.0, L=1.0, T1=2.0, T2=1.0), NATURAL)


def natural(spec):
    return build_model(spec, NATURAL)
