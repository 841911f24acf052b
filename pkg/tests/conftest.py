import math
import os
import sys

import pytest

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
sys.path.insert(0, ROOT)
sys.path.insert(0, os.path.join(ROOT, "src"))

from core.expressions import ScalarFunction
from core.kato import transport
from core.reservoir import ReservoirModel
from core.system import TwoLevelSystem, make_smoothstep_profile


def make_system(e21="1", theta_max=math.pi / 3, order=9, t_flat=0.02, b1="1", b2="0", delta=0.5, e_mean="0",
                profile=None):
    return TwoLevelSystem(
        e21=ScalarFunction(e21),
        e_mean=ScalarFunction(e_mean),
        theta_max=theta_max,
        profile=profile or make_smoothstep_profile(order, t_flat),
        b1=ScalarFunction(b1),
        b2=ScalarFunction(b2),
        delta=delta,
    )


@pytest.fixture(scope="session")
def reference_system():
    return make_system()


@pytest.fixture(scope="session")
def downward_system():
    """Reference drive starting in the excited level"""
    return make_system(e21="-1")


@pytest.fixture(scope="session")
def static_system():
    return make_system(theta_max=0.0)


@pytest.fixture(scope="session")
def reference_transport(reference_system):
    return transport(reference_system)


@pytest.fixture(scope="session")
def downward_transport(downward_system):
    return transport(downward_system)


@pytest.fixture(scope="session")
def static_transport(static_system):
    return transport(static_system)


@pytest.fixture(scope="session")
def reservoir_m2():
    return ReservoirModel(g0=0.1, exponent=2.0)


@pytest.fixture(scope="session")
def reservoir_m1():
    return ReservoirModel(g0=0.1, exponent=1.0)


@pytest.fixture(scope="session")
def thermal_reservoir():
    """mu = 3 at beta = 2, decay exponent m = 2"""
    return ReservoirModel(g0=0.1, exponent=3.0, beta=2.0)
