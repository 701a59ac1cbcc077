import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from kinbayes.network import michaelis_menten, parse_network

settings.register_profile(
    "default", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
BUNDLE = os.path.join(ROOT, "bundles", "michaelis_menten")

MM_THETA = (0.001, 0.2, 0.1)
# bundled MM observations, full state after conservation closure
MM_TIMES = np.arange(0.0, 101.0, 10.0)
MM_E = [120, 71, 76, 81, 80, 90, 90, 104, 103, 109, 109]
MM_S = [301, 219, 180, 150, 108, 86, 61, 52, 35, 29, 22]


def mm_states():
    E = np.array(MM_E)
    S = np.array(MM_S)
    ES = 120 - E
    return np.column_stack([E, S, ES, 301 - S - ES])


@pytest.fixture(scope="session")
def mm():
    return michaelis_menten()


@pytest.fixture(scope="session")
def iso():
    """Irreversible isomerization A -> B."""
    return parse_network("species: A B\nreaction: A -> B\n")


@pytest.fixture(scope="session")
def flip():
    """Reversible isomerization A <-> B (a birth-death chain in the count of B)."""
    return parse_network("species: A B\nreaction fwd: A -> B\nreaction back: B -> A\n")


@pytest.fixture(scope="session")
def birth():
    """Immigration 0 -> A."""
    return parse_network("species: A\nreaction birth: 0 -> A\n")
