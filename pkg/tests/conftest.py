import numpy as np
import pytest
from hypothesis import settings

from qsmooth import SystemSpec, make_system

from qs_testlib import PLUS, SZ

settings.register_profile("qsmooth", database=None, max_examples=50,
                          deadline=None, derandomize=True)
settings.load_profile("qsmooth")


@pytest.fixture
def qnd_sys() -> SystemSpec:
    """Dispersive benchmark: H = 0, L = sigma_z, rho0 = |+><+|."""
    return make_system(np.zeros((2, 2), dtype=complex), SZ, PLUS)
