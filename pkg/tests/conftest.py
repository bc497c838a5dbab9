import math

import numpy as np
import pytest

from coherework.states import Hamiltonian, Temperature, bloch_qubit


@pytest.fixture
def canonical_qubit():
    """The worked instance used throughout: a = 0.8, theta = pi/3, beta = 1."""
    rho = bloch_qubit(0.8, math.pi / 3)
    h = Hamiltonian(np.diag([-1.0, 1.0]).astype(complex))
    t = Temperature(beta=1.0)
    return rho, h, t
