import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from todaent.config import preset_center, preset_model


@pytest.fixture(scope="session")
def regular_params():
    return preset_model("regular")


@pytest.fixture(scope="session")
def chaotic_params():
    return preset_model("chaotic")


@pytest.fixture(scope="session")
def regular_center(regular_params):
    return preset_center("regular", regular_params)


@pytest.fixture(scope="session")
def chaotic_center(chaotic_params):
    return preset_center("chaotic", chaotic_params)


@pytest.fixture(scope="session")
def small_regular_spectral(regular_params):
    """Shared hbar=0.5 decomposition; big enough for real dynamics, fast to build."""
    from todaent.quantum import BasisSpec, build_hamiltonian, spectral_decompose

    basis = BasisSpec(hbar=0.5, n_max=32)
    h = build_hamiltonian(regular_params, basis)
    return spectral_decompose(h, basis, regular_params)


def rng(seed=0):
    return np.random.default_rng(seed)
