import numpy as np
import pytest

from nolmswitch.quantum import BellState, DensityMatrix, bell_state


@pytest.fixture
def rng():
    return np.random.default_rng(20240613)


@pytest.fixture
def phi_plus():
    return DensityMatrix.from_ket(bell_state(BellState.PHI_PLUS))


@pytest.fixture
def output_dir(tmp_path):
    return tmp_path / 'output'
