import pytest

from exchangelab.rotor import AngularBasis, RotorModel, Sector, default_trap, gamma_ramp

RAMP_A = (-4e-4, 4e-4)
RAMP_T = 2e-3


@pytest.fixture(scope="session")
def trap():
    return default_trap()


@pytest.fixture(scope="session")
def fermion_model(trap):
    return RotorModel(trap, AngularBasis(Sector.FERMION_ODD))


@pytest.fixture(scope="session")
def ramp(fermion_model):
    """The 2 ms gamma-rescaled ramp and its adiabaticity profile."""
    return gamma_ramp(fermion_model, *RAMP_A, RAMP_T)
