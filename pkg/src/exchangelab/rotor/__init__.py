"""Protocol-B engine: two trapped ions as a quantum rotor."""

from .adiabatic import (
    GammaMethod,
    GammaProfile,
    Interpolation,
    RampSchedule,
    adaptive_gamma_profile,
    adiabaticity,
    build_ramp,
    gamma_profile,
    gamma_ramp,
)
from .dynamics import (
    CrossValidation,
    Method,
    ParityTransfer,
    Trajectory,
    WaveVector,
    cross_validate,
    frozen_oracle,
    ground_state,
    parity_transfer,
    propagate,
    state_fidelity,
)
from .hamiltonian import (
    AngularBasis,
    BandedHamiltonian,
    BasisKind,
    RotorModel,
    Sector,
    Spectrum,
    converged_size,
    hamiltonian_matrix,
    quadrature_matrix,
    spectrum,
)
from .phases import StrayPhase, round_trip_consistency, stray_phase
from .trap import (
    DESTABILIZED,
    BellWeights,
    RotorCoefficients,
    TrapConfig,
    aharonov_bohm_phase,
    averaged_coulomb,
    bell_excitation_probability,
    critical_splitting,
    default_trap,
    equilibrium_distance,
    rocking_frequency,
    rotor_coefficients,
    trap_frequencies,
)

__all__ = [name for name in dir() if not name.startswith("_")]
