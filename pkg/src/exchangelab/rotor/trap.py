"""Paul-trap statics for a two-ion crystal in the radial plane."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace

import numpy as np
from scipy import constants as sc
from scipy.integrate import quad

from ..errors import UnstableConfig

E_CHARGE = sc.e
EPS0 = sc.epsilon_0
HBAR = sc.hbar
AMU = sc.physical_constants["atomic mass constant"][0]
MASS_CA40 = 39.962591 * AMU - sc.m_e  # singly charged ion

COULOMB_K = E_CHARGE**2 / (4 * math.pi * EPS0)


@dataclass(frozen=True)
class TrapConfig:
    Omega_rf: float
    q: float
    a_z: float
    mass: float = MASS_CA40
    a: float = 0.0
    charge: float = E_CHARGE

    def __post_init__(self):
        if self.a_z <= 0:
            raise UnstableConfig("axial parameter must be positive")
        if self.q**2 / 2 - self.a_z / 2 - abs(self.a) <= 0:
            raise UnstableConfig("radial confinement lost: q^2/2 - a_z/2 - |a| <= 0")

    @classmethod
    def from_axial_frequency(cls, Omega_rf: float, q: float, omega_z: float, **kw) -> "TrapConfig":
        return cls(Omega_rf=Omega_rf, q=q, a_z=(2 * omega_z / Omega_rf) ** 2, **kw)

    def with_a(self, a: float) -> "TrapConfig":
        return replace(self, a=a)


def default_trap(a: float = 0.0) -> TrapConfig:
    """40Ca+ in a 20 MHz drive with q = 0.2 and a 1.4 MHz axial frequency."""
    return TrapConfig.from_axial_frequency(2 * math.pi * 20e6, 0.2, 2 * math.pi * 1.4e6, a=a)


@dataclass(frozen=True)
class TrapFrequencies:
    omega_x: float
    omega_y: float
    omega_perp: float
    omega_z: float


def trap_frequencies(cfg: TrapConfig) -> TrapFrequencies:
    """Secular angular frequencies including the dc asymmetry ``a``."""
    half = cfg.Omega_rf / 2
    base = cfg.q**2 / 2 - cfg.a_z / 2
    if base - abs(cfg.a) <= 0:
        raise UnstableConfig("radial confinement lost")
    return TrapFrequencies(
        omega_x=half * math.sqrt(base + cfg.a),
        omega_y=half * math.sqrt(base - cfg.a),
        omega_perp=half * math.sqrt(base),
        omega_z=half * math.sqrt(cfg.a_z),
    )


def equilibrium_distance(mass: float, omega_perp: float, charge: float = E_CHARGE) -> float:
    """Ion separation ``2 r0`` from the trap/Coulomb force balance."""
    if mass <= 0 or omega_perp <= 0:
        raise ValueError("mass and frequency must be positive")
    return (charge**2 / (2 * math.pi * EPS0 * mass * omega_perp**2)) ** (1.0 / 3.0)


def force_residual(mass: float, omega_perp: float, distance: float, charge: float = E_CHARGE) -> float:
    """Relative imbalance of trap and Coulomb forces on one ion at ``distance``."""
    trap = mass * omega_perp**2 * distance / 2
    coul = charge**2 / (4 * math.pi * EPS0 * distance**2)
    return (trap - coul) / coul


class Stability(enum.Enum):
    DESTABILIZED = "destabilized"


DESTABILIZED = Stability.DESTABILIZED


def rocking_frequency(omega_x: float, omega_y: float, q: float) -> float | Stability:
    """Micromotion-corrected rocking frequency, or ``DESTABILIZED``."""
    rad = omega_y**2 - omega_x**2 * (1 + 1.5 * q**2)
    if rad < 0:
        return DESTABILIZED
    return math.sqrt(rad)


def critical_splitting(q: float, omega_perp: float) -> float:
    """Normal-mode splitting at which the rocking mode turns quartic."""
    return 0.75 * q**2 * omega_perp


def critical_a(cfg: TrapConfig) -> float:
    """``a`` at which ``A = 4B`` (the quartic point, with ``A > 0``)."""
    f = trap_frequencies(cfg.with_a(0.0))
    B = 0.375 * cfg.q**2 * f.omega_perp**2
    return -4 * B / (2 * (cfg.Omega_rf / 2) ** 2)


def averaged_coulomb(r: float, theta: float, q: float, charge: float = E_CHARGE) -> float:
    """rf-cycle-averaged Coulomb energy (J) at separation ``r`` and angle ``theta``."""
    if r <= 0 or not 0 <= q < 0.5:
        raise ValueError("need r > 0 and 0 <= q < 0.5")
    k = charge**2 / (4 * math.pi * EPS0)
    return k / r * (1 + q**2 / 16 * (3 * math.cos(2 * theta) ** 2 - 1))


def averaged_coulomb_quadrature(r: float, theta: float, q: float, charge: float = E_CHARGE) -> float:
    """Direct average over one rf period of the micromotion-modulated separation."""
    k = charge**2 / (4 * math.pi * EPS0)
    x, y = r * math.cos(theta), r * math.sin(theta)

    def inv_dist(phase):
        c = math.cos(phase)
        return 1.0 / math.hypot(x * (1 + q / 2 * c), y * (1 - q / 2 * c))

    val, _ = quad(inv_dist, 0.0, 2 * math.pi, epsabs=0, epsrel=1e-13, limit=200)
    return k * val / (2 * math.pi)


@dataclass(frozen=True)
class RotorCoefficients:
    A: float
    B: float
    r0: float
    mass: float

    @property
    def inertia(self) -> float:
        """``m r0^2 / hbar`` in seconds, converts s^-2 curvatures to rad/s."""
        return self.mass * self.r0**2 / HBAR

    @property
    def E_rot(self) -> float:
        return HBAR / (4 * self.mass * self.r0**2)


def rotor_coefficients(cfg: TrapConfig, a: float | None = None) -> RotorCoefficients:
    """Angular-potential coefficients; ``r0`` stays at its symmetric-trap value."""
    a = cfg.a if a is None else a
    f0 = trap_frequencies(cfg.with_a(0.0))
    f = trap_frequencies(cfg.with_a(a))
    r0 = equilibrium_distance(cfg.mass, f0.omega_perp, cfg.charge) / 2
    return RotorCoefficients(
        A=f.omega_y**2 - f.omega_x**2,
        B=0.375 * cfg.q**2 * f0.omega_perp**2,
        r0=r0,
        mass=cfg.mass,
    )


def dA_da(cfg: TrapConfig) -> float:
    return -2 * (cfg.Omega_rf / 2) ** 2


def angular_potential(theta, coeffs: RotorCoefficients):
    """Angular potential in rad/s: ``(m r0^2/hbar)(A sin^2 + B cos^2 2 theta)``."""
    theta = np.asarray(theta, dtype=float)
    return coeffs.inertia * (coeffs.A * np.sin(theta) ** 2 + coeffs.B * np.cos(2 * theta) ** 2)


def aharonov_bohm_phase(B_field: float, r0: float, charge: float = E_CHARGE) -> float:
    """Flux phase of a charge encircling a ring of radius ``r0``."""
    if B_field < 0 or r0 <= 0:
        raise ValueError("need B >= 0 and r0 > 0")
    return charge * B_field * math.pi * r0**2 / HBAR


@dataclass(frozen=True)
class BellWeights:
    triplet: float
    singlet: float
    excitation: float


def bell_excitation_probability(phi: float, fermions: bool = True) -> BellWeights:
    """Final rocking excitation for the spin state ``(|ud> + e^{i phi}|du>)/sqrt 2``.

    The spin triplet weight pairs with an antisymmetric spatial state for
    fermions, which the exchange maps onto the excited state.
    """
    trip = abs((1 + np.exp(1j * phi)) / 2) ** 2
    sing = abs((1 - np.exp(1j * phi)) / 2) ** 2
    return BellWeights(float(trip), float(sing), float(trip if fermions else sing))
