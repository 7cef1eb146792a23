"""Truncated angular-basis Hamiltonian of the two-ion rotor and its spectrum.

``H/hbar = E_rot (-d^2/dtheta^2) + (m r0^2/hbar)(A sin^2 theta + B cos^2 2 theta)``

Using ``sin^2 = (1 - cos 2 theta)/2`` and ``cos^2 2 theta = (1 + cos 4 theta)/2``
the potential only couples harmonics ``n`` and ``n +- 2``, ``n +- 4``; in a
basis ordered by ``n`` with spacing 2 the matrix is pentadiagonal.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.linalg import LinAlgError, eig_banded

from ..errors import ConvergenceFailure
from ..kernels import PentaBands
from .trap import RotorCoefficients, TrapConfig, dA_da, rotor_coefficients

DEFAULT_N = 512


class Sector(enum.Enum):
    FERMION_ODD = "fermion_odd"
    BOSON_EVEN = "boson_even"

    @classmethod
    def for_statistics(cls, stats) -> "Sector":
        name = stats if isinstance(stats, str) else stats.name
        return cls.FERMION_ODD if name == "fermion" else cls.BOSON_EVEN


class BasisKind(enum.Enum):
    COS = "cos"
    SIN = "sin"
    EXP = "exp"


@dataclass(frozen=True)
class AngularBasis:
    """Orthonormal harmonics on [0, 2 pi).

    ``cos``: ``cos(n theta)/sqrt(pi)``, with ``1/sqrt(2 pi)`` for ``n = 0``.
    ``sin``: ``sin(n theta)/sqrt(pi)``.
    ``exp``: ``e^{i n theta}/sqrt(2 pi)`` over both signs of ``n``.
    Fermions use odd ``n``, bosons even ``n``.
    """

    sector: Sector = Sector.FERMION_ODD
    N: int = DEFAULT_N
    kind: BasisKind = BasisKind.COS

    def __post_init__(self):
        object.__setattr__(self, "sector", Sector(self.sector))
        object.__setattr__(self, "kind", BasisKind(self.kind))
        if self.N < 3:
            raise ValueError("basis needs at least 3 functions per sign")

    @cached_property
    def ns(self) -> np.ndarray:
        odd = self.sector is Sector.FERMION_ODD
        if self.kind is BasisKind.COS:
            return 2 * np.arange(self.N) + (1 if odd else 0)
        if self.kind is BasisKind.SIN:
            return 2 * np.arange(self.N) + (1 if odd else 2)
        if odd:
            pos = 2 * np.arange(self.N) + 1
            return np.concatenate([-pos[::-1], pos])
        return 2 * np.arange(-self.N, self.N + 1)

    @property
    def size(self) -> int:
        return int(self.ns.size)

    def with_size(self, N: int) -> "AngularBasis":
        return AngularBasis(self.sector, N, self.kind)

    def evaluate(self, theta) -> np.ndarray:
        """Basis functions on ``theta``; shape ``(len(theta), size)``."""
        theta = np.asarray(theta, dtype=float)[:, None]
        n = self.ns[None, :]
        if self.kind is BasisKind.COS:
            norm = np.where(n == 0, 1 / math.sqrt(2 * math.pi), 1 / math.sqrt(math.pi))
            return norm * np.cos(n * theta)
        if self.kind is BasisKind.SIN:
            return np.sin(n * theta) / math.sqrt(math.pi)
        return np.exp(1j * n * theta) / math.sqrt(2 * math.pi)


def _delta(a, b):
    return (a == b).astype(float)


def cos_multiplier_bands(basis: AngularBasis, k: int) -> list[np.ndarray]:
    """Diagonals 0, 1, 2 of the matrix of ``cos(k theta)`` in ``basis``."""
    ns = basis.ns
    bands = []
    for off in range(3):
        n = ns[: ns.size - off]
        m = ns[off:]
        if basis.kind is BasisKind.COS:
            norm = np.where(n == 0, 1 / math.sqrt(2 * math.pi), 1 / math.sqrt(math.pi)) * np.where(
                m == 0, 1 / math.sqrt(2 * math.pi), 1 / math.sqrt(math.pi)
            )
            integral = 0.5 * math.pi * (1 + _delta(n, 0)) * (_delta(n, m + k) + _delta(n, np.abs(m - k)))
            bands.append(norm * integral)
        elif basis.kind is BasisKind.SIN:
            integral = 0.5 * math.pi * (_delta(n, m + k) + np.sign(m - k) * _delta(n, np.abs(m - k)))
            bands.append(integral / math.pi)
        else:
            bands.append(0.5 * (_delta(n, m + k) + _delta(n, m - k)))
    return bands


@dataclass(frozen=True)
class BandedHamiltonian:
    """Real symmetric pentadiagonal matrix in rad/s.

    ``diagonals[j]`` is the ``j``-th superdiagonal (length ``size - j``).
    """

    diagonals: tuple[np.ndarray, np.ndarray, np.ndarray]
    basis: AngularBasis

    @property
    def size(self) -> int:
        return self.diagonals[0].size

    def upper_form(self) -> np.ndarray:
        """LAPACK upper banded storage, shape ``(3, size)``."""
        n = self.size
        ab = np.zeros((3, n))
        ab[2] = self.diagonals[0]
        ab[1, 1:] = self.diagonals[1]
        ab[0, 2:] = self.diagonals[2]
        return ab

    def dense(self) -> np.ndarray:
        d0, d1, d2 = self.diagonals
        return np.diag(d0) + np.diag(d1, 1) + np.diag(d1, -1) + np.diag(d2, 2) + np.diag(d2, -2)

    def matvec(self, x: np.ndarray) -> np.ndarray:
        d0, d1, d2 = self.diagonals
        y = d0 * x
        y[:-1] += d1 * x[1:]
        y[1:] += d1 * x[:-1]
        y[:-2] += d2 * x[2:]
        y[2:] += d2 * x[:-2]
        return y


def _potential_bands(basis: AngularBasis, inertia: float, A: float, B: float):
    c2 = cos_multiplier_bands(basis, 2)
    c4 = cos_multiplier_bands(basis, 4)
    const = inertia * 0.5 * (A + B)
    out = []
    for j in range(3):
        band = inertia * (-0.5 * A * c2[j] + 0.5 * B * c4[j])
        if j == 0:
            band = band + const
        out.append(band)
    return out


def hamiltonian_matrix(coeffs: RotorCoefficients, basis: AngularBasis) -> BandedHamiltonian:
    """Assemble ``H/hbar`` in ``basis``."""
    pot = _potential_bands(basis, coeffs.inertia, coeffs.A, coeffs.B)
    kin = coeffs.E_rot * basis.ns.astype(float) ** 2
    return BandedHamiltonian((kin + pot[0], pot[1], pot[2]), basis)


def quadrature_matrix(coeffs: RotorCoefficients, basis: AngularBasis, points: int | None = None) -> np.ndarray:
    """Dense ``H/hbar`` from trapezoidal quadrature (exact for trigonometric
    polynomials below the grid Nyquist limit)."""
    nmax = int(np.max(np.abs(basis.ns)))
    points = points or 4 * (nmax + 8)
    theta = 2 * math.pi * np.arange(points) / points
    w = 2 * math.pi / points
    phi = basis.evaluate(theta)
    pot = coeffs.inertia * (coeffs.A * np.sin(theta) ** 2 + coeffs.B * np.cos(2 * theta) ** 2)
    vmat = (phi.conj().T * (w * pot)) @ phi
    kin = np.diag(coeffs.E_rot * basis.ns.astype(float) ** 2)
    return np.real_if_close(kin + vmat, tol=1e6)


@dataclass(frozen=True)
class Spectrum:
    energies: np.ndarray
    vectors: np.ndarray

    def gaps(self) -> np.ndarray:
        return self.energies - self.energies[0]


def _fix_gauge(vectors: np.ndarray) -> np.ndarray:
    idx = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[idx, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return vectors * signs


def spectrum(matrix: BandedHamiltonian, k: int, vectors: bool = True) -> Spectrum:
    """Lowest ``k`` eigenpairs, ascending, via LAPACK banded solvers."""
    if not 1 <= k <= matrix.size:
        raise ValueError("need 1 <= k <= N")
    try:
        if not vectors:
            w = eig_banded(matrix.upper_form(), select="i", select_range=(0, k - 1), eigvals_only=True)
            return Spectrum(np.asarray(w), np.empty((matrix.size, 0)))
        w, v = eig_banded(matrix.upper_form(), select="i", select_range=(0, k - 1))
    except (LinAlgError, ValueError) as exc:
        raise ConvergenceFailure(str(exc)) from exc
    if not np.all(np.isfinite(w)):
        raise ConvergenceFailure("non-finite eigenvalues")
    orth = np.max(np.abs(v.T @ v - np.eye(k)))
    if orth > 1e-9:
        raise ConvergenceFailure(f"eigenvectors not orthonormal ({orth:.1e})")
    return Spectrum(w, _fix_gauge(v))


class RotorModel:
    """Rotor Hamiltonian as an affine function of the asymmetry ``a``."""

    def __init__(self, trap: TrapConfig, basis: AngularBasis | None = None):
        self.trap = trap.with_a(0.0)
        self.basis = basis or AngularBasis()
        self.coeffs0 = rotor_coefficients(self.trap, 0.0)
        self.dA = dA_da(self.trap)
        h0 = hamiltonian_matrix(self.coeffs0, self.basis)
        c2 = cos_multiplier_bands(self.basis, 2)
        inertia = self.coeffs0.inertia
        # dH/da = inertia * dA/da * sin^2 = inertia * dA/da * (1 - cos 2 theta)/2
        h1 = [inertia * self.dA * (-0.5 * c2[j]) for j in range(3)]
        h1[0] = h1[0] + inertia * self.dA * 0.5
        self.bands = PentaBands(h0.diagonals[0], h1[0], h0.diagonals[1], h1[1], h0.diagonals[2], h1[2])

    def coefficients(self, a: float) -> RotorCoefficients:
        return rotor_coefficients(self.trap, a)

    def hamiltonian(self, a: float) -> BandedHamiltonian:
        d, e, f = self.bands.at(a)
        return BandedHamiltonian((d, e, f), self.basis)

    def derivative(self) -> BandedHamiltonian:
        b = self.bands
        return BandedHamiltonian((b.d1, b.e1, b.f1), self.basis)

    def spectrum(self, a: float, k: int, vectors: bool = True) -> Spectrum:
        return spectrum(self.hamiltonian(a), k, vectors)

    def with_basis(self, basis: AngularBasis) -> "RotorModel":
        return RotorModel(self.trap, basis)


def converged_size(trap: TrapConfig, a_values, basis: AngularBasis | None = None, levels: int = 8,
                   rtol: float = 1e-10, max_N: int = 8192) -> int:
    """Smallest ``N`` (by doubling) whose lowest ``levels`` energies match ``2N``."""
    basis = basis or AngularBasis()
    N = basis.N
    while N <= max_N:
        ok = True
        for a in a_values:
            e1 = RotorModel(trap, basis.with_size(N)).spectrum(a, levels, vectors=False).energies
            e2 = RotorModel(trap, basis.with_size(2 * N)).spectrum(a, levels, vectors=False).energies
            if np.max(np.abs(e2 - e1) / np.abs(e2)) >= rtol:
                ok = False
                break
        if ok:
            return N
        N *= 2
    raise ConvergenceFailure(f"no convergence up to N = {max_N}")


def parity_about_half_pi(vector: np.ndarray, basis: AngularBasis) -> float:
    """Expectation of the reflection ``theta -> pi - theta`` (+1 even, -1 odd)."""
    ns = basis.ns
    if basis.kind is BasisKind.EXP:
        index = {int(n): i for i, n in enumerate(ns)}
        mirrored = np.array([vector[index[-int(n)]] for n in ns]) * np.where(ns % 2 == 0, 1.0, -1.0)
        return float(np.real(np.vdot(vector, mirrored)) / np.vdot(vector, vector).real)
    # cos(n(pi - t)) = (-1)^n cos(nt); sin(n(pi - t)) = -(-1)^n sin(nt)
    sign = np.where(ns % 2 == 0, 1.0, -1.0)
    if basis.kind is BasisKind.SIN:
        sign = -sign
    return float(np.sum(sign * np.abs(vector) ** 2) / np.sum(np.abs(vector) ** 2))


def sine_part_population(vector: np.ndarray, basis: AngularBasis) -> float:
    """Weight of the part odd about ``theta = 0`` for an ``exp``-basis vector."""
    if basis.kind is not BasisKind.EXP:
        raise ValueError("needs an exp basis")
    index = {int(n): i for i, n in enumerate(basis.ns)}
    rev = np.array([vector[index[-int(n)]] for n in basis.ns])
    odd = 0.5 * (vector - rev)
    return float(np.vdot(odd, odd).real)
