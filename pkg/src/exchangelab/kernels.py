"""Hot inner loops, each with a numba implementation and a numpy twin.

Two kernels live here:

* ``two_level_rk4``: fixed-step RK4 propagation of a driven two-level
  system under several simultaneous tones, for a batch of static detunings.
* ``crank_nicolson_pentadiagonal``: Crank-Nicolson stepping of a real
  symmetric pentadiagonal Hamiltonian that is affine in one control
  parameter, ``H(a) = H0 + a * H1``.

The dispatchers take ``backend=None`` (environment default), ``"numba"``
or ``"numpy"``.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import solve_banded

from ._accel import njit, resolve_backend

__all__ = ["two_level_rk4", "crank_nicolson_pentadiagonal", "PentaBands"]


# ---------------------------------------------------------------------------
# Driven two-level system
# ---------------------------------------------------------------------------
# H(t) = (Delta/2) sigma_z + sum_k (Omega_k/2) (e^{-i w_k t} e^{i chi_k} |up><down| + h.c.)
# with basis order (up, down).


@njit
def _hamiltonian_entries(t, detuning, rabi, freqs, chis):
    cpl = 0.0j
    for k in range(freqs.shape[0]):
        cpl += 0.5 * rabi[k] * np.exp(1j * (chis[k] - freqs[k] * t))
    return 0.5 * detuning, cpl


@njit
def _rk4_numba(detunings, rabi, freqs, chis, duration, nsteps):
    nsite = detunings.shape[0]
    out = np.empty((nsite, 2, 2), dtype=np.complex128)
    h = duration / nsteps
    for s in range(nsite):
        det = detunings[s]
        # columns evolve independently: dU/dt = -i H U
        u00 = 1.0 + 0.0j
        u01 = 0.0j
        u10 = 0.0j
        u11 = 1.0 + 0.0j
        for step in range(nsteps):
            t = step * h
            d1, c1 = _hamiltonian_entries(t, det, rabi, freqs, chis)
            d2, c2 = _hamiltonian_entries(t + 0.5 * h, det, rabi, freqs, chis)
            d4, c4 = _hamiltonian_entries(t + h, det, rabi, freqs, chis)
            # H = [[d, c], [conj(c), -d]]
            k1_00 = -1j * (d1 * u00 + c1 * u10)
            k1_10 = -1j * (np.conj(c1) * u00 - d1 * u10)
            k1_01 = -1j * (d1 * u01 + c1 * u11)
            k1_11 = -1j * (np.conj(c1) * u01 - d1 * u11)

            a00 = u00 + 0.5 * h * k1_00
            a10 = u10 + 0.5 * h * k1_10
            a01 = u01 + 0.5 * h * k1_01
            a11 = u11 + 0.5 * h * k1_11
            k2_00 = -1j * (d2 * a00 + c2 * a10)
            k2_10 = -1j * (np.conj(c2) * a00 - d2 * a10)
            k2_01 = -1j * (d2 * a01 + c2 * a11)
            k2_11 = -1j * (np.conj(c2) * a01 - d2 * a11)

            a00 = u00 + 0.5 * h * k2_00
            a10 = u10 + 0.5 * h * k2_10
            a01 = u01 + 0.5 * h * k2_01
            a11 = u11 + 0.5 * h * k2_11
            k3_00 = -1j * (d2 * a00 + c2 * a10)
            k3_10 = -1j * (np.conj(c2) * a00 - d2 * a10)
            k3_01 = -1j * (d2 * a01 + c2 * a11)
            k3_11 = -1j * (np.conj(c2) * a01 - d2 * a11)

            a00 = u00 + h * k3_00
            a10 = u10 + h * k3_10
            a01 = u01 + h * k3_01
            a11 = u11 + h * k3_11
            k4_00 = -1j * (d4 * a00 + c4 * a10)
            k4_10 = -1j * (np.conj(c4) * a00 - d4 * a10)
            k4_01 = -1j * (d4 * a01 + c4 * a11)
            k4_11 = -1j * (np.conj(c4) * a01 - d4 * a11)

            u00 += h / 6.0 * (k1_00 + 2.0 * k2_00 + 2.0 * k3_00 + k4_00)
            u10 += h / 6.0 * (k1_10 + 2.0 * k2_10 + 2.0 * k3_10 + k4_10)
            u01 += h / 6.0 * (k1_01 + 2.0 * k2_01 + 2.0 * k3_01 + k4_01)
            u11 += h / 6.0 * (k1_11 + 2.0 * k2_11 + 2.0 * k3_11 + k4_11)
        out[s, 0, 0] = u00
        out[s, 0, 1] = u01
        out[s, 1, 0] = u10
        out[s, 1, 1] = u11
    return out


def _rk4_numpy(detunings, rabi, freqs, chis, duration, nsteps):
    nsite = detunings.shape[0]
    h = duration / nsteps
    u = np.broadcast_to(np.eye(2, dtype=np.complex128), (nsite, 2, 2)).copy()
    half_det = 0.5 * detunings

    def ham(t):
        cpl = np.sum(0.5 * rabi * np.exp(1j * (chis - freqs * t)))
        hm = np.empty((nsite, 2, 2), dtype=np.complex128)
        hm[:, 0, 0] = half_det
        hm[:, 1, 1] = -half_det
        hm[:, 0, 1] = cpl
        hm[:, 1, 0] = np.conj(cpl)
        return hm

    for step in range(nsteps):
        t = step * h
        h1, h2, h4 = ham(t), ham(t + 0.5 * h), ham(t + h)
        k1 = -1j * (h1 @ u)
        k2 = -1j * (h2 @ (u + 0.5 * h * k1))
        k3 = -1j * (h2 @ (u + 0.5 * h * k2))
        k4 = -1j * (h4 @ (u + h * k3))
        u = u + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return u


def two_level_rk4(
    detunings,
    rabi,
    freqs,
    chis,
    duration: float,
    nsteps: int,
    backend: str | None = None,
) -> np.ndarray:
    """Propagators ``U(duration)`` for each static detuning, shape ``(len(detunings), 2, 2)``.

    ``rabi``, ``freqs`` and ``chis`` describe the tones: Rabi angular
    frequency, angular frequency in the rotating frame, and drive phase.
    """
    detunings = np.ascontiguousarray(detunings, dtype=np.float64).reshape(-1)
    rabi = np.ascontiguousarray(rabi, dtype=np.float64).reshape(-1)
    freqs = np.ascontiguousarray(freqs, dtype=np.float64).reshape(-1)
    chis = np.ascontiguousarray(chis, dtype=np.float64).reshape(-1)
    if not (rabi.shape == freqs.shape == chis.shape):
        raise ValueError("tone arrays must share one shape")
    if nsteps < 1:
        raise ValueError("nsteps must be positive")
    if resolve_backend(backend) == "numba":
        return _rk4_numba(detunings, rabi, freqs, chis, float(duration), int(nsteps))
    return _rk4_numpy(detunings, rabi, freqs, chis, float(duration), int(nsteps))


# ---------------------------------------------------------------------------
# Crank-Nicolson on an affine pentadiagonal Hamiltonian
# ---------------------------------------------------------------------------


class PentaBands:
    """Real symmetric pentadiagonal matrix ``H0 + a*H1`` stored by diagonals.

    ``d*`` hold the main diagonal (length N), ``e*`` the first and ``f*``
    the second off-diagonal (lengths N-1 and N-2).
    """

    __slots__ = ("d0", "d1", "e0", "e1", "f0", "f1")

    def __init__(self, d0, d1, e0, e1, f0, f1):
        self.d0 = np.ascontiguousarray(d0, dtype=np.float64)
        self.d1 = np.ascontiguousarray(d1, dtype=np.float64)
        self.e0 = np.ascontiguousarray(e0, dtype=np.float64)
        self.e1 = np.ascontiguousarray(e1, dtype=np.float64)
        self.f0 = np.ascontiguousarray(f0, dtype=np.float64)
        self.f1 = np.ascontiguousarray(f1, dtype=np.float64)
        n = self.d0.shape[0]
        if n < 3:
            raise ValueError("need at least three basis functions")
        for arr, length in ((self.d1, n), (self.e0, n - 1), (self.e1, n - 1), (self.f0, n - 2), (self.f1, n - 2)):
            if arr.shape != (length,):
                raise ValueError("inconsistent band lengths")

    @property
    def size(self) -> int:
        return self.d0.shape[0]

    def at(self, a: float):
        return self.d0 + a * self.d1, self.e0 + a * self.e1, self.f0 + a * self.f1


@njit
def _penta_matvec(d, e, f, x, out):
    n = d.shape[0]
    for i in range(n):
        acc = d[i] * x[i]
        if i >= 1:
            acc += e[i - 1] * x[i - 1]
        if i >= 2:
            acc += f[i - 2] * x[i - 2]
        if i + 1 < n:
            acc += e[i] * x[i + 1]
        if i + 2 < n:
            acc += f[i] * x[i + 2]
        out[i] = acc


@njit
def _cn_numba(d0, d1, e0, e1, f0, f1, a_steps, eref, dt, psi0, record_every):
    n = d0.shape[0]
    nsteps = a_steps.shape[0]
    nrec = nsteps // record_every + 1
    records = np.empty((nrec, n), dtype=np.complex128)
    psi = psi0.copy()
    records[0] = psi
    hx = np.empty(n, dtype=np.complex128)
    diag = np.empty(n, dtype=np.complex128)
    sup1 = np.empty(n, dtype=np.complex128)
    sup2 = np.empty(n, dtype=np.complex128)
    low1 = np.empty(n, dtype=np.complex128)
    low2 = np.empty(n, dtype=np.complex128)
    rhs = np.empty(n, dtype=np.complex128)
    d = np.empty(n)
    e = np.empty(n - 1)
    f = np.empty(n - 2)
    irec = 1
    for step in range(nsteps):
        a = a_steps[step]
        for i in range(n):
            d[i] = d0[i] + a * d1[i] - eref[step]
        for i in range(n - 1):
            e[i] = e0[i] + a * e1[i]
        for i in range(n - 2):
            f[i] = f0[i] + a * f1[i]
        _penta_matvec(d, e, f, psi, hx)
        c = 0.5j * dt
        for i in range(n):
            rhs[i] = psi[i] - c * hx[i]
            diag[i] = 1.0 + c * d[i]
        for i in range(n - 1):
            sup1[i] = c * e[i]
            low1[i] = c * e[i]
        for i in range(n - 2):
            sup2[i] = c * f[i]
            low2[i] = c * f[i]
        # banded elimination without pivoting; stable because the
        # Hermitian part of I + i*c*H is the identity
        for i in range(n):
            piv = diag[i]
            if i + 1 < n:
                m = low1[i] / piv
                diag[i + 1] -= m * sup1[i]
                if i + 2 < n:
                    sup1[i + 1] -= m * sup2[i]
                rhs[i + 1] -= m * rhs[i]
            if i + 2 < n:
                m = low2[i] / piv
                low1[i + 1] -= m * sup1[i]
                diag[i + 2] -= m * sup2[i]
                rhs[i + 2] -= m * rhs[i]
        for i in range(n - 1, -1, -1):
            acc = rhs[i]
            if i + 1 < n:
                acc -= sup1[i] * psi[i + 1]
            if i + 2 < n:
                acc -= sup2[i] * psi[i + 2]
            psi[i] = acc / diag[i]
        if (step + 1) % record_every == 0:
            records[irec] = psi
            irec += 1
    return psi, records[:irec]


def _cn_numpy(d0, d1, e0, e1, f0, f1, a_steps, eref, dt, psi0, record_every):
    n = d0.shape[0]
    psi = psi0.copy()
    records = [psi.copy()]
    c = 0.5j * dt
    ab = np.zeros((5, n), dtype=np.complex128)
    for step, a in enumerate(a_steps):
        d = d0 + a * d1 - eref[step]
        e = e0 + a * e1
        f = f0 + a * f1
        hx = d * psi
        hx[:-1] += e * psi[1:]
        hx[1:] += e * psi[:-1]
        hx[:-2] += f * psi[2:]
        hx[2:] += f * psi[:-2]
        rhs = psi - c * hx
        ab[0, 2:] = c * f
        ab[1, 1:] = c * e
        ab[2, :] = 1.0 + c * d
        ab[3, :-1] = c * e
        ab[4, :-2] = c * f
        psi = solve_banded((2, 2), ab, rhs, check_finite=False)
        if (step + 1) % record_every == 0:
            records.append(psi.copy())
    return psi, np.array(records)


def crank_nicolson_pentadiagonal(
    bands: PentaBands,
    a_steps,
    eref,
    dt: float,
    psi0,
    record_every: int = 1,
    backend: str | None = None,
):
    """Advance ``psi0`` through ``len(a_steps)`` Crank-Nicolson steps of size ``dt``.

    Step ``j`` uses ``H(a_steps[j]) - eref[j]``; the reference energy only
    contributes a global phase but keeps the Cayley transform accurate when
    absolute energies are large.  Returns the final state and the states
    recorded every ``record_every`` steps (the initial state included).
    """
    a_steps = np.ascontiguousarray(a_steps, dtype=np.float64)
    eref = np.ascontiguousarray(eref, dtype=np.float64)
    if a_steps.shape != eref.shape:
        raise ValueError("a_steps and eref must have the same length")
    psi0 = np.ascontiguousarray(psi0, dtype=np.complex128)
    if psi0.shape != (bands.size,):
        raise ValueError("state length does not match the Hamiltonian")
    record_every = max(1, int(record_every))
    args = (bands.d0, bands.d1, bands.e0, bands.e1, bands.f0, bands.f1, a_steps, eref, float(dt), psi0, record_every)
    if resolve_backend(backend) == "numba":
        return _cn_numba(*args)
    return _cn_numpy(*args)
