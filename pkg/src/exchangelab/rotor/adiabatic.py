"""Adiabaticity parameter and gamma-rescaled ramp schedules."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from ..errors import DegenerateGroundState, NumericalFailure
from .hamiltonian import RotorModel, Spectrum

DEGENERACY_TOL = 1e-9
MIN_GAMMA_SAMPLES = 200
# refinement level at which the 2 ms ramp overlap settles to ~1e-4
GAMMA_RTOL = 2.5e-4


class GammaMethod(enum.Enum):
    PERTURBATIVE = "perturbative"
    FINITE_DIFFERENCE = "finite_difference"


def _check_gap(spec: Spectrum) -> None:
    gap = spec.energies[1] - spec.energies[0]
    if gap <= DEGENERACY_TOL * max(1.0, abs(spec.energies[0])):
        raise DegenerateGroundState(f"ground-state gap {gap:.3e} rad/s")


def _gamma_perturbative(model: RotorModel, a: float, k: int) -> float:
    spec = model.spectrum(a, k)
    _check_gap(spec)
    dh = model.derivative()
    coupling = spec.vectors[:, 1:].T @ dh.matvec(spec.vectors[:, 0])
    gaps = spec.energies[1:] - spec.energies[0]
    # |<d phi_n/da | phi_0>| = |<phi_n|dH/da|phi_0>| / (E_n - E_0)
    return float(np.sum(np.abs(coupling) / gaps**2))


def _ground_state(model: RotorModel, a: float, reference: np.ndarray) -> np.ndarray:
    v = model.spectrum(a, 1).vectors[:, 0]
    return v if v @ reference >= 0 else -v


def _gamma_finite_difference(model: RotorModel, a: float, k: int, step: float | None, rtol: float) -> float:
    """Central difference of the ground state, projected on the excited states.

    Only the nondegenerate ground state is differentiated, using
    ``<d phi_n/da|phi_0> = -<phi_n|d phi_0/da>`` for real eigenvectors, so
    near-degenerate excited pairs cannot spoil the gauge alignment.
    """
    spec = model.spectrum(a, k)
    _check_gap(spec)
    v0 = spec.vectors[:, 0]
    gaps = spec.energies[1:] - spec.energies[0]
    scale = abs(model.derivative().matvec(v0) @ v0)
    # the ground state rotates on the scale of gap / |dE/da|
    h = step if step is not None else 1e-3 * gaps[0] / max(scale, 1e-300)
    prev = None
    for _ in range(12):
        dv = (_ground_state(model, a + h, v0) - _ground_state(model, a - h, v0)) / (2 * h)
        val = float(np.sum(np.abs(spec.vectors[:, 1:].T @ dv) / gaps))
        if prev is not None and abs(val - prev) <= rtol * abs(val):
            return val
        prev = val
        h *= 0.5
    raise NumericalFailure("finite-difference adiabaticity did not settle")


def adiabaticity(a: float, model: RotorModel, k: int = 16, method: GammaMethod | str = GammaMethod.PERTURBATIVE,
                 step: float | None = None, rtol: float = 1e-4) -> float:
    """``gamma(a) = sum_{n>0} |<d phi_n/da|phi_0>| / (E_n - E_0)`` over the lowest ``k`` states (s per unit ``a``)."""
    method = GammaMethod(method)
    if method is GammaMethod.PERTURBATIVE:
        return _gamma_perturbative(model, a, k)
    return _gamma_finite_difference(model, a, k, step, rtol)


@dataclass(frozen=True)
class GammaProfile:
    a: np.ndarray
    gamma: np.ndarray
    gap: np.ndarray


def gamma_profile(model: RotorModel, a_values, k: int = 16) -> GammaProfile:
    """Adiabaticity parameter and ground-state gap (rad/s) on a grid of ``a``."""
    a_values = np.asarray(a_values, dtype=float)
    gam = np.empty_like(a_values)
    gap = np.empty_like(a_values)
    dh = model.derivative()
    for i, a in enumerate(a_values):
        spec = model.spectrum(a, k)
        _check_gap(spec)
        coupling = spec.vectors[:, 1:].T @ dh.matvec(spec.vectors[:, 0])
        gaps = spec.energies[1:] - spec.energies[0]
        gam[i] = np.sum(np.abs(coupling) / gaps**2)
        gap[i] = gaps[0]
    return GammaProfile(a_values, gam, gap)


def adaptive_gamma_profile(model: RotorModel, a_start: float, a_end: float, initial: int = 401, k: int = 16,
                           rtol: float = GAMMA_RTOL, max_points: int = 6000) -> GammaProfile:
    """Gamma profile refined by interval bisection until linear interpolation
    reproduces every new midpoint to ``rtol`` of the peak value.

    The peaks at the well-splitting points are only a few 1e-6 wide in ``a``,
    so a uniform grid either misses them or wastes most of its points.
    """
    lo, hi = sorted((a_start, a_end))
    a = list(np.linspace(lo, hi, initial))
    prof = gamma_profile(model, a, k)
    pts = dict(zip(prof.a.tolist(), zip(prof.gamma.tolist(), prof.gap.tolist())))
    pending = list(zip(a[:-1], a[1:]))
    while pending and len(pts) < max_points:
        mids = [0.5 * (x + y) for x, y in pending]
        new = gamma_profile(model, mids, k)
        peak = max(max(v[0] for v in pts.values()), float(np.max(new.gamma)))
        nxt = []
        for (x, y), m, g, gap in zip(pending, mids, new.gamma, new.gap):
            pts[m] = (float(g), float(gap))
            if abs(g - 0.5 * (pts[x][0] + pts[y][0])) > rtol * peak:
                nxt.extend([(x, m), (m, y)])
        pending = nxt
    xs = np.array(sorted(pts))
    return GammaProfile(xs, np.array([pts[x][0] for x in xs]), np.array([pts[x][1] for x in xs]))


class Interpolation(enum.Enum):
    LINEAR = "linear"
    HOLD = "hold"


@dataclass(frozen=True)
class RampSchedule:
    """Samples ``(t_k, a_k)`` of the asymmetry parameter.

    ``LINEAR`` interpolates between samples; ``HOLD`` keeps ``a_k`` constant
    on ``[t_k, t_{k+1})`` (the last sample only marks the end time).
    """

    t: np.ndarray
    a: np.ndarray
    interpolation: Interpolation = Interpolation.LINEAR

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float)
        a = np.asarray(self.a, dtype=float)
        if t.ndim != 1 or t.shape != a.shape or t.size < 2:
            raise ValueError("need matching 1D sample arrays of length >= 2")
        if np.any(np.diff(t) <= 0):
            raise ValueError("sample times must increase strictly")
        object.__setattr__(self, "t", t - t[0])
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "interpolation", Interpolation(self.interpolation))

    @property
    def duration(self) -> float:
        return float(self.t[-1])

    @property
    def is_monotone(self) -> bool:
        d = np.diff(self.a)
        return bool(np.all(d >= 0) or np.all(d <= 0))

    def a_at(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if self.interpolation is Interpolation.LINEAR:
            return np.interp(t, self.t, self.a)
        idx = np.clip(np.searchsorted(self.t, t, side="right") - 1, 0, self.t.size - 2)
        return self.a[idx]

    def scaled(self, T: float) -> "RampSchedule":
        return RampSchedule(self.t * (T / self.duration), self.a, self.interpolation)

    def reversed(self) -> "RampSchedule":
        if self.interpolation is Interpolation.HOLD:
            t = self.duration - self.t[::-1]
            return RampSchedule(t, np.append(self.a[-2::-1], self.a[0]), Interpolation.HOLD)
        return RampSchedule(self.duration - self.t[::-1], self.a[::-1])

    def concatenated(self, other: "RampSchedule") -> "RampSchedule":
        if self.interpolation is not Interpolation.LINEAR or other.interpolation is not Interpolation.LINEAR:
            raise ValueError("only linear schedules concatenate")
        if abs(other.a[0] - self.a[-1]) > 1e-15:
            raise ValueError("schedules do not join continuously")
        return RampSchedule(np.concatenate([self.t, self.duration + other.t[1:]]), np.concatenate([self.a, other.a[1:]]))

    def window(self, t0: float, t1: float) -> "RampSchedule":
        """Linear schedule restricted to ``[t0, t1]``, restarted at time zero."""
        if self.interpolation is not Interpolation.LINEAR or not 0 <= t0 < t1 <= self.duration:
            raise ValueError("need a linear schedule and 0 <= t0 < t1 <= duration")
        inner = (self.t > t0) & (self.t < t1)
        t = np.concatenate([[t0], self.t[inner], [t1]])
        return RampSchedule(t, self.a_at(t))

    def time_of(self, a: float) -> float:
        """First time at which the (monotone) schedule reaches ``a``."""
        if not self.is_monotone:
            raise ValueError("needs a monotone schedule")
        sign = 1.0 if self.a[-1] >= self.a[0] else -1.0
        return float(np.interp(sign * a, sign * self.a, self.t))

    def frozen(self, segments: int) -> "RampSchedule":
        """Piecewise-constant version: ``segments`` equal intervals held at their midpoint value."""
        edges = np.linspace(0.0, self.duration, segments + 1)
        mids = self.a_at(0.5 * (edges[:-1] + edges[1:]))
        return RampSchedule(edges, np.append(mids, mids[-1]), Interpolation.HOLD)

    @classmethod
    def constant(cls, a: float, T: float) -> "RampSchedule":
        return cls(np.array([0.0, T]), np.array([a, a]))


def build_ramp(a_start: float, a_end: float, T: float, a_samples, gamma_samples) -> RampSchedule:
    """Schedule with ``da/dt`` proportional to ``1/gamma(a)``, lasting ``T``.

    The dwell time per unit ``a`` is ``gamma``, so ``t(a)`` is the running
    integral of ``gamma`` normalized to ``T``.
    """
    a_samples = np.asarray(a_samples, dtype=float)
    g = np.asarray(gamma_samples, dtype=float)
    if a_samples.size < MIN_GAMMA_SAMPLES or a_samples.shape != g.shape:
        raise ValueError(f"need at least {MIN_GAMMA_SAMPLES} matching gamma samples")
    if np.any(~np.isfinite(g)) or np.any(g <= 0):
        raise ValueError("gamma must be positive and finite")
    if T <= 0 or a_start == a_end:
        raise ValueError("need T > 0 and distinct endpoints")
    order = np.argsort(a_samples)
    xs, gs = a_samples[order], g[order]
    lo, hi = min(a_start, a_end), max(a_start, a_end)
    if xs[0] > lo + 1e-15 or xs[-1] < hi - 1e-15:
        raise ValueError("gamma samples must cover the ramp range")
    inside = (xs > lo) & (xs < hi)
    grid = np.concatenate([[lo], xs[inside], [hi]])
    gg = np.interp(grid, xs, gs)
    if a_end < a_start:
        grid, gg = grid[::-1], gg[::-1]
    cum = np.concatenate([[0.0], np.cumsum(0.5 * (gg[1:] + gg[:-1]) * np.abs(np.diff(grid)))])
    return RampSchedule(T * cum / cum[-1], grid)


def gamma_ramp(model: RotorModel, a_start: float, a_end: float, T: float, rtol: float = GAMMA_RTOL,
               k: int = 16) -> tuple[RampSchedule, GammaProfile]:
    """Adaptive gamma profile of ``model`` and the ramp built from it."""
    prof = adaptive_gamma_profile(model, a_start, a_end, k=k, rtol=rtol)
    return build_ramp(a_start, a_end, T, prof.a, prof.gamma), prof
