"""Dynamical phase picked up from a stray quadrupole along a ramp."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import MinimumTrackingFailure
from .adiabatic import RampSchedule
from .trap import TrapConfig, rotor_coefficients

MAX_JUMP = 0.1
NEWTON_ITERS = 200


def _dv(theta, A, B):
    return A * math.sin(2 * theta) - 2 * B * math.sin(4 * theta)


def _d2v(theta, A, B):
    return 2 * A * math.cos(2 * theta) - 8 * B * math.cos(4 * theta)


def refine_minimum(theta0: float, A: float, B: float, max_step: float = 0.05) -> float:
    """Local minimum of ``A sin^2 + B cos^2 2 theta`` on ``[0, pi/2]`` near ``theta0``.

    Newton steps on the local parabola; where the curvature is not positive
    the walk moves downhill, and a flat start moves toward larger theta.
    """
    lo, hi = 0.0, 0.5 * math.pi
    th = min(max(theta0, lo), hi)
    for _ in range(NEWTON_ITERS):
        g, h = _dv(th, A, B), _d2v(th, A, B)
        if h > 0:
            step = -g / h
        else:
            step = -math.copysign(max_step, g) if g != 0 else max_step
        step = max(-max_step, min(max_step, step))
        new = min(max(th + step, lo), hi)
        if abs(new - th) < 1e-14:
            return new
        th = new
    return th


def closed_form_minimum(A: float, B: float) -> float:
    return 0.5 * math.acos(min(1.0, max(-1.0, A / (4 * B))))


@dataclass(frozen=True)
class StrayPhase:
    phase: float
    t: np.ndarray
    theta_min: np.ndarray
    max_closed_form_deviation: float


def stray_phase(A_prime: float, schedule: RampSchedule, trap: TrapConfig, samples: int = 20001) -> StrayPhase:
    """``phi_s = (m r0^2 A'/hbar) int dt [sin^2(th+pi/4) - sin^2(pi/4-th)]`` at the tracked minimum.

    The bracket equals ``sin 2 theta_min``; the integral uses the trapezoid
    rule on ``samples`` equally spaced times.
    """
    ts = np.linspace(0.0, schedule.duration, samples)
    avals = schedule.a_at(ts)
    c0 = rotor_coefficients(trap, float(avals[0]))
    theta = np.empty(samples)
    dev = 0.0
    prev = closed_form_minimum(c0.A, c0.B)
    for i, a in enumerate(avals):
        c = rotor_coefficients(trap, float(a))
        th = refine_minimum(prev, c.A, c.B)
        if i and abs(th - prev) > MAX_JUMP:
            raise MinimumTrackingFailure(f"theta_min jumped by {abs(th - prev):.3f} rad at t = {ts[i]:.3e} s")
        dev = max(dev, abs(th - closed_form_minimum(c.A, c.B)))
        theta[i] = prev = th
    bracket = np.sin(theta + math.pi / 4) ** 2 - np.sin(math.pi / 4 - theta) ** 2
    phase = c0.inertia * A_prime * float(np.trapezoid(bracket, ts))
    return StrayPhase(phase, ts, theta, dev)


def round_trip_consistency(A_prime: float, schedule: RampSchedule, trap: TrapConfig, samples: int = 20001) -> float:
    """Wrapped difference between the forward-backward phase and twice the single pass."""
    single = stray_phase(A_prime, schedule, trap, samples).phase
    both = stray_phase(A_prime, schedule.concatenated(schedule.reversed()), trap, 2 * samples - 1).phase
    return float(abs(math.remainder(both - 2 * single, 2 * math.pi)))
