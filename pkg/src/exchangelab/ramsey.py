"""Two-atom Ramsey interferometer on a spin-dependent lattice.

Builds the one- and two-dimensional transport sequences, executes them on
the :mod:`exchangelab.fock` engine and analyses the post-selected spin-parity
fringe.

Conventions
-----------
* ``up`` atoms are shifted along the positive lattice direction, ``down``
  atoms along the negative one (1D); in 2D the two spin states follow
  mirrored L-shaped paths.
* Stage 1 is the first pi/2 pulse at (L1, R1), stage 3 the pi pulse at the
  outermost sites (L3, R3), stage 2 the final pi/2 pulse at (L2, R2).
* The control phase is ``phi = dphi1 + dphi2 + dphi3`` with
  ``dphi_i = phi_{L_i} - phi_{R_i}``.  Ideal pulses give
  ``<Pi> = -cos(phi_ex - phi)``.  The form ``cos(phi - phi_ex)`` is the same
  fringe shifted by pi in ``phi``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from . import fock
from .errors import BadSeparation, DegenerateFit, NotDensityMatrix
from .fock import ModeLabel, Site, Spin, Statistics, TwoParticleState, as_site

FIT_POINTS = 32
VIB_LEVELS_PER_AXIS = 3


class Variant(enum.Enum):
    ONE_DIM = "one_dim"
    TWO_DIM = "two_dim"


class QuantAxis(enum.Enum):
    """Direction of the quantization axis (and of magnetic gradients) in 2D."""

    DIAGONAL = "diagonal"
    ANTIDIAGONAL = "antidiagonal"


@dataclass(frozen=True)
class PhaseSettings:
    dphi1: float = 0.0
    dphi2: float = 0.0
    dphi3: float = 0.0

    @property
    def control_phase(self) -> float:
        return self.dphi1 + self.dphi2 + self.dphi3

    def site_phases(self, stage: int) -> tuple[float, float]:
        """Split the relative phase of ``stage`` symmetrically into (phi_L, phi_R)."""
        d = {1: self.dphi1, 2: self.dphi2, 3: self.dphi3}[stage]
        return 0.5 * d, -0.5 * d


# ---------------------------------------------------------------------------
# Plan
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Shift:
    """Spin-dependent shift: up moves by ``up``, down by its mirror image."""

    up: Site
    duration: float = 1.0

    @property
    def down(self) -> Site:
        return tuple(-c for c in self.up)

    def displacement(self, spin: Spin) -> Site:
        return self.up if spin is Spin.UP else self.down


class Convention(enum.Enum):
    HALF_PI = "half_pi"  # rows (1, e^{-i phi}), (-e^{i phi}, 1)
    PI = "pi"  # rows (0, e^{i phi}), (-e^{-i phi}, 0)


@dataclass(frozen=True)
class Pulse:
    stage: int
    sites: tuple[Site, ...]
    angle: float
    phases: tuple[float, ...]
    convention: Convention

    def unitaries(self) -> dict[Site, np.ndarray]:
        rot = fock.rotation_half_pi_convention if self.convention is Convention.HALF_PI else fock.rotation_pi_convention
        return {s: rot(self.angle, p) for s, p in zip(self.sites, self.phases)}


@dataclass(frozen=True)
class Readout:
    sites: tuple[Site, Site]


@dataclass(frozen=True)
class Geometry:
    L1: Site
    R1: Site
    L2: Site
    R2: Site
    L3: Site
    R3: Site
    inner_left: Site
    inner_right: Site


@dataclass(frozen=True)
class SequencePlan:
    n: int
    variant: Variant
    phases: PhaseSettings
    geometry: Geometry
    steps: tuple
    quant_axis: tuple[float, ...]

    @property
    def dim(self) -> int:
        return len(self.geometry.L1)

    def shifts(self) -> list[Shift]:
        return [s for s in self.steps if isinstance(s, Shift)]

    def shift_counts(self) -> tuple[int, int]:
        """Number of shifts before and after the stage-3 pulse."""
        before = after = 0
        seen_pi = False
        for s in self.steps:
            if isinstance(s, Pulse) and s.stage == 3:
                seen_pi = True
            elif isinstance(s, Shift):
                if seen_pi:
                    after += 1
                else:
                    before += 1
        return before, after

    def pulse(self, stage: int) -> Pulse:
        return next(s for s in self.steps if isinstance(s, Pulse) and s.stage == stage)

    def readout_sites(self) -> tuple[Site, Site]:
        return next(s for s in self.steps if isinstance(s, Readout)).sites

    def collisions(self) -> list[tuple[tuple[Spin, Spin], int]]:
        """Instants at which the two particles of a spin branch share a site.

        Branches are labelled by the spins of the left and right atom right
        after the first pulse.  The index counts completed shifts; ideal pi
        flips at the stage-3 sites are applied.
        """
        out = []
        flips = set(self.pulse(3).sites)
        for sl in Spin:
            for sr in Spin:
                pos = [self.geometry.L1, self.geometry.R1]
                spins = [sl, sr]
                k = 0
                for step in self.steps:
                    if isinstance(step, Pulse) and step.stage == 3:
                        spins = [Spin(1 - s) if p in flips else s for p, s in zip(pos, spins)]
                    elif isinstance(step, Shift):
                        pos = [_add(p, step.displacement(s)) for p, s in zip(pos, spins)]
                        k += 1
                        if pos[0] == pos[1]:
                            out.append(((sl, sr), k))
        return out


def _add(a: Site, b: Site) -> Site:
    return tuple(x + y for x, y in zip(a, b))


def build_sequence(
    n: int,
    variant: Variant | str = Variant.ONE_DIM,
    phases: PhaseSettings | None = None,
    quant_axis: QuantAxis | str = QuantAxis.DIAGONAL,
) -> SequencePlan:
    """Construct the transport sequence for initial separation ``n``.

    1D: ``n/2 + 1`` shifts, pi pulse at ``x = +-(n+1)``, ``n/2`` shifts.
    2D: L-shaped shift of ``n+1`` steps along x then ``n+1`` along y, pi
    pulse on the outer region, then ``n/2`` straight diagonal shifts.
    """
    if not isinstance(n, (int, np.integer)) or n < 2 or n % 2:
        raise BadSeparation(f"separation must be an even integer >= 2, got {n!r}")
    n = int(n)
    variant = Variant(variant)
    phases = phases or PhaseSettings()
    s = n // 2
    c = n + 1
    if variant is Variant.ONE_DIM:
        geo = Geometry(
            L1=(-s,), R1=(s,), L2=(-(s + 1),), R2=(s + 1,),
            L3=(-c,), R3=(c,), inner_left=(-1,), inner_right=(1,),
        )
        first = [Shift((1,))] * (s + 1)
        second = [Shift((1,))] * s
        axis = (1.0,)
    else:
        geo = Geometry(
            L1=(-s, s), R1=(s, -s), L2=(-(2 * s + 1), 2 * s + 1), R2=(2 * s + 1, -(2 * s + 1)),
            L3=(-(3 * s + 1), 3 * s + 1), R3=(3 * s + 1, -(3 * s + 1)),
            inner_left=(-(s + 1), s + 1), inner_right=(s + 1, -(s + 1)),
        )
        first = [Shift((1, 0))] * c + [Shift((0, -1))] * c
        # a diagonal displacement takes as long as one x plus one y shift
        second = [Shift((1, -1), duration=2.0)] * s
        qa = QuantAxis(quant_axis)
        r = 1.0 / math.sqrt(2.0)
        axis = (r, r) if qa is QuantAxis.DIAGONAL else (-r, r)
    p1 = phases.site_phases(1)
    p2 = phases.site_phases(2)
    p3 = phases.site_phases(3)
    steps = (
        [Pulse(1, (geo.L1, geo.R1), math.pi / 2, p1, Convention.HALF_PI)]
        + first
        + [Pulse(3, (geo.L3, geo.R3), math.pi, p3, Convention.PI)]
        + second
        + [Pulse(2, (geo.L2, geo.R2), math.pi / 2, p2, Convention.HALF_PI), Readout((geo.L2, geo.R2))]
    )
    return SequencePlan(n, variant, phases, geo, tuple(steps), axis)


def with_phases(plan: SequencePlan, phases: PhaseSettings) -> SequencePlan:
    return build_sequence(plan.n, plan.variant, phases, _axis_kind(plan))


def _axis_kind(plan: SequencePlan) -> QuantAxis:
    if plan.dim == 2 and plan.quant_axis[0] < 0:
        return QuantAxis.ANTIDIAGONAL
    return QuantAxis.DIAGONAL


# ---------------------------------------------------------------------------
# Noise
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class NoiseRealization:
    """Phase-noise sources for one shot, resolved per shift step.

    Energies are in rad per unit of shift duration.  A mode at position ``r``
    and spin ``s`` (``sigma = +1`` up, ``-1`` down) moving during step ``k``
    picks up ``-tau_k * E`` evaluated at the mid-step position, plus the
    transport phase ``transport[k, s]``, where ``E`` is the sum of
    ``force[k] * (f . r)``, ``sigma * field[k] / 2`` and
    ``sigma * g_s[k] * (u . r - x0_s)`` with ``g_s = grad_s + grad_fast[k]``.
    """

    force: np.ndarray | None = None
    force_direction: tuple[float, ...] | None = None
    field: np.ndarray | None = None
    grad_up: float = 0.0
    grad_down: float = 0.0
    x0_up: float = 0.0
    x0_down: float = 0.0
    grad_fast: np.ndarray | None = None
    transport: np.ndarray | None = None

    def step_phase(self, k: int, r_mid: np.ndarray, spin: Spin, duration: float, axis: np.ndarray) -> float:
        sigma = 1.0 if spin is Spin.UP else -1.0
        energy = 0.0
        if self.force is not None:
            fdir = np.asarray(self.force_direction if self.force_direction is not None else axis)
            energy += self.force[k] * float(fdir @ r_mid)
        if self.field is not None:
            energy += sigma * 0.5 * self.field[k]
        g = self.grad_up if spin is Spin.UP else self.grad_down
        if self.grad_fast is not None:
            g = g + self.grad_fast[k]
        if g != 0.0:
            x0 = self.x0_up if spin is Spin.UP else self.x0_down
            energy += sigma * g * (float(axis @ r_mid) - x0)
        phase = -duration * energy
        if self.transport is not None:
            phase += self.transport[k, int(spin)]
        return phase


class NoiseChannel(enum.Enum):
    UNIFORM_FORCE = "uniform_force"
    UNIFORM_FIELD = "uniform_field"
    STATIC_GRADIENT = "static_gradient"
    TRANSPORT_PHASE = "transport_phase"
    FAST_GRADIENT = "fast_gradient"


ROBUST_CHANNELS = (
    NoiseChannel.UNIFORM_FORCE,
    NoiseChannel.UNIFORM_FIELD,
    NoiseChannel.STATIC_GRADIENT,
    NoiseChannel.TRANSPORT_PHASE,
)


@dataclass(frozen=True)
class NoiseModel:
    """Random generator of :class:`NoiseRealization` for one channel.

    ``amplitude`` sets the scale of the sampled rates (rad per unit
    duration) or phases (rad).  Force and field are drawn independently per
    step, i.e. they fluctuate fast; static gradients are drawn once per shot.
    """

    channel: NoiseChannel
    amplitude: float = 1.0

    def sample(self, plan: SequencePlan, rng: np.random.Generator) -> NoiseRealization:
        k = len(plan.shifts())
        a = self.amplitude
        ch = NoiseChannel(self.channel)
        if ch is NoiseChannel.UNIFORM_FORCE:
            direction = rng.normal(size=plan.dim)
            direction /= np.linalg.norm(direction)
            return NoiseRealization(force=a * rng.normal(size=k), force_direction=tuple(direction))
        if ch is NoiseChannel.UNIFORM_FIELD:
            return NoiseRealization(field=a * rng.normal(size=k))
        if ch is NoiseChannel.STATIC_GRADIENT:
            return NoiseRealization(
                grad_up=a * rng.normal(),
                grad_down=a * rng.normal(),
                x0_up=float(rng.uniform(-plan.n, plan.n)),
                x0_down=float(rng.uniform(-plan.n, plan.n)),
            )
        if ch is NoiseChannel.TRANSPORT_PHASE:
            return NoiseRealization(transport=rng.uniform(-math.pi, math.pi, size=(k, 2)) * min(a, 1.0))
        if ch is NoiseChannel.FAST_GRADIENT:
            return NoiseRealization(grad_fast=a * rng.normal(size=k))
        raise ValueError(f"unknown channel {ch}")


# ---------------------------------------------------------------------------
# Execution
# ---------------------------------------------------------------------------

PulseBank = Mapping[int, Mapping[Site, np.ndarray]]


@dataclass(frozen=True)
class SequenceResult:
    parity: float
    postselect_prob: float
    same_site_prob: float
    outcomes: dict = field(default_factory=dict)


def _stage_unitaries(plan: SequencePlan, stage: int, bank: PulseBank | None) -> dict[Site, np.ndarray]:
    if bank is not None and stage in bank:
        out = {}
        for site, u in bank[stage].items():
            u = np.asarray(u, dtype=np.complex128)
            if not fock.is_unitary(u, 1e-9):
                raise fock.NotUnitary(f"stage {stage} pulse at {site} is not unitary")
            out[as_site(site)] = u
        return out
    return plan.pulse(stage).unitaries()


def _apply_pulses(state: TwoParticleState, unitaries: Mapping[Site, np.ndarray]) -> TwoParticleState:
    mode_map = {}
    modes = state.modes()
    for site, u in unitaries.items():
        mode_map.update(fock.local_unitary_map(modes, site, u))
    if not mode_map:
        return state
    return fock.apply_mode_map(state, mode_map, check=False)


def _apply_shift(
    state: TwoParticleState,
    step: Shift,
    k: int,
    noise: NoiseRealization | None,
    axis: np.ndarray,
) -> TwoParticleState:
    mode_map = {}
    for m in state.modes():
        disp = step.displacement(m.spin)
        target = m.with_site(_add(m.site, disp))
        amp = 1.0 + 0.0j
        if noise is not None:
            r_mid = np.asarray(m.site, dtype=float) + 0.5 * np.asarray(disp, dtype=float)
            amp = complex(np.exp(1j * noise.step_phase(k, r_mid, m.spin, step.duration, axis)))
        mode_map[m] = ((target, amp),)
    return fock.apply_mode_map(state, mode_map, check=False)


def initial_state(plan: SequencePlan, stats: Statistics, vib_left=0, vib_right=0) -> TwoParticleState:
    """Both atoms spin up at L1 and R1.

    ``vib_left`` / ``vib_right`` are either an integer level or a vector of
    amplitudes over levels (for coherent vibrational superpositions).
    """
    def amplitudes(v):
        if isinstance(v, (int, np.integer)):
            return [(int(v), 1.0)]
        v = np.asarray(v, dtype=np.complex128)
        return [(i, a) for i, a in enumerate(v) if a != 0]

    raw = []
    for vl, al in amplitudes(vib_left):
        for vr, ar in amplitudes(vib_right):
            raw.append(((ModeLabel(plan.geometry.L1, Spin.UP, vl), ModeLabel(plan.geometry.R1, Spin.UP, vr)), al * ar))
    return fock.canonical_order(raw, Statistics.parse(stats))


def evolve_to_final_pulse(
    plan: SequencePlan,
    stats: Statistics,
    pulse_bank: PulseBank | None = None,
    noise: NoiseRealization | None = None,
    vib_left=0,
    vib_right=0,
) -> TwoParticleState:
    """Run every step before the stage-2 pulse."""
    state = initial_state(plan, stats, vib_left, vib_right)
    axis = np.asarray(plan.quant_axis, dtype=float)
    k = 0
    for step in plan.steps:
        if isinstance(step, Pulse):
            if step.stage == 2:
                break
            state = _apply_pulses(state, _stage_unitaries(plan, step.stage, pulse_bank))
        elif isinstance(step, Shift):
            state = _apply_shift(state, step, k, noise, axis)
            k += 1
    return state


def _final_pulse(plan: SequencePlan, pulse_bank: PulseBank | None, scan: float) -> dict[Site, np.ndarray]:
    units = _stage_unitaries(plan, 2, pulse_bank)
    if scan == 0.0:
        return units
    left = plan.geometry.L2
    d = fock.phase_gate(scan)
    units = dict(units)
    units[left] = d @ units[left] @ d.conj()
    return units


def _readout(state: TwoParticleState, sites: tuple[Site, Site]) -> tuple[float, float, float]:
    """Return (signed parity weight, post-selected weight, same-site weight)."""
    want = set(sites)
    signed = weight = same = 0.0
    for (m1, m2), c in state.terms.items():
        p = abs(c) ** 2
        if m1.site == m2.site:
            same += p * (2.0 if m1 == m2 and state.stats.kind is fock.StatKind.BOSON else 1.0)
            continue
        if {m1.site, m2.site} == want:
            weight += p
            signed += p if m1.spin == m2.spin else -p
    return signed, weight, same


def _outcomes(state: TwoParticleState) -> dict[str, float]:
    out: dict[str, float] = {}
    for (m1, m2), c in state.terms.items():
        mult = 2.0 if (m1 == m2 and state.stats.kind is fock.StatKind.BOSON) else 1.0
        key = f"{_site_str(m1.site)}:{m1.spin.label} {_site_str(m2.site)}:{m2.spin.label}"
        out[key] = out.get(key, 0.0) + mult * abs(c) ** 2
    return dict(sorted(out.items()))


def _site_str(site: Site) -> str:
    return ";".join(str(c) for c in site)


def run_sequence(
    plan: SequencePlan,
    stats: Statistics,
    pulse_bank: PulseBank | None = None,
    noise: NoiseRealization | None = None,
    scan: float = 0.0,
    vib_left=0,
    vib_right=0,
) -> SequenceResult:
    """Execute ``plan`` and read out the post-selected spin parity.

    ``scan`` adds to the stage-2 phase at L2, shifting the control phase.
    """
    pre = evolve_to_final_pulse(plan, stats, pulse_bank, noise, vib_left, vib_right)
    final = _apply_pulses(pre, _final_pulse(plan, pulse_bank, scan))
    parity, prob = fock.spin_parity(final, plan.readout_sites())
    _, _, same = _readout(final, plan.readout_sites())
    return SequenceResult(parity, prob, same, _outcomes(final))


# ---------------------------------------------------------------------------
# Fringe fitting
# ---------------------------------------------------------------------------


def wrap_phase(phi: float) -> float:
    """Wrap to [-pi/2, 3pi/2) so that both 0 and pi sit away from the cut."""
    return float((phi + 0.5 * math.pi) % (2.0 * math.pi) - 0.5 * math.pi)


def angle_diff(a: float, b: float) -> float:
    """Signed difference ``a - b`` wrapped to (-pi, pi]."""
    d = (a - b + math.pi) % (2.0 * math.pi) - math.pi
    return math.pi if d == -math.pi else float(d)


@dataclass(frozen=True)
class FringeFit:
    phase: float
    visibility: float
    offset: float
    phis: np.ndarray = field(repr=False)
    parity: np.ndarray = field(repr=False)
    postselect: np.ndarray = field(repr=False)
    residual_rms: float = 0.0


def default_grid(points: int = FIT_POINTS) -> np.ndarray:
    return 2.0 * math.pi * np.arange(points) / points


def fit_fringe(phis, parity) -> tuple[float, float, float, float]:
    """Least-squares fit of ``-V cos(phi - phi_fit) + Pi_0``.

    Returns ``(phi_fit, V, Pi_0, rms residual)``.
    """
    phis = np.asarray(phis, dtype=float)
    parity = np.asarray(parity, dtype=float)
    if phis.size < 8 or np.ptp(phis) + (phis[1] - phis[0] if phis.size > 1 else 0) < 2 * math.pi - 1e-9:
        raise ValueError("grid must span one period with at least 8 points")
    design = np.column_stack([np.ones_like(phis), np.cos(phis), np.sin(phis)])
    coef, *_ = np.linalg.lstsq(design, parity, rcond=None)
    c0, c1, c2 = coef
    vis = math.hypot(c1, c2)
    if vis < 1e-12:
        raise DegenerateFit("fringe amplitude below 1e-12")
    phase = wrap_phase(math.atan2(-c2, -c1))
    resid = parity - design @ coef
    return phase, vis, float(c0), float(np.sqrt(np.mean(resid**2)))


def _fringe_from_pre(plan, pre_states, weights, pulse_bank, phis):
    """Mixture fringe from precomputed pre-readout states."""
    sites = plan.readout_sites()
    control = plan.phases.control_phase
    parity = np.empty(len(phis))
    post = np.empty(len(phis))
    for i, phi in enumerate(phis):
        units = _final_pulse(plan, pulse_bank, phi - control)
        signed_tot = weight_tot = 0.0
        for st, w in zip(pre_states, weights):
            signed, weight, _ = _readout(_apply_pulses(st, units), sites)
            signed_tot += w * signed
            weight_tot += w * weight
        if weight_tot < fock.POSTSELECT_TOL:
            raise fock.EmptyPostSelection("no post-selected weight")
        parity[i] = signed_tot / weight_tot
        post[i] = weight_tot
    return parity, post


def fringe_scan(
    plan: SequencePlan,
    stats: Statistics,
    pulse_bank: PulseBank | None = None,
    phis=None,
    noise: NoiseRealization | None = None,
) -> FringeFit:
    """Scan the control phase over ``phis`` and fit the parity fringe."""
    phis = default_grid() if phis is None else np.asarray(phis, dtype=float)
    pre = evolve_to_final_pulse(plan, stats, pulse_bank, noise)
    parity, post = _fringe_from_pre(plan, [pre], [1.0], pulse_bank, phis)
    phase, vis, off, rms = fit_fringe(phis, parity)
    return FringeFit(phase, vis, off, phis, parity, post, rms)


# ---------------------------------------------------------------------------
# Impaired pulses
# ---------------------------------------------------------------------------


class ImpairedCase(enum.Enum):
    FIRST_HALF_PI = "first_half_pi"
    MIDDLE_PI = "middle_pi"
    LAST_HALF_PI = "last_half_pi"


def impaired_pulse_prediction(case: ImpairedCase | str, *angles: float) -> dict[str, float]:
    """Closed-form effect of one impaired pulse.

    ``first_half_pi(theta)`` and ``middle_pi(theta_out, theta_in)`` return
    the fraction of pairs that do not contribute to the parity signal;
    ``last_half_pi(theta)`` returns the fringe visibility and offset.
    """
    case = ImpairedCase(case)
    for a in angles:
        if not 0.0 <= a <= math.pi:
            raise ValueError("angles must lie in [0, pi]")
    if case is ImpairedCase.FIRST_HALF_PI:
        (theta,) = angles
        return {"discarded": 1.0 - math.sin(theta) ** 2 / 2.0}
    if case is ImpairedCase.MIDDLE_PI:
        theta_out, theta_in = angles
        return {"discarded": 1.0 - math.sin(theta_out / 2) ** 2 * math.cos(theta_in / 2) ** 2 / 2.0}
    (theta,) = angles
    return {"visibility": math.sin(theta) ** 2, "offset": -math.cos(theta) ** 2}


def impaired_pulse_bank(plan: SequencePlan, case: ImpairedCase | str, *angles: float) -> dict[int, dict[Site, np.ndarray]]:
    """Pulse bank in which the pulse of ``case`` rotates by the given angles."""
    case = ImpairedCase(case)
    g = plan.geometry
    if case is ImpairedCase.FIRST_HALF_PI:
        (theta,) = angles
        p = plan.pulse(1)
        return {1: {s: fock.rotation_half_pi_convention(theta, ph) for s, ph in zip(p.sites, p.phases)}}
    if case is ImpairedCase.MIDDLE_PI:
        theta_out, theta_in = angles
        p = plan.pulse(3)
        bank = {s: fock.rotation_pi_convention(theta_out, ph) for s, ph in zip(p.sites, p.phases)}
        bank[g.inner_left] = fock.rotation_pi_convention(theta_in, 0.0)
        bank[g.inner_right] = fock.rotation_pi_convention(theta_in, 0.0)
        return {3: bank}
    (theta,) = angles
    p = plan.pulse(2)
    return {2: {s: fock.rotation_half_pi_convention(theta, ph) for s, ph in zip(p.sites, p.phases)}}


def impaired_pulse_engine(plan: SequencePlan, stats: Statistics, case: ImpairedCase | str, *angles: float) -> dict[str, float]:
    """Engine counterpart of :func:`impaired_pulse_prediction`.

    The contributing fraction is the amplitude of the unnormalized parity
    fringe, i.e. visibility times post-selection probability.
    """
    case = ImpairedCase(case)
    bank = impaired_pulse_bank(plan, case, *angles)
    fit = fringe_scan(plan, stats, bank)
    if case is ImpairedCase.LAST_HALF_PI:
        return {"visibility": fit.visibility, "offset": fit.offset}
    contributing = fit.visibility * float(np.mean(fit.postselect))
    return {"discarded": 1.0 - contributing, "postselect_prob": float(np.mean(fit.postselect))}


# ---------------------------------------------------------------------------
# Partial indistinguishability
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ThermalOccupation:
    p0x: float = 1.0
    p0y: float = 1.0
    p0z: float = 1.0
    rho_left: np.ndarray | None = None
    rho_right: np.ndarray | None = None

    def __post_init__(self):
        for p in (self.p0x, self.p0y, self.p0z):
            if not 0.0 < p <= 1.0:
                raise ValueError("ground-state probabilities must lie in (0, 1]")
        if (self.rho_left is None) != (self.rho_right is None):
            raise ValueError("give both density matrices or neither")

    @property
    def p0(self) -> float:
        return self.p0x * self.p0y * self.p0z


@dataclass(frozen=True)
class ThermalResult:
    p_indist: float
    visibility: float
    visibility_truncated: float | None
    visibility_engine: float | None
    phase_engine: float | None
    truncation_error: float | None


def _check_density(rho: np.ndarray) -> np.ndarray:
    rho = np.asarray(rho, dtype=np.complex128)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise NotDensityMatrix("density matrix must be square")
    if np.max(np.abs(rho - rho.conj().T)) > 1e-10:
        raise NotDensityMatrix("density matrix is not Hermitian")
    if abs(np.trace(rho) - 1.0) > 1e-10:
        raise NotDensityMatrix("density matrix trace differs from 1")
    if np.min(np.linalg.eigvalsh(rho)) < -1e-10:
        raise NotDensityMatrix("density matrix has a negative eigenvalue")
    return rho


def thermal_axis_populations(p0: float, levels: int = VIB_LEVELS_PER_AXIS) -> np.ndarray:
    """Thermal populations ``p0 (1-p0)^k`` truncated to ``levels`` and renormalized."""
    k = np.arange(levels)
    pops = p0 * (1.0 - p0) ** k
    return pops / pops.sum()


def thermal_density_matrix(occ: ThermalOccupation, levels: int = VIB_LEVELS_PER_AXIS) -> np.ndarray:
    """Truncated product thermal state over ``levels**3`` composite levels."""
    px, py, pz = (thermal_axis_populations(p, levels) for p in (occ.p0x, occ.p0y, occ.p0z))
    return np.diag(np.einsum("i,j,k->ijk", px, py, pz).reshape(-1)).astype(np.complex128)


def closed_form_visibility(occ: ThermalOccupation) -> float:
    return occ.p0 / ((2.0 - occ.p0x) * (2.0 - occ.p0y) * (2.0 - occ.p0z))


def engine_mixture_fringe(
    plan: SequencePlan,
    stats: Statistics,
    rho_left: np.ndarray,
    rho_right: np.ndarray,
    phis=None,
) -> FringeFit:
    """Fringe of the mixture ``rho_left (x) rho_right`` run through the engine."""
    phis = default_grid() if phis is None else np.asarray(phis, dtype=float)
    lam_l, vec_l = np.linalg.eigh(rho_left)
    lam_r, vec_r = np.linalg.eigh(rho_right)
    pre, weights = [], []
    for i, wl in enumerate(lam_l):
        if wl <= 1e-15:
            continue
        for j, wr in enumerate(lam_r):
            if wr <= 1e-15:
                continue
            pre.append(evolve_to_final_pulse(plan, stats, vib_left=_amp_vec(vec_l[:, i]), vib_right=_amp_vec(vec_r[:, j])))
            weights.append(wl * wr)
    parity, post = _fringe_from_pre(plan, pre, weights, None, phis)
    phase, vis, off, rms = fit_fringe(phis, parity)
    return FringeFit(phase, vis, off, phis, parity, post, rms)


def _amp_vec(v: np.ndarray):
    nz = np.flatnonzero(np.abs(v) > 1e-15)
    if nz.size == 1 and abs(abs(v[nz[0]]) - 1.0) < 1e-15:
        return int(nz[0])
    return v


def thermal_visibility(
    occ: ThermalOccupation,
    plan: SequencePlan | None = None,
    stats: Statistics = fock.BOSON,
    engine: bool = True,
) -> ThermalResult:
    """Indistinguishability and parity-fringe visibility for imperfect cooling.

    With explicit density matrices, ``P_indist = tr(rho_L rho_R)``;
    otherwise the harmonic-trap thermal closed form is used and the engine
    runs on the truncated thermal state.
    """
    if occ.rho_left is not None:
        rl = _check_density(occ.rho_left)
        rr = _check_density(occ.rho_right)
        if rl.shape != rr.shape:
            raise NotDensityMatrix("density matrices must share a dimension")
        p_ind = float(np.real(np.trace(rl @ rr)))
        vis = p_ind
        vis_trunc = None
        trunc_err = None
    else:
        vis = closed_form_visibility(occ)
        p_ind = vis
        rl = rr = thermal_density_matrix(occ)
        vis_trunc = float(np.real(np.trace(rl @ rr)))
        trunc_err = abs(vis - vis_trunc)
    vis_eng = phase_eng = None
    if engine:
        plan = plan or build_sequence(2)
        fit = engine_mixture_fringe(plan, stats, rl, rr)
        vis_eng, phase_eng = fit.visibility, fit.phase
    return ThermalResult(p_ind, vis, vis_trunc, vis_eng, phase_eng, trunc_err)


# ---------------------------------------------------------------------------
# Dephasing audit
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AuditResult:
    channel: str
    max_deviation: float
    deviations: np.ndarray = field(repr=False)
    reference_phase: float = 0.0


def dephasing_audit(
    plan: SequencePlan,
    stats: Statistics,
    noise_model: NoiseModel,
    trials: int = 100,
    seed: int = 0,
) -> AuditResult:
    """Largest fitted fringe-phase shift caused by sampled noise."""
    ref = fringe_scan(plan, stats)
    rng = np.random.default_rng(seed)
    devs = np.empty(trials)
    for t in range(trials):
        noise = noise_model.sample(plan, rng)
        fit = fringe_scan(plan, stats, noise=noise)
        devs[t] = abs(angle_diff(fit.phase, ref.phase))
    return AuditResult(NoiseChannel(noise_model.channel).value, float(devs.max(initial=0.0)), devs, ref.phase)
