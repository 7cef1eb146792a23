"""Second-quantized algebra for two identical particles.

A two-particle state is stored as a map from canonically ordered mode pairs
``(m1, m2)`` with ``m1 <= m2`` to the amplitude ``c`` of the operator string
``c * a†_{m1} a†_{m2} |0>``.  Reordering a pair picks up the exchange factor
``e^{i phi_ex}``, so bosons and fermions share one code path.

Normalization convention: ``a†_m a†_m |0>`` has squared norm 2 for bosons,
so a bosonic doubly occupied term contributes ``2 |c|^2`` to the norm.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import total_ordering
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import EmptyPostSelection, NonIsometricMap, NotUnitary, StatisticsMismatch

PRUNE_TOL = 1e-14
ISOMETRY_TOL = 1e-9
UNITARY_TOL = 1e-12
POSTSELECT_TOL = 1e-15

Site = tuple[int, ...]


class Spin(enum.IntEnum):
    UP = 0
    DOWN = 1

    @property
    def label(self) -> str:
        return self.name.lower()

    @classmethod
    def parse(cls, value: "Spin | str | int") -> "Spin":
        if isinstance(value, Spin):
            return value
        if isinstance(value, str):
            return cls[value.strip().upper()]
        return cls(int(value))


def as_site(site) -> Site:
    """Normalize an int or a sequence of ints to a site tuple."""
    if isinstance(site, (int, np.integer)):
        return (int(site),)
    return tuple(int(c) for c in site)


@total_ordering
@dataclass(frozen=True)
class ModeLabel:
    """Single-particle mode: lattice site, spin and vibrational level."""

    site: Site
    spin: Spin = Spin.UP
    vib: int = 0

    def __post_init__(self):
        object.__setattr__(self, "site", as_site(self.site))
        object.__setattr__(self, "spin", Spin.parse(self.spin))
        if int(self.vib) < 0:
            raise ValueError("vibrational level must be non-negative")
        object.__setattr__(self, "vib", int(self.vib))

    def key(self) -> tuple:
        return (self.site, int(self.spin), self.vib)

    def __lt__(self, other: "ModeLabel") -> bool:
        if not isinstance(other, ModeLabel):
            return NotImplemented
        return self.key() < other.key()

    def with_spin(self, spin: Spin) -> "ModeLabel":
        return ModeLabel(self.site, spin, self.vib)

    def with_site(self, site) -> "ModeLabel":
        return ModeLabel(site, self.spin, self.vib)

    def to_text(self) -> str:
        return f"{';'.join(str(c) for c in self.site)},{self.spin.label},{self.vib}"

    @classmethod
    def from_text(cls, text: str) -> "ModeLabel":
        site, spin, vib = (part.strip() for part in text.split(","))
        return cls(tuple(int(c) for c in site.split(";")), Spin.parse(spin), int(vib))


class StatKind(enum.Enum):
    BOSON = "boson"
    FERMION = "fermion"


@dataclass(frozen=True)
class Statistics:
    kind: StatKind

    @property
    def exchange_phase(self) -> float:
        return 0.0 if self.kind is StatKind.BOSON else math.pi

    @property
    def sign(self) -> int:
        """The exchange factor ``e^{i phi_ex}``, exactly +1 or -1."""
        return 1 if self.kind is StatKind.BOSON else -1

    @property
    def name(self) -> str:
        return self.kind.value

    @classmethod
    def parse(cls, value: "Statistics | StatKind | str") -> "Statistics":
        if isinstance(value, Statistics):
            return value
        if isinstance(value, StatKind):
            return cls(value)
        return cls(StatKind(str(value).strip().lower()))


BOSON = Statistics(StatKind.BOSON)
FERMION = Statistics(StatKind.FERMION)

Pair = tuple[ModeLabel, ModeLabel]


def _multiplicity(pair: Pair, stats: Statistics) -> float:
    return 2.0 if (pair[0] == pair[1] and stats.kind is StatKind.BOSON) else 1.0


@dataclass(frozen=True)
class TwoParticleState:
    """Canonical two-particle state; build it with :func:`canonical_order`."""

    terms: Mapping[Pair, complex]
    stats: Statistics

    def __len__(self) -> int:
        return len(self.terms)

    def items(self):
        return self.terms.items()

    def amplitude(self, m1: ModeLabel, m2: ModeLabel) -> complex:
        """Amplitude of ``a†_{m1} a†_{m2}`` in the given order (exchange sign applied)."""
        if m1 <= m2:
            return self.terms.get((m1, m2), 0.0j)
        return self.stats.sign * self.terms.get((m2, m1), 0.0j)

    def norm_squared(self) -> float:
        return float(sum(abs(c) ** 2 * _multiplicity(p, self.stats) for p, c in self.terms.items()))

    def norm(self) -> float:
        return math.sqrt(self.norm_squared())

    def normalized(self) -> "TwoParticleState":
        nrm = self.norm()
        if nrm == 0.0:
            raise ValueError("cannot normalize the zero state")
        return TwoParticleState({p: c / nrm for p, c in self.terms.items()}, self.stats)

    def scaled(self, factor: complex) -> "TwoParticleState":
        return canonical_order(((p, c * factor) for p, c in self.terms.items()), self.stats)

    def __add__(self, other: "TwoParticleState") -> "TwoParticleState":
        _check_same_stats(self, other)
        return canonical_order(list(self.terms.items()) + list(other.terms.items()), self.stats)

    def __sub__(self, other: "TwoParticleState") -> "TwoParticleState":
        return self + other.scaled(-1.0)

    def modes(self) -> list[ModeLabel]:
        """Occupied single-particle modes in sorted order."""
        return sorted({m for pair in self.terms for m in pair})

    def to_text(self) -> str:
        lines = [f"# statistics: {self.stats.name}"]
        for (m1, m2), c in sorted(self.terms.items(), key=lambda kv: (kv[0][0].key(), kv[0][1].key())):
            lines.append(f"{m1.to_text()} | {m2.to_text()} | {c.real!r},{c.imag!r}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "TwoParticleState":
        lines = [ln.strip() for ln in text.strip().splitlines() if ln.strip()]
        if not lines or not lines[0].startswith("# statistics:"):
            raise ValueError("missing statistics header")
        stats = Statistics.parse(lines[0].split(":", 1)[1])
        raw = []
        for ln in lines[1:]:
            a, b, amp = (part.strip() for part in ln.split("|"))
            re_, im_ = (float(x) for x in amp.split(","))
            raw.append(((ModeLabel.from_text(a), ModeLabel.from_text(b)), complex(re_, im_)))
        return canonical_order(raw, stats)


def _check_same_stats(a: TwoParticleState, b: TwoParticleState) -> None:
    if a.stats != b.stats:
        raise StatisticsMismatch(f"{a.stats.name} vs {b.stats.name}")


def canonical_order(raw_terms: Iterable[tuple[Sequence[ModeLabel], complex]], stats: Statistics) -> TwoParticleState:
    """Sort every pair, apply the exchange factor on swaps, merge and prune."""
    stats = Statistics.parse(stats)
    sign = stats.sign
    fermion = stats.kind is StatKind.FERMION
    acc: dict[Pair, complex] = {}
    for pair, amp in raw_terms:
        m1, m2 = pair
        amp = complex(amp)
        if not (math.isfinite(amp.real) and math.isfinite(amp.imag)):
            raise ValueError("amplitudes must be finite")
        if m1 == m2:
            if fermion:
                continue
            key = (m1, m2)
        elif m1 < m2:
            key = (m1, m2)
        else:
            key = (m2, m1)
            amp = sign * amp
        acc[key] = acc.get(key, 0.0j) + amp
    pruned = {p: c for p, c in acc.items() if abs(c) >= PRUNE_TOL}
    return TwoParticleState(pruned, stats)


def product_state(m1: ModeLabel, m2: ModeLabel, stats: Statistics, amplitude: complex = 1.0) -> TwoParticleState:
    """``amplitude * a†_{m1} a†_{m2} |0>`` in canonical form."""
    return canonical_order([((m1, m2), amplitude)], stats)


ModeMap = Mapping[ModeLabel, Sequence[tuple[ModeLabel, complex]]]


def _image(mode_map: ModeMap, m: ModeLabel):
    img = mode_map.get(m)
    if img is None:
        return ((m, 1.0 + 0.0j),)
    return img


def check_isometry(mode_map: ModeMap, modes: Iterable[ModeLabel], tol: float = ISOMETRY_TOL) -> None:
    """Raise :class:`NonIsometricMap` unless the images of ``modes`` are orthonormal."""
    modes = list(modes)
    if not modes:
        return
    targets: dict[ModeLabel, int] = {}
    cols = []
    for m in modes:
        col: dict[int, complex] = {}
        for tgt, amp in _image(mode_map, m):
            idx = targets.setdefault(tgt, len(targets))
            col[idx] = col.get(idx, 0.0j) + complex(amp)
        cols.append(col)
    mat = np.zeros((len(targets), len(modes)), dtype=np.complex128)
    for j, col in enumerate(cols):
        for i, amp in col.items():
            mat[i, j] = amp
    gram = mat.conj().T @ mat
    err = np.max(np.abs(gram - np.eye(len(modes))))
    if err > tol:
        raise NonIsometricMap(f"mode map columns deviate from orthonormality by {err:.3e}")


def apply_mode_map(state: TwoParticleState, mode_map: ModeMap, check: bool = True) -> TwoParticleState:
    """Replace every creation operator by its image under ``mode_map``.

    Modes absent from ``mode_map`` are left unchanged.  The map is checked to
    be an isometry on the occupied modes unless ``check`` is false.
    """
    if check:
        check_isometry(mode_map, state.modes())
    raw = []
    for (m1, m2), c in state.terms.items():
        img1 = _image(mode_map, m1)
        img2 = _image(mode_map, m2)
        for t1, u1 in img1:
            cu1 = c * u1
            for t2, u2 in img2:
                raw.append(((t1, t2), cu1 * u2))
    return canonical_order(raw, state.stats)


def is_unitary(u: np.ndarray, tol: float = UNITARY_TOL) -> bool:
    u = np.asarray(u)
    return u.shape == (2, 2) and np.max(np.abs(u.conj().T @ u - np.eye(2))) <= tol


def local_unitary_map(state_or_modes, site, u: np.ndarray) -> dict[ModeLabel, list[tuple[ModeLabel, complex]]]:
    """Mode map for a spin unitary at ``site``: a†_s -> sum_{s'} u[s', s] a†_{s'}."""
    site = as_site(site)
    modes = state_or_modes.modes() if isinstance(state_or_modes, TwoParticleState) else state_or_modes
    out = {}
    for m in modes:
        if m.site != site:
            continue
        col = int(m.spin)
        out[m] = [(m.with_spin(Spin(row)), complex(u[row, col])) for row in (0, 1) if u[row, col] != 0]
    return out


def apply_local_unitary(state: TwoParticleState, site, u, tol: float = UNITARY_TOL) -> TwoParticleState:
    """Apply a 2x2 spin unitary to every mode at ``site`` (columns indexed up, down)."""
    u = np.asarray(u, dtype=np.complex128)
    if not is_unitary(u, tol):
        raise NotUnitary("spin operator is not unitary within tolerance")
    return apply_mode_map(state, local_unitary_map(state, site, u), check=False)


def spin_parity(state: TwoParticleState, sites: tuple) -> tuple[float, float]:
    """Post-selected spin parity and the post-selection probability.

    Only terms with exactly one particle at each of the two sites count.
    Parity is +1 for aligned and -1 for anti-aligned spins.
    """
    s1, s2 = (as_site(s) for s in sites)
    if s1 == s2:
        raise ValueError("post-selection sites must be distinct")
    want = {s1, s2}
    weight = 0.0
    signed = 0.0
    for (m1, m2), c in state.terms.items():
        if {m1.site, m2.site} != want or m1.site == m2.site:
            continue
        p = abs(c) ** 2
        weight += p
        signed += p if m1.spin == m2.spin else -p
    if weight < POSTSELECT_TOL:
        raise EmptyPostSelection("no weight with one particle on each post-selection site")
    return signed / weight, weight


def overlap(a: TwoParticleState, b: TwoParticleState) -> complex:
    """Inner product ``<a|b>``."""
    _check_same_stats(a, b)
    small, large = (a, b) if len(a.terms) <= len(b.terms) else (b, a)
    total = 0.0j
    for pair, c in small.terms.items():
        d = large.terms.get(pair)
        if d is None:
            continue
        ca, cb = (c, d) if small is a else (d, c)
        total += np.conj(ca) * cb * _multiplicity(pair, a.stats)
    return complex(total)


# -- standard pulse matrices -------------------------------------------------


def phase_gate(phi: float) -> np.ndarray:
    return np.diag([1.0, np.exp(1j * phi)]).astype(np.complex128)


def rotation_half_pi_convention(theta: float, phi: float) -> np.ndarray:
    """Rotation by ``theta``; equals the Ramsey pi/2 pulse at ``theta = pi/2``."""
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    return np.array([[c, np.exp(-1j * phi) * s], [-np.exp(1j * phi) * s, c]], dtype=np.complex128)


def rotation_pi_convention(theta: float, phi: float) -> np.ndarray:
    """Rotation by ``theta``; equals the exchange pi pulse at ``theta = pi``.

    The pi pulse uses the opposite phase sign from the pi/2 pulse.
    """
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    return np.array([[c, np.exp(1j * phi) * s], [-np.exp(-1j * phi) * s, c]], dtype=np.complex128)


def u_half_pi(phi: float) -> np.ndarray:
    return rotation_half_pi_convention(math.pi / 2, phi)


def u_pi(phi: float) -> np.ndarray:
    return rotation_pi_convention(math.pi, phi)
