"""Acceptance criteria 1-8, one PASS/FAIL line each.

Run with ``pytest tests/test_acceptance.py -v``; the status lines are
printed even when output capture is on.
"""

import csv
import json
import math
import time

import numpy as np
import pytest

from exchangelab import cli
from exchangelab.fock import BOSON, FERMION
from exchangelab.ramsey import (
    ROBUST_CHANNELS,
    ThermalOccupation,
    Variant,
    angle_diff,
    build_sequence,
    dephasing_audit,
    fringe_scan,
    NoiseModel,
    thermal_visibility,
)
from exchangelab.rotor import (
    AngularBasis,
    BasisKind,
    RampSchedule,
    RotorCoefficients,
    RotorModel,
    Sector,
    aharonov_bohm_phase,
    critical_splitting,
    cross_validate,
    equilibrium_distance,
    frozen_oracle,
    hamiltonian_matrix,
    parity_transfer,
    propagate,
    quadrature_matrix,
    round_trip_consistency,
    state_fidelity,
    stray_phase,
    trap_frequencies,
)
from exchangelab.rotor.trap import MASS_CA40
from exchangelab.zeeman import GradientPulseConfig, ac_shift_closed_form, fringe_phase_correction, local_minima, p_err

from test_fock import check_against_oracle

TWO_PI = 2 * math.pi


@pytest.fixture
def report(capsys):
    def emit(number, checks):
        ok = all(passed for _, passed in checks)
        detail = "; ".join(f"{text} [{'ok' if passed else 'MISS'}]" for text, passed in checks)
        with capsys.disabled():
            print(f"\nCRITERION {number} {'PASS' if ok else 'FAIL'}: {detail}")
        return ok

    return emit


def test_criterion_1_exchange_fringe(report):
    start = time.perf_counter()
    fits = {s.name: fringe_scan(build_sequence(10), s) for s in (BOSON, FERMION)}
    runtime = time.perf_counter() - start
    err_b = abs(angle_diff(fits["boson"].phase, 0.0))
    err_f = abs(angle_diff(fits["fermion"].phase, math.pi))
    vis = max(abs(f.visibility - 1) for f in fits.values())
    assert report(1, [
        (f"boson phase error {err_b:.1e}", err_b <= 1e-8),
        (f"fermion phase error {err_f:.1e}", err_f <= 1e-8),
        (f"max |V-1| {vis:.1e}", vis <= 1e-8),
        (f"runtime {runtime:.2f} s", runtime < 1.0),
    ])


def test_criterion_2_dephasing_invariance(report):
    start = time.perf_counter()
    worst = 0.0
    for variant in Variant:
        for channel in ROBUST_CHANNELS:
            res = dephasing_audit(build_sequence(10, variant), FERMION, NoiseModel(channel, 1.0), trials=100, seed=2024)
            worst = max(worst, res.max_deviation)
    runtime = time.perf_counter() - start
    assert report(2, [
        (f"max phase deviation {worst:.1e} rad over 8 channel/variant pairs", worst <= 1e-9),
        (f"runtime {runtime:.1f} s", runtime < 60),
    ])


def test_criterion_3_thermal_visibility(report):
    def iso(p0):
        p = p0 ** (1 / 3)
        return ThermalOccupation(p, p, p)

    hi = thermal_visibility(iso(0.9), stats=BOSON)
    lo = thermal_visibility(iso(0.7), stats=BOSON)
    engine_gap = max(abs(r.visibility_engine - r.visibility_truncated) for r in (hi, lo))
    assert report(3, [
        (f"V(0.9) = {hi.visibility:.4f}", 0.79 <= hi.visibility <= 0.82),
        (f"V(0.7) = {lo.visibility:.4f}", 0.49 <= lo.visibility <= 0.52),
        (f"engine vs truncated closed form {engine_gap:.1e}", engine_gap <= 1e-6),
    ])


def test_criterion_4_zeeman_pulse(report, tmp_path):
    start = time.perf_counter()
    cfg = GradientPulseConfig.from_ratio(2.0, n=10)
    pe = p_err(cfg)
    pc = fringe_phase_correction(cfg)
    target = -11 * math.pi / 240
    assert ac_shift_closed_form(10, 2.0) == pytest.approx(target, rel=1e-15)
    # the scan is padded past 4 so the last dip is interior
    conf = tmp_path / "scan.json"
    conf.write_text(json.dumps({"params": {"rho_min": 0.95, "rho_max": 4.05, "rho_step": 0.01}}))
    cli.run("zeeman-scan", str(conf), out=str(tmp_path / "scan"))
    with open(tmp_path / "scan" / "zeeman_scan.csv") as fh:
        rows = list(csv.DictReader(fh))
    rhos = np.array([float(r["rho"]) for r in rows])
    perr = [float(r["p_err"]) for r in rows]
    dips = rhos[local_minima(perr)]
    near = [any(abs(d - k) <= 0.1 for d in dips) for k in (1, 2, 3, 4)]
    runtime = time.perf_counter() - start
    assert report(4, [
        (f"p_err(rho=2) = {pe:.4f}", pe < 0.02),
        (f"residual {pc.residual:.4f} vs {target:.4f}", abs(pc.residual - target) <= 0.01 * TWO_PI),
        (f"scan dips at rho = {', '.join(f'{d:.2f}' for d in dips)}", all(near)),
        (f"runtime {runtime:.1f} s", runtime < 300),
    ])


def test_criterion_5_rotor_statics(report, trap):
    start = time.perf_counter()
    f0 = trap_frequencies(trap)
    dw = critical_splitting(trap.q, TWO_PI * 1e6) / TWO_PI
    d = equilibrium_distance(MASS_CA40, TWO_PI * 1e6)
    exp = RotorModel(trap, AngularBasis(Sector.FERMION_ODD, 512, BasisKind.EXP))
    # a = 0 lies inside the double-well window
    e = exp.spectrum(0.0, 4, vectors=False).energies
    pair_ratio = max(e[1] - e[0], e[3] - e[2]) / (e[2] - e[1])
    gaps = []
    for sector in (Sector.FERMION_ODD, Sector.BOSON_EVEN):
        model = RotorModel(trap, AngularBasis(sector, 512))
        for a in np.linspace(-4e-4, 4e-4, 401):
            e = model.spectrum(float(a), 2, vectors=False).energies
            gaps.append((e[1] - e[0]) / TWO_PI)
    runtime = time.perf_counter() - start
    assert report(5, [
        (f"critical splitting {dw / 1e3:.2f} kHz", abs(dw / 30e3 - 1) <= 0.01),
        (f"2 r0 = {d * 1e6:.4f} um", abs(d / 5.6e-6 - 1) <= 0.02),
        (f"radial frequency {f0.omega_perp / TWO_PI / 1e6:.4f} MHz", abs(f0.omega_perp / TWO_PI / 1e6 - 1) <= 0.02),
        (f"double-well pair splitting / spacing {pair_ratio:.1e}", pair_ratio < 1e-3),
        (f"min same-symmetry gap {min(gaps) / 1e3:.2f} kHz", min(gaps) > 10e3),
        (f"runtime {runtime:.1f} s", runtime < 120),
    ])


def test_criterion_6_rotor_ramp(report, ramp, trap, fermion_model):
    start = time.perf_counter()
    sched, _ = ramp
    cv = cross_validate(sched, fermion_model)
    ferm = parity_transfer(FERMION, sched, trap, trajectory=cv.banded)
    bos = parity_transfer(BOSON, sched, trap)
    runtime = time.perf_counter() - start
    assert report(6, [
        (f"fermion min overlap^2 {cv.banded.min_overlap:.5f}", cv.banded.min_overlap >= 0.98),
        (f"boson ends {bos.target_label} with P = {bos.final_target_population:.5f}",
         bos.target_label == "n=0-like" and bos.final_target_population >= 0.98),
        (f"fermion ends {ferm.target_label} with P = {ferm.final_target_population:.5f}",
         ferm.target_label == "n=1-like" and ferm.final_target_population >= 0.98),
        (f"eigenframe vs banded {cv.difference:.1e}", cv.difference <= 1e-3),
        (f"forbidden population {max(bos.forbidden_population, ferm.forbidden_population):.1e}",
         max(bos.forbidden_population, ferm.forbidden_population) < 1e-6),
        (f"runtime {runtime:.0f} s", runtime <= 600),
    ])


def test_criterion_7_phases(report, ramp, trap):
    sched, _ = ramp
    ab = aharonov_bohm_phase(4e-4, 2.5e-6) / TWO_PI
    sp = stray_phase(8e8, sched, trap).phase / math.pi
    rt = round_trip_consistency(8e8, sched, trap)
    assert report(7, [
        (f"phi_AB = 2pi * {ab:.4f}", abs(ab / 1.9 - 1) <= 0.03),
        (f"phi_s = {sp:.1f} pi (target 130 pi)", abs(sp / 130 - 1) <= 0.10),
        (f"round-trip mismatch {rt:.1e} rad", rt <= 1e-3),
    ])


def test_criterion_8_oracles(report, trap, fermion_model):
    fock_err = max(check_against_oracle(seed) for seed in range(1000))

    rng = np.random.default_rng(8)
    quad_err = 0.0
    for _ in range(20):
        c = RotorCoefficients(rng.uniform(-5e12, 5e12), rng.uniform(0, 2e12), 2.8e-6, MASS_CA40)
        for sector in Sector:
            for kind in BasisKind:
                basis = AngularBasis(sector, 12, kind)
                q = quadrature_matrix(c, basis)
                h = hamiltonian_matrix(c, basis).dense()
                quad_err = max(quad_err, np.max(np.abs(h - q)) / np.max(np.abs(q)))

    # the hardest stretch of the criterion-6 ramp, frozen into 64 segments
    window = RampSchedule(np.array([0.0, 1e-4]), np.array([-3.2e-4, -2.9e-4])).frozen(64)
    cn = propagate(window, fermion_model)
    infid = 1 - state_fidelity(cn.final, frozen_oracle(window, fermion_model))
    assert report(8, [
        (f"fock vs wavefunction, 1000 cases, max {fock_err:.1e}", fock_err <= 1e-12),
        (f"matrix elements vs quadrature {quad_err:.1e}", quad_err <= 1e-10),
        (f"propagation vs frozen eigen-propagation 1-F = {infid:.1e}", infid <= 1e-3),
    ])
