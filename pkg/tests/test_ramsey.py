import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from exchangelab.errors import BadSeparation, DegenerateFit, NotDensityMatrix
from exchangelab.fock import BOSON, FERMION
from exchangelab.ramsey import (
    ROBUST_CHANNELS,
    ImpairedCase,
    NoiseChannel,
    NoiseModel,
    NoiseRealization,
    PhaseSettings,
    QuantAxis,
    Shift,
    ThermalOccupation,
    Variant,
    angle_diff,
    build_sequence,
    closed_form_visibility,
    dephasing_audit,
    fit_fringe,
    fringe_scan,
    impaired_pulse_engine,
    impaired_pulse_prediction,
    run_sequence,
    thermal_visibility,
    wrap_phase,
)

STATS = (BOSON, FERMION)


# -- plans ----------------------------------------------------------------------


@pytest.mark.parametrize("n, counts", [(10, (6, 5)), (2, (2, 1)), (4, (3, 2))])
def test_one_dim_shift_counts(n, counts):
    assert build_sequence(n).shift_counts() == counts


def test_two_dim_plan_is_l_shaped():
    plan = build_sequence(4, Variant.TWO_DIM)
    shifts = plan.shifts()
    before, after = plan.shift_counts()
    assert (before, after) == (10, 2)
    assert [s.up for s in shifts[:5]] == [(1, 0)] * 5
    assert [s.up for s in shifts[5:10]] == [(0, -1)] * 5
    assert all(s.up == (1, -1) and s.duration == 2.0 for s in shifts[10:])


@pytest.mark.parametrize("n", [1, 3, 0, -2, 2.0])
def test_bad_separation(n):
    with pytest.raises(BadSeparation):
        build_sequence(n)


@pytest.mark.parametrize("n", [2, 4, 10])
def test_supports_disjoint(n):
    from exchangelab.fock import Spin

    up, down = Spin.UP, Spin.DOWN
    one = build_sequence(n)
    total = sum(one.shift_counts())
    # the 1D crossing of the odd branch, plus the even branches meeting at readout
    assert sorted(one.collisions()) == sorted([((up, down), n // 2), ((up, up), total), ((down, down), total)])
    two = build_sequence(n, Variant.TWO_DIM)
    total = sum(two.shift_counts())
    assert sorted(two.collisions()) == sorted([((up, up), total), ((down, down), total)])


def test_control_phase():
    ph = PhaseSettings(0.1, 0.2, 0.4)
    assert ph.control_phase == pytest.approx(0.7)
    left, right = ph.site_phases(3)
    assert left - right == pytest.approx(0.4)


# -- ideal execution -----------------------------------------------------------


@pytest.mark.parametrize("variant", list(Variant))
@pytest.mark.parametrize("stats, phi, expected", [(BOSON, 0.0, -1.0), (FERMION, 0.0, 1.0), (BOSON, math.pi / 2, 0.0)])
def test_run_sequence_ideal(variant, stats, phi, expected):
    plan = build_sequence(4, variant, PhaseSettings(dphi2=phi))
    res = run_sequence(plan, stats)
    assert res.parity == pytest.approx(expected, abs=1e-10)
    assert res.postselect_prob == pytest.approx(0.5, abs=1e-12)
    assert res.postselect_prob + res.same_site_prob == pytest.approx(1.0, abs=1e-12)


@settings(max_examples=25, deadline=None)
@given(st.floats(-math.pi, math.pi), st.sampled_from(STATS), st.sampled_from([2, 4, 6]))
def test_parity_fringe_formula(phi, stats, n):
    plan = build_sequence(n, phases=PhaseSettings(dphi1=0.3 * phi, dphi3=0.7 * phi))
    res = run_sequence(plan, stats)
    assert res.parity == pytest.approx(-math.cos(stats.exchange_phase - phi), abs=1e-10)


def test_same_site_branch_ignores_control_phase():
    def same_site(phi):
        out = run_sequence(build_sequence(4, phases=PhaseSettings(dphi2=phi)), BOSON).outcomes
        return {k: v for k, v in out.items() if k.split()[0].split(":")[0] == k.split()[1].split(":")[0]}

    a, b = same_site(0.0), same_site(1.9)
    assert a.keys() == b.keys()
    for k in a:
        assert a[k] == pytest.approx(b[k], abs=1e-12)


@pytest.mark.parametrize("variant", list(Variant))
@pytest.mark.parametrize("stats", STATS)
def test_fringe_scan_ideal(variant, stats):
    fit = fringe_scan(build_sequence(6, variant), stats)
    assert abs(angle_diff(fit.phase, stats.exchange_phase)) <= 1e-8
    assert fit.visibility == pytest.approx(1.0, abs=1e-8)
    assert fit.offset == pytest.approx(0.0, abs=1e-8)


@pytest.mark.parametrize("stats", STATS)
def test_statistics_flip(stats):
    grid = 2 * math.pi * np.arange(16) / 16

    def fitted(dphi1):
        plan = build_sequence(4, phases=PhaseSettings(dphi1=dphi1))
        return fit_fringe(grid, [run_sequence(plan, stats, scan=x).parity for x in grid])[0]

    assert abs(angle_diff(fitted(math.pi), fitted(0.0) + math.pi)) <= 1e-9


def test_fit_fringe_validation():
    phis = np.linspace(0, math.pi, 10)
    with pytest.raises(ValueError):
        fit_fringe(phis, np.cos(phis))
    grid = 2 * math.pi * np.arange(16) / 16
    with pytest.raises(DegenerateFit):
        fit_fringe(grid, np.full(16, 0.3))


@settings(max_examples=50, deadline=None)
@given(st.floats(-10, 10), st.floats(0.1, 1.0), st.floats(-0.5, 0.5))
def test_fit_recovers_synthetic_fringe(phase, vis, off):
    grid = 2 * math.pi * np.arange(32) / 32
    got, v, o, rms = fit_fringe(grid, -vis * np.cos(grid - phase) + off)
    assert abs(angle_diff(got, phase)) < 1e-9
    assert v == pytest.approx(vis, abs=1e-12) and o == pytest.approx(off, abs=1e-12)
    assert rms < 1e-12


def test_wrap_and_diff():
    assert wrap_phase(2 * math.pi) == pytest.approx(0.0)
    assert wrap_phase(-0.5) == pytest.approx(-0.5)
    assert wrap_phase(math.pi) == pytest.approx(math.pi)
    assert angle_diff(0.1, 2 * math.pi - 0.1) == pytest.approx(0.2)
    assert angle_diff(math.pi, 0) == pytest.approx(math.pi)


# -- impaired pulses -------------------------------------------------------------


@pytest.mark.parametrize(
    "case, angles, expected",
    [
        ("first_half_pi", (math.pi / 2,), {"discarded": 0.5}),
        ("middle_pi", (math.pi, 0.0), {"discarded": 0.5}),
        ("last_half_pi", (math.pi / 2,), {"visibility": 1.0, "offset": 0.0}),
        ("last_half_pi", (math.pi / 3,), {"visibility": 0.75, "offset": -0.25}),
    ],
)
def test_impaired_prediction_examples(case, angles, expected):
    got = impaired_pulse_prediction(case, *angles)
    for k, v in expected.items():
        assert got[k] == pytest.approx(v, abs=1e-15)


def test_impaired_angles_validated():
    with pytest.raises(ValueError):
        impaired_pulse_prediction("first_half_pi", 4.0)


@settings(max_examples=20, deadline=None)
@given(st.sampled_from(list(ImpairedCase)), st.floats(0.2, math.pi - 0.2), st.floats(0.0, math.pi - 0.2),
       st.sampled_from(STATS))
def test_impaired_engine_matches_prediction(case, t1, t2, stats):
    angles = (t1, t2) if case is ImpairedCase.MIDDLE_PI else (t1,)
    plan = build_sequence(4)
    pred = impaired_pulse_prediction(case, *angles)
    eng = impaired_pulse_engine(plan, stats, case, *angles)
    for k, v in pred.items():
        assert eng[k] == pytest.approx(v, abs=1e-10)


# -- thermal ------------------------------------------------------------------------


def iso(p0):
    p = p0 ** (1 / 3)
    return ThermalOccupation(p, p, p)


@pytest.mark.parametrize("p0, lo, hi", [(0.9, 0.79, 0.82), (0.7, 0.49, 0.52)])
def test_thermal_visibility_examples(p0, lo, hi):
    res = thermal_visibility(iso(p0), engine=False)
    assert lo <= res.visibility <= hi


def test_thermal_pure_ground_state():
    res = thermal_visibility(ThermalOccupation(), engine=True)
    assert res.visibility == 1.0
    assert res.visibility_engine == pytest.approx(1.0, abs=1e-12)


def test_thermal_engine_matches_truncated_trace():
    res = thermal_visibility(ThermalOccupation(0.95, 0.9, 0.85), stats=FERMION)
    assert res.visibility_engine == pytest.approx(res.visibility_truncated, abs=1e-10)
    assert abs(angle_diff(res.phase_engine, math.pi)) < 1e-9
    assert res.truncation_error < 0.03


def test_closed_form_visibility_formula():
    occ = ThermalOccupation(0.9, 0.8, 0.7)
    assert closed_form_visibility(occ) == pytest.approx(0.9 * 0.8 * 0.7 / (1.1 * 1.2 * 1.3))


def test_density_matrix_trace_overlap():
    rl = np.diag([0.8, 0.2])
    rr = np.array([[0.5, 0.1], [0.1, 0.5]])
    res = thermal_visibility(ThermalOccupation(rho_left=rl, rho_right=rr), engine=True)
    assert res.p_indist == pytest.approx(0.5)
    assert res.visibility_engine == pytest.approx(0.5, abs=1e-10)


@pytest.mark.parametrize("rho", [np.diag([0.5, 0.6]), np.array([[0.5, 0.2], [0.0, 0.5]]), np.diag([1.2, -0.2])])
def test_bad_density_matrix(rho):
    with pytest.raises(NotDensityMatrix):
        thermal_visibility(ThermalOccupation(rho_left=rho, rho_right=np.eye(2) / 2), engine=False)


def test_thermal_occupation_validation():
    with pytest.raises(ValueError):
        ThermalOccupation(0.0)
    with pytest.raises(ValueError):
        ThermalOccupation(rho_left=np.eye(2) / 2)


# -- noise ------------------------------------------------------------------------------


@pytest.mark.parametrize("channel", ROBUST_CHANNELS)
@pytest.mark.parametrize("variant", list(Variant))
def test_robust_channels(channel, variant):
    plan = build_sequence(4, variant)
    res = dephasing_audit(plan, FERMION, NoiseModel(channel, 0.7), trials=8, seed=3)
    assert res.max_deviation <= 1e-9


def test_zero_noise_audit():
    plan = build_sequence(4)
    fit = fringe_scan(plan, BOSON, noise=NoiseRealization())
    assert fit.phase == pytest.approx(0.0, abs=1e-12)


def test_fast_gradient_one_dim_is_reported_nonzero():
    res = dephasing_audit(build_sequence(4), BOSON, NoiseModel(NoiseChannel.FAST_GRADIENT, 0.3), trials=8, seed=1)
    assert res.max_deviation > 1e-3


def test_fast_gradient_two_dim_diagonal_axis():
    plan = build_sequence(4, Variant.TWO_DIM, quant_axis=QuantAxis.DIAGONAL)
    res = dephasing_audit(plan, BOSON, NoiseModel(NoiseChannel.FAST_GRADIENT, 0.3), trials=8, seed=1)
    assert res.max_deviation <= 1e-9


def test_audit_deterministic_for_seed():
    plan = build_sequence(4)
    a = dephasing_audit(plan, BOSON, NoiseModel(NoiseChannel.FAST_GRADIENT, 0.3), trials=4, seed=9)
    b = dephasing_audit(plan, BOSON, NoiseModel(NoiseChannel.FAST_GRADIENT, 0.3), trials=4, seed=9)
    assert np.array_equal(a.deviations, b.deviations)


def test_shift_displacements_mirror():
    s = Shift((1, -1))
    assert s.down == (-1, 1)
