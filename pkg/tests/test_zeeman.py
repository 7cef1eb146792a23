import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from exchangelab.fock import FERMION
from exchangelab.zeeman import (
    GradientPulseConfig,
    ac_shift_closed_form,
    ac_shift_from_detunings,
    fringe_phase_correction,
    ideal_zeeman_bank,
    local_maxima,
    local_minima,
    p_err,
    p_err_single_site,
    rho_scan,
    simulate_gradient_pulse,
    zeeman_static_phase,
)


def test_config_ratio_round_trip():
    cfg = GradientPulseConfig.from_ratio(2.5, n=14)
    assert cfg.rho == pytest.approx(2.5)
    assert cfg.tone_frequencies == pytest.approx((-2.5 * cfg.omega_R, 2.5 * cfg.omega_R))
    assert cfg.pulse_duration == pytest.approx(math.pi / cfg.omega_R)


@pytest.mark.parametrize("kw", [{"omega_R": 0.0, "delta_prime": 1.0}, {"omega_R": 1.0, "delta_prime": 1.0, "n": 3}])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        GradientPulseConfig(**kw)


def test_single_resonant_tone_is_pi_flip():
    cfg = GradientPulseConfig.from_ratio(2.0)
    u = simulate_gradient_pulse(cfg, sites=[cfg.n + 1], tones=("R3",))[cfg.n + 1]
    assert abs(u[0, 1]) == pytest.approx(1.0, abs=1e-9)
    assert abs(u[0, 0]) < 1e-9


def test_far_detuned_inner_site_is_identity_up_to_phase():
    cfg = GradientPulseConfig.from_ratio(500.0)
    u = simulate_gradient_pulse(cfg, sites=[1])[1]
    assert abs(u[0, 1]) < 1e-3
    assert abs(abs(u[0, 0]) - 1) < 1e-6


@settings(max_examples=10, deadline=None)
@given(st.floats(0.5, 5.0), st.sampled_from([4, 10, 16]))
def test_propagators_unitary(rho, n):
    bank = simulate_gradient_pulse(GradientPulseConfig.from_ratio(rho, n=n))
    for u in bank.unitaries.values():
        assert np.max(np.abs(u.conj().T @ u - np.eye(2))) <= 1e-9
    assert bank.richardson_error <= 1e-9


def test_backends_agree():
    cfg = GradientPulseConfig.from_ratio(1.7)
    a = simulate_gradient_pulse(cfg, backend="numpy")
    b = simulate_gradient_pulse(cfg, backend="numba")
    for site in a.unitaries:
        assert np.allclose(a.unitaries[site], b.unitaries[site], atol=1e-13)


def test_p_err_at_rho_two():
    cfg = GradientPulseConfig.from_ratio(2.0)
    bank = simulate_gradient_pulse(cfg)
    pe = p_err(cfg, bank)
    assert pe < 0.02
    # value frozen from this implementation
    assert pe == pytest.approx(0.018327282772127, rel=1e-6)
    assert p_err_single_site(bank, cfg) == pytest.approx(pe, abs=1e-12)


def test_discarded_fraction():
    from exchangelab.ramsey import run_sequence
    from exchangelab.zeeman import _plan

    cfg = GradientPulseConfig.from_ratio(2.0)
    bank = simulate_gradient_pulse(cfg)
    res = run_sequence(_plan(cfg), FERMION, bank.as_pulse_bank())
    assert 1 - res.postselect_prob == pytest.approx(0.5 + p_err(cfg, bank) / 2, abs=1e-12)


def test_p_err_statistics_independent():
    cfg = GradientPulseConfig.from_ratio(2.4)
    bank = simulate_gradient_pulse(cfg)
    assert p_err(cfg, bank) == pytest.approx(p_err(cfg, bank, FERMION), abs=1e-12)


def test_p_err_insensitive_to_n():
    vals = [p_err(GradientPulseConfig.from_ratio(2.0, n=n)) for n in (10, 14, 20)]
    assert (max(vals) - min(vals)) / min(vals) < 0.2


@pytest.mark.parametrize("n, rho, expected", [(10, 2.0, -11 * math.pi / 240), (10, 1.0, -11 * math.pi / 120)])
def test_ac_shift_closed_form(n, rho, expected):
    assert ac_shift_closed_form(n, rho) == pytest.approx(expected, rel=1e-15)


def test_ac_shift_vanishes_at_large_rho():
    assert abs(ac_shift_closed_form(10, 1e12)) < 1e-12


@settings(max_examples=30)
@given(st.floats(0.2, 10), st.sampled_from([2, 4, 10, 20]))
def test_ac_shift_two_routes(rho, n):
    cfg = GradientPulseConfig.from_ratio(rho, n=n)
    assert ac_shift_from_detunings(cfg) == pytest.approx(ac_shift_closed_form(n, rho), rel=1e-12)


def test_ac_shift_rejects_bad_input():
    with pytest.raises(ValueError):
        ac_shift_closed_form(10, 0.0)


@pytest.mark.parametrize("dp, expected", [(2 / 11, -20 * math.pi / 11), (0.0, 0.0), (1 / 11, -10 * math.pi / 11)])
def test_zeeman_static_phase(dp, expected):
    assert zeeman_static_phase(10, dp, 1.0) == pytest.approx(expected, abs=1e-15)


def test_ideal_bank_has_zero_residual():
    cfg = GradientPulseConfig.from_ratio(2.0, phi_L3=0.3, phi_R3=-0.2)
    pc = fringe_phase_correction(cfg, ideal_zeeman_bank(cfg))
    assert abs(pc.residual) < 1e-9
    assert pc.visibility == pytest.approx(1.0, abs=1e-9)


@pytest.mark.parametrize("rho", [2.0, 3.0])
def test_residual_matches_ac_shift(rho):
    pc = fringe_phase_correction(GradientPulseConfig.from_ratio(rho))
    assert abs(pc.residual - ac_shift_closed_form(10, rho)) <= 0.01 * 2 * math.pi


def test_common_tone_phase_is_irrelevant():
    a = fringe_phase_correction(GradientPulseConfig.from_ratio(2.0, phi_L3=0.2, phi_R3=-0.1))
    b = fringe_phase_correction(GradientPulseConfig.from_ratio(2.0, phi_L3=0.9, phi_R3=0.6))
    assert a.residual == pytest.approx(b.residual, abs=1e-9)


def test_relative_tone_phase_modulates_crosstalk():
    # the two tones beat at the inner sites over the finite pulse window
    a = p_err(GradientPulseConfig.from_ratio(2.0))
    b = p_err(GradientPulseConfig.from_ratio(2.0, phi_L3=1.0, phi_R3=-1.0))
    assert b > 2 * a


def test_scan_structure():
    rows = rho_scan(np.arange(1.5, 2.55, 0.05), threads=2)
    pe = [r.p_err for r in rows]
    mins = [rows[i].rho for i in local_minima(pe)]
    maxs = [rows[i].rho for i in local_maxima(pe)]
    assert any(abs(r - 2.0) < 0.1 for r in mins)
    assert any(abs(r - 2.5) < 0.15 for r in maxs) or pe[-1] > 10 * min(pe)


def test_scan_threads_deterministic():
    rhos = [1.2, 2.2, 3.2]
    assert rho_scan(rhos, threads=1) == rho_scan(rhos, threads=3)


def test_extrema_helpers():
    v = [3, 1, 2, 0.5, 4]
    assert local_minima(v) == [1, 3]
    assert local_maxima(v) == [2]
