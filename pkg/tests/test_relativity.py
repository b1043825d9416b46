import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from satinterf.errors import DomainError, ValidationError
from satinterf.relativity import (
    BETA_LIMIT,
    SPEED_OF_LIGHT,
    OpticalConfig,
    autocorrelation_check,
    boost_params,
    doppler_factor,
    doppler_stretch,
    kinematic_phase,
    kinematics,
    p_central_closed_form,
    p_central_quadrature,
    port_weights,
    theoretical_visibility,
    wavepacket,
    wavepacket_norm,
)

betas = st.floats(-9.9e-4, 9.9e-4, allow_nan=False)
# nonzero betas away from subnormals, where relative rounding dominates
nonzero_betas = st.builds(lambda m, s: s * m, st.floats(1e-12, 9.9e-4), st.sampled_from([-1.0, 1.0]))


# frozen reference values, computed once from the closed forms
@pytest.mark.parametrize(
    "beta, phase, vis, pc",
    [
        (3e-5, 722.2808122730114, 0.9999905115361034, 0.020243800979114768),
        (1e-4, 2407.4341922387084, 0.9998945924368747, 0.21912269455573358),
        (-7e-5, -1685.4904392913027, 0.9999483313420656, 0.512988187724386),
    ],
)
def test_frozen_values(cfg, beta, phase, vis, pc):
    assert kinematic_phase(beta, cfg) == pytest.approx(phase, rel=1e-13)
    assert theoretical_visibility(beta, cfg) == pytest.approx(vis, rel=1e-14)
    assert p_central_closed_form(beta, cfg) == pytest.approx(pc, abs=1e-13)


def test_phase_at_6_km_s(cfg):
    beta = 6000 / SPEED_OF_LIGHT
    first_order = 4 * math.pi * 6000 * cfg.mzi_delay / cfg.wavelength_vacuum
    assert first_order == pytest.approx(481.868, abs=1e-3)
    assert kinematic_phase(beta, cfg) == pytest.approx(481.8587030206671, rel=1e-13)


def test_rest_frame_null(cfg):
    assert p_central_closed_form(0.0, cfg) == 0.0
    assert kinematic_phase(0.0, cfg) == 0.0
    assert theoretical_visibility(0.0, cfg) == 1.0
    assert p_central_quadrature(0.0, cfg) == 0.0


@pytest.mark.parametrize("beta", [3e-5, 1e-4, -7e-5, 6000 / SPEED_OF_LIGHT])
def test_quadrature_matches_closed_form(cfg, beta):
    assert abs(p_central_quadrature(beta, cfg) - p_central_closed_form(beta, cfg)) < 1e-9


@pytest.mark.parametrize("ratio", [5.0, 3.0])
def test_quadrature_stress_overlapping_modes(ratio):
    cfg = OpticalConfig(532e-9, 1e-9, ratio * 1e-9, 20e-9, require_distinct_modes=False)
    for beta in (1e-4, -3e-4):
        assert abs(p_central_quadrature(beta, cfg) - p_central_closed_form(beta, cfg)) < 1e-9


def test_visibility_regime(cfg):
    b = np.linspace(-3e-5, 3e-5, 601)
    assert np.all(theoretical_visibility(b, cfg) >= 0.99999)
    assert 1 - theoretical_visibility(3e-5, cfg) == pytest.approx(9.488e-6, rel=1e-3)


@settings(max_examples=200, deadline=None)
@given(beta=betas)
def test_bounds(beta):
    cfg = OpticalConfig(532e-9, 83e-12, 3.4e-9, 10e-9)
    pc = p_central_closed_form(beta, cfg)
    v = theoretical_visibility(beta, cfg)
    assert 0.0 <= pc <= 1.0
    assert 0.0 < v <= 1.0


@settings(max_examples=200, deadline=None)
@given(beta=nonzero_betas)
def test_first_order_phase_bound(beta):
    cfg = OpticalConfig(532e-9, 83e-12, 3.4e-9, 10e-9)
    phi = kinematic_phase(beta, cfg)
    approx = 4 * math.pi * beta * SPEED_OF_LIGHT * cfg.mzi_delay / cfg.wavelength_vacuum
    # a few ulps of slack: for tiny beta the bound is below float rounding
    assert abs(phi - approx) / abs(phi) < 2 * abs(beta) + 1e-15


@given(beta=st.floats(-0.999, 0.999))
def test_doppler_reciprocity(beta):
    assert doppler_factor(beta) * doppler_factor(-beta) == pytest.approx(1.0, rel=4e-16, abs=0)


@given(beta=st.floats(-0.5, 0.5), dt=st.floats(1e-12, 1.0))
def test_stretch_round_trip(beta, dt):
    assert doppler_stretch(doppler_stretch(dt, beta), -beta) == pytest.approx(dt, rel=1e-15)


def test_stretch_example():
    beta = 6000 / SPEED_OF_LIGHT
    assert doppler_stretch(0.1, beta) - 0.1 == pytest.approx(4.00285e-6, rel=1e-5)
    assert doppler_stretch(0.1, 0.0) == 0.1


def test_port_weights_sum(cfg):
    for beta in (0.0, 1e-5, -2.5e-5):
        e, c, l = port_weights(beta, cfg)
        phi = kinematic_phase(beta, cfg)
        v = theoretical_visibility(beta, cfg)
        assert e == l == 0.125
        assert e + c + l + (0.5 + 0.25 * v * math.cos(phi)) == pytest.approx(1.0, abs=1e-15)
        # central / (2 * sides) recovers the interference ratio
        assert c / (2 * (e + l)) == pytest.approx(p_central_closed_form(beta, cfg), abs=1e-15)


def test_port_weights_degradation(cfg):
    _, c_full, _ = port_weights(0.0, cfg, 1.0)
    _, c_none, _ = port_weights(0.0, cfg, 0.0)
    assert c_full == 0.0
    assert c_none == 0.25


def test_beta_guard(cfg):
    with pytest.raises(DomainError, match="0.002"):
        kinematic_phase(2e-3, cfg)
    with pytest.raises(DomainError):
        theoretical_visibility(np.array([0.0, -BETA_LIMIT]), cfg)
    with pytest.raises(DomainError):
        doppler_factor(1.0)


def test_boost_params():
    b = boost_params(1e-5, 1.2e6)
    assert b.gamma == pytest.approx(1 + 0.5e-10, rel=1e-15)
    assert b.t_rtt == pytest.approx(2 * 1.2e6 / SPEED_OF_LIGHT / (1 - 1e-5), rel=1e-15)
    with pytest.raises(ValidationError):
        boost_params(0.0, -1.0)


def test_kinematics_record(cfg):
    k = kinematics(5.0, 1e-5, cfg)
    assert k.t == 5.0
    assert k.p_central == pytest.approx(p_central_closed_form(1e-5, cfg), abs=1e-15)


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(wavelength_vacuum=-1.0),
        dict(coherence_time=0.0),
        dict(mzi_delay=float("nan")),
        dict(mzi_delay=0.5e-9),  # not ten coherence times
        dict(mzi_delay=6e-9),  # beyond half the repetition period
    ],
)
def test_config_validation(kwargs):
    base = dict(wavelength_vacuum=532e-9, coherence_time=83e-12, mzi_delay=3.4e-9, rep_period=10e-9)
    base.update(kwargs)
    with pytest.raises(ValidationError):
        OpticalConfig(**base)


def test_wavepacket_normalized(cfg):
    assert abs(wavepacket_norm(cfg) - 1.0) < 1e-9
    assert abs(wavepacket(0.0, cfg)) == pytest.approx((2 / cfg.coherence_time**2) ** 0.25)


@pytest.mark.parametrize("tau_c", [83e-12, 1.0, 1e-12])
def test_autocorrelation_convention(tau_c):
    cfg = OpticalConfig(532e-9, tau_c, 20 * tau_c, 50 * tau_c)
    assert autocorrelation_check(cfg) == pytest.approx(tau_c, rel=1e-6)
