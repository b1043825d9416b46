import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from satinterf.errors import ValidationError
from satinterf.ranging import (
    PassGeometry,
    PhaseTrack,
    RangeTrack,
    build_phase_track,
    doppler_velocity,
    estimate_radial_velocity,
    phase_at,
    radial_velocities,
    read_range_csv,
    synthesize_pass,
    velocity_epochs,
    write_phase_track_csv,
    write_range_csv,
)
from satinterf.relativity import SPEED_OF_LIGHT, doppler_stretch, kinematic_phase

C = SPEED_OF_LIGHT


def true_mean_velocity(geom, track):
    """Generator truth: average radial velocity between consecutive bounce epochs."""
    tb = geom.bounce_times(track.transmit_times)
    r = geom.range_at(tb)
    return np.diff(r) / np.diff(tb), 0.5 * (tb[:-1] + tb[1:])


def test_constant_range_gives_zero_velocity():
    track = RangeTrack(0.0, 0.1, np.full(50, 2.4e6))
    assert np.all(radial_velocities(track) == 0.0)


def test_constant_velocity_exact():
    # pulses bounced off a mirror receding at v: round trip grows by 2 v dT / (1 - beta)
    v = 5000.0
    beta = v / C
    dr = 2 * v * 0.1 / (1 - beta)
    track = RangeTrack(0.0, 0.1, 2.4e6 + dr * np.arange(20))
    assert np.allclose(radial_velocities(track), v, rtol=1e-12, atol=0)


@pytest.mark.parametrize("v", [-6000.0, -10.0, 0.0, 3.3, 6000.0])
def test_doppler_round_trip_exact(v):
    beta = v / C
    dT = 0.1
    dT_prime = doppler_stretch(dT, beta)
    v_back = doppler_velocity(dT, dT_prime)
    # machine precision on the time axis: dT' is reproduced to a couple of ulps,
    # which bounds the velocity error by a few c * eps
    assert abs(doppler_stretch(dT, v_back / C) - dT_prime) <= 2 * np.spacing(dT_prime)
    assert abs(v_back - v) <= 4 * C * np.finfo(float).eps


def test_estimator_matches_generator_every_sample():
    geom = PassGeometry(1000e3, 1000e3, 2000e3)
    assert 5800 < geom.max_radial_speed <= 6000
    track = synthesize_pass(geom, 0.1, seed=0)
    truth, _ = true_mean_velocity(geom, track)
    err = np.abs(radial_velocities(track) - truth)
    assert err.max() < 0.1


def test_velocity_epochs_near_bounce_midpoint(beacon_geom, beacon_track):
    _, t_mid = true_mean_velocity(beacon_geom, beacon_track)
    rx = velocity_epochs(beacon_track)
    # receive midpoint trails the bounce midpoint by the one-way light time
    assert np.all(np.abs(rx - t_mid - beacon_geom.range_at(t_mid) / C) < 1e-5)


def test_velocity_antisymmetry_first_order(beacon_track):
    v = radial_velocities(beacon_track)
    v_rev = radial_velocities(beacon_track.reversed())[::-1]
    # reversal flips the sign exactly only to first order in beta
    assert np.all(np.abs(v + v_rev) <= 2.01 * np.abs(v / C) * np.abs(v) + 1e-9)


def test_estimate_single_interval(beacon_track):
    v = radial_velocities(beacon_track)
    assert estimate_radial_velocity(beacon_track, 10) == v[10]
    with pytest.raises(IndexError):
        estimate_radial_velocity(beacon_track, len(beacon_track) - 1)


def test_beacon_envelope(beacon_geom, beacon_track):
    r = beacon_track.samples / 2
    assert r.min() >= 1200e3 - 1 and r.max() <= 1500e3 + 1000
    assert np.abs(radial_velocities(beacon_track)).max() <= 6000


def test_range_track_validation():
    with pytest.raises(ValidationError):
        RangeTrack(0.0, 0.1, [1.0])
    with pytest.raises(ValidationError, match="sample 1"):
        RangeTrack(0.0, 0.1, [1e6, -1.0, 1e6])
    with pytest.raises(ValidationError, match="between samples 0 and 1"):
        RangeTrack(0.0, 0.1, [1e6, 1e6 + 1e5])
    with pytest.raises(ValidationError):
        RangeTrack(0.0, 0.0, [1e6, 1e6])


def test_geometry_validation():
    with pytest.raises(ValidationError):
        PassGeometry(1000e3, 900e3, 1500e3)
    with pytest.raises(ValidationError, match="horizon"):
        PassGeometry(500e3, 600e3, 5000e3)


def test_noise_is_seeded(beacon_geom):
    a = synthesize_pass(beacon_geom, 0.1, seed=4, noise_sigma=0.01)
    b = synthesize_pass(beacon_geom, 0.1, seed=4, noise_sigma=0.01)
    c = synthesize_pass(beacon_geom, 0.1, seed=5, noise_sigma=0.01)
    assert a == b
    assert not a == c


def test_phase_track_knots_exact(beacon_ptrack, cfg):
    i = 100
    s = phase_at(beacon_ptrack, beacon_ptrack.times[i])
    assert s.phase == kinematic_phase(beacon_ptrack.betas[i], cfg)
    beta, phase, _, _ = beacon_ptrack.kinematics_at(beacon_ptrack.times[i])
    assert float(beta) == pytest.approx(beacon_ptrack.betas[i], rel=1e-14)


def test_phase_track_interpolation_accuracy(beacon_geom, beacon_track, cfg):
    # knots at 100 ms, check against a 10 ms track of the same pass
    fine = build_phase_track(synthesize_pass(beacon_geom, 0.01, seed=0), cfg)
    coarse = build_phase_track(beacon_track, cfg)
    t = fine.times[(fine.times > coarse.span[0]) & (fine.times < coarse.span[1])]
    _, p_coarse, _, _ = coarse.kinematics_at(t)
    _, p_fine, _, _ = fine.kinematics_at(t)
    assert np.max(np.abs(p_coarse - p_fine)) < 1e-3


def test_phase_track_outside_span(beacon_ptrack):
    lo, hi = beacon_ptrack.span
    with pytest.raises(ValueError, match="outside"):
        beacon_ptrack.beta_at([lo, hi + 1.0])


def test_phase_track_read_only(beacon_ptrack):
    with pytest.raises(ValueError):
        beacon_ptrack.phases[0] = 0.0


def test_short_track_falls_back_to_linear(cfg):
    pt = PhaseTrack([0.0, 1.0, 2.0], [0.0, 1e-6, 2e-6], cfg)
    assert pt.kind == "linear"
    assert float(pt.beta_at(0.5)) == pytest.approx(0.5e-6)


def test_range_csv_round_trip(tmp_path, beacon_track):
    path = tmp_path / "r.csv"
    write_range_csv(beacon_track, path)
    assert json.loads(path.with_suffix(".json").read_text()) == {"epoch": 0.0, "cadence": 0.1}
    assert read_range_csv(path, expected_cadence=0.1) == beacon_track


def test_range_csv_without_sidecar(tmp_path):
    path = tmp_path / "r.csv"
    path.write_text("t_s,roundtrip_m\n5.0,2.4e6\n5.1,2.4e6\n5.2,2.4e6\n")
    track = read_range_csv(path)
    assert track.epoch == 5.0
    assert track.cadence == pytest.approx(0.1)
    with pytest.raises(ValidationError, match="1%"):
        read_range_csv(path, expected_cadence=0.2)


def test_range_csv_errors_name_line(tmp_path):
    path = tmp_path / "r.csv"
    path.write_text("t_s,roundtrip_m\n0.0,2.4e6\n0.1,abc\n")
    with pytest.raises(ValidationError, match=":3:"):
        read_range_csv(path)
    path.write_text("time,range\n0,1\n")
    with pytest.raises(ValidationError, match=":1:"):
        read_range_csv(path)


def test_phase_track_csv(tmp_path, beacon_ptrack):
    path = tmp_path / "p.csv"
    write_phase_track_csv(beacon_ptrack, path)
    rows = path.read_text().splitlines()
    assert rows[0] == "t_s,beta,phi_rad_unwrapped,visibility,p_c"
    assert len(rows) == len(beacon_ptrack) + 1


@settings(max_examples=50, deadline=None)
@given(v=st.floats(-6000, 6000), cadence=st.sampled_from([0.05, 0.1, 0.2]))
def test_constant_velocity_property(v, cadence):
    dr = 2 * v * cadence / (1 - v / C)
    track = RangeTrack(0.0, cadence, 3e6 + dr * np.arange(5))
    assert np.allclose(radial_velocities(track), v, rtol=1e-9, atol=1e-7)
