"""Satellite laser ranging tracks: velocity estimation and kinematic phase tracks.

Range samples are round-trip optical path lengths ``c * (t_rx - t_tx)`` for
SLR pulses transmitted at a fixed cadence.  The received pulse separation is
``dT' = dT + dr / c`` and the Doppler relation ``dT' = (1 + b) / (1 - b) dT``
is inverted exactly to give the radial velocity.

Every velocity estimate is stamped at the midpoint of its two *receive*
epochs, which is the time axis photon arrivals are measured on.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import ValidationError
from .relativity import (
    SPEED_OF_LIGHT,
    KinematicSample,
    OpticalConfig,
    kinematic_phase,
    theoretical_visibility,
)

EARTH_RADIUS = 6_371_000.0  # m, mean radius
EARTH_GM = 3.986004418e14  # m^3/s^2

# |v_r| above this between two SLR samples marks a corrupt track
MAX_SANE_SPEED = 0.001 * SPEED_OF_LIGHT


class RangeTrack:
    """Round-trip path lengths (m) of SLR pulses sent every ``cadence`` seconds from ``epoch``."""

    def __init__(self, epoch, cadence, samples):
        samples = np.array(samples, dtype=float)
        if not (math.isfinite(cadence) and cadence > 0):
            raise ValidationError(f"cadence must be positive, got {cadence!r}")
        if samples.ndim != 1 or samples.size < 2:
            raise ValidationError("a range track needs at least 2 samples")
        if not np.all(np.isfinite(samples)) or np.any(samples <= 0):
            bad = int(np.flatnonzero(~(np.isfinite(samples) & (samples > 0)))[0])
            raise ValidationError(f"range sample {bad} is not a positive number: {samples[bad]!r}")
        jumps = np.abs(np.diff(samples))
        limit = 2.0 * cadence * MAX_SANE_SPEED
        if np.any(jumps >= limit):
            bad = int(np.flatnonzero(jumps >= limit)[0])
            raise ValidationError(
                f"round-trip change {jumps[bad]:.1f} m between samples {bad} and {bad + 1} "
                f"exceeds the {limit:.1f} m sanity bound"
            )
        samples.setflags(write=False)
        self.epoch = float(epoch)
        self.cadence = float(cadence)
        self.samples = samples

    def __len__(self):
        return self.samples.size

    def __eq__(self, other):
        return (
            isinstance(other, RangeTrack)
            and self.epoch == other.epoch
            and self.cadence == other.cadence
            and np.array_equal(self.samples, other.samples)
        )

    @property
    def transmit_times(self):
        return self.epoch + self.cadence * np.arange(self.samples.size)

    @property
    def receive_times(self):
        return self.transmit_times + self.samples / SPEED_OF_LIGHT

    def reversed(self) -> "RangeTrack":
        return RangeTrack(self.epoch, self.cadence, self.samples[::-1])


def doppler_velocity(dT, dT_prime):
    """Radial velocity from transmitted and received pulse separations."""
    dT = np.asarray(dT, dtype=float)
    dT_prime = np.asarray(dT_prime, dtype=float)
    v = SPEED_OF_LIGHT * (dT_prime - dT) / (dT_prime + dT)
    return float(v) if v.ndim == 0 else v


def radial_velocities(track: RangeTrack):
    """Doppler-inverted radial velocity for every consecutive sample pair."""
    dr = np.diff(track.samples)
    # c (dT' - dT) / (dT' + dT) with dT' = dT + dr/c, rearranged to avoid cancellation
    return dr / (2.0 * track.cadence + dr / SPEED_OF_LIGHT)


def velocity_epochs(track: RangeTrack):
    rx = track.receive_times
    return 0.5 * (rx[:-1] + rx[1:])


def estimate_radial_velocity(track: RangeTrack, index: int) -> float:
    """Radial velocity (m/s) over the SLR interval ``[index, index + 1]``."""
    if not 0 <= index < len(track) - 1:
        raise IndexError(f"interval index {index} out of range for {len(track)} samples")
    dr = track.samples[index + 1] - track.samples[index]
    return float(dr / (2.0 * track.cadence + dr / SPEED_OF_LIGHT))


# -- synthetic passes -----------------------------------------------------------

@dataclass(frozen=True)
class PassGeometry:
    """Circular-orbit pass over a ground station, ignoring Earth rotation.

    The station sits at ``EARTH_RADIUS`` from the Earth's centre and the
    satellite on a circle of radius ``R = EARTH_RADIUS + altitude``.  With
    ``psi`` the geocentric angle between the two,

        cos(psi(t)) = cos(psi_min) * cos(n * (t - t_c))
        r(t)        = sqrt(R_E^2 + R^2 - 2 R_E R cos(psi(t)))

    where ``n`` is the orbital mean motion and ``t_c`` the culmination time.
    The pass is tracked from ``max_range`` inbound to ``max_range`` outbound.
    """

    altitude: float
    min_range: float
    max_range: float

    def __post_init__(self):
        if not self.altitude > 0:
            raise ValidationError(f"altitude must be positive, got {self.altitude!r}")
        if self.min_range < self.altitude:
            raise ValidationError(
                f"min_range={self.min_range!r} is below the altitude {self.altitude!r}"
            )
        if self.max_range < self.min_range:
            raise ValidationError("max_range must be at least min_range")
        horizon = math.sqrt(self.orbit_radius**2 - EARTH_RADIUS**2)
        if self.max_range > horizon:
            raise ValidationError(
                f"max_range={self.max_range!r} lies below the horizon (limit {horizon:.0f} m)"
            )
        if self.max_radial_speed >= 8000.0:
            raise ValidationError(f"radial speed {self.max_radial_speed:.0f} m/s exceeds LEO bound")

    @property
    def orbit_radius(self) -> float:
        return EARTH_RADIUS + self.altitude

    @property
    def mean_motion(self) -> float:
        return math.sqrt(EARTH_GM / self.orbit_radius**3)

    def _cos_psi(self, r):
        R = self.orbit_radius
        return (EARTH_RADIUS**2 + R**2 - r**2) / (2.0 * EARTH_RADIUS * R)

    @property
    def duration(self) -> float:
        ratio = self._cos_psi(self.max_range) / self._cos_psi(self.min_range)
        return 2.0 * math.acos(min(1.0, ratio)) / self.mean_motion

    @property
    def max_radial_speed(self) -> float:
        return float(np.max(np.abs(self.radial_velocity_at(np.linspace(0.0, self.duration, 2001)))))

    def range_at(self, t):
        """One-way range at time ``t`` after the start of the pass."""
        R = self.orbit_radius
        phase = self.mean_motion * (np.asarray(t, dtype=float) - 0.5 * self.duration)
        cos_psi = self._cos_psi(self.min_range) * np.cos(phase)
        return np.sqrt(EARTH_RADIUS**2 + R**2 - 2.0 * EARTH_RADIUS * R * cos_psi)

    def radial_velocity_at(self, t):
        R = self.orbit_radius
        n = self.mean_motion
        phase = n * (np.asarray(t, dtype=float) - 0.5 * self.duration)
        return EARTH_RADIUS * R * n * self._cos_psi(self.min_range) * np.sin(phase) / self.range_at(t)

    def bounce_times(self, t_tx):
        """Reflection epochs for pulses sent at ``t_tx`` (light-time solved by iteration)."""
        t_tx = np.asarray(t_tx, dtype=float)
        t_b = t_tx + self.range_at(t_tx) / SPEED_OF_LIGHT
        for _ in range(6):
            t_b = t_tx + self.range_at(t_b) / SPEED_OF_LIGHT
        return t_b


def synthesize_pass(geom: PassGeometry, cadence: float, seed: int,
                    noise_sigma: float = 0.0, epoch: float = 0.0) -> RangeTrack:
    """Sample a synthetic SLR track over the pass.

    Pulse ``k`` leaves at ``epoch + k * cadence``; its round-trip path is
    ``2 r(t_bounce)`` for a static station.  Optional Gaussian range noise of
    standard deviation ``noise_sigma`` (m) is drawn from ``seed``.
    """
    if not cadence > 0:
        raise ValidationError(f"cadence must be positive, got {cadence!r}")
    n = int(math.floor(geom.duration / cadence + 1e-9)) + 1
    if n < 2:
        raise ValidationError(
            f"pass of {geom.duration:.3f} s yields fewer than 2 samples at cadence {cadence!r}"
        )
    t_tx = cadence * np.arange(n)
    samples = 2.0 * geom.range_at(geom.bounce_times(t_tx))
    if noise_sigma > 0:
        rng = np.random.default_rng(seed)
        samples = samples + rng.normal(0.0, noise_sigma, size=n)
    return RangeTrack(epoch, cadence, samples)


# -- phase tracks -------------------------------------------------------------

class PhaseTrack:
    """Predicted kinematics at knot epochs, interpolated in beta between knots.

    The phase winds by many radians between 100 ms knots, so it is always
    recomputed from the interpolated beta rather than interpolated itself.
    """

    def __init__(self, times, betas, cfg: OpticalConfig, kind: str = "cubic"):
        times = np.array(times, dtype=float)
        betas = np.array(betas, dtype=float)
        if times.ndim != 1 or times.size != betas.size or times.size < 1:
            raise ValidationError("times and betas must be 1-D arrays of equal, non-zero length")
        if np.any(np.diff(times) <= 0):
            raise ValidationError("phase-track times must be strictly increasing")
        if kind not in ("linear", "cubic"):
            raise ValidationError(f"unknown interpolation kind {kind!r}")
        if kind == "cubic" and times.size < 4:
            kind = "linear"
        self.times = times
        self.betas = betas
        self.cfg = cfg
        self.kind = kind
        self.phases = np.asarray(kinematic_phase(betas, cfg), dtype=float).reshape(-1)
        self.visibilities = np.asarray(theoretical_visibility(betas, cfg), dtype=float).reshape(-1)
        self.p_central = 0.5 * (1.0 - self.visibilities * np.cos(self.phases))
        for arr in (self.times, self.betas, self.phases, self.visibilities, self.p_central):
            arr.setflags(write=False)
        self._spline = CubicSpline(times, betas) if kind == "cubic" else None

    def __len__(self):
        return self.times.size

    @property
    def span(self):
        return float(self.times[0]), float(self.times[-1])

    @property
    def samples(self):
        return [self.sample(i) for i in range(len(self))]

    def sample(self, i) -> KinematicSample:
        return KinematicSample(
            t=float(self.times[i]),
            beta=float(self.betas[i]),
            phase=float(self.phases[i]),
            visibility=float(self.visibilities[i]),
            p_central=float(self.p_central[i]),
        )

    def beta_at(self, t):
        t = np.asarray(t, dtype=float)
        lo, hi = self.span
        outside = (t < lo) | (t > hi)
        if np.any(outside):
            bad = t[outside].ravel()
            raise ValueError(
                f"{bad.size} epoch(s) outside phase-track span [{lo!r}, {hi!r}], first {bad[0]!r}"
            )
        if self._spline is None:
            if self.times.size == 1:
                return np.full(t.shape, self.betas[0])
            return np.interp(t, self.times, self.betas)
        return self._spline(t)

    def kinematics_at(self, t):
        """Arrays (beta, phase, visibility, p_central) at epochs ``t``."""
        beta = np.asarray(self.beta_at(t), dtype=float)
        phase = np.asarray(kinematic_phase(beta, self.cfg), dtype=float)
        vis = np.asarray(theoretical_visibility(beta, self.cfg), dtype=float)
        return beta, phase, vis, 0.5 * (1.0 - vis * np.cos(phase))


def build_phase_track(track: RangeTrack, cfg: OpticalConfig, kind: str = "cubic") -> PhaseTrack:
    """Kinematic phase track with one knot per SLR interval."""
    betas = radial_velocities(track) / SPEED_OF_LIGHT
    return PhaseTrack(velocity_epochs(track), betas, cfg, kind=kind)


def phase_at(ptrack: PhaseTrack, t: float) -> KinematicSample:
    idx = np.searchsorted(ptrack.times, t)
    if idx < len(ptrack) and ptrack.times[idx] == t:
        return ptrack.sample(idx)
    beta, phase, vis, pc = ptrack.kinematics_at(t)
    return KinematicSample(float(t), float(beta), float(phase), float(vis), float(pc))


# -- file formats ---------------------------------------------------------------

RANGE_HEADER = ("t_s", "roundtrip_m")


def write_range_csv(track: RangeTrack, path) -> None:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(RANGE_HEADER)
        for t, r in zip(track.transmit_times, track.samples):
            w.writerow((repr(float(t)), repr(float(r))))
    sidecar = path.with_suffix(".json")
    sidecar.write_text(json.dumps({"epoch": track.epoch, "cadence": track.cadence}, indent=2) + "\n")


def read_range_csv(path, expected_cadence: float | None = None) -> RangeTrack:
    """Load a ``t_s,roundtrip_m`` file.

    Epoch and cadence come from a JSON sidecar with the same stem when one
    exists, otherwise from the first time stamp and the median spacing.
    """
    path = Path(path)
    times, samples = [], []
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != RANGE_HEADER:
            raise ValidationError(f"{path}:1: expected header {','.join(RANGE_HEADER)}, got {header!r}")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 2:
                raise ValidationError(f"{path}:{lineno}: expected 2 columns, got {len(row)}")
            try:
                times.append(float(row[0]))
                samples.append(float(row[1]))
            except ValueError:
                raise ValidationError(f"{path}:{lineno}: cannot parse row {row!r}") from None
    if len(samples) < 2:
        raise ValidationError(f"{path}: a range track needs at least 2 rows")
    times = np.asarray(times)
    sidecar = path.with_suffix(".json")
    if sidecar.exists():
        meta = json.loads(sidecar.read_text())
        epoch, cadence = float(meta["epoch"]), float(meta["cadence"])
    else:
        epoch = float(times[0])
        cadence = float(np.median(np.diff(times)))
    if expected_cadence is not None and abs(cadence - expected_cadence) > 0.01 * expected_cadence:
        raise ValidationError(
            f"{path}: cadence {cadence!r} s differs from expected {expected_cadence!r} s by more than 1%"
        )
    return RangeTrack(epoch, cadence, samples)


PREDICT_HEADER = ("t_s", "beta", "phi_rad_unwrapped", "visibility", "p_c")


def write_phase_track_csv(ptrack: PhaseTrack, path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(PREDICT_HEADER)
        for row in zip(ptrack.times, ptrack.betas, ptrack.phases, ptrack.visibilities, ptrack.p_central):
            w.writerow([repr(float(v)) for v in row])
