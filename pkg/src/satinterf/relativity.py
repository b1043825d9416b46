"""Moving-mirror time-bin interference: closed forms and quadrature oracles.

A photon prepared in two temporal modes (delay ``mzi_delay``) is reflected
by a retroreflector receding with radial velocity ``beta * c`` and sent back
through the same unbalanced interferometer.  The reflection Doppler-scales
the wavepacket argument by ``f = (1 - beta) / (1 + beta)``, which shows up as
a relative phase between the two modes and a slight loss of overlap.

Sign convention: ``beta > 0`` means increasing range (receding satellite).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, ValidationError
from .quadrature import integrate

SPEED_OF_LIGHT = 299_792_458.0  # m/s, exact SI value

# |beta| guard for the interference formulas; LEO radial speeds stay below ~3e-5.
BETA_LIMIT = 1e-3

_LD = np.longdouble
_PI_LD = np.arccos(_LD(-1))


@dataclass(frozen=True)
class OpticalConfig:
    """Source and interferometer parameters (SI units)."""

    wavelength_vacuum: float
    coherence_time: float
    mzi_delay: float
    rep_period: float
    # off only for oracle stress configurations with overlapping modes
    require_distinct_modes: bool = field(default=True, compare=False, repr=False)

    def __post_init__(self):
        for name in ("wavelength_vacuum", "coherence_time", "mzi_delay", "rep_period"):
            value = getattr(self, name)
            if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
                raise ValidationError(f"{name} must be a positive finite number, got {value!r}")
        if self.require_distinct_modes and self.mzi_delay <= 10 * self.coherence_time:
            raise ValidationError(
                f"mzi_delay={self.mzi_delay!r} must exceed 10 x coherence_time={self.coherence_time!r}"
            )
        if self.mzi_delay >= self.rep_period / 2:
            raise ValidationError(
                f"mzi_delay={self.mzi_delay!r} must be below rep_period/2={self.rep_period / 2!r}"
            )

    @property
    def angular_frequency(self) -> float:
        return 2.0 * math.pi * SPEED_OF_LIGHT / self.wavelength_vacuum

    def to_dict(self) -> dict:
        return {
            "wavelength_vacuum": self.wavelength_vacuum,
            "coherence_time": self.coherence_time,
            "mzi_delay": self.mzi_delay,
            "rep_period": self.rep_period,
        }


@dataclass(frozen=True)
class BoostParams:
    beta: float
    gamma: float
    f_beta: float
    sat_range: float
    t_rtt: float


@dataclass(frozen=True)
class KinematicSample:
    t: float
    beta: float
    phase: float
    visibility: float
    p_central: float


def _check_beta(beta, limit=BETA_LIMIT):
    b = np.asarray(beta, dtype=float)
    bad = ~(np.abs(b) < limit)
    if np.any(bad):
        offending = b[bad].ravel()[0] if b.ndim else float(b)
        raise DomainError(f"beta={offending!r} outside admissible range |beta| < {limit:g}")
    return b


def _out(x):
    return float(x) if np.ndim(x) == 0 else x


def doppler_factor(beta):
    """Reflection Doppler factor ``(1 - beta) / (1 + beta)``."""
    b = _check_beta(beta, 1.0)
    return _out((1.0 - b) / (1.0 + b))


def doppler_stretch(dt, beta):
    """Delay between two pulses after reflection: ``dt * (1 + beta) / (1 - beta)``."""
    b = _check_beta(beta, 1.0)
    return _out(np.asarray(dt, dtype=float) * (1.0 + b) / (1.0 - b))


def boost_params(beta: float, sat_range: float) -> BoostParams:
    """Collinear boost quantities for a mirror at ``sat_range`` moving with ``beta``."""
    b = float(_check_beta(beta, 1.0))
    if not sat_range > 0:
        raise ValidationError(f"sat_range must be positive, got {sat_range!r}")
    gamma = 1.0 / math.sqrt(1.0 - b * b)
    return BoostParams(
        beta=b,
        gamma=gamma,
        f_beta=(1.0 - b) / (1.0 + b),
        sat_range=sat_range,
        t_rtt=2.0 / (1.0 - b) * sat_range / SPEED_OF_LIGHT,
    )


def kinematic_phase(beta, cfg: OpticalConfig):
    """Unwrapped relative phase ``2 beta / (1 + beta) * omega0 * dt`` in radians."""
    b = _check_beta(beta)
    return _out(2.0 * b / (1.0 + b) * cfg.angular_frequency * cfg.mzi_delay)


def theoretical_visibility(beta, cfg: OpticalConfig):
    b = _check_beta(beta)
    x = cfg.mzi_delay / cfg.coherence_time * b / (1.0 + b)
    return _out(np.exp(-2.0 * np.pi * x * x))


def p_central_closed_form(beta, cfg: OpticalConfig):
    """Central-peak ratio ``N_c / (2 N_l) = (1 - V cos(phi)) / 2``."""
    phase = kinematic_phase(beta, cfg)
    vis = theoretical_visibility(beta, cfg)
    return _out(0.5 * (1.0 - vis * np.cos(phase)))


def port_weights(beta, cfg: OpticalConfig, vis_degradation=1.0):
    """Per-photon probabilities of the early, central and late peaks at the detector port.

    The remaining ``1/2 + V cos(phi) / 4`` leaves through the other output.
    """
    phase = kinematic_phase(beta, cfg)
    vis = theoretical_visibility(beta, cfg) * vis_degradation
    central = 0.25 * (1.0 - vis * np.cos(phase))
    side = np.full_like(np.asarray(central, dtype=float), 0.125)
    return _out(side), _out(central), _out(side.copy())


def kinematics(t: float, beta: float, cfg: OpticalConfig) -> KinematicSample:
    phase = kinematic_phase(beta, cfg)
    vis = theoretical_visibility(beta, cfg)
    return KinematicSample(
        t=float(t),
        beta=float(beta),
        phase=phase,
        visibility=vis,
        p_central=0.5 * (1.0 - vis * math.cos(phase)),
    )


# -- wavepacket and quadrature oracles ---------------------------------------

def _wavepacket_ld(x, tau_c, omega0):
    """Real and imaginary parts of the Gaussian wavepacket in long double."""
    x = np.asarray(x, dtype=_LD)
    tau_c = _LD(tau_c)
    norm = (_LD(2) / (tau_c * tau_c)) ** _LD(0.25)
    env = norm * np.exp(-_PI_LD * x * x / (tau_c * tau_c))
    arg = _LD(omega0) * x
    return env * np.cos(arg), env * np.sin(arg)


def _omega0_ld(cfg: OpticalConfig):
    return _LD(2) * _PI_LD * _LD(SPEED_OF_LIGHT) / _LD(cfg.wavelength_vacuum)


def wavepacket(t, cfg: OpticalConfig):
    """Normalized single-photon wavepacket whose peak passes at ``t = 0``."""
    re, im = _wavepacket_ld(t, cfg.coherence_time, _omega0_ld(cfg))
    return np.asarray(re, dtype=float) + 1j * np.asarray(im, dtype=float)


def _unit_breakpoints(lo, hi, extra=()):
    edges = np.arange(math.floor(lo), math.ceil(hi) + 1, dtype=float)
    edges = np.union1d(edges, np.asarray(extra, dtype=float))
    edges = edges[(edges > lo) & (edges < hi)]
    return np.concatenate([[lo], edges, [hi]])


def wavepacket_norm(cfg: OpticalConfig, epsabs=1e-13) -> float:
    """Quadrature value of the integral of |psi0|^2 (should be 1)."""
    tau_c = cfg.coherence_time
    omega0 = _omega0_ld(cfg)

    def integrand(x):
        re, im = _wavepacket_ld(_LD(tau_c) * np.asarray(x, dtype=_LD), tau_c, omega0)
        return (re * re + im * im) * _LD(tau_c)

    res = integrate(integrand, _unit_breakpoints(-12.0, 12.0), epsabs=epsabs)
    return float(res.value)


def p_central_quadrature(beta, cfg: OpticalConfig, epsabs=1e-12) -> float:
    """Central-peak probability by direct integration of the reflected two-mode state.

    Integrates ``gamma^2 (1-beta)^2 / 4 * |psi0(-f (t + dt)) - psi0(-dt - f t)|^2``
    over ``t`` with the wavepacket evaluated in long double precision.
    """
    b = float(_check_beta(beta))
    bl = _LD(b)
    f = (1 - bl) / (1 + bl)
    gamma2 = 1 / (1 - bl * bl)
    prefactor = gamma2 * (1 - bl) ** 2 / 4
    tau_c = cfg.coherence_time
    tau_ld = _LD(tau_c)
    dt = _LD(cfg.mzi_delay)
    omega0 = _omega0_ld(cfg)

    def integrand(x):
        tp = tau_ld * np.asarray(x, dtype=_LD)
        ar, ai = _wavepacket_ld(-f * (tp + dt), tau_c, omega0)
        br, bi = _wavepacket_ld(-dt - f * tp, tau_c, omega0)
        dr = ar - br
        di = ai - bi
        return prefactor * (dr * dr + di * di) * tau_ld

    # window: dt plus ten stretched coherence times on either side
    stretched = tau_c / float(f)
    half = (cfg.mzi_delay + 10.0 * stretched) / tau_c
    peaks = (-cfg.mzi_delay / tau_c, -cfg.mzi_delay / (float(f) * tau_c))
    res = integrate(integrand, _unit_breakpoints(-half, half, peaks), epsabs=epsabs)
    return float(res.value)


def autocorrelation_check(cfg: OpticalConfig, epsrel=1e-9) -> float:
    """Integral of |g(tau)|^2 with g the wavepacket autocorrelation, both by quadrature.

    With the coherence-time convention used here this equals ``coherence_time``.
    """
    tau_c = cfg.coherence_time
    tau_ld = _LD(tau_c)
    omega0 = _omega0_ld(cfg)

    def g(shift):
        # shift in units of tau_c; integrand peaks around t = -shift/2.
        # conj(psi(t)) psi(t + s) carries the constant phase omega0 s, so the
        # envelope product is integrated and the phase applied afterwards
        # (otherwise a 1 s coherence time means ~1e15 carrier cycles).
        centre = -0.5 * shift
        s_ld = tau_ld * _LD(shift)

        def inner(x):
            t = tau_ld * np.asarray(x, dtype=_LD)
            a, _ = _wavepacket_ld(t, tau_c, _LD(0))
            b, _ = _wavepacket_ld(t + s_ld, tau_c, _LD(0))
            return a * b * tau_ld

        mag = integrate(inner, _unit_breakpoints(centre - 10, centre + 10), epsabs=1e-14).value
        arg = omega0 * s_ld
        return complex(float(mag * np.cos(arg)), float(mag * np.sin(arg)))

    def outer(shifts):
        vals = np.array([g(s) for s in np.asarray(shifts, dtype=float)])
        return (np.abs(vals) ** 2) * tau_c

    res = integrate(outer, _unit_breakpoints(-10.0, 10.0), epsabs=0.0, epsrel=epsrel, max_intervals=200)
    return float(res.value)
