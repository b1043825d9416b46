"""Seeded Monte Carlo of single-photon detections behind the double-pass interferometer.

Time stamps are integer picoseconds internally so that TDC quantization and
the nanosecond file format are exact.  Pulses are processed in fixed blocks;
block ``k`` draws from its own stream ``SeedSequence(seed, spawn_key=(k,))``,
so the output does not depend on how many workers process the blocks.
"""

from __future__ import annotations

import csv
import enum
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .errors import ValidationError
from .ranging import PhaseTrack
from .relativity import OpticalConfig

PS = 1e-12
BLOCK_PULSES = 1 << 24
# recorded delta window, as fractions of the repetition period
EARLY_PEAK_FRACTION = 0.15
MULTI_PHOTON_THRESHOLD = 0.1


class Truth(enum.IntEnum):
    UNKNOWN = -1
    EARLY = 0
    CENTRAL = 1
    LATE = 2
    BACKGROUND = 3


@dataclass(frozen=True)
class LinkModel:
    """Received mean photon number and receiver transmissions.

    ``duty_cycle`` is the fraction of pulses for which the receiver is gated
    on; it scales the detection rate without changing ``mu_received``.
    """

    mu_received: float
    eta_optics: float
    detector_efficiency: float
    duty_cycle: float = 1.0

    def __post_init__(self):
        if not (math.isfinite(self.mu_received) and self.mu_received >= 0):
            raise ValidationError(f"mu_received must be >= 0, got {self.mu_received!r}")
        for name in ("eta_optics", "detector_efficiency", "duty_cycle"):
            v = getattr(self, name)
            if not 0 < v <= 1:
                raise ValidationError(f"{name} must lie in (0, 1], got {v!r}")

    @property
    def mean_detected(self) -> float:
        """Mean photons reaching the detector port per pulse, before interference."""
        return self.mu_received * self.eta_optics * self.detector_efficiency * self.duty_cycle


@dataclass(frozen=True)
class DetectorModel:
    jitter_sigma: float
    tdc_resolution: float
    background_rate: float = 0.0

    def __post_init__(self):
        if not self.jitter_sigma >= 0:
            raise ValidationError(f"jitter_sigma must be >= 0, got {self.jitter_sigma!r}")
        if not self.tdc_resolution > 0:
            raise ValidationError(f"tdc_resolution must be positive, got {self.tdc_resolution!r}")
        if abs(self.tdc_resolution / PS - round(self.tdc_resolution / PS)) > 1e-6:
            raise ValidationError("tdc_resolution must be a whole number of picoseconds")
        if not self.background_rate >= 0:
            raise ValidationError(f"background_rate must be >= 0, got {self.background_rate!r}")


@dataclass(frozen=True)
class DetectionEvent:
    t_ref: float
    t_meas: float
    truth: Truth = Truth.UNKNOWN

    @property
    def delta(self) -> float:
        return self.t_meas - self.t_ref


class EventTable:
    """Columnar detection events; times in integer picoseconds."""

    def __init__(self, t_ref_ps, t_meas_ps, truth=None, *, n_pulses=0, multi_photon_flag=False):
        self.t_ref_ps = np.asarray(t_ref_ps, dtype=np.int64)
        self.t_meas_ps = np.asarray(t_meas_ps, dtype=np.int64)
        if truth is None:
            truth = np.full(self.t_ref_ps.shape, Truth.UNKNOWN, dtype=np.int8)
        self.truth = np.asarray(truth, dtype=np.int8)
        if not (self.t_ref_ps.shape == self.t_meas_ps.shape == self.truth.shape):
            raise ValidationError("event columns must have equal length")
        self.n_pulses = int(n_pulses)
        self.multi_photon_flag = bool(multi_photon_flag)

    def __len__(self):
        return self.t_ref_ps.size

    def __getitem__(self, i) -> DetectionEvent:
        return DetectionEvent(
            float(self.t_ref_ps[i]) * PS, float(self.t_meas_ps[i]) * PS, Truth(int(self.truth[i]))
        )

    def __iter__(self):
        return (self[i] for i in range(len(self)))

    def subset(self, mask) -> "EventTable":
        return EventTable(self.t_ref_ps[mask], self.t_meas_ps[mask], self.truth[mask])

    @property
    def t_ref(self):
        return self.t_ref_ps * PS

    @property
    def delta_ps(self):
        return self.t_meas_ps - self.t_ref_ps

    @property
    def delta(self):
        return self.delta_ps * PS

    @classmethod
    def concat(cls, tables) -> "EventTable":
        tables = list(tables)
        if not tables:
            return cls([], [])
        return cls(
            np.concatenate([t.t_ref_ps for t in tables]),
            np.concatenate([t.t_meas_ps for t in tables]),
            np.concatenate([t.truth for t in tables]),
        )


def _to_ps(seconds, what):
    value = seconds / PS
    rounded = round(value)
    if abs(value - rounded) > 1e-3:
        raise ValidationError(f"{what}={seconds!r} s is not a whole number of picoseconds")
    return int(rounded)


def _block_rng(seed, block):
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(block,))))


def _candidate_offsets(rng, p, length):
    """Pulse offsets in ``[0, length)`` of a Bernoulli(p) process via geometric skips."""
    if p <= 0 or length <= 0:
        return np.empty(0, dtype=np.int64)
    if p >= 1:
        return np.arange(length, dtype=np.int64)
    expected = length * p
    chunks = []
    last = -1
    while True:
        size = int(expected + 6 * math.sqrt(expected) + 16)
        pos = last + np.cumsum(rng.geometric(p, size=size))
        chunks.append(pos)
        last = int(pos[-1])
        if last >= length:
            break
    pos = np.concatenate(chunks)
    return pos[pos < length].astype(np.int64)


@dataclass(frozen=True)
class _Plan:
    start_ps: int
    period_ps: int
    res_ps: int
    n_pulses: int
    lo_ps: int
    hi_ps: int


def _simulate_block(k, plan, ptrack, cfg, link, det, vis_degradation, seed):
    rng = _block_rng(seed, k)
    first = k * BLOCK_PULSES
    length = min(BLOCK_PULSES, plan.n_pulses - first)

    side = 0.125
    p_max = link.mean_detected * (0.5 + 0.25 * vis_degradation)
    pos = _candidate_offsets(rng, p_max, length)
    rel_ref = (first + pos) * plan.period_ps  # ps since run origin
    t_ref = (plan.start_ps + rel_ref) * PS
    beta, phase, vis, _ = ptrack.kinematics_at(t_ref)
    central = 0.25 * (1.0 - vis * vis_degradation * np.cos(phase))
    total = 2 * side + central
    keep = rng.random(pos.size) * p_max < link.mean_detected * total
    u = rng.random(pos.size) * total
    kind = np.where(u < side, Truth.EARLY, np.where(u < side + central, Truth.CENTRAL, Truth.LATE))
    kind = kind[keep].astype(np.int8)
    rel_ref = rel_ref[keep]
    beta = beta[keep]

    stretched = cfg.mzi_delay * (1.0 + beta) / (1.0 - beta)
    offset = np.select(
        [kind == Truth.EARLY, kind == Truth.CENTRAL],
        [0.0, 0.5 * (cfg.mzi_delay + stretched)],
        cfg.mzi_delay + stretched,
    )
    jitter = rng.normal(0.0, det.jitter_sigma, size=kind.size) if det.jitter_sigma > 0 else 0.0
    delta_ps = (offset + jitter) / PS

    n_bg = rng.poisson(det.background_rate * length * plan.period_ps * PS) if det.background_rate > 0 else 0
    bg_rel = (first + rng.integers(0, length, size=n_bg)) * plan.period_ps
    bg_delta = rng.uniform(plan.lo_ps, plan.hi_ps, size=n_bg)

    rel_ref = np.concatenate([rel_ref, bg_rel])
    delta_ps = np.concatenate([np.broadcast_to(delta_ps, kind.shape), bg_delta])
    kind = np.concatenate([kind, np.full(n_bg, Truth.BACKGROUND, dtype=np.int8)])

    rel_meas = np.rint((rel_ref + delta_ps) / plan.res_ps).astype(np.int64) * plan.res_ps
    d = rel_meas - rel_ref
    inside = (d >= plan.lo_ps) & (d < plan.hi_ps)
    rel_ref, rel_meas, kind = rel_ref[inside], rel_meas[inside], kind[inside]

    order = np.lexsort((rel_meas, rel_ref))
    rel_ref, rel_meas, kind = rel_ref[order], rel_meas[order], kind[order]
    # one click per pulse: the detector is dead for the rest of the period
    first_click = np.ones(rel_ref.size, dtype=bool)
    first_click[1:] = rel_ref[1:] != rel_ref[:-1]
    return EventTable(
        plan.start_ps + rel_ref[first_click],
        plan.start_ps + rel_meas[first_click],
        kind[first_click],
    )


def simulate_pass(ptrack: PhaseTrack, cfg: OpticalConfig, link: LinkModel, det: DetectorModel,
                  vis_degradation: float, window, seed: int, workers: int = 1) -> EventTable:
    """Detection events for every pulse epoch in ``window = (start, end)`` seconds.

    Each pulse yields at most one click.  The signal click probability is
    ``mean_detected * (w_early + w_central + w_late)`` with peak weights
    ``(1/8, (1 - V cos(phi))/4, 1/8)`` and ``V`` the kinematic visibility
    times ``vis_degradation``.  Peaks sit at 0, ``(dt + dt')/2`` and
    ``dt + dt'`` after the reference epoch, ``dt'`` being the Doppler
    stretched interferometer delay.
    """
    if not 0 <= vis_degradation <= 1:
        raise ValidationError(f"vis_degradation must lie in [0, 1], got {vis_degradation!r}")
    start, end = (float(w) for w in window)
    period_ps = _to_ps(cfg.rep_period, "rep_period")
    start_ps = _to_ps(start, "window start")
    n_pulses = int(math.floor((end - start) / cfg.rep_period + 1e-9))
    if n_pulses <= 0:
        raise ValidationError(f"empty simulation window {window!r}")
    lo, hi = ptrack.span
    last = (start_ps + (n_pulses - 1) * period_ps) * PS
    if start < lo or last > hi:
        raise ValidationError(f"window {window!r} is not inside the phase-track span [{lo!r}, {hi!r}]")

    multi = link.mu_received * link.eta_optics > MULTI_PHOTON_THRESHOLD
    if multi:
        warnings.warn(
            f"mu * eta = {link.mu_received * link.eta_optics:.3g} is outside the single-photon regime",
            RuntimeWarning,
            stacklevel=2,
        )

    plan = _Plan(
        start_ps=start_ps,
        period_ps=period_ps,
        res_ps=_to_ps(det.tdc_resolution, "tdc_resolution"),
        n_pulses=n_pulses,
        lo_ps=-int(round(EARLY_PEAK_FRACTION * period_ps)),
        hi_ps=period_ps - int(round(EARLY_PEAK_FRACTION * period_ps)),
    )
    n_blocks = -(-n_pulses // BLOCK_PULSES)

    def run(k):
        return _simulate_block(k, plan, ptrack, cfg, link, det, vis_degradation, seed)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, range(n_blocks)))
    else:
        parts = [run(k) for k in range(n_blocks)]
    events = EventTable.concat(parts)
    events.n_pulses = n_pulses
    events.multi_photon_flag = multi
    return events


def wrap_phase(phase):
    wrapped = np.mod(phase, 2.0 * np.pi)
    return np.where(wrapped >= 2.0 * np.pi, 0.0, wrapped)


def tag_phases(events: EventTable, ptrack: PhaseTrack):
    """Kinematic phase mod 2 pi at each event's reference epoch."""
    t = events.t_ref
    lo, hi = ptrack.span
    outside = np.flatnonzero((t < lo) | (t > hi))
    if outside.size:
        shown = ", ".join(str(i) for i in outside[:10])
        more = "" if outside.size <= 10 else f" (+{outside.size - 10} more)"
        raise ValueError(f"events outside the phase-track span at indices {shown}{more}")
    _, phase, _, _ = ptrack.kinematics_at(t)
    return wrap_phase(phase)


def event_phase_tag(events: EventTable, ptrack: PhaseTrack):
    """Pairs ``(DetectionEvent, phase mod 2 pi)``."""
    phases = tag_phases(events, ptrack)
    return [(events[i], float(phases[i])) for i in range(len(events))]


# -- event files --------------------------------------------------------------

EVENT_HEADER = ("t_ref_ns", "t_meas_ns", "truth")
_TRUTH_NAMES = {t: t.name.lower() for t in Truth}


def format_ns(ps: int) -> str:
    """Integer picoseconds as a nanosecond decimal string with 3 fractional digits."""
    sign = "-" if ps < 0 else ""
    q, r = divmod(abs(int(ps)), 1000)
    return f"{sign}{q}.{r:03d}"


def parse_ns(text: str) -> int:
    text = text.strip()
    sign = -1 if text.startswith("-") else 1
    body = text.lstrip("+-")
    whole, _, frac = body.partition(".")
    if not whole.isdigit() and not (whole == "" and frac):
        raise ValueError(f"not a nanosecond value: {text!r}")
    if len(frac) > 3 or (frac and not frac.isdigit()):
        raise ValueError(f"more than picosecond precision in {text!r}")
    return sign * (int(whole or 0) * 1000 + int(frac.ljust(3, "0") or 0))


def write_events_csv(events: EventTable, path, include_truth: bool = True) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(EVENT_HEADER if include_truth else EVENT_HEADER[:2])
        for r, m, k in zip(events.t_ref_ps.tolist(), events.t_meas_ps.tolist(), events.truth.tolist()):
            row = [format_ns(r), format_ns(m)]
            if include_truth:
                row.append(_TRUTH_NAMES[Truth(k)])
            w.writerow(row)


def read_events_csv(path, keep_truth: bool = False) -> EventTable:
    """Load an event file.  The truth column is dropped unless ``keep_truth``."""
    path = Path(path)
    refs, meas, truth = [], [], []
    names = {v: k for k, v in _TRUTH_NAMES.items()}
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header[:2]) != EVENT_HEADER[:2]:
            raise ValidationError(f"{path}:1: expected header starting t_ref_ns,t_meas_ns, got {header!r}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) < 2:
                raise ValidationError(f"{path}:{lineno}: expected at least 2 columns")
            try:
                refs.append(parse_ns(row[0]))
                meas.append(parse_ns(row[1]))
            except ValueError as exc:
                raise ValidationError(f"{path}:{lineno}: {exc}") from None
            if keep_truth:
                truth.append(names.get(row[2].strip(), Truth.UNKNOWN) if len(row) > 2 else Truth.UNKNOWN)
    return EventTable(refs, meas, truth if keep_truth else None)


def model_dict(link: LinkModel, det: DetectorModel) -> dict:
    return {"link": asdict(link), "detector": asdict(det)}
