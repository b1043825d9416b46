"""Run configuration: preset defaults, JSON overrides and input hashing."""

from __future__ import annotations

import hashlib
import json
from dataclasses import MISSING, asdict, dataclass, fields, replace
from pathlib import Path

from .errors import ValidationError
from .photonsim import DetectorModel, LinkModel
from .presets import OPTICS, DETECTOR, SLR_CADENCE, get_preset
from .ranging import PassGeometry, RangeTrack, read_range_csv, synthesize_pass
from .relativity import OpticalConfig

_SECTIONS = {
    "optical": OpticalConfig,
    "link": LinkModel,
    "detector": DetectorModel,
    "geometry": PassGeometry,
}
_KNOWN_KEYS = set(_SECTIONS) | {"preset", "vis_degradation", "range_file", "window", "seed", "cadence"}


@dataclass(frozen=True)
class RunConfig:
    optical: OpticalConfig
    link: LinkModel | None
    detector: DetectorModel
    vis_degradation: float
    geometry: PassGeometry | None = None
    range_file: str | None = None
    window: tuple | None = None
    seed: int | None = None
    cadence: float = SLR_CADENCE
    preset: str | None = None

    def __post_init__(self):
        if self.geometry is not None and self.range_file is not None:
            raise ValidationError("give one pass source: a geometry or a range_file, not both")
        if not 0 <= self.vis_degradation <= 1:
            raise ValidationError(f"vis_degradation must lie in [0, 1], got {self.vis_degradation!r}")
        if self.window is not None and len(self.window) != 2:
            raise ValidationError(f"window must be [start, end], got {self.window!r}")

    def range_track(self) -> RangeTrack:
        if self.geometry is None and self.range_file is None:
            raise ValidationError("no pass source: give a preset, a 'geometry' section, a range_file or --range")
        if self.range_file is not None:
            return read_range_csv(self.range_file)
        # the synthetic generator is noiseless, so its seed is irrelevant
        return synthesize_pass(self.geometry, self.cadence, seed=0)

    def resolved_window(self, track: RangeTrack) -> tuple[float, float]:
        if self.window is not None:
            return (float(self.window[0]), float(self.window[1]))
        # whole seconds strictly inside the velocity span
        rx = track.receive_times
        return (float(int(rx[0]) + 1), float(int(rx[-1]) - 1))

    def to_dict(self) -> dict:
        out = {
            "preset": self.preset,
            "optical": self.optical.to_dict(),
            "link": None if self.link is None else asdict(self.link),
            "detector": asdict(self.detector),
            "vis_degradation": self.vis_degradation,
            "cadence": self.cadence,
            "window": None if self.window is None else list(self.window),
            "seed": self.seed,
        }
        if self.geometry is not None:
            out["geometry"] = asdict(self.geometry)
        if self.range_file is not None:
            out["range_file"] = self.range_file
        return out


def _build(cls, base, overrides: dict, section: str):
    names = {f.name for f in fields(cls)}
    unknown = set(overrides) - names
    if unknown:
        raise ValidationError(f"unknown key(s) in '{section}': {sorted(unknown)}")
    if base is None:
        missing = [f.name for f in fields(cls)
                   if f.default is MISSING and f.default_factory is MISSING and f.name not in overrides]
        if missing:
            raise ValidationError(f"section '{section}' is missing {missing}")
        return cls(**overrides)
    return replace(base, **overrides)


def load_run_config(config_path=None, preset: str | None = None, seed: int | None = None) -> RunConfig:
    """Merge a preset (if any), a JSON config file (if any) and a command-line seed."""
    raw = {}
    if config_path is not None:
        path = Path(config_path)
        try:
            raw = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{path}:{exc.lineno}: invalid JSON ({exc.msg})") from None
        if not isinstance(raw, dict):
            raise ValidationError(f"{path}: top level must be an object")
        unknown = set(raw) - _KNOWN_KEYS
        if unknown:
            raise ValidationError(f"{path}: unknown key(s) {sorted(unknown)}")
    preset = preset or raw.get("preset")

    if preset is not None:
        try:
            p = get_preset(preset)
        except KeyError as exc:
            raise ValidationError(str(exc.args[0])) from None
        base = {"optical": p.optics, "link": p.link, "detector": p.detector, "geometry": p.geometry}
        vis = p.vis_target
        window = p.window()
    else:
        base = {"optical": OPTICS, "link": None, "detector": DETECTOR, "geometry": None}
        vis = 1.0
        window = None

    parts = {}
    for section, cls in _SECTIONS.items():
        over = raw.get(section, {})
        if not isinstance(over, dict):
            raise ValidationError(f"section '{section}' must be an object")
        if section == "geometry" and "range_file" in raw:
            parts[section] = None
            continue
        if base[section] is None and not over:
            parts[section] = None
            continue
        parts[section] = _build(cls, base[section], over, section)
    if "window" in raw:
        window = None if raw["window"] is None else tuple(float(w) for w in raw["window"])
    if seed is None:
        seed = raw.get("seed")
    range_file = raw.get("range_file")
    if range_file is not None and config_path is not None:
        range_file = str((Path(config_path).parent / range_file))
    return RunConfig(
        optical=parts["optical"],
        link=parts["link"],
        detector=parts["detector"],
        vis_degradation=float(raw.get("vis_degradation", vis)),
        geometry=parts["geometry"],
        range_file=range_file,
        window=window,
        seed=None if seed is None else int(seed),
        cadence=float(raw.get("cadence", SLR_CADENCE)),
        preset=preset,
    )


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def sha256_hex(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def input_hash(cfg: RunConfig, extra: bytes = b"") -> str:
    """Content hash of the resolved configuration plus any input file bytes."""
    d = cfg.to_dict()
    d.pop("range_file", None)
    return sha256_hex(canonical_json(d).encode() + extra)
