"""Command-line front end: predict, simulate, analyze, oracle, report."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (
    N_PHASE_BINS,
    PHASE_HALF_WIDTH,
    analyze_selection,
    phase_binned_analysis,
)
from .config import RunConfig, canonical_json, input_hash, load_run_config, sha256_hex
from .errors import DomainError, FitRefused, QuadratureError, ValidationError
from .photonsim import PS, read_events_csv, simulate_pass, tag_phases, write_events_csv
from .ranging import build_phase_track, read_range_csv, write_phase_track_csv, write_range_csv
from .relativity import p_central_closed_form, p_central_quadrature

log = logging.getLogger("satinterf")

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_FIT_REFUSED = 3
EXIT_ORACLE_MISMATCH = 4

ORACLE_TOLERANCE = 1e-9


def _parse_phase_select(text):
    if text is None or text.strip().lower() == "none":
        return None
    try:
        lo, hi = (float(eval_rad(x)) for x in text.split(":"))
    except ValueError:
        raise ValidationError(f"--phase-select expects lo:hi in radians or 'none', got {text!r}") from None
    if not hi > lo:
        raise ValidationError(f"--phase-select needs hi > lo, got {text!r}")
    return (lo, hi)


def eval_rad(token: str) -> float:
    """A float, optionally written as a multiple of pi (``0.8pi``, ``-pi/5``, ``4pi/5``)."""
    t = token.strip().lower().replace(" ", "")
    if "pi" not in t:
        return float(t)
    num, _, den = t.partition("/")
    coeff = num.replace("*", "").replace("pi", "")
    c = 1.0 if coeff in ("", "+") else -1.0 if coeff == "-" else float(coeff)
    return c * math.pi / (float(den) if den else 1.0)


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_json(path: Path, obj) -> None:
    path.write_text(canonical_json(obj))


def _load_config(args) -> RunConfig:
    return load_run_config(args.config, args.preset, args.seed)


def _range_track(args, cfg: RunConfig):
    if getattr(args, "range", None):
        return read_range_csv(args.range)
    return cfg.range_track()


# -- subcommands ----------------------------------------------------------------

def cmd_predict(args) -> int:
    cfg = _load_config(args)
    track = _range_track(args, cfg)
    ptrack = build_phase_track(track, cfg.optical)
    out = _out_dir(args)
    write_range_csv(track, out / "range.csv")
    write_phase_track_csv(ptrack, out / "phase_track.csv")
    v = ptrack.betas * 299_792_458.0
    log.info("phase track: %d knots, |v_r| <= %.1f m/s", len(ptrack), float(np.max(np.abs(v))))
    return EXIT_OK


def cmd_simulate(args) -> int:
    cfg = _load_config(args)
    if cfg.seed is None:
        raise ValidationError("simulate needs a seed (--seed or 'seed' in the config)")
    if cfg.link is None:
        raise ValidationError("simulate needs a link model: give a preset or a 'link' section")
    track = _range_track(args, cfg)
    ptrack = build_phase_track(track, cfg.optical)
    window = cfg.resolved_window(track)
    events = simulate_pass(ptrack, cfg.optical, cfg.link, cfg.detector, cfg.vis_degradation,
                           window, cfg.seed, workers=args.workers)
    out = _out_dir(args)
    write_range_csv(track, out / "range.csv")
    write_events_csv(events, out / "events.csv")
    range_bytes = (out / "range.csv").read_bytes()
    manifest = {
        "tool": "satinterf",
        "version": __version__,
        "command": "simulate",
        "config": cfg.to_dict(),
        "window_s": list(window),
        "n_pulses": events.n_pulses,
        "n_events": len(events),
        "multi_photon_flag": events.multi_photon_flag,
        "input_sha256": input_hash(cfg, range_bytes),
        "outputs": {
            "range.csv": sha256_hex(range_bytes),
            "events.csv": sha256_hex((out / "events.csv").read_bytes()),
        },
    }
    manifest["config"].pop("range_file", None)
    _write_json(out / "manifest.json", manifest)
    log.info("%d events from %d pulses", len(events), events.n_pulses)
    return EXIT_OK


def _analysis_inputs(args):
    cfg = _load_config(args)
    if not args.events:
        raise ValidationError("analyze needs --events")
    events = read_events_csv(args.events)
    if len(events) == 0:
        raise ValidationError(f"{args.events}: no events to analyze")
    track = _range_track(args, cfg)
    ptrack = build_phase_track(track, cfg.optical)
    det = cfg.detector
    if args.bins is not None:
        det = replace(det, tdc_resolution=args.bins * PS)
    return cfg, events, ptrack, det


def _run_analysis(args):
    """Shared by analyze and report; returns (exit code, summary dict)."""
    cfg, events, ptrack, det = _analysis_inputs(args)
    phases = tag_phases(events, ptrack)
    out = _out_dir(args)
    select = _parse_phase_select(args.phase_select)

    sel = analyze_selection(events, phases, cfg.optical, det, select)
    with (out / "histogram.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("bin_left_ns", "count"))
        for left, n in zip(sel.histogram.bin_left, sel.histogram.counts):
            w.writerow((f"{left / 1e-9:.3f}", int(n)))
    fit_report = {
        "selection_rad": None if select is None else list(select),
        "n_events": sel.n_events,
        "bin_width_ps": round(det.tdc_resolution / PS),
        "fit": None if sel.fit is None else sel.fit.to_dict(),
        "p_c": None if sel.p_c is None else sel.p_c.value,
        "p_c_err": None if sel.p_c is None else sel.p_c.error,
        "note": sel.note,
    }
    _write_json(out / "fit.json", fit_report)

    summary = {"selection": fit_report, "visibility": None}
    code = EXIT_OK
    try:
        vis = phase_binned_analysis(events, phases, ptrack, cfg.optical, det)
    except FitRefused as exc:
        _write_json(out / "visibility.json", {"refused": str(exc), "diagnostics": _jsonable(exc.diagnostics)})
        log.error("visibility fit refused: %s", exc)
        code = EXIT_FIT_REFUSED
    else:
        _write_json(out / "visibility.json", vis.to_dict())
        with (out / "visibility.csv").open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(("phi_rad", "p_c", "p_c_err"))
            rows = [(b.index, b) for b in vis.bins if b.p_c is not None]
            # the last interval repeats the first one shifted by 2 pi
            rows += [(N_PHASE_BINS, b) for j, b in rows if j == 0]
            for j, b in rows:
                w.writerow((repr(j * PHASE_HALF_WIDTH), repr(b.p_c.value), repr(b.p_c.error)))
        summary["visibility"] = vis.to_dict()
    if sel.p_c is None and select is not None and code == EXIT_OK:
        code = EXIT_FIT_REFUSED

    # hash the timing columns only, so the truth column never affects any output
    inputs = events.t_ref_ps.tobytes() + events.t_meas_ps.tobytes()
    if getattr(args, "range", None):
        inputs += Path(args.range).read_bytes()
    manifest = {
        "tool": "satinterf",
        "version": __version__,
        "command": args.command,
        "config": {k: v for k, v in cfg.to_dict().items() if k != "range_file"},
        "phase_select": args.phase_select,
        "bins_ps": args.bins,
        "input_sha256": input_hash(cfg, inputs),
    }
    _write_json(out / "manifest.json", manifest)
    return code, summary


def _jsonable(obj):
    return json.loads(json.dumps(obj, default=str))


def cmd_analyze(args) -> int:
    code, _ = _run_analysis(args)
    return code


def _format_summary(summary) -> str:
    lines = []
    s = summary["selection"]
    sel = "all phases" if s["selection_rad"] is None else "phi in [{:.4f}, {:.4f}] rad".format(*s["selection_rad"])
    lines.append(f"selection       {sel}")
    lines.append(f"events          {s['n_events']}")
    if s["fit"] is not None:
        f = s["fit"]
        lines.append(f"N_c             {f['n_central']:.1f} +- {f['n_central_err']:.1f}")
        lines.append(f"N_l             {f['n_lateral']:.1f} +- {f['n_lateral_err']:.1f}")
    if s["p_c"] is not None:
        lines.append(f"P_c             {s['p_c']:.4f} +- {s['p_c_err']:.4f}")
    else:
        lines.append(f"P_c             n/a ({s['note']})")
    v = summary["visibility"]
    if v is None:
        lines.append("visibility      refused")
    else:
        lines.append("")
        lines.append(f"{'bin':>3} {'interval/pi':>13} {'events':>7} {'cos':>8} {'P_c':>8} {'err':>7}")
        for b in v["bins"]:
            lo, hi = (x / math.pi for x in b["interval_rad"])
            pc = "n/a" if b["p_c"] is None else f"{b['p_c']:.4f}"
            pe = "" if b["p_c_err"] is None else f"{b['p_c_err']:.4f}"
            lines.append(f"{b['index']:>3} {f'[{lo:+.1f},{hi:+.1f}]':>13} {b['n_events']:>7} "
                         f"{b['cosine']:>8.4f} {pc:>8} {pe:>7}")
        lines.append("")
        flag = "  (above 1)" if v["overshoot"] else ""
        lines.append(f"V_exp           {v['v_exp']:.4f} +- {v['v_exp_err']:.4f}{flag}")
    return "\n".join(lines) + "\n"


def cmd_report(args) -> int:
    code, summary = _run_analysis(args)
    text = _format_summary(summary)
    (Path(args.out) / "summary.txt").write_text(text)
    sys.stdout.write(text)
    return code


def cmd_oracle(args) -> int:
    cfg = _load_config(args)
    if args.betas:
        try:
            betas = [float(b) for b in args.betas.split(",") if b.strip()]
        except ValueError:
            raise ValidationError(f"--betas expects comma-separated numbers, got {args.betas!r}") from None
    else:
        betas = np.linspace(-1e-4, 1e-4, args.sweep).tolist()
    out = _out_dir(args)
    worst = 0.0
    with (out / "oracle.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("beta", "p_closed_form", "p_quadrature", "abs_diff"))
        for b in betas:
            closed = p_central_closed_form(b, cfg.optical)
            quad = p_central_quadrature(b, cfg.optical)
            diff = abs(closed - quad)
            worst = max(worst, diff)
            w.writerow((repr(b), repr(closed), repr(quad), repr(diff)))
    log.info("%d betas, max |diff| = %.3e", len(betas), worst)
    if worst > ORACLE_TOLERANCE:
        log.error("oracle mismatch: %.3e exceeds %.0e", worst, ORACLE_TOLERANCE)
        return EXIT_ORACLE_MISMATCH
    return EXIT_OK


# -- argument parsing -------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--preset", help="built-in preset: beacon-c, stella or ajisai")
    common.add_argument("--seed", type=int, help="simulation seed")
    common.add_argument("--out", default=".", help="output directory (default: current)")
    common.add_argument("--range", help="range-track CSV (t_s,roundtrip_m); default: synthetic pass")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="satinterf", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("predict", parents=[common], help="phase track from a range track")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("simulate", parents=[common], help="simulate detection events for a pass")
    p.add_argument("--workers", type=int, default=1, help="threads (output does not depend on it)")
    p.set_defaults(func=cmd_simulate)

    for name, func, text in (("analyze", cmd_analyze, "histogram, peak fit and visibility"),
                             ("report", cmd_report, "analyze and print a summary table")):
        p = sub.add_parser(name, parents=[common], help=text)
        p.add_argument("--events", help="event CSV from simulate")
        p.add_argument("--bins", type=int, help="histogram bin width in ps (default: TDC resolution)")
        p.add_argument("--phase-select", default="none",
                       help="lo:hi radians (pi multiples allowed, e.g. 4pi/5:6pi/5) or 'none'")
        p.set_defaults(func=func)

    p = sub.add_parser("oracle", parents=[common], help="closed form vs quadrature table")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--betas", help="comma-separated beta values")
    g.add_argument("--sweep", type=int, default=100, help="evenly spaced betas in [-1e-4, 1e-4]")
    p.set_defaults(func=cmd_oracle)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except (ValidationError, DomainError, FileNotFoundError, IsADirectoryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except FitRefused as exc:
        print(f"fit refused: {exc}", file=sys.stderr)
        return EXIT_FIT_REFUSED
    except QuadratureError as exc:
        print(f"oracle failed: {exc}", file=sys.stderr)
        return EXIT_ORACLE_MISMATCH


if __name__ == "__main__":
    sys.exit(main())
