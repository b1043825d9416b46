import csv
import hashlib
import json
import math
import subprocess
import sys

import numpy as np
import pytest

from satinterf import cli
from satinterf.cli import eval_rad, main

REPORT_FILES = ("histogram.csv", "fit.json", "visibility.json", "visibility.csv", "manifest.json")


def sha(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


@pytest.fixture(scope="module")
def sim_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("sim")
    assert main(["simulate", "--preset", "beacon-c", "--seed", "5", "--out", str(out)]) == 0
    return out


def analyze(out, sim_dir, *extra, events=None):
    return main(["analyze", "--preset", "beacon-c", "--events", str(events or sim_dir / "events.csv"),
                 "--range", str(sim_dir / "range.csv"), "--out", str(out), *extra])


def test_eval_rad():
    assert eval_rad("4pi/5") == pytest.approx(4 * math.pi / 5)
    assert eval_rad("-pi/5") == pytest.approx(-math.pi / 5)
    assert eval_rad("0.5") == 0.5
    assert eval_rad("pi") == pytest.approx(math.pi)


def test_predict_preset(tmp_path):
    assert main(["predict", "--preset", "beacon-c", "--out", str(tmp_path)]) == 0
    with (tmp_path / "phase_track.csv").open() as fh:
        rows = list(csv.DictReader(fh))
    assert list(rows[0]) == ["t_s", "beta", "phi_rad_unwrapped", "visibility", "p_c"]
    beta = np.array([float(r["beta"]) for r in rows])
    assert np.abs(beta).max() * 299_792_458 <= 6000


def test_predict_constant_range(tmp_path):
    rng_file = tmp_path / "r.csv"
    rng_file.write_text("t_s,roundtrip_m\n" + "".join(f"{0.1 * i!r},2400000.0\n" for i in range(30)))
    assert main(["predict", "--range", str(rng_file), "--out", str(tmp_path / "o")]) == 0
    with (tmp_path / "o" / "phase_track.csv").open() as fh:
        assert all(float(r["phi_rad_unwrapped"]) == 0.0 for r in csv.DictReader(fh))


def test_predict_malformed_row(tmp_path, capsys):
    rng_file = tmp_path / "r.csv"
    rng_file.write_text("t_s,roundtrip_m\n0.0,2400000.0\n0.1,oops\n")
    assert main(["predict", "--range", str(rng_file), "--out", str(tmp_path)]) == 2
    assert ":3:" in capsys.readouterr().err


def test_simulate_repeatable(tmp_path, sim_dir):
    assert main(["simulate", "--preset", "beacon-c", "--seed", "5", "--out", str(tmp_path), "--workers", "3"]) == 0
    for name in ("events.csv", "range.csv", "manifest.json"):
        assert sha(tmp_path / name) == sha(sim_dir / name)
    manifest = json.loads((sim_dir / "manifest.json").read_text())
    assert manifest["outputs"]["events.csv"] == sha(sim_dir / "events.csv")
    assert len(manifest["input_sha256"]) == 64


def test_simulate_needs_seed(tmp_path, capsys):
    assert main(["simulate", "--preset", "beacon-c", "--out", str(tmp_path)]) == 2
    assert "seed" in capsys.readouterr().err


def test_simulate_zero_mu_then_analyze(tmp_path, capsys):
    conf = tmp_path / "c.json"
    conf.write_text(json.dumps({"preset": "beacon-c", "link": {"mu_received": 0.0}}))
    assert main(["simulate", "--config", str(conf), "--seed", "1", "--out", str(tmp_path)]) == 0
    assert (tmp_path / "events.csv").read_text() == "t_ref_ns,t_meas_ns,truth\n"
    code = main(["analyze", "--config", str(conf), "--events", str(tmp_path / "events.csv"),
                 "--range", str(tmp_path / "range.csv"), "--out", str(tmp_path / "a")])
    assert code == 2
    assert "no events" in capsys.readouterr().err


def test_analyze_outputs(tmp_path, sim_dir):
    assert analyze(tmp_path, sim_dir) == 0
    for name in REPORT_FILES:
        assert (tmp_path / name).exists()
    hist = (tmp_path / "histogram.csv").read_text().splitlines()
    assert hist[0] == "bin_left_ns,count" and len(hist) == 124
    fit = json.loads((tmp_path / "fit.json").read_text())
    # all phases pooled: washed-out interference
    assert abs(fit["p_c"] - 0.5) < 3 * fit["p_c_err"]
    vis_rows = (tmp_path / "visibility.csv").read_text().splitlines()
    assert vis_rows[0] == "phi_rad,p_c,p_c_err" and len(vis_rows) == 12
    assert vis_rows[1].split(",")[1:] == vis_rows[-1].split(",")[1:]
    vis = json.loads((tmp_path / "visibility.json").read_text())
    assert abs(vis["v_exp"] - 0.67) < 3 * vis["v_exp_err"]


def test_analyze_phase_select(tmp_path, sim_dir):
    assert analyze(tmp_path, sim_dir, "--phase-select", "4pi/5:6pi/5") == 0
    fit = json.loads((tmp_path / "fit.json").read_text())
    assert fit["selection_rad"] == pytest.approx([4 * math.pi / 5, 6 * math.pi / 5])
    assert abs(fit["p_c"] - 0.8134) < 3 * fit["p_c_err"]


def test_analyze_bins(tmp_path, sim_dir):
    assert analyze(tmp_path, sim_dir, "--bins", "162") == 0
    assert len((tmp_path / "histogram.csv").read_text().splitlines()) == 62


def test_bad_phase_select(tmp_path, sim_dir):
    assert analyze(tmp_path, sim_dir, "--phase-select", "3:1") == 2
    assert analyze(tmp_path, sim_dir, "--phase-select", "a:b") == 2


def test_truth_column_ignored(tmp_path, sim_dir):
    # scramble the truth labels and drop them entirely; reports must not move
    rows = (sim_dir / "events.csv").read_text().splitlines()
    labels = ["early", "central", "late", "background"]
    scrambled = [rows[0]] + [",".join(r.split(",")[:2] + [labels[i % 4]]) for i, r in enumerate(rows[1:])]
    stripped = ["t_ref_ns,t_meas_ns"] + [",".join(r.split(",")[:2]) for r in rows[1:]]
    variants = {}
    for name, lines in (("orig", rows), ("scrambled", scrambled), ("stripped", stripped)):
        ev = tmp_path / f"{name}.csv"
        ev.write_text("\n".join(lines) + "\n")
        out = tmp_path / name
        assert analyze(out, sim_dir, "--phase-select=-pi/5:pi/5", events=ev) == 0
        variants[name] = {f: sha(out / f) for f in REPORT_FILES}
    assert variants["orig"] == variants["scrambled"] == variants["stripped"]


def test_report_deterministic(tmp_path, sim_dir, capsys):
    outs = []
    for k in range(2):
        out = tmp_path / f"r{k}"
        assert main(["report", "--preset", "beacon-c", "--events", str(sim_dir / "events.csv"),
                     "--range", str(sim_dir / "range.csv"), "--out", str(out)]) == 0
        outs.append({f: sha(out / f) for f in REPORT_FILES + ("summary.txt",)})
    assert outs[0] == outs[1]
    text = capsys.readouterr().out
    assert "V_exp" in text and "P_c" in text


def test_visibility_refused_exit_code(tmp_path):
    conf = tmp_path / "c.json"
    conf.write_text(json.dumps({"preset": "beacon-c", "link": {"duty_cycle": 0.0005}}))
    assert main(["simulate", "--config", str(conf), "--seed", "1", "--out", str(tmp_path)]) == 0
    code = main(["analyze", "--config", str(conf), "--events", str(tmp_path / "events.csv"),
                 "--range", str(tmp_path / "range.csv"), "--out", str(tmp_path / "a")])
    assert code == 3
    assert "refused" in json.loads((tmp_path / "a" / "visibility.json").read_text())


def test_oracle_sweep(tmp_path):
    assert main(["oracle", "--sweep", "21", "--out", str(tmp_path)]) == 0
    with (tmp_path / "oracle.csv").open() as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 21
    zero = rows[10]
    assert float(zero["beta"]) == 0.0
    assert (float(zero["p_closed_form"]), float(zero["p_quadrature"]), float(zero["abs_diff"])) == (0, 0, 0)
    assert max(float(r["abs_diff"]) for r in rows) < 1e-9


def test_oracle_domain_error(tmp_path):
    assert main(["oracle", "--betas", "0.002", "--out", str(tmp_path)]) == 2


def test_oracle_mismatch_exit_code(tmp_path, monkeypatch):
    monkeypatch.setattr(cli, "p_central_quadrature", lambda b, cfg: cli.p_central_closed_form(b, cfg) + 1e-6)
    assert main(["oracle", "--betas", "1e-5", "--out", str(tmp_path)]) == 4


def test_console_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "satinterf.cli", "oracle", "--betas", "0,3e-5", "--out", str(tmp_path)],
                         capture_output=True, text=True)
    assert res.returncode == 0, res.stderr
