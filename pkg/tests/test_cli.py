import json
import os
import subprocess
import sys

import pytest

from curveflow import cli
from curveflow.config import dump_config, load_config, parse_config
from curveflow.errors import ConfigError


def _write(tmp_path, text, name="run.cfg"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def _verify(tmp_path, *extra, out="out"):
    return cli.main(["verify", "--out", str(tmp_path / out), *extra])


# --- config ---------------------------------------------------------------------------


def test_config_parsing():
    cfg = parse_config("# comment\nn = 5\nf = pow  # trailing\np = 3\nM = auto\n")
    assert cfg["n"] == 5 and cfg["f"] == "pow" and cfg["p"] == 3.0 and cfg["M"] is None
    assert cfg["seed"] == 42  # default
    assert parse_config(dump_config(cfg)) == cfg
    for bad in ("n 4", "zeta = 1", "n = 4\nn = 5", "n = four", "seed = -1", "samples = -3"):
        with pytest.raises(ConfigError):
            parse_config(bad)
    with pytest.raises(ConfigError):
        load_config("/nonexistent/curveflow.cfg")


# --- verify ----------------------------------------------------------------------------


def test_verify_default_seed_passes(tmp_path, capsys):
    assert _verify(tmp_path) == 0
    out = capsys.readouterr().out
    assert "FAIL" not in out
    lines = (tmp_path / "out" / "verify_seed42.jsonl").read_text().splitlines()
    labels = [json.loads(x)["label"] for x in lines]
    assert labels[0] == "spectral-fd"
    assert any(lab.startswith("Q-uniform") for lab in labels)
    assert sum(lab.startswith("Z-estimate") for lab in labels) == 2
    assert all(json.loads(x)["passed"] for x in lines)


def test_verify_zero_samples(tmp_path, capsys):
    assert _verify(tmp_path, "--samples", "0") == 0
    assert "no samples" in capsys.readouterr().out


def test_verify_tiny_M_is_config_error(tmp_path, capsys):
    cfg = _write(tmp_path, "M = 0.1\n")
    assert _verify(tmp_path, "--config", cfg) == 2
    assert "g2" in capsys.readouterr().err


def test_verify_non_convex_cone_is_config_error(tmp_path, capsys):
    # beta = 0 drops (m+1)-convexity from the cone; the estimates need beta > 0
    cfg = _write(tmp_path, "eta = 1e6\nbeta = 0\n")
    assert _verify(tmp_path, "--config", cfg) == 2
    assert "beta > 0" in capsys.readouterr().err


def test_unknown_key_and_bad_flags(tmp_path):
    assert _verify(tmp_path, "--config", _write(tmp_path, "colour = red\n")) == 2
    assert _verify(tmp_path, "--samples", "-1") == 2
    assert cli.main(["explode"]) == 2
    assert cli.main(["verify", "--seed", str(2 ** 64), "--out", str(tmp_path)]) == 2


def test_verify_failure_exit_code(tmp_path, monkeypatch):
    monkeypatch.setattr(cli, "FD_TOL", 0.0)  # impossible finite-difference tolerance
    assert _verify(tmp_path, "--samples", "500") == 1


def test_verify_is_byte_deterministic(tmp_path, monkeypatch):
    outs = []
    for i, threads in enumerate(("1", "3")):
        monkeypatch.setenv("CURVEFLOW_THREADS", threads)
        assert _verify(tmp_path, "--samples", "3000", "--seed", "7", out=f"o{i}") == 0
        outs.append((tmp_path / f"o{i}" / "verify_seed7.jsonl").read_bytes())
    assert outs[0] == outs[1]
    assert _verify(tmp_path, "--samples", "3000", "--seed", "8", out="o2") == 0
    assert (tmp_path / "o2" / "verify_seed8.jsonl").read_bytes() != outs[0]


def test_verify_pure_python_backend_agrees(tmp_path):
    env = dict(os.environ, CURVEFLOW_PURE_PYTHON="1")
    out = tmp_path / "py"
    subprocess.run([sys.executable, "-m", "curveflow.cli", "verify", "--samples", "1000",
                    "--seed", "3", "--out", str(out)], env=env, check=True,
                   capture_output=True)
    assert _verify(tmp_path, "--samples", "1000", "--seed", "3", out="c") == 0
    py = [json.loads(x) for x in (out / "verify_seed3.jsonl").read_text().splitlines()]
    cy = [json.loads(x) for x in (tmp_path / "c" / "verify_seed3.jsonl").read_text().splitlines()]
    assert [r["label"] for r in py] == [r["label"] for r in cy]
    assert [r["passed"] for r in py] == [r["passed"] for r in cy]
    for a, b in zip(py, cy):
        if a.get("c_eps") is not None:
            assert a["c_eps"] == pytest.approx(b["c_eps"], rel=1e-9)


# --- simulate ------------------------------------------------------------------------------


def test_simulate_cylinder(tmp_path):
    cfg = _write(tmp_path, "preset = cylinder\nN = 32\nt_max = 0.1\n")
    assert cli.main(["simulate", "--config", cfg, "--out", str(tmp_path)]) == 0
    summary = json.loads((tmp_path / "simulate_cylinder.json").read_text())
    level = summary["levels"][0]
    assert level["within_tolerance"] and level["status"] == "t_max"
    table = (tmp_path / "simulate_cylinder.txt").read_text().splitlines()
    assert table[0].startswith("# C_delta = ")
    assert any(line.startswith("# step t dt F_max") for line in table)


def test_simulate_sphere_with_refinement(tmp_path):
    cfg = _write(tmp_path, "preset = sphere\nN = 32\nt_max = 0.05\n")
    assert cli.main(["simulate", "--config", cfg, "--refine", "1", "--out", str(tmp_path)]) == 0
    summary = json.loads((tmp_path / "simulate_sphere.json").read_text())
    assert [lv["N"] for lv in summary["levels"]] == [32, 64]
    assert summary["orders"][0] > 1.8


def test_simulate_dumbbell_reports_cylindrical_approach(tmp_path, capsys):
    assert cli.main(["simulate", "--preset", "dumbbell", "--out", str(tmp_path)]) == 0
    assert "cylindrical approach" in capsys.readouterr().out
    summary = json.loads((tmp_path / "simulate_dumbbell.json").read_text())
    assert summary["status"] == "singular"
    assert summary["convexity"]["status"] == "pass"
    assert summary["cylinder_distance"] < 0.1


def test_simulate_is_byte_deterministic(tmp_path):
    for d in ("a", "b"):
        assert cli.main(["simulate", "--preset", "dumbbell", "--out", str(tmp_path / d)]) == 0
    for name in ("simulate_dumbbell.json", "simulate_dumbbell.txt"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_simulate_cone_exit(tmp_path, capsys):
    # the dumbbell neck is concave along the axis, outside the power mean's orthant
    cfg = _write(tmp_path, "f = pow2\npreset = dumbbell\n")
    assert cli.main(["simulate", "--config", cfg, "--out", str(tmp_path)]) == 1
    assert "left the domain" in capsys.readouterr().err


def test_simulate_unknown_preset(tmp_path):
    assert cli.main(["simulate", "--preset", "torus", "--out", str(tmp_path)]) == 2


def test_simulate_snapshots(tmp_path):
    cfg = _write(tmp_path, "preset = cylinder\nN = 32\nt_max = 0.01\nsnapshots = 1\n")
    assert cli.main(["simulate", "--config", cfg, "--out", str(tmp_path)]) == 0
    snaps = list((tmp_path / "snapshots_cylinder").iterdir())
    assert len(snaps) == 1 and snaps[0].read_text().startswith("# x u")


# --- report --------------------------------------------------------------------------------


def test_report_empty_dir(tmp_path):
    assert cli.main(["report", "--out", str(tmp_path / "nothing")]) == 2
    (tmp_path / "empty").mkdir()
    assert cli.main(["report", "--out", str(tmp_path / "empty")]) == 2


def test_report_aggregates_seeds_and_runs(tmp_path, capsys):
    out = str(tmp_path)
    for seed in ("1", "2"):
        assert cli.main(["verify", "--samples", "2000", "--seed", seed, "--out", out]) == 0
    cfg = _write(tmp_path, "preset = sphere\nN = 32\nt_max = 0.02\n")
    assert cli.main(["simulate", "--config", cfg, "--out", out]) == 0
    capsys.readouterr()
    assert cli.main(["report", "--out", out]) == 0
    text = capsys.readouterr().out
    assert "c_eps spread across seeds" in text
    report = json.loads((tmp_path / "report.json").read_text())
    kinds = [r["kind"] for r in report["rows"]]
    assert kinds.count("simulate") == 1 and kinds.count("verify") >= 14
    spread = report["c_eps_relative_spread"]
    assert any(k.startswith("Q-uniform") for k in spread)
    assert all(0 <= v < 0.2 for k, v in spread.items() if k.startswith("Q-uniform"))
