import csv
import json
from pathlib import Path

import numpy as np
import pytest

from qotlab.cli import load_config, main, run, sweep_ratio, sweep_selfdistance
from qotlab.errors import ConfigParse
from qotlab.suites import Check, StateSpec, build_state, grid_for, parse_state_spec

ROOT = Path(__file__).resolve().parents[1]


def _write(path: Path, text: str) -> Path:
    path.write_text(text)
    return path


def _summary(out: Path):
    with open(out / "summary.csv") as fh:
        return list(csv.DictReader(fh))


def test_state_spec_parsing():
    spec = parse_state_spec("kind = thermal\nbeta = 1/2  # comment\nN = 128\ncenter = 0.5, -1\n")
    assert spec.kind == "thermal" and spec.beta == 0.5 and spec.N == 128 and spec.center == (0.5, -1.0)
    for bad in ("kind = thermal\ncolour = red", "kind = nothing", "beta = abc", "N = 7", "no equals sign"):
        with pytest.raises(ConfigParse):
            parse_state_spec(bad)


def test_grid_policy():
    assert grid_for(StateSpec(), 0.125).n == 256
    assert grid_for(StateSpec(), 1 / 64).n == 512
    assert grid_for(StateSpec(), 0.125).half_width == 10.0
    assert grid_for(StateSpec(kind="thermal", beta=0.25), 0.125, "spec").half_width == 20.0
    thermal = grid_for(StateSpec(kind="thermal"), 0.125)
    assert thermal.momentum_cutoff == pytest.approx(thermal.half_width)
    with pytest.raises(ConfigParse):
        build_state(StateSpec(), 1.5)


def test_check_rows_recompute():
    le = Check("a", 1.0, 1.0 - 5e-10)
    assert le.passed and not Check("a", 1.0, 0.99).passed
    eq = Check("b", 1.01, 1.0, "eq", 0.02)
    assert eq.passed and not Check("b", 1.03, 1.0, "eq", 0.02).passed
    assert not Check("c", float("nan"), 1.0).passed


def test_config_errors(tmp_path):
    with pytest.raises(ConfigParse):
        load_config(_write(tmp_path / "a.ini", "[run]\nsuites = nonsense\n"))
    with pytest.raises(ConfigParse):
        load_config(_write(tmp_path / "b.ini", "[run]\nbogus = 1\n"))
    with pytest.raises(ConfigParse):
        load_config(_write(tmp_path / "c.ini", "[run]\nstates = missing\n"))
    with pytest.raises(ConfigParse):
        load_config(_write(tmp_path / "d.ini", "[run]\nhbar = 2\n"))
    with pytest.raises(ConfigParse):
        load_config(_write(tmp_path / "e.ini", "[run]\n[state x]\nkind = coherent\nfoo = 1\n"))
    assert main(["run", str(_write(tmp_path / "f.ini", "no section"))]) == 2


def test_empty_suites(tmp_path):
    cfg = load_config(_write(tmp_path / "e.ini", "[run]\nsuites =\noutput = out\n"))
    status, reports = run(cfg)
    assert status == 0 and reports == []
    assert (tmp_path / "out" / "summary.csv").read_text() == "suite,state,hbar,check,lhs,rhs,margin,pass\n"


def test_self_distance_row(tmp_path):
    ini = """
[run]
suites = self_distance
states = coherent
hbar = 1/8
output = out
[state coherent]
kind = coherent
N = 128
L = 8
"""
    cfg = load_config(_write(tmp_path / "c.ini", ini))
    status, _ = run(cfg)
    assert status == 0
    rows = {r["check"]: r for r in _summary(tmp_path / "out")}
    r = rows["coherent_oracle"]
    assert float(r["lhs"]) == pytest.approx(3 * 0.125, rel=1e-6)
    assert abs(float(r["margin"])) < 1e-6 and r["pass"] == "true"
    cell = json.loads((tmp_path / "out" / "cells" / "self_distance__coherent__0.125.json").read_text())
    assert cell["error"] is None and cell["details"]["cost"]["rel_error"] < 1e-6


def test_projection_sweep_rows(tmp_path):
    ini = """
[run]
suites = projection
states = well
hbar = 1/8, 1/16, 1/32
output = out
[state well]
kind = projection
offset = -1
N = 256
"""
    status, reports = run(load_config(_write(tmp_path / "p.ini", ini)))
    assert status == 0
    rows = _summary(tmp_path / "out")
    grads = [r for r in rows if r["check"] == "momentum_projection"]
    assert len(grads) == 3
    sweep = {r["check"]: r for r in rows if r["hbar"] == "sweep"}
    assert sweep["gradient_ratio"]["pass"] == "true"
    assert float(sweep["z0_monotone"]["lhs"]) <= 0


def test_failing_cell_sets_exit_status(tmp_path):
    ini = """
[run]
suites = self_distance
states = tiny
output = out
[state tiny]
kind = coherent
N = 16
center = 0.4, 0
"""
    status, reports = run(load_config(_write(tmp_path / "t.ini", ini)))
    assert status == 1
    assert reports[0]["error"].startswith("TailTruncation")


def test_run_is_deterministic(tmp_path, monkeypatch):
    ini = """
[run]
suites = transforms, classical_ot
states = coherent
hbar = 1/8
ot_pairs = 4
output = {out}
[state coherent]
kind = coherent
N = 64
L = 4
"""
    a = load_config(_write(tmp_path / "a.ini", ini.format(out="a")))
    b = load_config(_write(tmp_path / "b.ini", ini.format(out="b")))
    run(a, workers=1)
    monkeypatch.setenv("QOTLAB_WORKERS", "2")
    run(b)
    assert (tmp_path / "a" / "summary.csv").read_bytes() == (tmp_path / "b" / "summary.csv").read_bytes()


def test_state_and_w2_commands(tmp_path, capsys):
    spec = _write(tmp_path / "c.spec", "kind = coherent\nhbar = 1/8\nN = 64\nL = 4\n")
    moved = _write(tmp_path / "d.spec", "kind = coherent\nhbar = 1/8\nN = 64\nL = 4\ncenter = 0.5, 0\n")
    assert main(["state", str(spec), "--dump", "husimi", "-o", str(tmp_path / "a.csv")]) == 0
    assert main(["state", str(moved), "--dump", "husimi", "-o", str(tmp_path / "b.csv")]) == 0
    assert main(["state", str(spec), "--dump", "wigner"]) == 0
    out = capsys.readouterr().out
    assert out.startswith("x,xi,value")
    assert main(["w2", str(tmp_path / "a.csv"), str(tmp_path / "b.csv"), "--p", "2"]) == 0
    assert float(capsys.readouterr().out) == pytest.approx(0.5, abs=1e-6)
    assert main(["w2", str(tmp_path / "a.csv"), str(tmp_path / "nope.csv")]) == 2


def test_sweep_coherent_excess_is_two_d_hbar():
    rows = sweep_selfdistance(StateSpec(kind="coherent", N=256, L=8.0), [0.125, 0.0625])
    for r in rows:
        assert r["excess"] == pytest.approx(2 * r["hbar"], rel=1e-6)
    assert sweep_ratio(rows) == pytest.approx(2.0, rel=1e-6)


def test_sweep_command(tmp_path, capsys):
    spec = _write(tmp_path / "c.spec", "kind = coherent\nN = 256\nL = 8\n")
    assert main(["sweep", str(spec), "--hbar", "1/8,1/16"]) == 0
    captured = capsys.readouterr()
    lines = captured.out.strip().splitlines()
    assert lines[0] == "hbar,cost_upper,d_hbar,excess,excess_over_hbar2"
    assert len(lines) == 3
    assert "max/min" in captured.err


def test_shipped_configs_parse():
    cfg = load_config(ROOT / "configs" / "default.ini")
    assert set(cfg.suites) == {"transforms", "self_distance", "couplings", "classical_ot", "sobolev_chains",
                               "thermal", "projection", "toeplitz_power"}
    for p in (ROOT / "configs" / "states").glob("*.spec"):
        build_state(parse_state_spec(p.read_text(), str(p)), 0.125)
