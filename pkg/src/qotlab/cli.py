"""Command-line harness.

Subcommands::

    qotlab run CONFIG              run the configured suites, write reports
    qotlab state SPEC --dump KIND  write the Wigner or Husimi transform as CSV
    qotlab w2 A.csv B.csv --p P    exact Wasserstein distance between two CSV inputs
    qotlab sweep SPEC --hbar LIST  self-coupling cost across hbar values

The worker count for ``run`` comes from ``QOTLAB_WORKERS`` (default 1).
"""
from __future__ import annotations

import argparse
import configparser
import csv
import io
import json
import math
import os
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .classical_ot import DiscreteMeasure, discretize, wasserstein
from .couplings import self_coupling_cost
from .errors import ConfigParse, QotlabError
from .grid import PhaseDensity
from .suites import (APPLIES, CORPUS, SUITES, Settings, StateSpec, build_state, load_state_spec,
                     parse_number, parse_state_spec, projection_sweep_rows, run_cell)
from .transforms import husimi, wigner

SUMMARY_HEADER = ("suite", "state", "hbar", "check", "lhs", "rhs", "margin", "pass")
RUN_KEYS = {"suites", "states", "hbar", "seed", "output", "grid_policy", "ot_pairs", "thermal_n",
            "state_files"}


@dataclass
class RunConfig:
    states: dict = field(default_factory=dict)
    suites: list = field(default_factory=list)
    hbar_sweep: list = field(default_factory=list)
    output: Path = Path("qotlab-out")
    settings: Settings = field(default_factory=Settings)


def _split(value: str) -> list[str]:
    return [v.strip() for v in value.replace("\n", ",").split(",") if v.strip()]


def load_config(path) -> RunConfig:
    """Parse an INI run configuration.

    ``[run]`` holds the suite list, state names, hbar values and run
    settings; ``[tolerances]`` overrides per-check tolerances; each
    ``[state NAME]`` section is a state spec.
    """
    path = Path(path)
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except (configparser.Error, UnicodeDecodeError) as exc:
        raise ConfigParse(f"{path}: {exc}") from None
    if "run" not in parser:
        raise ConfigParse(f"{path}: missing [run] section")
    run = parser["run"]
    unknown = set(run) - RUN_KEYS
    if unknown:
        raise ConfigParse(f"{path}: unknown [run] keys {sorted(unknown)}")
    cfg = RunConfig()
    cfg.suites = _split(run.get("suites", ""))
    for s in cfg.suites:
        if s not in SUITES:
            raise ConfigParse(f"{path}: unknown suite {s!r}")
    try:
        cfg.hbar_sweep = [parse_number(v) for v in _split(run.get("hbar", "0.125"))]
        st = cfg.settings
        st.seed = int(run.get("seed", "0"))
        st.ot_pairs = int(run.get("ot_pairs", str(st.ot_pairs)))
        st.thermal_n = tuple(int(v) for v in _split(run.get("thermal_n", "2, 4")))
        st.policy = run.get("grid_policy", "auto")
        if "tolerances" in parser:
            st.tolerances = {k: float(v) for k, v in parser["tolerances"].items()}
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigParse(f"{path}: {exc}") from None
    if cfg.settings.policy not in ("auto", "spec", "balanced"):
        raise ConfigParse(f"{path}: unknown grid_policy {cfg.settings.policy!r}")
    for hb in cfg.hbar_sweep:
        if not 0 < hb <= 1:
            raise ConfigParse(f"{path}: hbar = {hb} outside (0, 1]")
    out = Path(run.get("output", "qotlab-out"))
    cfg.output = out if out.is_absolute() else path.parent / out
    specs = {}
    for section in parser.sections():
        if section.startswith("state "):
            name = section[len("state "):].strip()
            specs[name] = parse_state_spec(parser[section].items(), f"{path}[{section}]")
        elif section not in ("run", "tolerances"):
            raise ConfigParse(f"{path}: unknown section [{section}]")
    for f in _split(run.get("state_files", "")):
        p = Path(f) if Path(f).is_absolute() else path.parent / f
        specs[p.stem] = load_state_spec(p)
    names = _split(run.get("states", "")) or sorted(specs)
    for name in names:
        if name not in specs:
            raise ConfigParse(f"{path}: state {name!r} has no [state {name}] section")
    cfg.states = {n: specs[n] for n in names}
    return cfg


def _cells(cfg: RunConfig):
    for suite in cfg.suites:
        for hbar in cfg.hbar_sweep:
            if suite == "classical_ot":
                yield suite, CORPUS, None, hbar
                continue
            if suite == "sobolev_chains":
                yield suite, CORPUS, None, hbar
            for name, spec in cfg.states.items():
                if spec.kind in APPLIES[suite]:
                    yield suite, name, spec, hbar


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    if isinstance(obj, (str, int)) or obj is None:
        return obj
    return repr(obj)


def _atomic_write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-")
    with os.fdopen(fd, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _fmt(x) -> str:
    return f"{x:.10g}"


def _cell_name(suite, state, hbar) -> str:
    return f"{suite}__{state}__{_fmt(hbar)}.json"


def _run_and_store(args):
    suite, state, spec, hbar, settings, outdir = args
    rep = run_cell(suite, state, spec, hbar, settings)
    _atomic_write(Path(outdir) / "cells" / _cell_name(suite, state, hbar),
                  json.dumps(_jsonable(rep), indent=1, sort_keys=True) + "\n")
    return rep


def workers_from_env() -> int:
    try:
        return max(1, int(os.environ.get("QOTLAB_WORKERS", "1")))
    except ValueError:
        return 1


def run(cfg: RunConfig, workers: int | None = None) -> tuple[int, list[dict]]:
    """Execute every cell; returns ``(exit_status, reports)``.

    The summary CSV is sorted by suite, state and hbar so that it does not
    depend on scheduling.
    """
    workers = workers or workers_from_env()
    jobs = [(su, st, sp, hb, cfg.settings, str(cfg.output)) for su, st, sp, hb in _cells(cfg)]
    cfg.output.mkdir(parents=True, exist_ok=True)
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(workers) as pool:
            reports = list(pool.map(_run_and_store, jobs))
    else:
        reports = [_run_and_store(j) for j in jobs]
    reports.extend(_aggregate(reports, cfg))
    order = {s: i for i, s in enumerate(SUITES)}
    reports.sort(key=lambda r: (order[r["suite"]], r["state"], -1 if r["hbar"] == "sweep" else r["hbar"]))
    rows, ok = [], True
    for rep in reports:
        for c in rep["checks"]:
            rows.append((rep["suite"], rep["state"], rep["hbar"] if rep["hbar"] == "sweep" else _fmt(rep["hbar"]),
                         c["check"], _fmt(c["lhs"]), _fmt(c["rhs"]), _fmt(c["margin"]),
                         "true" if c["passed"] else "false"))
            if c["asserted"] and not c["passed"]:
                ok = False
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SUMMARY_HEADER)
    writer.writerows(rows)
    _atomic_write(cfg.output / "summary.csv", buf.getvalue())
    return (0 if ok else 1), reports


def _aggregate(reports: list[dict], cfg: RunConfig) -> list[dict]:
    """Cross-hbar checks for the projection suite."""
    out = []
    by_state = {}
    for rep in reports:
        if rep["suite"] == "projection" and rep["error"] is None:
            by_state.setdefault(rep["state"], []).append(rep["details"])
    for state, table in sorted(by_state.items()):
        if len(table) < 2:
            continue
        checks = projection_sweep_rows(table, cfg.settings)
        rep = {"suite": "projection", "state": state, "hbar": "sweep", "error": None,
               "checks": [c.to_dict() for c in checks],
               "details": {"table": [{k: t[k] for k in ("hbar", "N", "L", "Z0", "sqrt_hbar_grad", "pP_op")}
                                     for t in table]}}
        _atomic_write(cfg.output / "cells" / f"projection__{state}__sweep.json",
                      json.dumps(_jsonable(rep), indent=1, sort_keys=True) + "\n")
        out.append(rep)
    return out


# -- sweep -----------------------------------------------------------------

def sweep_selfdistance(spec: StateSpec, hbars, policy: str = "auto", n_max: int = 512) -> list[dict]:
    """Self-coupling cost and its excess over ``d hbar`` at each ``hbar``."""
    rows = []
    for hbar in hbars:
        rho, _ = build_state(spec, hbar, policy, n_max=n_max)
        cost = self_coupling_cost(rho).total
        dh = rho.grid.d * hbar
        rows.append({"hbar": hbar, "cost_upper": cost, "d_hbar": dh, "excess": cost - dh,
                     "excess_over_hbar2": (cost - dh) / hbar ** 2})
    return rows


def sweep_ratio(rows) -> float:
    vals = [r["excess_over_hbar2"] for r in rows]
    return max(vals) / min(vals)


def _write_table(rows, keys, fh):
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(keys)
    for r in rows:
        writer.writerow([_fmt(r[k]) for k in keys])


# -- entry point -----------------------------------------------------------

def _read_phase_csv(path, max_atoms):
    with open(path) as fh:
        header = fh.readline().strip().split(",")
    if header[-1] == "weight":
        return DiscreteMeasure.from_csv(path)
    f = PhaseDensity.from_csv(path, kind="signed")
    vals = np.clip(f.values, 0, None)
    vals = vals / (vals.sum() * f.grid.cell_weight)
    return discretize(PhaseDensity(f.grid, vals, "probability"), max_atoms)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="qotlab", description="Semiclassical transport verification harness")
    sub = ap.add_subparsers(dest="command", required=True)
    p = sub.add_parser("run", help="run the suites of a config file")
    p.add_argument("config")
    p.add_argument("--output", help="override the output directory")
    p = sub.add_parser("state", help="dump a transform of a state")
    p.add_argument("spec")
    p.add_argument("--dump", choices=("wigner", "husimi"), required=True)
    p.add_argument("--hbar", type=parse_number)
    p.add_argument("--policy", default="auto", choices=("auto", "spec", "balanced"))
    p.add_argument("-o", "--out", help="output file (default stdout)")
    p = sub.add_parser("w2", help="exact Wasserstein distance between two CSV files")
    p.add_argument("a")
    p.add_argument("b")
    p.add_argument("--p", type=int, choices=(1, 2), default=2)
    p.add_argument("--method", choices=("exact_lp", "dense_lp", "sinkhorn"), default="exact_lp")
    p.add_argument("--reg", type=float, default=0.05)
    p.add_argument("--max-atoms", type=int, default=2000)
    p = sub.add_parser("sweep", help="self-coupling cost across hbar values")
    p.add_argument("spec")
    p.add_argument("--hbar", required=True, help="comma separated, fractions allowed")
    p.add_argument("--n-max", type=int, default=512, help="cap on the automatic grid size")
    p.add_argument("--policy", default="auto", choices=("auto", "spec", "balanced"))
    p.add_argument("-o", "--out", help="output CSV (default stdout)")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            cfg = load_config(args.config)
            if args.output:
                cfg.output = Path(args.output)
            status, reports = run(cfg)
            failed = sum(1 for r in reports for c in r["checks"] if c["asserted"] and not c["passed"])
            total = sum(len(r["checks"]) for r in reports)
            print(f"{total} checks, {failed} failed; summary in {cfg.output / 'summary.csv'}")
            return status
        if args.command == "state":
            spec = load_state_spec(args.spec)
            rho, _ = build_state(spec, args.hbar, args.policy)
            f = wigner(rho) if args.dump == "wigner" else husimi(rho)
            text = f.to_csv()
            if args.out:
                Path(args.out).write_text(text)
            else:
                sys.stdout.write(text)
            return 0
        if args.command == "w2":
            mu = _read_phase_csv(args.a, args.max_atoms)
            nu = _read_phase_csv(args.b, args.max_atoms)
            res = wasserstein(mu, nu, args.p, args.method, reg=args.reg)
            print(f"{res.value:.12g}")
            return 0
        spec = load_state_spec(args.spec)
        hbars = [parse_number(v) for v in _split(args.hbar)]
        rows = sweep_selfdistance(spec, hbars, args.policy, args.n_max)
        keys = ("hbar", "cost_upper", "d_hbar", "excess", "excess_over_hbar2")
        if args.out:
            with open(args.out, "w") as fh:
                _write_table(rows, keys, fh)
        else:
            _write_table(rows, keys, sys.stdout)
        print(f"excess_over_hbar2 max/min = {sweep_ratio(rows):.6g}", file=sys.stderr)
        return 0
    except (QotlabError, OSError, ValueError) as exc:
        print(f"qotlab: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
