"""Command-line entry point: validate | solve | simulate | boundary | suite.

Exit codes: 0 success, 1 validity failure, 2 solver abort, 3 I/O or input error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import warnings
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, RunConfig, load_config, parse_config
from .ode import SolverError, solve
from .params import InfeasibleParametersError, ParameterError, validity_report
from .policy import buy_sell_boundary, classify_boundary_monotonicity, policy_grid
from .schedule import tracking_error
from .simulator import estimate_objective, run_scenario_suite, simulate_path
from . import scenarios

EXIT_OK, EXIT_INVALID, EXIT_SOLVER, EXIT_IO = 0, 1, 2, 3


class _Fail(Exception):
    def __init__(self, code: int, message: str):
        self.code = code
        super().__init__(message)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_IO, f"{self.prog}: error: {message}\n")


def _stamp() -> dict:
    return {"package": "optexec", "version": __version__, "numpy": np.__version__}


def _clean(obj):
    """JSON-safe copy: numpy scalars to float, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if math.isfinite(f) else str(f)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if callable(obj):
        return getattr(obj, "__name__", "callable")
    return obj


def _dumps(obj) -> str:
    return json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n"


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


class _Out:
    """Serializes writes into the output directory (if any)."""

    def __init__(self, out_dir):
        self.dir = Path(out_dir) if out_dir else None
        if self.dir is not None:
            try:
                self.dir.mkdir(parents=True, exist_ok=True)
            except OSError as exc:
                raise _Fail(EXIT_IO, f"cannot create output directory {self.dir}: {exc}") from None

    def write(self, name: str, text: str) -> None:
        if self.dir is None:
            return
        path = self.dir / name
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(text)
        except OSError as exc:
            raise _Fail(EXIT_IO, f"cannot write {path}: {exc}") from None


def _load(args) -> RunConfig:
    try:
        cfg = load_config(args.config) if args.config else parse_config("")
    except OSError as exc:
        raise _Fail(EXIT_IO, f"cannot read config {args.config}: {exc}") from None
    except ConfigError as exc:
        raise _Fail(EXIT_IO, f"config error: {exc}") from None
    sim = cfg.sim
    over = {k: v for k, v in (("seed", args.seed), ("n_paths", args.paths), ("n_steps", args.steps))
            if v is not None}
    if over:
        try:
            sim = replace(sim, **over)
        except ValueError as exc:
            raise _Fail(EXIT_IO, str(exc)) from None
    grid = args.grid if args.grid is not None else cfg.grid
    return replace(cfg, sim=sim, grid=grid)


def _validity(cfg: RunConfig):
    """Analytic checks, then the second-order check on a solved a(t)."""
    rep = validity_report(cfg.model, cfg.pen)
    coeffs = None
    if rep.ok and cfg.mode != "infinite-limit":
        coeffs = _solve(cfg)
        rep = validity_report(cfg.model, cfg.pen, a_samples=coeffs.a)
    return rep, coeffs


def _solve(cfg: RunConfig, cross_term: str | None = None):
    try:
        return solve(cfg.model, cfg.pen, grid_size=cfg.grid_size,
                     cross_term=cross_term or cfg.cross_term or "m1",
                     sched=cfg.schedule, weight=cfg.weight)
    except SolverError as exc:
        raise _Fail(EXIT_SOLVER, f"solver aborted: {exc}") from None
    except InfeasibleParametersError as exc:
        raise _Fail(EXIT_INVALID, str(exc)) from None


def _emit(args, out: _Out, summary: dict, csv_name: str | None = None, csv_text: str | None = None,
          name: str = "summary.json") -> None:
    text = _dumps(summary)
    out.write(name, text)
    if csv_name is not None:
        out.write(csv_name, csv_text)
    if args.format == "csv" and csv_text is not None:
        sys.stdout.write(csv_text)
    else:
        sys.stdout.write(text)


def cmd_validate(args) -> int:
    cfg = _load(args)
    out = _Out(args.out)
    rep, _ = _validity(cfg)
    summary = {"command": "validate", "ok": rep.ok, "report": rep.to_dict(), "params": cfg.echo(),
               "stamp": _stamp()}
    rows = [(c.name, c.passed, c.hard, json.dumps(_clean(c.value)), json.dumps(_clean(c.bound)))
            for c in rep.checks]
    _emit(args, out, summary, "validate.csv", _csv_text(["check", "passed", "hard", "value", "bound"], rows),
          "validate.json")
    return EXIT_OK if rep.ok else EXIT_INVALID


def _require(cfg: RunConfig):
    rep, coeffs = _validity(cfg)
    if not rep.ok:
        names = ", ".join(c.name for c in rep.failures())
        raise _Fail(EXIT_INVALID, f"validity checks failed: {names}")
    return rep, coeffs


def _coeff_csv(coeffs) -> str:
    return _csv_text(["t", "a", "b", "c"], zip(coeffs.grid, coeffs.a, coeffs.b, coeffs.c))


def cmd_solve(args) -> int:
    cfg = _load(args)
    if cfg.mode == "infinite-limit":
        raise _Fail(EXIT_INVALID, "infinite-limit mode has no coefficient system to solve")
    out = _Out(args.out)
    rep, coeffs = _require(cfg)
    summary = {"command": "solve", "V0": coeffs.value0(), "a0": coeffs.a[0], "b0": coeffs.b[0],
               "c0": coeffs.c[0], "mode": cfg.mode, "source": coeffs.source,
               "cross_term": coeffs.cross_term, "grid_size": int(coeffs.grid.size),
               "params": cfg.echo(), "validity": rep.to_dict(), "stamp": _stamp()}
    m = cfg.model
    grid = policy_grid(coeffs, np.linspace(0.0, m.T, 61), np.linspace(0.0, m.x0, 11))
    out.write("policy_grid.csv", _csv_text(["t", "x", "vStar", "lStar", "delta"], grid))
    _emit(args, out, summary, "coefficients.csv", _coeff_csv(coeffs), "solve.json")
    return EXIT_OK


def _path_csv(p) -> str:
    cols = ["t", "x", "S", "Stilde", "v", "L"]
    data = [p.t, p.x, p.S, p.Stilde, p.v, p.L]
    if p.P is not None:
        cols.append("P")
        data.append(p.P)
    if p.Q is not None:
        cols.append("Q")
        data.append(p.Q)
    return _csv_text(cols, zip(*data))


def _mc_dict(mc) -> dict:
    s = mc.path_summaries
    return {"mean_objective": mc.mean_objective, "stderr": mc.stderr,
            "mean_final_position": mc.mean_final_position, "n_paths": mc.n_paths,
            "mean_pnl": float(np.mean(s["pnl"])), "mean_compensated_pnl": float(np.mean(s["compensated_pnl"])),
            "opposite_sign_steps": int(np.sum(s["opposite_sign_steps"])),
            "below_boundary_steps": int(np.sum(s["below_boundary_steps"]))}


def cmd_simulate(args) -> int:
    cfg = _load(args)
    out = _Out(args.out)
    if cfg.mode == "infinite-limit":
        rep = validity_report(cfg.model, cfg.pen)
        if not rep.ok:
            raise _Fail(EXIT_INVALID, "validity checks failed")
        coeffs, v0 = None, None
    else:
        rep, coeffs = _require(cfg)
        v0 = coeffs.value0()
    try:
        mc = estimate_objective(cfg.model, cfg.pen, coeffs, cfg.sim, cfg.schedule, cfg.weight)
        paths = [simulate_path(cfg.model, cfg.pen, coeffs, cfg.sim, i, cfg.schedule, cfg.weight)
                 for i in range(min(cfg.record_paths, cfg.sim.n_paths))]
    except (ParameterError, ValueError) as exc:
        raise _Fail(EXIT_INVALID, str(exc)) from None
    summary = {"command": "simulate", "V0": v0, "mc": _mc_dict(mc), "params": cfg.echo(),
               "validity": rep.to_dict(), "stamp": _stamp(),
               "noise_checksums": [p.noise_checksum for p in paths]}
    if cfg.schedule is not None and paths:
        te = tracking_error(paths, cfg.schedule)
        summary["tracking"] = {"max_abs": te.max_abs, "mean_square": te.mean_square,
                               "terminal_gap": te.terminal_gap}
    for p in paths:
        out.write(f"paths/path_{p.path_index:05d}.csv", _path_csv(p))
    first = _path_csv(paths[0]) if paths else None
    _emit(args, out, summary, None, first, "simulate.json")
    return EXIT_OK


def cmd_boundary(args) -> int:
    cfg = _load(args)
    if cfg.mode != "constant":
        raise _Fail(EXIT_INVALID, f"boundary needs constant uncertainty, config mode is {cfg.mode}")
    out = _Out(args.out)
    rep = validity_report(cfg.model, cfg.pen)
    if not rep.ok:
        raise _Fail(EXIT_INVALID, "validity checks failed: " + ", ".join(c.name for c in rep.failures()))
    cross = cfg.cross_term or "m0"
    n = args.grid or cfg.grid or 3601
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        prof = buy_sell_boundary(cfg.model, cfg.pen, np.linspace(0.0, cfg.model.T, n), cross)
    mono = classify_boundary_monotonicity(cfg.model, cfg.pen, cross)
    summary = {"command": "boundary", "classification": prof.classification, "P_T": prof.terminal_target,
               "P_0": prof.P[0], "regime": prof.regime, "cross_term": cross,
               "rho_threshold_non_increasing": mono.rho_non_increasing,
               "rho_threshold_non_decreasing": mono.rho_non_decreasing,
               "warnings": [str(w.message) for w in caught], "params": cfg.echo(), "stamp": _stamp()}
    _emit(args, out, summary, "boundary.csv", _csv_text(["t", "P"], zip(prof.grid, prof.P)),
          "boundary.json")
    return EXIT_OK


def cmd_suite(args) -> int:
    cfg = _load(args)
    out = _Out(args.out)
    results = run_scenario_suite(scenarios.figure_scenarios(cfg.sim))
    summary = {"command": "suite", "scenarios": {}, "sim": cfg.echo()["sim"], "stamp": _stamp()}
    for name, r in results.items():
        entry = {"ok": r.ok, "error": r.error, "V0": r.value0, "validity": r.validity,
                 "mc": _mc_dict(r.mc) if r.mc is not None else None,
                 "noise_checksums": [p.noise_checksum for p in r.paths]}
        summary["scenarios"][name] = entry
        for p in r.paths:
            out.write(f"{name}/path_{p.path_index:05d}.csv", _path_csv(p))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for name, model, pen in scenarios.boundary_scenarios():
            prof = buy_sell_boundary(model, pen, cross_term="m0")
            summary["scenarios"][name] = {"ok": True, "classification": prof.classification,
                                          "P_T": prof.terminal_target, "P_0": prof.P[0]}
            out.write(f"{name}/boundary.csv", _csv_text(["t", "P"], zip(prof.grid, prof.P)))
    ok = all(s["ok"] for s in summary["scenarios"].values())
    rows = [(n, s["ok"], s.get("error") or "") for n, s in summary["scenarios"].items()]
    _emit(args, out, summary, "suite.csv", _csv_text(["scenario", "ok", "error"], rows), "suite.json")
    return EXIT_OK if ok else EXIT_INVALID


COMMANDS = {"validate": cmd_validate, "solve": cmd_solve, "simulate": cmd_simulate,
            "boundary": cmd_boundary, "suite": cmd_suite}


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="optexec", description="Optimal execution with market and limit orders.")
    parser.add_argument("--version", action="version", version=f"optexec {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", metavar="PATH")
        p.add_argument("--seed", type=int, metavar="U64")
        p.add_argument("--out", metavar="DIR")
        p.add_argument("--grid", type=int, metavar="N")
        p.add_argument("--paths", type=int, metavar="N")
        p.add_argument("--steps", type=int, metavar="N")
        p.add_argument("--format", choices=("csv", "json"), default="json")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except _Fail as exc:
        print(f"optexec {args.command}: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
