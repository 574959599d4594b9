"""Command-line front end.

Exit codes: 0 success, 1 configuration or input error (nothing written),
2 numerical failure, 3 a requested ``check`` assertion failed.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from . import __version__
from . import config as cfgmod
from .config import ConfigError, RunConfig
from .dual import build_dual, dual_report
from .errors import AdiacheckError, NumericalFailure
from .report import (RunOutcome, dumps, report_document, run, sweep_csv, timeseries_csv, to_json_safe,
                     write_atomic)

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_ASSERTION = 0, 1, 2, 3

SCENARIO_FLAGS = {
    "epsilon": float, "V": float, "omega0": float, "v": float, "delta": float,
    "dim": int, "seed": int, "amplitude": float, "n_modes": int,
}

DEFAULT_TOLERANCES = {"bound": 1e-6, "identity": 1e-6, "oracle": 0.05, "dual": 1e-5, "rate": 1e-5}


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON run configuration")
    p.add_argument("--scenario", choices=sorted(cfgmod.SCENARIO_FIELDS), help="scenario kind")
    for name, typ in SCENARIO_FLAGS.items():
        p.add_argument(f"--{name.replace('_', '-')}", dest=f"sc_{name}", type=typ, metavar=name.upper())
    p.add_argument("--matrix", dest="sc_matrix", help="constant scenario matrix as a JSON nested list")
    p.add_argument("--matrix-imag", dest="sc_matrix_imag", help="imaginary part, JSON nested list")
    p.add_argument("--csv-path", dest="sc_path", help="sampled Hamiltonian CSV (custom_csv)")
    p.add_argument("--T", "--horizon", dest="horizon", type=float, help="evolution horizon")
    p.add_argument("--initial-level", type=int)
    p.add_argument("--dt", type=float)
    p.add_argument("--refinement", action=argparse.BooleanOptionalAction, default=None)
    for name in ("eta_trad", "eta_suff", "eta_fid", "resonance_tol"):
        p.add_argument(f"--{name.replace('_', '-')}", dest=name, type=float)
    p.add_argument("--csv-dir", help="directory for CSV time series")
    p.add_argument("--json", dest="json_path", help="report path (default: stdout)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="adiacheck", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"adiacheck {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run one scenario and write its report")
    _add_common(p)

    p = sub.add_parser("check", help="run with refinement and assert inequalities (CI gate)")
    _add_common(p)
    p.add_argument("--assert", dest="assertions", action="append", default=[],
                   metavar="NAME[:TOL]", help="bound, identity, rate, oracle, dual or verdict:<class>")
    p.add_argument("--seeds", type=int, help="repeat a random_smooth scenario over this many seeds")

    p = sub.add_parser("dual", help="build the companion system and verify its identities")
    _add_common(p)
    p.add_argument("--halve-dt", action="count", default=0, help="repeat at dt/2 (give twice for dt/4)")

    p = sub.add_parser("sweep", help="repeat a run over a list of parameter values")
    _add_common(p)
    p.add_argument("--sweep-param", help="dotted config path, e.g. scenario.omega0 or horizon")
    p.add_argument("--sweep-values", help="comma-separated values")
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    data: Dict = {}
    if args.config:
        data = cfgmod.load(args.config).to_dict()
    given = {k[3:]: v for k, v in vars(args).items() if k.startswith("sc_") and v is not None}
    for key in ("matrix", "matrix_imag"):
        if key in given:
            try:
                given[key] = json.loads(given[key])
            except json.JSONDecodeError as exc:
                raise ConfigError(f"--{key.replace('_', '-')}: {exc}") from None
    scenario = data.get("scenario")
    if args.scenario and (scenario is None or scenario.get("kind") != args.scenario):
        scenario = {"kind": args.scenario}
    if given:
        if scenario is None:
            raise ConfigError("scenario parameters given without --scenario or --config")
        scenario = dict(scenario, **given)
    if scenario is None:
        raise ConfigError("no scenario: pass --config or --scenario")
    data["scenario"] = scenario
    if args.horizon is not None:
        data["horizon"] = args.horizon
    if args.initial_level is not None:
        data["initial_level"] = args.initial_level
    prop = dict(data.get("propagator", {}))
    if args.dt is not None:
        prop["dt"] = args.dt
    if args.refinement is not None:
        prop["refinement"] = args.refinement
    data["propagator"] = prop
    thr = dict(data.get("thresholds", {}))
    for name in ("eta_trad", "eta_suff", "eta_fid", "resonance_tol"):
        if getattr(args, name) is not None:
            thr[name] = getattr(args, name)
    data["thresholds"] = thr
    outs = dict(data.get("outputs", {}))
    if args.csv_dir is not None:
        outs["csv_dir"] = args.csv_dir
    if args.json_path is not None:
        outs["json_path"] = args.json_path
    data["outputs"] = outs
    sweep = data.get("sweep")
    if getattr(args, "sweep_param", None) or getattr(args, "sweep_values", None) is not None:
        sweep = dict(sweep or {})
        if args.sweep_param:
            sweep["parameter"] = args.sweep_param
        if args.sweep_values is not None:
            sweep["values"] = cfgmod.parse_values(args.sweep_values)
    data["sweep"] = sweep
    return cfgmod.from_dict(data)


def _emit(cfg: RunConfig, doc: Dict, csv_text: Optional[str], stdout) -> None:
    text = dumps(doc)
    if cfg.outputs.get("csv_dir") and csv_text is not None:
        write_atomic(os.path.join(cfg.outputs["csv_dir"], "timeseries.csv"), csv_text)
    if cfg.outputs.get("json_path"):
        write_atomic(cfg.outputs["json_path"], text)
    else:
        stdout.write(text)


def cmd_simulate(cfg: RunConfig, args, stdout) -> int:
    out = run(cfg)
    _emit(cfg, report_document(out), timeseries_csv(out), stdout)
    return EXIT_OK


def _parse_assertion(spec: str) -> Tuple[str, Optional[str]]:
    name, _, arg = spec.partition(":")
    if name not in DEFAULT_TOLERANCES and name != "verdict":
        raise ConfigError(f"unknown assertion {name!r}")
    if name == "verdict":
        if not arg:
            raise ConfigError("verdict assertion needs a classification, e.g. verdict:certified_adiabatic")
        return name, arg
    if arg:
        try:
            float(arg)
        except ValueError:
            raise ConfigError(f"bad tolerance in assertion {spec!r}") from None
    return name, arg or None


def check_assertion(name: str, arg: Optional[str], out: RunOutcome) -> Tuple[bool, str]:
    c = out.conditions
    if name == "verdict":
        return c.verdict.classification == arg, f"verdict {c.verdict.classification} (wanted {arg})"
    tol = float(arg) if arg is not None else DEFAULT_TOLERANCES[name]
    if name == "bound":
        ok = c.final_fidelity >= c.bound - tol and c.bound >= c.bound_coarse - tol
        return ok, f"P_n(T)={c.final_fidelity:.9g} B={c.bound:.9g} B_coarse={c.bound_coarse:.9g} slack={tol:g}"
    if name == "identity":
        return abs(c.identity_residual) <= tol, f"|P_n(T) - (1 - 2 sum eps)| = {abs(c.identity_residual):.3e} (tol {tol:g})"
    if name == "rate":
        from .conditions import population_rates
        fd, pred = population_rates(out.evolution, out.trajectory)
        err = float(np.max(np.abs(fd - pred)[1:-1]))
        return err <= tol, f"sup |dP/dt - predicted| = {err:.3e} (tol {tol:g})"
    if name == "oracle":
        if out.oracle_deviation is None:
            raise ConfigError("oracle assertion applies to the amin scenario only")
        return out.oracle_deviation <= tol, f"sup |P_0 - (cos Vt + 1)/2| = {out.oracle_deviation:.3e} (tol {tol:g})"
    if name == "dual":
        worst = max(out.dual.values())
        key = max(out.dual, key=out.dual.get)
        return worst <= tol, f"dual residual {key} = {worst:.3e} (tol {tol:g})"
    raise ConfigError(f"unknown assertion {name!r}")


def cmd_check(cfg: RunConfig, args, stdout) -> int:
    specs = [_parse_assertion(s) for s in (args.assertions or ["bound", "identity"])]
    want_dual = any(n == "dual" for n, _ in specs)
    configs = [cfg]
    if args.seeds is not None:
        if cfg.scenario["kind"] != "random_smooth":
            raise ConfigError("--seeds applies to the random_smooth scenario only")
        if args.seeds < 1:
            raise ConfigError("--seeds must be positive")
        base = cfg.scenario["seed"]
        configs = [cfgmod.with_parameter(cfg, "scenario.seed", base + i) for i in range(args.seeds)]
    docs = []
    for c in configs:
        out = run(c, check=True, with_dual=want_dual)
        for name, arg in specs:
            ok, msg = check_assertion(name, arg, out)
            if not ok:
                label = f" (seed {c.scenario['seed']})" if args.seeds is not None else ""
                print(f"assertion failed: {name}{label}: {msg}", file=sys.stderr)
                return EXIT_ASSERTION
        docs.append(report_document(out))
    doc = docs[0] if len(docs) == 1 else {"runs": docs}
    _emit(cfg, doc, None, stdout)
    print(f"all {len(specs)} assertion(s) hold over {len(configs)} run(s)", file=sys.stderr)
    return EXIT_OK


def cmd_dual(cfg: RunConfig, args, stdout) -> int:
    out = run(cfg, with_dual=True)
    doc = report_document(out)
    if args.halve_dt:
        opts = cfg.options
        if opts.dt is None:
            opts = type(opts)(out.evolution.dt, opts.refinement, opts.unitarity_tol, opts.refine_factor)
        levels = [dict(dt=out.evolution.dt, **out.dual)]
        for h in range(1, args.halve_dt + 1):
            o = opts.halved(h)
            levels.append(dict(dt=o.dt, **dual_report(build_dual(out.hamiltonian, o), o)))
        ratios = {k: [levels[i][k] / levels[i + 1][k] if levels[i + 1][k] > 0 else None
                      for i in range(len(levels) - 1)] for k in out.dual}
        doc["dual_convergence"] = to_json_safe({"levels": levels, "ratios": ratios})
    _emit(cfg, doc, timeseries_csv(out), stdout)
    return EXIT_OK


def _threads() -> int:
    raw = os.environ.get("ADIACHECK_THREADS", "0")
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"ADIACHECK_THREADS must be an integer, got {raw!r}") from None
    return n if n > 0 else (os.cpu_count() or 1)


def cmd_sweep(cfg: RunConfig, args, stdout) -> int:
    if cfg.sweep is None:
        raise ConfigError("sweep needs --sweep-param/--sweep-values or a sweep block")
    path, values = cfg.sweep["parameter"], cfg.sweep["values"]
    configs = [cfgmod.with_parameter(cfg, path, v) for v in values]
    with ThreadPoolExecutor(max_workers=min(_threads(), len(configs))) as pool:
        outcomes = list(pool.map(run, configs))  # map preserves input order
    docs = [report_document(o) for o in outcomes]
    aggregate = sweep_csv(values, outcomes)
    csv_dir, json_path = cfg.outputs.get("csv_dir"), cfg.outputs.get("json_path")
    if json_path:
        stem, ext = os.path.splitext(json_path)
        for i, d in enumerate(docs):
            write_atomic(f"{stem}_{i}{ext or '.json'}", dumps(d))
    if csv_dir:
        write_atomic(os.path.join(csv_dir, "sweep.csv"), aggregate)
    if not json_path and not csv_dir:
        stdout.write(aggregate)
    return EXIT_OK


COMMANDS = {"simulate": cmd_simulate, "check": cmd_check, "dual": cmd_dual, "sweep": cmd_sweep}


def main(argv: Optional[Sequence[str]] = None, stdout=None) -> int:
    stdout = stdout or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        cfg = config_from_args(args)
        return COMMANDS[args.command](cfg, args, stdout)
    except NumericalFailure as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ConfigError, AdiacheckError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
