"""Command-line front end: strict JSON configs in, CSV and JSON files out.

Subcommands: evaluate, optimize, sweep, grad-check, init-set.

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 gradient check above tolerance.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from dataclasses import fields
from pathlib import Path

import jsonschema
import numpy as np

from .core import xz_model
from .errors import (
    ConfigurationError,
    DegenerateSpectrumError,
    DomainError,
    NoSolutionError,
    NumericalFailure,
    UnsupportedModelError,
    ValidationError,
)
from .gradcheck import GRADIENT_TOL, check_gradients
from .objectives import TRACKING_KINDS, aqc_spec, evaluate
from .optimizer import OptimizerConfig, optimize, perturb, sweep
from .schedules import FAMILY_IDS, PROBLEMS, get_profile, initial_set

log = logging.getLogger("adiabatic_oct")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_CHECK = 4

MODES = ("evaluate", "optimize", "sweep", "grad-check", "init-set")
OPTIMIZER_KEYS = tuple(f.name for f in fields(OptimizerConfig))
CONFIG_DEFAULTS = {
    "problem": "I",
    "T": 2.0,
    "L": None,
    "dt": 0.01,
    "alpha": 0.0,
    "tracking": "population",
    "init_family": "linear",
    "output_dir": "results",
    "mode": None,
    "perturb_amplitude": 0.0,
    "perturb_seed": 0,
    "fd_step": 1e-6,
}
LIST_KEYS = ("T", "alpha", "init_family")

TRAJECTORY_HEADER = ("s", "x", "z", "P0", "g", "R", "E")
INIT_SET_HEADER = ("s", "x", "z", "g", "R")
HISTORY_HEADER = ("iteration", "J", "F", "avg_population", "grad_max_norm")
SWEEP_HEADER = (
    "problem", "family", "T", "L", "alpha", "tracking", "infidelity",
    "avg_population", "fidelity", "composite", "iterations", "termination", "error",
)

_number_or_null = {"type": ["number", "null"]}
SUMMARY_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "required": [
        "problem", "family", "T", "L", "alpha", "tracking", "fidelity", "infidelity",
        "avg_population", "composite", "iterations", "termination", "epsilon", "lambda",
    ],
    "properties": {
        "problem": {"enum": sorted(PROBLEMS)},
        "family": {"enum": list(FAMILY_IDS)},
        "T": {"type": "number", "exclusiveMinimum": 0},
        "L": {"type": "integer", "minimum": 2},
        "alpha": {"type": "number", "minimum": 0},
        "tracking": {"enum": list(TRACKING_KINDS)},
        "fidelity": _number_or_null,
        "infidelity": _number_or_null,
        "avg_population": _number_or_null,
        "composite": _number_or_null,
        "iterations": {"type": "integer", "minimum": 0},
        "termination": {"enum": ["grad_tol", "objective_tol", "max_iterations", None]},
        "epsilon": _number_or_null,
        "lambda": _number_or_null,
    },
}


# ---------------------------------------------------------------------------
# configuration


def load_config(path, mode: str) -> dict:
    """Read and validate a flat JSON config; unknown keys are rejected."""
    raw = {}
    if path is not None:
        try:
            with open(path, encoding="utf-8") as fh:
                raw = json.load(fh)
        except OSError as exc:
            raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"config {path} is not valid JSON: {exc}") from exc
    return validate_config(raw, mode)


def validate_config(raw: dict, mode: str) -> dict:
    if not isinstance(raw, dict):
        raise ConfigurationError("config must be a JSON object")
    known = set(CONFIG_DEFAULTS) | set(OPTIMIZER_KEYS)
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ConfigurationError(f"unknown config keys: {', '.join(unknown)}")
    cfg = dict(CONFIG_DEFAULTS)
    cfg.update(raw)
    if cfg["mode"] is not None and cfg["mode"] != mode:
        raise ConfigurationError(f"config mode {cfg['mode']!r} does not match subcommand {mode!r}")
    cfg["mode"] = mode

    for key in LIST_KEYS:
        val = cfg[key]
        if isinstance(val, list):
            if mode != "sweep":
                raise ConfigurationError(f"{key} may only be a list for the sweep subcommand")
            if not val:
                raise ConfigurationError(f"{key} list must be non-empty")
        else:
            cfg[key] = [val] if mode == "sweep" else val

    if str(cfg["problem"]) not in PROBLEMS:
        raise ConfigurationError(f"unknown problem {cfg['problem']!r}; choose one of {sorted(PROBLEMS)}")
    cfg["problem"] = str(cfg["problem"])
    if cfg["tracking"] not in TRACKING_KINDS:
        raise ConfigurationError(f"unknown tracking {cfg['tracking']!r}; choose one of {TRACKING_KINDS}")

    def each(key):
        return cfg[key] if mode == "sweep" else [cfg[key]]

    for T in each("T"):
        if not _is_number(T) or not T > 0:
            raise ConfigurationError(f"T must be a positive number, got {T!r}")
    for a in each("alpha"):
        if not _is_number(a) or a < 0:
            raise ConfigurationError(f"alpha must be a non-negative number, got {a!r}")
    for fam in each("init_family"):
        if fam not in FAMILY_IDS:
            raise ConfigurationError(f"unknown family {fam!r}; known families: {', '.join(FAMILY_IDS)}")
        get_profile(cfg["problem"], fam)  # raises with the list of valid pairs
    if cfg["L"] is not None and (not isinstance(cfg["L"], int) or isinstance(cfg["L"], bool) or cfg["L"] < 2):
        raise ConfigurationError(f"L must be an integer >= 2, got {cfg['L']!r}")
    if not _is_number(cfg["dt"]) or not cfg["dt"] > 0:
        raise ConfigurationError("dt must be positive")
    if not _is_number(cfg["perturb_amplitude"]) or cfg["perturb_amplitude"] < 0:
        raise ConfigurationError("perturb_amplitude must be non-negative")
    if not isinstance(cfg["perturb_seed"], int):
        raise ConfigurationError("perturb_seed must be an integer")
    if not _is_number(cfg["fd_step"]) or not cfg["fd_step"] > 0:
        raise ConfigurationError("fd_step must be positive")
    try:
        cfg["optimizer"] = OptimizerConfig(**{k: cfg.pop(k) for k in OPTIMIZER_KEYS if k in cfg})
    except (TypeError, ValidationError) as exc:
        raise ConfigurationError(f"invalid optimizer settings: {exc}") from exc
    return cfg


def _is_number(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)


def intervals_for(cfg: dict, T: float) -> int:
    if cfg["L"] is not None:
        return cfg["L"]
    L = int(round(T / cfg["dt"]))
    if L < 2:
        raise ConfigurationError(f"T / dt gives {L} intervals; at least 2 are required")
    return L


def build_seed(cfg: dict, family: str, T: float):
    L = intervals_for(cfg, T)
    schedule, eps, lam = initial_set(cfg["problem"], family, T, L)
    if cfg["perturb_amplitude"] > 0:
        schedule = perturb(schedule, cfg["perturb_amplitude"], cfg["perturb_seed"])
    return schedule, eps, lam


# ---------------------------------------------------------------------------
# writers


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    if v is None:
        return ""
    return str(v)


def write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _json_value(v):
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if math.isfinite(v) else None
    if isinstance(v, np.integer):
        return int(v)
    return v


def write_summary(path: Path, summary: dict) -> dict:
    clean = {k: _json_value(summary.get(k)) for k in SUMMARY_SCHEMA["required"]}
    jsonschema.validate(clean, SUMMARY_SCHEMA)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(clean, fh, indent=2)
        fh.write("\n")
    return clean


def trajectory_rows(report, schedule):
    """One row per grid point; controls are those of the interval containing s."""
    L = schedule.intervals
    s = np.arange(L + 1) / L
    x, z = schedule.grid_values()
    return zip(s, x, z, report.pop_series, report.gap_series, report.ratio_series, report.energy_series)


def _summary(cfg, family, T, schedule, report, eps, lam, iterations=0, termination=None, alpha=None):
    return {
        "problem": cfg["problem"],
        "family": family,
        "T": float(T),
        "L": schedule.intervals,
        "alpha": float(cfg["alpha"] if alpha is None else alpha),
        "tracking": cfg["tracking"],
        "fidelity": report.fidelity,
        "infidelity": report.infidelity,
        "avg_population": report.avg_population,
        "composite": report.composite,
        "iterations": iterations,
        "termination": termination,
        "epsilon": eps,
        "lambda": lam,
    }


def _write_run(out: Path, cfg, family, T, record, eps, lam) -> dict:
    out.mkdir(parents=True, exist_ok=True)
    write_csv(out / "trajectory_initial.csv", TRAJECTORY_HEADER,
              trajectory_rows(record.initial_report, record.initial_schedule))
    write_csv(out / "trajectory_final.csv", TRAJECTORY_HEADER,
              trajectory_rows(record.final_report, record.final_schedule))
    write_csv(out / "history.csv", HISTORY_HEADER, record.history)
    summary = _summary(cfg, family, T, record.final_schedule, record.final_report, eps, lam,
                       record.iterations, record.termination, alpha=record.meta.get("alpha"))
    return write_summary(out / "summary.json", summary)


# ---------------------------------------------------------------------------
# subcommands


def cmd_evaluate(cfg: dict) -> int:
    out = Path(cfg["output_dir"])
    out.mkdir(parents=True, exist_ok=True)
    family, T = cfg["init_family"], float(cfg["T"])
    schedule, eps, lam = build_seed(cfg, family, T)
    spec = aqc_spec(cfg["problem"], cfg["alpha"], cfg["tracking"])
    report = evaluate(xz_model(), schedule, spec)
    write_csv(out / "trajectory.csv", TRAJECTORY_HEADER, trajectory_rows(report, schedule))
    summary = write_summary(out / "summary.json", _summary(cfg, family, T, schedule, report, eps, lam))
    print(f"1-F = {summary['infidelity']:.6e}  avg P0 = {summary['avg_population']:.6f}")
    return EXIT_OK


def cmd_optimize(cfg: dict) -> int:
    family, T = cfg["init_family"], float(cfg["T"])
    schedule, eps, lam = build_seed(cfg, family, T)
    spec = aqc_spec(cfg["problem"], cfg["alpha"], cfg["tracking"])
    record = optimize(xz_model(), cfg["problem"], schedule, spec, cfg["optimizer"])
    summary = _write_run(Path(cfg["output_dir"]), cfg, family, T, record, eps, lam)
    print(f"{record.termination} after {record.iterations} iterations: "
          f"1-F = {summary['infidelity']:.6e}  avg P0 = {summary['avg_population']:.6f}")
    return EXIT_OK


def _cell_dir(family, T, alpha) -> str:
    return f"{family}_T{T:g}_alpha{alpha:g}"


def cmd_sweep(cfg: dict, jobs: int = 1) -> int:
    out = Path(cfg["output_dir"])
    out.mkdir(parents=True, exist_ok=True)
    records = sweep(
        None, cfg["problem"], cfg["init_family"], cfg["T"], cfg["alpha"], cfg["optimizer"],
        L=cfg["L"], tracking=cfg["tracking"], dt=cfg["dt"], jobs=jobs,
        perturb_amplitude=cfg["perturb_amplitude"], seed=cfg["perturb_seed"],
    )
    rows = []
    for rec in records:
        meta = rec.meta
        family, T, alpha = meta["family"], meta["T"], meta["alpha"]
        if rec.error is not None:
            rows.append((cfg["problem"], family, T, None, alpha, cfg["tracking"],
                         None, None, None, None, 0, "error", rec.error))
            continue
        cell_cfg = dict(cfg, alpha=alpha)
        s = _write_run(out / _cell_dir(family, T, alpha), cell_cfg, family, T, rec,
                       meta.get("epsilon"), meta.get("lambda"))
        rows.append((s["problem"], family, T, s["L"], alpha, s["tracking"], s["infidelity"],
                     s["avg_population"], s["fidelity"], s["composite"], s["iterations"],
                     s["termination"], None))
    write_csv(out / "sweep.csv", SWEEP_HEADER, rows)
    failed = sum(r[-1] is not None for r in rows)
    print(f"{len(rows)} cells written to {out / 'sweep.csv'} ({failed} failed)")
    return EXIT_OK


def cmd_grad_check(cfg: dict) -> int:
    family, T = cfg["init_family"], float(cfg["T"])
    schedule, _, _ = build_seed(cfg, family, T)
    spec = aqc_spec(cfg["problem"], cfg["alpha"], cfg["tracking"])
    result = check_gradients(xz_model(), schedule, spec, step=cfg["fd_step"])
    print(f"fidelity gradient max relative error: {result.fidelity_error:.3e}")
    print(f"{result.tracking} tracking gradient max relative error: {result.tracking_error:.3e}")
    ok = result.passed(GRADIENT_TOL)
    print(f"gradient check {'passed' if ok else 'FAILED'} (tolerance {GRADIENT_TOL:g})")
    return EXIT_OK if ok else EXIT_CHECK


def cmd_init_set(cfg: dict) -> int:
    out = Path(cfg["output_dir"])
    out.mkdir(parents=True, exist_ok=True)
    family, T = cfg["init_family"], float(cfg["T"])
    L = intervals_for(cfg, T)
    prof = get_profile(cfg["problem"], family)
    _, eps, lam = initial_set(cfg["problem"], family, T, L)
    s = np.arange(L + 1) / L
    x, z = prof.x(s), prof.z(s)
    g = 2.0 * np.hypot(x, z)
    R = prof.ratio(s, T)
    write_csv(out / "init_set.csv", INIT_SET_HEADER, zip(s, x, z, g, R))
    meta = {"problem": cfg["problem"], "family": family, "T": T, "L": L,
            "epsilon": _json_value(eps), "lambda": _json_value(lam)}
    with open(out / "init_set.json", "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2)
        fh.write("\n")
    print(f"{family}: epsilon = {eps}  lambda = {lam}")
    return EXIT_OK


COMMANDS = {
    "evaluate": cmd_evaluate,
    "optimize": cmd_optimize,
    "sweep": cmd_sweep,
    "grad-check": cmd_grad_check,
    "init-set": cmd_init_set,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="adiabatic-oct",
        description="Simulate and optimize one-qubit adiabatic control schedules.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="mode", required=True)
    for mode in MODES:
        p = sub.add_parser(mode, help=f"run the {mode} workflow")
        p.add_argument("--config", type=Path, help="flat JSON config file")
        p.add_argument("--output", type=Path, help="output directory (overrides output_dir)")
        p.add_argument("--jobs", type=int, default=1, help="worker processes for sweep cells")
        p.add_argument("--seed", type=int, help="perturbation seed (overrides perturb_seed)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config, args.mode)
        if args.output is not None:
            cfg["output_dir"] = str(args.output)
        if args.seed is not None:
            cfg["perturb_seed"] = args.seed
        if args.jobs < 1:
            raise ConfigurationError("--jobs must be at least 1")
        if args.mode == "sweep":
            return cmd_sweep(cfg, jobs=args.jobs)
        return COMMANDS[args.mode](cfg)
    except (ConfigurationError, ValidationError, UnsupportedModelError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalFailure, DegenerateSpectrumError, DomainError, NoSolutionError,
            FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
