"""Command line runner: ``harmonic-recovery {riesz,recover,proximity,mesh-dump} --config run.json``.

Each command writes a CSV table and a JSON sidecar holding the fully
resolved configuration, a summary and any warnings raised during the run.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__, kernels
from .exprlang import ExprError, parse_field
from .fem import AssemblyError, SolverError
from .linalg import DEFAULT_TAU, SVDConvergenceError
from .mesh import DomainSpec, MeshError, OutsideDomainError, dist_to_boundary, dump, generate, locate
from .metrics import DEFAULT_MIN_GAP, EmptyRegionError, boundary_proximity_study, convergence_study
from .recovery import MeasurementSet, box_formation, grid_formation, synthesize_measurements

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3

RIESZ_COLUMNS = ["level", "h", "err_h1", "err_linf", "err_linf_d", "rate_h1", "rate_linf", "rate_linf_d"]
RECOVER_COLUMNS = ["level", "h", "err_linf", "err_linf_d", "max_residual", "discarded", "condition"]
PROXIMITY_COLUMNS = ["point", "d", "err_h1", "err_linf"]


class ConfigError(ValueError):
    """Invalid run configuration; the message names the offending field."""

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")


def fmt(value) -> str:
    """17 significant digits for reals, plain text for integers, empty for missing values."""
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return f"{float(value):.16e}"


# --- configuration --------------------------------------------------------

def _require(cfg, key):
    if key not in cfg:
        raise ConfigError(key, "missing required field")
    return cfg[key]


def _real(value, field, lo=None, hi=None):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(field, f"expected a number, got {value!r}")
    value = float(value)
    if not math.isfinite(value):
        raise ConfigError(field, "must be finite")
    if lo is not None and value < lo:
        raise ConfigError(field, f"must be >= {lo}")
    if hi is not None and value >= hi:
        raise ConfigError(field, f"must be < {hi}")
    return value


def _int(value, field, lo=0):
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(field, f"expected an integer, got {value!r}")
    if value < lo:
        raise ConfigError(field, f"must be >= {lo}")
    return value


def _point(value, field):
    if not isinstance(value, (list, tuple)) or len(value) != 2:
        raise ConfigError(field, "expected a point [x, y]")
    return [_real(c, field) for c in value]


def _expr(value, field):
    if not isinstance(value, str):
        raise ConfigError(field, "expected an expression string")
    try:
        parse_field(value)
    except ExprError as exc:
        raise ConfigError(field, str(exc)) from exc
    return value


def _domain(cfg):
    raw = _require(cfg, "domain")
    if isinstance(raw, str):
        raw = {"kind": raw}
    if not isinstance(raw, dict) or "kind" not in raw:
        raise ConfigError("domain", "expected {\"kind\": ...}")
    try:
        return DomainSpec.from_dict(raw)
    except (MeshError, ValueError, TypeError) as exc:
        raise ConfigError("domain", str(exc)) from exc


def _levels(cfg, names):
    raw = _require(cfg, "levels")
    if not isinstance(raw, dict):
        raise ConfigError("levels", "expected an object")
    out = {}
    for name in names:
        if name not in raw:
            raise ConfigError(f"levels.{name}", "missing required field")
        out[name] = _int(raw[name], f"levels.{name}")
    return out


def _measurements(cfg, seed):
    raw = _require(cfg, "measurements")
    if not isinstance(raw, dict):
        raise ConfigError("measurements", "expected an object")
    resolved = dict(raw)
    if "box" in raw:
        try:
            points = box_formation(_int(raw["box"], "measurements.box", lo=1))
        except ValueError as exc:
            raise ConfigError("measurements.box", str(exc)) from exc
    elif "grid" in raw:
        try:
            points = grid_formation(_int(raw["grid"], "measurements.grid", lo=1))
        except ValueError as exc:
            raise ConfigError("measurements.grid", str(exc)) from exc
    elif "points" in raw:
        if not isinstance(raw["points"], list) or not raw["points"]:
            raise ConfigError("measurements.points", "expected a non-empty list of points")
        points = np.array([_point(p, "measurements.points") for p in raw["points"]])
    else:
        raise ConfigError("measurements", "give one of box, grid or points")

    noise = _real(raw.get("noise", 0.0), "measurements.noise", lo=0.0)
    resolved["noise"] = noise
    if "values" in raw:
        vals = raw["values"]
        if not isinstance(vals, list) or len(vals) != len(points):
            raise ConfigError("measurements.values", f"expected a list of {len(points)} numbers")
        try:
            meas = MeasurementSet(points, [_real(v, "measurements.values") for v in vals])
        except ValueError as exc:
            raise ConfigError("measurements.points", str(exc)) from exc
        resolved["synthesize"] = False
    else:
        if not raw.get("synthesize", True):
            raise ConfigError("measurements.values", "values are required when synthesize is false")
        exact = cfg.get("exact_field")
        if exact is None:
            raise ConfigError("exact_field", "needed to synthesize measurement values")
        try:
            meas = synthesize_measurements(exact, points, noise=noise, rng=seed)
        except ValueError as exc:
            raise ConfigError("measurements.points", str(exc)) from exc
        resolved["synthesize"] = True
    resolved["resolved_points"] = meas.points.tolist()
    resolved["resolved_values"] = meas.values.tolist()
    return meas, resolved


def _check_inside(spec, points, field, allow_boundary):
    mesh = generate(spec, 0)
    for p in points:
        try:
            locate(mesh, p)
        except OutsideDomainError as exc:
            raise ConfigError(field, str(exc)) from exc
        if not allow_boundary and dist_to_boundary(mesh, p) <= 0.0:
            raise ConfigError(field, f"point {tuple(p)} lies on the boundary")


def resolve_config(cfg: dict, command: str, seed=None) -> tuple[dict, dict]:
    """Validate a raw config; returns (resolved config, runtime objects)."""
    if not isinstance(cfg, dict):
        raise ConfigError("config", "expected a JSON object")
    spec = _domain(cfg)
    res = {"command": command, "domain": spec.to_dict()}
    run = {"spec": spec}
    if command == "mesh-dump":
        res["levels"] = _levels(cfg, ["k"])
        return res, run

    s = cfg.get("s", 1)
    if isinstance(s, bool) or not isinstance(s, (int, float)) or s != 1:
        raise ConfigError("s", f"only s = 1 is supported (got {s!r}); fractional boundary norms are out of scope")
    res["s"] = 1

    if command == "riesz":
        res["point"] = _point(_require(cfg, "point"), "point")
        _check_inside(spec, [res["point"]], "point", allow_boundary=True)
        res["levels"] = _levels(cfg, ["k_min", "k_max", "K"])
        res["d"] = _real(_require(cfg, "d"), "d", lo=0.0)
        res["min_gap"] = _int(cfg.get("min_gap", DEFAULT_MIN_GAP), "min_gap")
    elif command == "recover":
        res["f"] = _expr(cfg.get("f", "0"), "f")
        res["exact_field"] = _expr(_require(cfg, "exact_field"), "exact_field")
        res["levels"] = _levels(cfg, ["k_min", "k_max", "K"])
        res["d"] = _real(_require(cfg, "d"), "d", lo=0.0)
        res["tau_rel"] = _real(cfg.get("tau_rel", DEFAULT_TAU), "tau_rel", lo=0.0, hi=1.0)
        res["min_gap"] = _int(cfg.get("min_gap", 0), "min_gap")
        res["seed"] = seed
        run["meas"], res["measurements"] = _measurements(cfg, seed)
        _check_inside(spec, run["meas"].points, "measurements.points", allow_boundary=False)
    elif command == "proximity":
        pts = _require(cfg, "points")
        if not isinstance(pts, list) or not pts:
            raise ConfigError("points", "expected a non-empty list of points")
        res["points"] = [_point(p, "points") for p in pts]
        _check_inside(spec, res["points"], "points", allow_boundary=False)
        res["levels"] = _levels(cfg, ["k", "K"])
    else:
        raise ConfigError("command", f"unknown command {command!r}")

    lv = res["levels"]
    if "K" in lv:
        if "k_min" in lv and lv["k_min"] > lv["k_max"]:
            raise ConfigError("levels", "k_min must not exceed k_max")
        top = lv.get("k_max", lv.get("k"))
        if top >= lv["K"] and command != "recover":
            raise ConfigError("levels.K", "the surrogate level must exceed the computed levels")
        if "min_gap" in res and lv["K"] - top < res["min_gap"]:
            raise ConfigError("levels.K", f"K - k_max must be at least min_gap = {res['min_gap']}")
    return res, run


# --- commands -------------------------------------------------------------

def cmd_riesz(res, run, threads):
    lv = res["levels"]
    rep = convergence_study(run["spec"], lv["k_min"], lv["k_max"], lv["K"], res["d"],
                            point=tuple(res["point"]), min_gap=res["min_gap"], threads=threads)
    rows = [[r.level, r.h, r.err_h1, r.err_linf, r.err_linf_d, r.rate_h1, r.rate_linf, r.rate_linf_d]
            for r in rep.rows]
    summary = {}
    if len(rep.rows) >= 2:
        summary["lsq_rates"] = {n: rep.lsq_rate("err_" + n) for n in ("h1", "linf", "linf_d")}
    return RIESZ_COLUMNS, rows, summary


def cmd_recover(res, run, threads):
    lv = res["levels"]
    rep = convergence_study(run["spec"], lv["k_min"], lv["k_max"], lv["K"], res["d"], meas=run["meas"],
                            f=res["f"], exact_field=res["exact_field"], tau_rel=res["tau_rel"],
                            min_gap=res["min_gap"], threads=threads)
    rows = [[r.level, r.h, r.err_linf, r.err_linf_d, r.extra["max_residual"], r.extra["discarded"],
             r.extra["condition"]] for r in rep.rows]
    summary = {
        "m": run["meas"].m,
        "err_h1": rep.column("err_h1"),
        "rank_warnings": {str(r.level): r.extra["warnings"] for r in rep.rows if r.extra["warnings"]},
    }
    return RECOVER_COLUMNS, rows, summary


def cmd_proximity(res, run, threads):
    lv = res["levels"]
    table = boundary_proximity_study(run["spec"], res["points"], lv["k"], lv["K"])
    rows = [[f"({fmt(r.point[0])} {fmt(r.point[1])})", r.d, r.err_h1, r.err_linf] for r in table]
    return PROXIMITY_COLUMNS, rows, {}


COMMANDS = {"riesz": cmd_riesz, "recover": cmd_recover, "proximity": cmd_proximity}


def write_csv(path, columns, rows):
    with open(path, "w", newline="", encoding="ascii") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([v if isinstance(v, str) else fmt(v) for v in row])


def _outputs(cfg, command, out_dir):
    raw = cfg.get("outputs", {}) if isinstance(cfg, dict) else {}
    if not isinstance(raw, dict):
        raise ConfigError("outputs", "expected an object")
    stem = command.replace("-", "_")
    default = {"csv": f"{stem}.csv", "json": f"{stem}.json", "mesh": f"{stem}.txt"}
    return {k: Path(out_dir) / str(raw.get(k, v)) for k, v in default.items()}


def run(command, cfg, out_dir=".", threads=1, seed=None):
    """Run one command; returns the JSON sidecar as a dict."""
    res, objs = resolve_config(cfg, command, seed=seed)
    paths = _outputs(cfg, command, out_dir)
    Path(out_dir).mkdir(parents=True, exist_ok=True)
    res["outputs"] = {k: str(v) for k, v in paths.items()}

    if command == "mesh-dump":
        mesh = generate(objs["spec"], res["levels"]["k"])
        dump(mesh, paths["mesh"])
        sidecar = {"config": res, "summary": {"n_vertices": mesh.n_vertices, "n_triangles": mesh.n_triangles,
                                              "n_boundary": len(mesh.boundary_loop)},
                   "warnings": [], "backend": kernels.BACKEND, "version": __version__}
    else:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            columns, rows, summary = COMMANDS[command](res, objs, threads)
        write_csv(paths["csv"], columns, rows)
        sidecar = {"config": res, "summary": summary,
                   "warnings": [f"{w.category.__name__}: {w.message}" for w in caught],
                   "backend": kernels.BACKEND, "version": __version__}
    with open(paths["json"], "w", encoding="utf-8") as fh:
        json.dump(sidecar, fh, indent=2, sort_keys=True, allow_nan=True)
        fh.write("\n")
    return sidecar


def build_parser():
    p = argparse.ArgumentParser(prog="harmonic-recovery",
                                description="Riesz representer and recovery experiments for harmonic fields.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name, help_text in [("riesz", "overrefinement study of one representer"),
                            ("recover", "recovery errors across mesh levels"),
                            ("proximity", "representer errors as the point approaches the boundary"),
                            ("mesh-dump", "write a mesh of the hierarchy as text")]:
        sp = sub.add_parser(name, help=help_text)
        sp.add_argument("--config", required=True, help="JSON run configuration")
        sp.add_argument("--out", default=".", help="output directory (default: current)")
        sp.add_argument("--threads", type=int, default=1, help="worker threads, 0 = one per CPU")
        sp.add_argument("--seed", type=int, default=None, help="seed for measurement noise")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    threads = args.threads if args.threads > 0 else (os.cpu_count() or 1)
    try:
        with open(args.config, encoding="utf-8") as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.seed is not None and not 0 <= args.seed < 2 ** 64:
        print("config error: seed must be an unsigned 64-bit integer", file=sys.stderr)
        return EXIT_CONFIG
    seed = args.seed if args.seed is not None else cfg.get("seed") if isinstance(cfg, dict) else None
    try:
        sidecar = run(args.command, cfg, args.out, threads, seed)
    except (ConfigError, EmptyRegionError, MeshError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SolverError, SVDConvergenceError, AssemblyError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    for w in sidecar["warnings"]:
        print(f"warning: {w}", file=sys.stderr)
    print(sidecar["config"]["outputs"].get("csv" if args.command != "mesh-dump" else "mesh"))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
