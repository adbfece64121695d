"""Command-line entry point.

Exit codes: 0 success, 2 usage error or unknown scenario, 3 divergence,
4 workspace or tension infeasibility.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__
from .errors import (
    ConfigError,
    DivergenceError,
    HCDPRError,
    InfeasibleTensionError,
    SingularConfigurationError,
    ValidationError,
    WorkspaceError,
)
from .kinematics import cable_geometry, forward_kinematics, inverse_arm, inverse_platform
from .params import params_from_dict, read_document
from .sim import SimResult, builtin_scenarios, run_scenario, scenario_from_dict, summarize
from .tension import optimal_tensions, stiffness_matrices

EXIT_OK, EXIT_USAGE, EXIT_DIVERGED, EXIT_INFEASIBLE = 0, 2, 3, 4
CSV_SCHEMA_VERSION = 1

log = logging.getLogger("hcdpr")


class _UsageError(Exception):
    pass


def csv_header(n_errors: int) -> list[str]:
    return (
        ["t"]
        + [f"q{i}" for i in range(5)]
        + [f"qdot{i}" for i in range(5)]
        + [f"e{i}" for i in range(n_errors)]
        + [f"T{i}" for i in range(6)]
        + ["tau4", "tau5", "x_e", "z_e", "q_e", "KE", "PE"]
    )


def write_timeseries(res: SimResult, path: Path) -> None:
    cols = [res.t[:, None], res.q, res.qdot, res.e, res.T, res.tau, res.p_e, res.energy]
    data = np.hstack(cols)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(csv_header(res.e.shape[1]))
        for row in data:
            w.writerow([format(v, ".17g") for v in row])


def _vector(text: str, n: int, name: str) -> np.ndarray:
    try:
        v = np.array([float(x) for x in text.split(",")])
    except ValueError:
        raise _UsageError(f"{name}: expected {n} comma-separated numbers, got {text!r}") from None
    if v.shape != (n,):
        raise _UsageError(f"{name}: expected {n} values, got {v.size}")
    return v


def _load(args):
    doc = read_document(args.config) if args.config else {}
    return params_from_dict(doc), doc


def _resolve_scenario(name: str, doc: dict):
    scenarios = builtin_scenarios()
    path = Path(name)
    if name not in scenarios and path.suffix == ".json" and path.exists():
        file_doc = read_document(path)
        section = file_doc.get("scenario")
        if not isinstance(section, dict):
            raise ConfigError(f"{path}: missing 'scenario' object")
        spec = scenario_from_dict(section, scenarios)
        params_doc = {k: v for k, v in file_doc.items() if k != "scenario"}
        return spec, params_doc
    if name not in scenarios:
        raise _UsageError(f"unknown scenario {name!r}; available: {', '.join(scenarios)}")
    spec = scenarios[name]
    override = doc.get("scenario")
    if isinstance(override, dict) and override.get("base", name) == name:
        spec = scenario_from_dict({**override, "base": name}, scenarios)
    return spec, None


def cmd_run(args) -> int:
    params, doc = _load(args)
    spec, file_params = _resolve_scenario(args.scenario, doc)
    if file_params:
        params = params_from_dict({**doc, **file_params})
    changes = {}
    if args.dt is not None:
        changes["dt"] = args.dt
    if args.duration is not None:
        changes["duration"] = args.duration
    try:
        spec = spec.replace(**changes)
    except ValueError as e:
        raise _UsageError(str(e)) from None
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    manifest = {
        "scenario": spec.name,
        "config": str(args.config) if args.config else None,
        "output_dir": str(out),
        "dt_override": args.dt,
        "duration_override": args.duration,
        "deterministic": True,
        "version": __version__,
        "csv_schema": CSV_SCHEMA_VERSION,
        "spec": spec.describe(),
        "params": asdict(params),
    }
    (out / f"{spec.name}_manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    csv_path = out / f"{spec.name}_timeseries.csv"
    try:
        res = run_scenario(spec, params)
    except DivergenceError as err:
        if err.records is not None and len(err.records):
            write_timeseries(err.records, csv_path)
        print(f"{spec.name}: diverged at t={err.t:.6g} s in {err.channel}; partial output in {csv_path}", file=sys.stderr)
        return EXIT_DIVERGED
    write_timeseries(res, csv_path)
    summary = summarize(res)
    if args.json:
        print(json.dumps({
            "scenario": spec.name,
            "settling_time": None if math.isinf(summary.settling_time) else summary.settling_time,
            "peak_error": summary.peak_error,
            "final_T": summary.final_T.tolist(),
            "oscillation_ratio": summary.oscillation_ratio,
            "oscillation": "sustained" if summary.sustained else "damped",
            "csv": str(csv_path),
        }))
    else:
        print(summary.line(spec.name))
    return EXIT_OK


def _pose_from_args(args) -> np.ndarray:
    if args.q is not None:
        return _vector(args.q, 5, "--q")
    return np.array([args.x_m, args.z_m, args.theta_m, args.theta_1, args.theta_2], dtype=float)


def cmd_tension_query(args) -> int:
    params, _ = _load(args)
    q = _pose_from_args(args)
    try:
        sol = optimal_tensions(q, params)
    except InfeasibleTensionError as err:
        print(f"infeasible: {err}", file=sys.stderr)
        for i, (lo, hi) in enumerate(err.intervals or [], start=1):
            print(f"  cable {i}: lambda_3 in [{lo:.6g}, {hi:.6g}]", file=sys.stderr)
        return EXIT_INFEASIBLE
    K = stiffness_matrices(cable_geometry(q, params), sol.T, params).K
    doc = {"A": sol.A.tolist(), "W_m": sol.W_m.tolist(), "lambda3": sol.lambda3, "T": sol.T.tolist(), "K": K.tolist()}
    if args.json:
        print(json.dumps(doc))
        return EXIT_OK
    with np.printoptions(precision=6, suppress=True, linewidth=120):
        print("structure matrix A:")
        print(sol.A)
        print(f"W_m: {sol.W_m}")
        print(f"lambda3*: {sol.lambda3:.9g}")
        print(f"T [N]: {sol.T}")
        print("stiffness K (x, y, z, rx, ry, rz):")
        print(K)
    return EXIT_OK


def cmd_fk(args) -> int:
    params, _ = _load(args)
    q = _vector(args.q, 5, "--q")
    pose, _ = forward_kinematics(q, params)
    doc = {"x_e": pose.x_e, "z_e": pose.z_e, "q_e": pose.q_e}
    if args.json:
        print(json.dumps(doc))
    else:
        print(f"x_e={pose.x_e:.12g} z_e={pose.z_e:.12g} q_e={pose.q_e:.12g}")
    return EXIT_OK


def cmd_ik(args) -> int:
    params, _ = _load(args)
    if args.cables is not None:
        L1, L6 = _vector(args.cables, 2, "--cables")
        platform = inverse_platform(L1, L6, params)
    else:
        platform = tuple(_vector(args.platform, 3, "--platform"))
    target = (args.x_e, args.z_e)
    branches = {}
    for elbow in ("plus", "minus"):
        th1, th2 = inverse_arm(target, platform, params, elbow=elbow)
        branches[elbow] = [float(v) for v in (*platform, th1, th2)]
    if args.json:
        print(json.dumps(branches))
    else:
        for elbow, q in branches.items():
            print(f"{elbow}: q=" + ",".join(format(v, ".17g") for v in q))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON parameter document")
    common.add_argument("--json", action="store_true", help="machine-readable output")

    ap = argparse.ArgumentParser(prog="hcdpr", description="Hybrid cable robot simulator")
    ap.add_argument("--version", action="version", version=__version__)
    ap.add_argument("-v", "--verbose", action="store_true", help="log tension saturation warnings")
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", parents=[common], help="run a scenario and write a CSV time series")
    run.add_argument("scenario", help="built-in scenario name or scenario JSON file")
    run.add_argument("--out", default=".", help="output directory")
    run.add_argument("--dt", type=float)
    run.add_argument("--duration", type=float)
    run.set_defaults(func=cmd_run)

    tq = sub.add_parser("tension-query", parents=[common], help="optimal tensions and stiffness at a pose")
    tq.add_argument("--q", help="x_m,z_m,theta_m,theta_1,theta_2")
    for name in ("x_m", "z_m", "theta_m", "theta_1", "theta_2"):
        tq.add_argument(f"--{name}", type=float, default=0.0)
    tq.set_defaults(func=cmd_tension_query)

    fk = sub.add_parser("fk", parents=[common], help="end-effector pose from joint coordinates")
    fk.add_argument("--q", required=True, help="x_m,z_m,theta_m,theta_1,theta_2")
    fk.set_defaults(func=cmd_fk)

    ik = sub.add_parser("ik", parents=[common], help="joint angles for an end-effector position")
    ik.add_argument("--x_e", type=float, required=True)
    ik.add_argument("--z_e", type=float, required=True)
    group = ik.add_mutually_exclusive_group()
    group.add_argument("--platform", default="0,0,0", help="x_m,z_m,theta_m")
    group.add_argument("--cables", help="L1,L6: solve the platform pose from cable lengths")
    ik.set_defaults(func=cmd_ik)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    logging.basicConfig(level=logging.WARNING if args.verbose else logging.ERROR, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except _UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (ConfigError, ValidationError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (WorkspaceError, SingularConfigurationError, InfeasibleTensionError) as e:
        print(f"workspace error: {e}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except HCDPRError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INFEASIBLE


if __name__ == "__main__":
    sys.exit(main())
