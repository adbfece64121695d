"""Reproduce the six built-in scenarios and a tension/stiffness survey.

Writes one CSV per scenario, ``summary.json`` with the run metrics, and
``tension_survey.csv`` with the optimal tensions and planar stiffness
diagonal over a grid of platform positions.

    python3 scripts/run_experiments.py --out results
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import time
from pathlib import Path

import numpy as np

from hcdpr.cli import write_timeseries
from hcdpr.errors import InfeasibleTensionError
from hcdpr.kinematics import cable_geometry
from hcdpr.params import default_params, load_config
from hcdpr.sim import builtin_scenarios, run_scenario, summarize
from hcdpr.tension import optimal_tensions, stiffness_matrices


def run_cases(names, params, out: Path, duration: float | None) -> dict:
    scenarios = builtin_scenarios()
    summary = {}
    for name in names:
        spec = scenarios[name]
        if duration is not None:
            spec = spec.replace(duration=duration)
        t0 = time.perf_counter()
        res = run_scenario(spec, params)
        wall = time.perf_counter() - t0
        write_timeseries(res, out / f"{name}_timeseries.csv")
        s = summarize(res)
        print(s.line(name) + f" [{wall:.1f} s]")
        summary[name] = {
            "strategy": spec.strategy,
            "dt": spec.dt,
            "duration": spec.duration,
            "settling_time": None if math.isinf(s.settling_time) else s.settling_time,
            "peak_error": s.peak_error,
            "oscillation_ratio": s.oscillation_ratio,
            "sustained": s.sustained,
            "min_T34": s.min_T34,
            "final_T": s.final_T.tolist(),
            "wall_time": wall,
        }
    return summary


def tension_survey(params, out: Path, n: int) -> None:
    rows = []
    for x in np.linspace(-0.5, 0.5, n):
        for z in np.linspace(-0.3, 0.3, n):
            q = np.array([x, z, 0.0, 0.0, 0.0])
            try:
                sol = optimal_tensions(q, params)
            except InfeasibleTensionError:
                rows.append([x, z, math.nan, *[math.nan] * 9])
                continue
            K = stiffness_matrices(cable_geometry(q, params), sol.T, params, sol.L0).planar()
            rows.append([x, z, sol.lambda3, *sol.T, *np.diag(K)])
    with open(out / "tension_survey.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x_m", "z_m", "lambda3", *[f"T{i}" for i in range(6)], "K_xx", "K_zz", "K_tt"])
        w.writerows([[format(v, ".10g") for v in r] for r in rows])
    feasible = sum(not math.isnan(r[2]) for r in rows)
    print(f"tension survey: {feasible}/{len(rows)} poses feasible")


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", type=Path, default=Path("results"))
    ap.add_argument("--config", type=Path, help="JSON parameter document")
    ap.add_argument("--cases", nargs="+", default=list(builtin_scenarios()))
    ap.add_argument("--duration", type=float, help="override every scenario's duration [s]")
    ap.add_argument("--grid", type=int, default=21, help="survey points per axis")
    args = ap.parse_args(argv)
    params = load_config(args.config) if args.config else default_params()
    args.out.mkdir(parents=True, exist_ok=True)
    summary = run_cases(args.cases, params, args.out, args.duration)
    (args.out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    tension_survey(params, args.out, args.grid)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
