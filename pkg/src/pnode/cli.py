"""Command-line interface: single solves and work-precision bench sweeps.

``pnode solve`` writes the posterior over the grid (JSON or CSV);
``pnode bench`` runs a sweep described by a flat key/value config file and
emits one CSV row per cell. Outputs are deterministic given the seed,
except for the wall-time columns.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import problems, solver
from .errors import PnodeError

BENCH_HEADER = (
    "problem,method,order,ops,mode,tol_or_dt,final_error,n_feval,n_steps,"
    "wall_time_ns,energy_drift,dae_residual,seed"
)
DEFAULT_TOL_LADDER = tuple(10.0**-k for k in range(3, 10))


@dataclass
class BenchRecord:
    problem: str
    method: str
    order: int
    ops: str
    mode: str
    tol_or_dt: float
    final_error: float
    n_feval: int
    n_steps: int
    wall_time_ns: int
    energy_drift: str
    dae_residual: str
    seed: int

    def row(self) -> list:
        return [
            self.problem,
            self.method,
            str(self.order),
            self.ops,
            self.mode,
            repr(self.tol_or_dt),
            repr(self.final_error),
            str(self.n_feval),
            str(self.n_steps),
            str(self.wall_time_ns),
            self.energy_drift,
            self.dae_residual,
            str(self.seed),
        ]


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pnode")
    sub = parser.add_subparsers(dest="command", required=True)

    ps = sub.add_parser("solve", help="solve one problem and write the posterior")
    ps.add_argument("--problem", required=True)
    ps.add_argument("--method", choices=["ek0", "ek1"], default="ek1")
    ps.add_argument("--order", type=int, default=3)
    ps.add_argument("--dt", type=float)
    ps.add_argument("--rtol", type=float)
    ps.add_argument("--atol", type=float)
    ps.add_argument("--ops", default="ode", help="comma list: ode,chainrule,conservation")
    ps.add_argument("--first-order-transform", action="store_true")
    ps.add_argument("--smooth", action="store_true")
    ps.add_argument("--samples", type=int, default=0)
    ps.add_argument("--seed", type=int, default=0)
    ps.add_argument("--out", required=True)
    ps.add_argument("--format", choices=["json", "csv"], default="json")

    pb = sub.add_parser("bench", help="run a work-precision sweep from a config file")
    pb.add_argument("config")
    pb.add_argument("--out", required=True)
    return parser


def _solve_config(args) -> solver.SolverConfig:
    return solver.SolverConfig(
        approx=args.method.upper(),
        order=args.order,
        dt=args.dt,
        rtol=args.rtol,
        atol=args.atol,
        smooth=args.smooth,
        seed=args.seed,
    )


def cmd_solve(args) -> int:
    try:
        problem = problems.load_problem(args.problem)
        if args.first_order_transform:
            problem = problems.first_order_transform(problem)
        ops = tuple(tok for tok in args.ops.split(",") if tok)
        config = _solve_config(args)
        config.scheme = solver.default_scheme(problem, config, ops)
    except (PnodeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    try:
        solution = solver.solve(problem, config)
        sample_block = None
        if args.samples > 0:
            draws = solver.sample(solution, args.samples, args.seed)
            sample_block = draws[:, :, : problem.d]
    except PnodeError as exc:
        print(f"solver abort: {exc}", file=sys.stderr)
        return 2

    diffusions = np.concatenate([[0.0], solution.local_diffusions])
    if args.format == "json":
        payload = {
            "problem": problem.name,
            "method": args.method,
            "order": args.order,
            "ops": list(ops),
            "mode": "fixed" if args.dt is not None else "adaptive",
            "seed": args.seed,
            "times": solution.times.tolist(),
            "mean": solution.solution_means().tolist(),
            "std": solution.solution_stds().tolist(),
            "diffusions": diffusions.tolist(),
            "stats": {
                "n_feval": solution.stats.n_feval,
                "n_steps_accepted": solution.stats.n_steps_accepted,
                "n_steps_rejected": solution.stats.n_steps_rejected,
            },
        }
        if sample_block is not None:
            payload["samples"] = sample_block.tolist()
        with open(args.out, "w") as fh:
            json.dump(payload, fh, sort_keys=True, indent=1)
            fh.write("\n")
    else:
        means = solution.solution_means()
        stds = solution.solution_stds()
        with open(args.out, "w", newline="") as fh:
            writer = csv.writer(fh)
            d = problem.d
            writer.writerow(
                ["t"]
                + [f"mean_{i}" for i in range(d)]
                + [f"std_{i}" for i in range(d)]
                + ["diffusion"]
            )
            for k, t in enumerate(solution.times):
                writer.writerow(
                    [repr(float(t))]
                    + [repr(float(v)) for v in means[k]]
                    + [repr(float(v)) for v in stds[k]]
                    + [repr(float(diffusions[k]))]
                )
    return 0


def _parse_bench_config(path: str) -> dict:
    """Flat ``key = value`` lines; comma-separated lists; '#' comments.

    Operator sets are '+'-joined tokens, e.g. ``ops = ode, ode+conservation``.
    """
    cfg = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected 'key = value'")
            key, value = (part.strip() for part in line.split("=", 1))
            cfg[key] = [tok.strip() for tok in value.split(",") if tok.strip()]
    return cfg


def _bench_cell(name, method, order, opset, mode, tol_or_dt, seed, transform):
    problem = problems.load_problem(name)
    if transform:
        problem = problems.first_order_transform(problem)
    ops = tuple(opset.split("+"))
    if mode == "fixed":
        config = solver.SolverConfig(approx=method.upper(), order=order, dt=tol_or_dt, seed=seed)
    else:
        config = solver.SolverConfig(
            approx=method.upper(), order=order, rtol=tol_or_dt, atol=tol_or_dt, seed=seed
        )
    config.scheme = solver.default_scheme(problem, config, ops)

    t_end = problem.tspan[1]
    reference = problems.reference_solution(problem, [t_end])[0]

    start = time.perf_counter_ns()
    solution = solver.solve(problem, config)
    wall_ns = time.perf_counter_ns() - start

    y_end = solution.filtered[-1].mean[: problem.d]
    final_error = float(np.linalg.norm(y_end - reference))

    energy_drift = ""
    if problem.invariants is not None:
        drift = 0.0
        for state in solution.filtered:
            y = state.mean[: problem.d]
            dy = state.mean[problem.d : 2 * problem.d]
            drift = max(drift, float(np.max(np.abs(problem.invariants.g(dy, y)))))
        energy_drift = repr(drift)

    dae_residual = ""
    if problem.mass is not None:
        res = 0.0
        for state in solution.filtered:
            vals = problems.algebraic_residual(problem, state.mean[: problem.d])
            if vals.size:
                res = max(res, float(np.max(np.abs(vals))))
        dae_residual = repr(res)

    return BenchRecord(
        problem=problem.name,
        method=method,
        order=order,
        ops=opset,
        mode=mode,
        tol_or_dt=tol_or_dt,
        final_error=final_error,
        n_feval=solution.stats.n_feval,
        n_steps=solution.stats.n_steps_accepted,
        wall_time_ns=wall_ns,
        energy_drift=energy_drift,
        dae_residual=dae_residual,
        seed=seed,
    )


def run_bench(config_path: str):
    cfg = _parse_bench_config(config_path)
    names = cfg.get("problems", [])
    methods = cfg.get("methods", ["ek1"])
    orders = [int(v) for v in cfg.get("orders", ["3"])]
    opsets = cfg.get("ops", ["ode"])
    mode = cfg.get("mode", ["adaptive"])[0]
    seed = int(cfg.get("seed", ["0"])[0])
    transform = cfg.get("first_order_transform", ["false"])[0].lower() in ("1", "true", "yes")
    if mode == "fixed":
        ladder = [float(v) for v in cfg.get("dts", [])]
        if not ladder:
            raise ValueError("fixed mode needs a 'dts' ladder")
    else:
        ladder = [float(v) for v in cfg.get("tols", [repr(t) for t in DEFAULT_TOL_LADDER])]

    cells = [
        (name, method, order, opset, mode, tol, seed, transform)
        for name in names
        for method in methods
        for order in orders
        for opset in opsets
        for tol in ladder
    ]

    def run_cell(cell):
        try:
            return _bench_cell(*cell)
        except Exception:
            name, method, order, opset, mode_, tol, seed_, _ = cell
            return BenchRecord(
                problem=name,
                method=method,
                order=order,
                ops=opset,
                mode=mode_,
                tol_or_dt=tol,
                final_error=math.nan,
                n_feval=0,
                n_steps=0,
                wall_time_ns=0,
                energy_drift="",
                dae_residual="",
                seed=seed_,
            )

    n_workers = max(1, int(os.environ.get("PNODE_THREADS", "1")))
    if n_workers > 1:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            records = list(pool.map(run_cell, cells))
    else:
        records = [run_cell(cell) for cell in cells]

    records.sort(key=lambda r: (r.problem, r.method, r.order, r.ops, r.tol_or_dt))
    return records


def cmd_bench(args) -> int:
    try:
        records = run_bench(args.config)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    with open(args.out, "w") as fh:
        fh.write(BENCH_HEADER + "\n")
        for record in records:
            fh.write(",".join(record.row()) + "\n")
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    if args.command == "solve":
        return cmd_solve(args)
    return cmd_bench(args)


if __name__ == "__main__":
    sys.exit(main())
