"""Timing comparison of the numba kernels against the pure-numpy fallback.

Kernel microbenchmarks run both variants in-process; ``--solve`` also times
a full adaptive solve in subprocesses, once per path, selecting the fallback
via the ``PNODE_NO_NUMBA`` environment variable.
"""

import argparse
import os
import statistics
import subprocess
import sys
import time

import numpy as np

from pnode import _kernels


def _inputs(dim, m, seed=0):
    rng = np.random.default_rng(seed)
    mean = rng.standard_normal(dim)
    rfac = np.ascontiguousarray(np.triu(rng.standard_normal((dim, dim))))
    a = rng.standard_normal((dim, dim))
    q_sqrt = np.ascontiguousarray(np.triu(rng.standard_normal((dim, dim))))
    h = rng.standard_normal((m, dim))
    residual = rng.standard_normal(m)
    return mean, rfac, a, q_sqrt, h, residual


def _time(fn, args, repeats, loops):
    fn(*args)  # warm-up (and JIT compile for the numba path)
    samples = []
    for _ in range(repeats):
        start = time.perf_counter()
        for _ in range(loops):
            fn(*args)
        samples.append((time.perf_counter() - start) / loops)
    return statistics.median(samples)


def bench_kernels(repeats, loops):
    if not _kernels.NUMBA_ENABLED:
        print("numba path unavailable (PNODE_NO_NUMBA set or numba missing); nothing to compare")
        return
    print(f"{'kernel':<14} {'dim':>4} {'m':>3} {'numpy us':>10} {'numba us':>10} {'speedup':>8}")
    for dim, m in ((8, 2), (16, 4), (32, 8), (64, 16)):
        mean, rfac, a, q_sqrt, h, residual = _inputs(dim, m)
        stacked = np.ascontiguousarray(np.vstack([rfac, a]))
        cases = [
            ("triangularize", _kernels.triangularize_py, _kernels.triangularize_nb, (stacked,)),
            ("predict", _kernels.predict_core_py, _kernels.predict_core_nb, (mean, rfac, a, q_sqrt)),
            ("condition", _kernels.condition_core_py, _kernels.condition_core_nb, (mean, rfac, h, residual)),
        ]
        for name, py_fn, nb_fn, args in cases:
            t_py = _time(py_fn, args, repeats, loops)
            t_nb = _time(nb_fn, args, repeats, loops)
            print(
                f"{name:<14} {dim:>4} {m:>3} {t_py * 1e6:>10.1f} {t_nb * 1e6:>10.1f}"
                f" {t_py / t_nb:>7.1f}x"
            )


SOLVE_SNIPPET = """
import time
from pnode import problems, solver
problem = problems.load_problem({name!r})
config = solver.SolverConfig(order=4, rtol=1e-8, atol=1e-8)
solver.solve(problem, config)  # warm-up pass compiles the kernels
start = time.perf_counter()
solution = solver.solve(problem, config)
print(time.perf_counter() - start, solution.stats.n_steps_accepted)
"""


def bench_solve(name):
    print(f"\nfull solve ({name}, EK1 order 4, rtol 1e-8):")
    for label, env_flag in (("numba", ""), ("numpy", "1")):
        env = dict(os.environ, PNODE_NO_NUMBA=env_flag)
        out = subprocess.run(
            [sys.executable, "-c", SOLVE_SNIPPET.format(name=name)],
            env=env,
            capture_output=True,
            text=True,
            check=True,
        )
        wall, steps = out.stdout.split()
        print(f"  {label:<6} {float(wall) * 1e3:>8.1f} ms  ({steps} steps)")


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeats", type=int, default=7)
    parser.add_argument("--loops", type=int, default=200)
    parser.add_argument("--solve", action="store_true", help="also time full solves per path")
    parser.add_argument("--problem", default="lotka_volterra")
    args = parser.parse_args(argv)
    bench_kernels(args.repeats, args.loops)
    if args.solve:
        bench_solve(args.problem)
    return 0


if __name__ == "__main__":
    sys.exit(main())
