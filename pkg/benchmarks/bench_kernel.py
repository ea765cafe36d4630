"""Benchmark: compiled evaluation kernel vs the numpy/python fallback.

Measures the hot call of the whole solver (penalty value + gradient on the
ATM weakening objective) for both backends in-process, then times the full
weakening run end-to-end in subprocesses so each backend is selected the
way users get it (at import).

    python3 benchmarks/bench_kernel.py [--repeat N]
"""

import argparse
import os
import subprocess
import sys
import time

import numpy as np

from atdecor import kernel
from atdecor.corpus import load_corpus
from atdecor.domains import builtin_domain
from atdecor.predicates import ConstraintSet
from atdecor.programs import CompiledSystem
from atdecor.relax_maxweak import ineq_normalize
from atdecor.solver import Problem


def build_objective():
    atm = load_corpus("atm")
    cs = atm.constraint_set()
    ineqs, _ = ineq_normalize(cs.soft)
    soft = [iq.to_predicate() for iq in ineqs]
    problem = Problem(atm.tree, builtin_domain("prob-independent"),
                      ConstraintSet(list(cs.hard), soft))
    viols = np.asarray([a.viol_node for a in problem.active], dtype=np.int32)
    return problem, CompiledSystem(problem.arena, problem.n_vars, viols)


def time_backend(label, pen_fun, system, points, repeat):
    a = system.arena
    grad = np.zeros(system.n_vars)
    vals = np.empty(len(a.ops))
    adj = np.empty(len(a.ops))
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        for x in points:
            grad[:] = 0.0
            pen_fun(a.ops, a.argptr, a.args, a.aux_i, a.aux_f, x, system.out_ids,
                    system.weights, grad, vals, adj)
        best = min(best, time.perf_counter() - t0)
    rate = len(points) / best
    print(f"  {label:<10s} {rate:12,.0f} penalty+grad calls/s   ({best*1e3:7.2f} ms / {len(points)} calls)")
    return rate


def end_to_end(pure: bool) -> float:
    env = dict(os.environ)
    if pure:
        env["ATDECOR_PURE_PYTHON"] = "1"
    else:
        env.pop("ATDECOR_PURE_PYTHON", None)
    code = (
        "import time; from atdecor.corpus import load_corpus;"
        "from atdecor.domains import builtin_domain;"
        "from atdecor.relax_maxweak import relax_maxweak;"
        "from atdecor.solver import SolverConfig;"
        "from atdecor import kernel;"
        "atm = load_corpus('atm');"
        "t0 = time.perf_counter();"
        "res = relax_maxweak(atm.tree, builtin_domain('prob-independent'),"
        " atm.constraint_set(), SolverConfig(seed=0, restarts=64));"
        "print(kernel.BACKEND, time.perf_counter() - t0, res.distance)"
    )
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True)
    backend, seconds, distance = out.stdout.split()
    print(f"  {backend:<10s} weakening run: {float(seconds)*1e3:8.1f} ms   (distance {float(distance):.6f})")
    return float(seconds)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--calls", type=int, default=2000)
    args = ap.parse_args()

    problem, system = build_objective()
    rng = np.random.default_rng(0)
    points = [np.ascontiguousarray(rng.uniform(0, 1, system.n_vars)) for _ in range(args.calls)]

    print(f"arena: {len(problem.arena.ops)} nodes, {system.n_outputs} outputs, "
          f"{system.n_vars} variables")
    print("hot call (in-process):")
    _, pen_py, _ = kernel.python_backend()
    py_rate = time_backend("python", pen_py, system, points, args.repeat)
    if kernel.HAVE_NATIVE:
        from atdecor import _native

        nat_rate = time_backend("native", _native.penalty_grad, system, points, args.repeat)
        print(f"  speedup    {nat_rate / py_rate:10.1f}x")
    else:
        print("  native     (extension not built)")

    print("end-to-end (subprocess, 64 restarts):")
    t_py = end_to_end(pure=True)
    if kernel.HAVE_NATIVE:
        t_nat = end_to_end(pure=False)
        print(f"  speedup    {t_py / t_nat:10.1f}x")


if __name__ == "__main__":
    main()
