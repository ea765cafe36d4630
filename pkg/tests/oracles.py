"""Solver-independent oracles used by the regression and acceptance suites.

Nothing here touches the compiled kernels or the solver pipeline: feasibility
of inequality sets is decided by negative-cycle detection on the
difference-constraint graph, and weakening objectives are minimized by plain
grid evaluation (sound for these objectives, which are sums of convex
hinge-squared terms).
"""

import itertools
import math

import numpy as np

from atdecor.predicates import IneqKind


def bf_feasible(ineqs, bounds=(0.0, math.inf)) -> bool:
    """Bellman-Ford feasibility for l<=a / l>=a / l<=l'+a constraint sets."""
    lo, hi = bounds
    names = sorted(
        {iq.left_label for iq in ineqs} | {iq.right_label for iq in ineqs if iq.right_label}
    )
    index = {n: i + 1 for i, n in enumerate(names)}  # node 0 is the zero anchor
    edges = []
    for n, i in index.items():
        if math.isfinite(hi):
            edges.append((0, i, hi))  # x - 0 <= hi
        edges.append((i, 0, -lo))     # 0 - x <= -lo
    for iq in ineqs:
        i = index[iq.left_label]
        if iq.kind is IneqKind.LE_CONST:
            edges.append((0, i, iq.constant))
        elif iq.kind is IneqKind.GE_CONST:
            edges.append((i, 0, -iq.constant))
        else:
            edges.append((index[iq.right_label], i, iq.constant))
    n = len(names) + 1
    dist = [0.0] * n
    for _ in range(n):
        changed = False
        for u, v, w in edges:
            if dist[u] + w < dist[v] - 1e-12:
                dist[v] = dist[u] + w
                changed = True
        if not changed:
            return True
    return False


def hinge_objective(ineqs, var_index):
    """Vectorized sum of squared hinge violations over stacked grid points."""

    def evaluate(points):  # points: dict name -> array
        total = np.zeros_like(next(iter(points.values())))
        for iq in ineqs:
            left = points[iq.left_label]
            if iq.kind is IneqKind.LE_CONST:
                viol = left - iq.constant
            elif iq.kind is IneqKind.GE_CONST:
                viol = iq.constant - left
            else:
                viol = left - points[iq.right_label] - iq.constant
            total = total + np.maximum(0.0, viol) ** 2
        return total

    return evaluate


def grid_min_objective(ineqs, names, step=1e-3, lo=0.0, hi=1.0):
    """Grid minimum of the hinge-squared objective over [lo, hi]^n.

    Dimensions 1-2 are swept exhaustively at the requested step; dimension 3
    uses a coarse sweep plus a full-resolution refinement window around the
    coarse minimum, which is exact here because the objective is convex.
    """
    evaluate = hinge_objective(ineqs, {n: i for i, n in enumerate(names)})

    def sweep(axes):
        grids = np.meshgrid(*axes, indexing="ij", sparse=False)
        points = {name: g.ravel() for name, g in zip(names, grids)}
        vals = evaluate(points)
        k = int(np.argmin(vals))
        return float(vals[k]), [float(points[name][k]) for name in names]

    n = len(names)
    if n <= 2:
        axes = [np.arange(lo, hi + step / 2, step)] * n
        return sweep(axes)
    coarse_axes = [np.arange(lo, hi + 5e-3, 1e-2)] * n
    _, center = sweep(coarse_axes)
    axes = []
    for c in center:
        a = max(lo, c - 0.02)
        b = min(hi, c + 0.02)
        axes.append(np.arange(a, b + step / 2, step))
    return sweep(axes)


def max_feasible_cardinality(ineqs, bounds) -> int:
    """Exhaustive subset enumeration with the Bellman-Ford feasibility check."""
    for size in range(len(ineqs), -1, -1):
        for subset in itertools.combinations(ineqs, size):
            if bf_feasible(list(subset), bounds):
                return size
    return 0
