"""Distance-minimal weakening of inequality-shaped soft predicates.

Every soft predicate is first normalized into the three solvable shapes
(l <= a, l >= a, l <= l' + a); equalities split into their two half-spaces
and both halves are visible in the output, so reports stay traceable.

For a fixed valuation the best weakened constant of each predicate is the
clamp of its attained value against the original constant, which turns the
joint search over (valuation, constants) into minimizing the sum of squared
hinge violations of the soft set over the valuation alone, subject to the
hard predicates.  That objective is optimized with multi-start quasi-Newton
descent inside the variable box; convergence is certified by the projected
gradient (KKT residual <= 1e-6) and hard-constraint violation <= 1e-7.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .predicates import (
    Cmp,
    Const,
    ConstraintSet,
    IneqKind,
    IneqPredicate,
    Label,
    NaryOp,
    NotInClass,
    Sub,
    classify_ineq,
    holds,
    implies_ineq,
)
from .programs import CompiledSystem
from .solver import Problem, SolverConfig, SolverError, _minimize_penalty, _starts, solve
from .tree import AttackTree

KKT_TOL = 1e-6
HARD_TOL = 1e-7


@dataclass
class MaxWeakResult:
    weakened: list  # IneqPredicate with weakened constants, same order as soft
    valuation: dict
    distance: float
    per_predicate: list  # dicts: id, original, weakened, shift
    converged: bool
    kkt_residual: float
    hard_violation: float

    def to_json(self):
        return {
            "weakened": [str(w) for w in self.weakened],
            "valuation": self.valuation,
            "distance": self.distance,
            "per_predicate": self.per_predicate,
            "converged": self.converged,
            "kkt_residual": self.kkt_residual,
            "hard_violation": self.hard_violation,
        }


def ineq_normalize(soft_preds):
    """Split equalities and mirror flipped comparisons into the three shapes.

    Returns (ineqs, rejected) where rejected pairs each predicate outside the
    fragment with a reason.
    """
    ineqs: list[IneqPredicate] = []
    rejected: list = []
    for pred in soft_preds:
        got = classify_ineq(pred)
        if isinstance(got, IneqPredicate):
            ineqs.append(got)
            continue
        expr = pred.expr
        split = _split_equality(expr, pred.id) if isinstance(expr, Cmp) and expr.op == "eq" else None
        if split is None:
            reason = got.reason if isinstance(got, NotInClass) else "unsupported shape"
            rejected.append((pred, reason))
        else:
            ineqs.extend(split)
    return ineqs, rejected


def _split_equality(expr, pid):
    left, right = expr.left, expr.right
    if isinstance(right, Label) and not isinstance(left, Label):
        left, right = right, left
    if not isinstance(left, Label):
        return None
    if isinstance(right, Const):
        return [
            IneqPredicate(IneqKind.LE_CONST, left.name, right.value, source_id=pid, part="le"),
            IneqPredicate(IneqKind.GE_CONST, left.name, right.value, source_id=pid, part="ge"),
        ]
    lp = _as_label_plus(right)
    if lp is not None:
        other, a = lp
        # l = l' + a  splits into  l <= l' + a  and  l' <= l - a
        return [
            IneqPredicate(IneqKind.LE_LABEL_PLUS, left.name, a, other, source_id=pid, part="le"),
            IneqPredicate(IneqKind.LE_LABEL_PLUS, other, -a, left.name, source_id=pid, part="ge"),
        ]
    return None


def _as_label_plus(expr):
    if isinstance(expr, Label):
        return expr.name, 0.0
    if isinstance(expr, NaryOp) and expr.op == "add" and len(expr.args) == 2:
        a, b = expr.args
        if isinstance(a, Label) and isinstance(b, Const):
            return a.name, b.value
        if isinstance(a, Const) and isinstance(b, Label):
            return b.name, a.value
    if isinstance(expr, Sub) and isinstance(expr.left, Label) and isinstance(expr.right, Const):
        return expr.left.name, -expr.right.value
    return None


def _attained(iq: IneqPredicate, valuation) -> float:
    if iq.kind is IneqKind.LE_LABEL_PLUS:
        return valuation[iq.left_label] - valuation[iq.right_label]
    return valuation[iq.left_label]


def weakened_constant(iq: IneqPredicate, valuation) -> float:
    """Closed-form inner step: clamp the attained value against the constant."""
    v = _attained(iq, valuation)
    if iq.kind is IneqKind.GE_CONST:
        return min(iq.constant, v)
    return max(iq.constant, v)


def _projected_gradient_norm(x, grad, lo, hi):
    worst = 0.0
    for i in range(len(x)):
        g = grad[i]
        if x[i] <= lo[i] + 1e-12:
            g = min(g, 0.0)
        elif x[i] >= hi[i] - 1e-12:
            g = max(g, 0.0)
        worst = max(worst, abs(g))
    return worst


def relax_maxweak(tree: AttackTree, domain, constraints: ConstraintSet,
                  config: SolverConfig | None = None) -> MaxWeakResult:
    """Minimal-distance weakening of the (normalized) soft set.

    The reported distance scores each weakened predicate against its own
    original; checking it against the free-bijection set distance is part of
    the test suite.
    """
    config = config or SolverConfig()
    hard_out = solve(tree, domain, ConstraintSet(list(constraints.hard), []), config)
    if not hard_out.feasible:
        raise SolverError("hard predicates alone are infeasible")
    ineqs, rejected = ineq_normalize(constraints.soft)
    if rejected:
        details = "; ".join(f"{p.id}: {why}" for p, why in rejected)
        raise SolverError(f"soft predicates outside the inequality fragment: {details}")
    if not ineqs:
        raise SolverError("normalized soft set is empty")

    soft_preds = [iq.to_predicate() for iq in ineqs]
    cs = ConstraintSet(list(constraints.hard), soft_preds)
    problem = Problem(tree, domain, cs)

    soft_ids = {p.id for p in soft_preds}
    soft_idx = [i for i, a in enumerate(problem.active) if a.pred.id in soft_ids]
    hard_idx = [i for i, a in enumerate(problem.active) if a.pred.id not in soft_ids]

    arena = problem.arena
    objective = CompiledSystem(
        arena, problem.n_vars,
        np.asarray([problem.active[i].viol_node for i in soft_idx], dtype=np.int32),
    )
    hard_sys = None
    if hard_idx:
        hard_sys = CompiledSystem(
            arena, problem.n_vars,
            np.asarray([problem.active[i].viol_node for i in hard_idx], dtype=np.int32),
        )

    lo, hi = problem.box_lo, problem.box_hi
    starts = _starts(problem, lo, hi, config.restarts, config.seed)
    if hard_out.valuation is not None:
        starts.insert(0, problem.point_from_valuation(hard_out.valuation))

    best_x, best_f = None, math.inf
    for idx, x0 in enumerate(starts):
        x, f = _optimize_start(objective, hard_sys, x0, lo, hi, config)
        if f < best_f:
            best_x, best_f = x, f
        config.emit(stage="restart", index=idx, best_residual=best_f)

    # final high-precision pass from the best start
    x, _ = _optimize_start(objective, hard_sys, best_x, lo, hi, config, maxiter=4000)
    fx, grad = _combined_grad(objective, hard_sys, x)
    if fx <= best_f:
        best_x = x
    f_best, grad = _combined_grad(objective, hard_sys, best_x)

    valuation = problem.valuation(best_x)
    weakened = [iq.with_constant(weakened_constant(iq, valuation)) for iq in ineqs]
    shifts = [abs(w.constant - iq.constant) for w, iq in zip(weakened, ineqs)]
    distance = math.sqrt(sum(s * s for s in shifts))
    per_pred = [
        {
            "id": iq.to_predicate().id,
            "text": str(iq),
            "weakened_text": str(w),
            "original": iq.constant,
            "weakened": w.constant,
            "shift": s,
        }
        for iq, w, s in zip(ineqs, weakened, shifts)
    ]
    hard_violation = (
        float(hard_sys.values_at(best_x).max()) if hard_sys is not None else 0.0
    )
    kkt = _projected_gradient_norm(best_x, grad, lo, hi)
    converged = kkt <= KKT_TOL and hard_violation <= HARD_TOL
    return MaxWeakResult(
        weakened, valuation, distance, per_pred, converged, kkt, hard_violation
    )


def _combined_grad(objective, hard_sys, x, mu=1e8):
    f, g = objective.penalty_grad(x)
    if hard_sys is not None:
        fh, gh = hard_sys.penalty_grad(x)
        f += mu * fh
        g = g + mu * gh
    return f, g


def _optimize_start(objective, hard_sys, x0, lo, hi, config, maxiter=None):
    maxiter = maxiter or config.iterations
    if hard_sys is None:
        return _minimize_penalty(objective, x0, lo, hi, maxiter)
    # ramp the hard-penalty weight, then report the merged objective
    x = np.asarray(x0, dtype=float)
    for mu in (1e2, 1e5, 1e8):
        def fun(z, mu=mu):
            f, g = objective.penalty_grad(z)
            fh, gh = hard_sys.penalty_grad(z)
            return f + mu * fh, g + mu * gh

        res = optimize.minimize(
            fun, x, jac=True, method="L-BFGS-B",
            bounds=optimize.Bounds(lo, hi),
            options={"maxiter": maxiter, "ftol": 1e-16, "gtol": 1e-12},
        )
        x = res.x
    f, _ = _combined_grad(objective, hard_sys, x)
    return x, float(f)


def verify_weakening(result: MaxWeakResult, soft_ineqs, hard_preds=()) -> dict:
    """Re-check a weakening independently of the optimizer.

    Confirms each weakened predicate is implied by its original (by the
    decidable-fragment rules) and that hard plus weakened predicates hold at
    the reported valuation; failures name the offender.
    """
    implication_failures = []
    for iq, w in zip(soft_ineqs, result.weakened):
        if not implies_ineq(iq, w):
            implication_failures.append(str(w))
    holds_failures = []
    for p in list(hard_preds) + [w.to_predicate() for w in result.weakened]:
        if not holds(p, result.valuation):
            holds_failures.append(p.id)
    return {
        "ok": not implication_failures and not holds_failures,
        "implication_failures": implication_failures,
        "holds_failures": holds_failures,
    }
