"""Decoration problem solver: feasibility search, classification, unsat cores.

Pipeline per instance:

1. *Variable elimination.*  Equalities of the shape "parent = rule(children)"
   that mirror the tree structure functionally determine internal labels, so
   those labels are substituted by their closed forms and the search runs
   over the remaining (mostly leaf) variables only.
2. *Interval contraction* (intervals.py) shrinks the variable box; an empty
   box is a proof of infeasibility and ships as a replayable certificate.
3. *Multi-start penalty search*: minimize the sum of squared violations
   (hinge-squared for inequalities) with L-BFGS-B from quasi-random starts
   inside the contracted box, then polish promising points with a bounded
   least-squares refinement so equalities land well inside the holds()
   tolerance.

Numeric failure without an interval proof is reported as presumed, never
proved, infeasibility.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy import optimize
from scipy.stats import qmc

from .domains import AttributeDomain
from .intervals import Certificate, IntervalContractor, replay_certificate
from .predicates import (
    Cmp,
    Const,
    ConstraintSet,
    Label,
    NaryOp,
    Predicate,
    expr_labels,
    holds,
)
from .programs import ArenaBuilder, CompiledSystem
from .tree import AttackTree, Refinement, check_unique_labels, labels_of

FEASIBILITY_TOL = 1e-7
SEPARATION_FRACTION = 1e-4


class SolverError(ValueError):
    pass


class Status(Enum):
    FEASIBLE = "FEASIBLE"
    INFEASIBLE_PROVED = "INFEASIBLE_PROVED"
    INFEASIBLE_PRESUMED = "INFEASIBLE_PRESUMED"
    UNKNOWN = "UNKNOWN"


class Verdict(Enum):
    DETERMINED = "DETERMINED"
    UNDETERMINED = "UNDETERMINED"
    INCONSISTENT = "INCONSISTENT"


@dataclass
class SolverConfig:
    seed: int = 0
    restarts: int = 64
    iterations: int = 500
    tol: float = FEASIBILITY_TOL
    jobs: int = 1
    progress: object = None  # callable(dict) or None

    def emit(self, **event):
        if self.progress is not None:
            self.progress(event)

    def scaled(self, restarts=None) -> "SolverConfig":
        return SolverConfig(
            self.seed,
            restarts if restarts is not None else self.restarts,
            self.iterations,
            self.tol,
            self.jobs,
            self.progress,
        )


@dataclass
class SolveOutcome:
    status: Status
    valuation: dict | None
    residual: float
    restarts_used: int
    certificate: Certificate | None = None

    @property
    def feasible(self) -> bool:
        return self.status is Status.FEASIBLE

    def to_json(self):
        return {
            "status": self.status.value,
            "valuation": self.valuation,
            "residual": self.residual if math.isfinite(self.residual) else None,
            "restarts_used": self.restarts_used,
            "certificate": self.certificate.to_json() if self.certificate else None,
        }


@dataclass
class Classification:
    verdict: Verdict
    witness_pair: tuple | None = None
    caveat: bool = False

    def to_json(self):
        return {
            "verdict": self.verdict.value,
            "witness_pair": list(self.witness_pair) if self.witness_pair else None,
            "caveat": self.caveat,
        }


@dataclass
class UnsatCore:
    core: list
    minimal: bool
    member_checks: dict = field(default_factory=dict)

    def to_json(self):
        return {
            "core": self.core,
            "minimal": self.minimal,
            "member_checks": {k: v.value for k, v in self.member_checks.items()},
        }


# ---------------------------------------------------------------------------
# Problem construction
# ---------------------------------------------------------------------------

def _structural_shape(tree: AttackTree, domain: AttributeDomain):
    """parent label -> (ast op name, frozenset of child labels) per refined node."""
    from .domains import _RULE_AST_OP  # local: avoid exporting the table

    shape = {}
    for node in tree:
        if node.is_leaf:
            continue
        rule = domain.or_rule if node.refinement is Refinement.OR else domain.and_rule
        shape[node.label] = (
            _RULE_AST_OP[rule],
            frozenset(c.label for c in node.children),
            len(node.children),
        )
    return shape


def _matches_structure(pred: Predicate, shape) -> str | None:
    """Label defined by this predicate when it mirrors the tree, else None."""
    expr = pred.expr
    if not isinstance(expr, Cmp) or expr.op != "eq":
        return None
    for lhs, rhs in ((expr.left, expr.right), (expr.right, expr.left)):
        if not isinstance(lhs, Label) or lhs.name not in shape:
            continue
        op, children, arity = shape[lhs.name]
        if arity == 1:
            # single-child combinators are the identity, written as a bare label
            if isinstance(rhs, Label) and {rhs.name} == set(children):
                return lhs.name
        if (
            isinstance(rhs, NaryOp)
            and rhs.op == op
            and len(rhs.args) == arity
            and all(isinstance(a, Label) for a in rhs.args)
            and frozenset(a.name for a in rhs.args) == children
        ):
            return lhs.name
    return None


@dataclass
class _ActivePredicate:
    pred: Predicate
    viol_node: int
    triples: list
    kind_top: str  # 'eq', 'le', 'ge' or 'bool'
    signed_node: int  # residual used by the polish step


class Problem:
    """Compiled decoration instance over the free (non-eliminated) labels."""

    def __init__(self, tree, domain, constraints):
        self.tree = tree
        self.domain = domain
        self.constraints = constraints

        ok, dups = check_unique_labels(tree)
        if not ok:
            raise SolverError(f"tree has duplicate labels: {dups}")
        tree_labels = labels_of(tree)
        stray = constraints.labels() - tree_labels
        if stray:
            raise SolverError(f"predicates reference unknown labels: {sorted(stray)}")

        shape = _structural_shape(tree, domain)
        eliminated: dict[str, Predicate] = {}
        passthrough: list[Predicate] = []
        for pred in constraints:
            target = _matches_structure(pred, shape)
            if target is not None and target not in eliminated:
                eliminated[target] = pred
            else:
                passthrough.append(pred)
        self.eliminated = eliminated

        order = [n.label for n in tree]
        self.var_names = [l for l in order if l not in eliminated]
        self.var_index = {l: i for i, l in enumerate(self.var_names)}
        self.n_vars = len(self.var_names)

        builder = ArenaBuilder()
        env = {l: builder.var(i) for l, i in self.var_index.items()}

        def define(node: AttackTree):
            for child in node.children:
                define(child)
            if node.label in eliminated and node.label not in env:
                pred = eliminated[node.label]
                expr = pred.expr
                rhs = expr.right if isinstance(expr.left, Label) and expr.left.name == node.label else expr.left
                env[node.label] = builder.lower_expr(rhs, env)

        define(tree)
        self._env = env

        self.active: list[_ActivePredicate] = []
        for pred in passthrough:
            viol, triples = builder.lower_predicate(pred, env)
            kind = pred.expr.op if isinstance(pred.expr, Cmp) else "bool"
            if kind in ("eq", "le"):
                # signed residual lhs-rhs: zero at equality, positive when a
                # "le" is violated; smooth, unlike the hinge violation node
                signed = builder.sub(
                    builder.lower_expr(pred.expr.left, env),
                    builder.lower_expr(pred.expr.right, env),
                )
            elif kind == "ge":
                signed = builder.sub(
                    builder.lower_expr(pred.expr.right, env),
                    builder.lower_expr(pred.expr.left, env),
                )
            else:
                signed = viol
            self.active.append(_ActivePredicate(pred, viol, triples, kind, signed))

        arena = builder.build()
        self.arena = arena
        self.labels_order = order
        label_nodes = np.asarray([env[l] for l in order], dtype=np.int32)
        self._label_system = CompiledSystem(arena, self.n_vars, label_nodes)
        viol_nodes = np.asarray([a.viol_node for a in self.active], dtype=np.int32)
        self._viol_system = CompiledSystem(arena, self.n_vars, viol_nodes)
        signed_nodes = np.asarray([a.signed_node for a in self.active], dtype=np.int32)
        self._signed_system = CompiledSystem(arena, self.n_vars, signed_nodes)

        triples = [t for a in self.active for t in a.triples]
        self._triple_owner = []
        for i, a in enumerate(self.active):
            self._triple_owner.extend([i] * len(a.triples))
        self.contractor = IntervalContractor(arena, self.n_vars, triples) if triples else None

        self.box_lo = np.full(self.n_vars, domain.lower)
        self.box_hi = np.full(self.n_vars, domain.upper)

        consts = [abs(v) for v in _collect_consts(constraints)]
        self._scale = max([1.0] + consts)

    # -- helpers -----------------------------------------------------------

    def penalty_system(self, weights=None) -> CompiledSystem:
        sys = self._viol_system.clone()
        if weights is not None:
            sys.weights = np.asarray(weights, dtype=np.float64)
        return sys

    def violations(self, x) -> np.ndarray:
        if not self.active:
            return np.zeros(0)
        return self._viol_system.values_at(x)

    def max_violation(self, x) -> float:
        v = self.violations(x)
        return float(v.max()) if len(v) else 0.0

    def valuation(self, x) -> dict:
        vals = self._label_system.values_at(x)
        return {l: float(v) for l, v in zip(self.labels_order, vals)}

    def point_from_valuation(self, valuation) -> np.ndarray:
        return np.asarray([valuation[l] for l in self.var_names], dtype=float)

    def contract(self):
        if self.contractor is None:
            no_cert = Certificate(list(self.box_lo), list(self.box_hi), 0, False)
            return self.box_lo.copy(), self.box_hi.copy(), no_cert
        return self.contractor.contract(self.box_lo, self.box_hi)

    def finite_window(self, lo, hi):
        flo = np.asarray(lo, dtype=float).copy()
        fhi = np.asarray(hi, dtype=float).copy()
        span = 2.0 * self._scale
        for i in range(len(flo)):
            if not math.isfinite(flo[i]):
                flo[i] = -span if not math.isfinite(fhi[i]) else fhi[i] - span
            if not math.isfinite(fhi[i]):
                fhi[i] = flo[i] + span
        return flo, fhi

    def separation(self, i, x_opt=None) -> float:
        width = self.box_hi[i] - self.box_lo[i]
        if not math.isfinite(width):
            anchor = abs(x_opt[i]) if x_opt is not None else 0.0
            width = max(1.0, anchor, self._scale)
        return SEPARATION_FRACTION * width


def _collect_consts(constraints):
    out = []

    def walk(e):
        if isinstance(e, Const):
            out.append(e.value)
            return
        if hasattr(e, "args"):
            for a in e.args:
                walk(a)
        for attr in ("left", "right", "arg"):
            if hasattr(e, attr):
                walk(getattr(e, attr))

    for p in constraints:
        walk(p.expr)
    return out


# ---------------------------------------------------------------------------
# Feasibility search
# ---------------------------------------------------------------------------

def _starts(problem, lo, hi, count, seed):
    flo, fhi = problem.finite_window(lo, hi)
    mid = (flo + fhi) / 2.0
    pts = [mid]
    if count > 1 and problem.n_vars > 0:
        sampler = qmc.Sobol(d=problem.n_vars, scramble=True, seed=seed)
        m = max(1, math.ceil(math.log2(count - 1)))
        unit = sampler.random_base2(m)[: count - 1]
        pts.extend(flo + unit * (fhi - flo))
    return pts


def _minimize_penalty(system, x0, lo, hi, iterations):
    bounds = optimize.Bounds(lo, hi)
    res = optimize.minimize(
        system.penalty_grad,
        x0,
        jac=True,
        method="L-BFGS-B",
        bounds=bounds,
        options={"maxiter": iterations, "ftol": 1e-16, "gtol": 1e-12},
    )
    return res.x, float(res.fun)


def _polish(problem, x, lo, hi, max_nfev=200):
    """Bounded least-squares refinement of the residual system."""
    if not problem.active:
        return x
    sys = problem._signed_system

    def fun(z):
        vals = sys.values_at(z)
        out = vals.copy()
        for i, a in enumerate(problem.active):
            if a.kind_top in ("le", "ge", "bool"):
                out[i] = max(0.0, vals[i])
        return out

    def jac(z):
        J = sys.jacobian(z)
        vals = sys.values_at(z)
        for i, a in enumerate(problem.active):
            if a.kind_top in ("le", "ge", "bool") and vals[i] <= 0.0:
                J[i] = 0.0
        return J

    try:
        res = optimize.least_squares(
            fun, x, jac=jac, bounds=(lo, hi), method="trf",
            xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=max_nfev,
        )
        return res.x
    except Exception:
        return x


def _search_parallel(problem, config, lo, hi, starts):
    """Fan restarts out to a thread pool; merge is by (residual, index), so
    the result is the same as the sequential pass without early exit."""
    from concurrent.futures import ThreadPoolExecutor

    jobs = max(1, config.jobs)
    chunks = [list(enumerate(starts))[k::jobs] for k in range(jobs)]

    def worker(chunk):
        system = problem.penalty_system()  # own scratch buffers
        return [
            (idx, _minimize_penalty(system, x0, lo, hi, config.iterations)[0])
            for idx, x0 in chunk
        ]

    with ThreadPoolExecutor(max_workers=jobs) as pool:
        results = [r for part in pool.map(worker, chunks) for r in part]
    best_x, best_res, best_idx = None, math.inf, -1
    for idx, x in sorted(results):
        res = problem.max_violation(x)
        if res < best_res:
            best_x, best_res, best_idx = x, res, idx
    x2 = _polish(problem, best_x, lo, hi)
    res2 = problem.max_violation(x2)
    if res2 < best_res:
        best_x, best_res = x2, res2
    config.emit(stage="restart", index=best_idx, best_residual=best_res)
    return (best_x if best_res <= config.tol else None), best_res, len(starts)


def _search_feasible(problem, config, lo, hi):
    """Multi-start penalty minimization; returns (x or None, best_residual, used)."""
    if not problem.active:
        flo, fhi = problem.finite_window(lo, hi)
        return (flo + fhi) / 2.0, 0.0, 0

    starts = _starts(problem, lo, hi, config.restarts, config.seed)
    if config.jobs > 1:
        return _search_parallel(problem, config, lo, hi, starts)

    system = problem.penalty_system()
    best_x, best_res = None, math.inf
    for idx, x0 in enumerate(starts):
        x, _f = _minimize_penalty(system, x0, lo, hi, config.iterations)
        res = problem.max_violation(x)
        if res < best_res:
            best_x, best_res = x, res
        if res <= 1e3 * config.tol:
            x2 = _polish(problem, x, lo, hi)
            res2 = problem.max_violation(x2)
            if res2 < best_res:
                best_x, best_res = x2, res2
        config.emit(stage="restart", index=idx, best_residual=best_res)
        if best_res <= config.tol:
            return best_x, best_res, idx + 1
    x2 = _polish(problem, best_x, lo, hi)
    res2 = problem.max_violation(x2)
    if res2 < best_res:
        best_x, best_res = x2, res2
    return (best_x if best_res <= config.tol else None), best_res, len(starts)


def solve_problem(problem: Problem, config: SolverConfig | None = None) -> SolveOutcome:
    config = config or SolverConfig()
    lo, hi, cert = problem.contract()
    if cert.empty:
        return SolveOutcome(Status.INFEASIBLE_PROVED, None, math.inf, 0, cert)
    x, residual, used = _search_feasible(problem, config, lo, hi)
    if x is not None:
        val = problem.valuation(x)
        if not all(math.isfinite(v) for v in val.values()):
            return SolveOutcome(Status.UNKNOWN, None, residual, used)
        return SolveOutcome(Status.FEASIBLE, val, residual, used)
    return SolveOutcome(Status.INFEASIBLE_PRESUMED, None, residual, used)


def solve(tree, domain, constraints, config=None) -> SolveOutcome:
    """Find a valuation satisfying every hard and soft predicate."""
    return solve_problem(Problem(tree, domain, constraints), config)


def solve_pinned(problem: Problem, var: int, value: float, config: SolverConfig) -> SolveOutcome:
    """Feasibility with one variable fixed, reusing the compiled problem."""
    lo, hi, cert = problem.contract()
    if cert.empty:
        return SolveOutcome(Status.INFEASIBLE_PROVED, None, math.inf, 0, cert)
    if not (lo[var] - 1e-12 <= value <= hi[var] + 1e-12):
        return SolveOutcome(Status.INFEASIBLE_PROVED, None, math.inf, 0, None)
    lo = lo.copy()
    hi = hi.copy()
    lo[var] = hi[var] = value
    x, residual, used = _search_feasible(problem, config, lo, hi)
    if x is not None:
        return SolveOutcome(Status.FEASIBLE, problem.valuation(x), residual, used)
    return SolveOutcome(Status.INFEASIBLE_PRESUMED, None, residual, used)


# ---------------------------------------------------------------------------
# Classification
# ---------------------------------------------------------------------------

def _range_probe(problem, x0, var, direction, lo, hi, config):
    """Optimize +/- x[var] subject to the constraints; None on failure."""
    if not problem.active:
        x = x0.copy()
        x[var] = hi[var] if direction > 0 else lo[var]
        flo, fhi = problem.finite_window(lo, hi)
        x[var] = min(max(x[var], flo[var]), fhi[var])
        return x
    sys = problem._signed_system
    cons = []
    for i, a in enumerate(problem.active):
        if a.kind_top == "eq":
            cons.append(
                {
                    "type": "eq",
                    "fun": lambda z, i=i: sys.values_at(z)[i],
                    "jac": lambda z, i=i: sys.jacobian(z)[i],
                }
            )
        else:
            cons.append(
                {
                    "type": "ineq",
                    "fun": lambda z, i=i: -sys.values_at(z)[i],
                    "jac": lambda z, i=i: -sys.jacobian(z)[i],
                }
            )

    def obj(z):
        return -direction * z[var]

    def obj_jac(z):
        g = np.zeros_like(z)
        g[var] = -direction
        return g

    flo, fhi = problem.finite_window(lo, hi)
    try:
        res = optimize.minimize(
            obj, x0, jac=obj_jac, method="SLSQP",
            bounds=optimize.Bounds(flo, fhi), constraints=cons,
            options={"maxiter": 120, "ftol": 1e-12},
        )
    except Exception:
        return None
    if problem.max_violation(res.x) > 10 * config.tol:
        z = _polish(problem, res.x, lo, hi)
        if problem.max_violation(z) > 10 * config.tol:
            return None
        if direction * (z[var] - x0[var]) < direction * (res.x[var] - x0[var]) - 1e-9:
            return None
        return z
    return res.x


def classify(tree, domain, constraints, config=None) -> Classification:
    """Determined / undetermined / inconsistent verdict with witnesses."""
    config = config or SolverConfig()
    problem = Problem(tree, domain, constraints)
    base = solve_problem(problem, config)
    if not base.feasible:
        return Classification(Verdict.INCONSISTENT,
                              caveat=base.status is Status.INFEASIBLE_PRESUMED)
    x_star = problem.point_from_valuation(base.valuation)
    lo, hi, _ = problem.contract()
    caveat = False
    probe_config = config.scaled(restarts=max(4, config.restarts // 8))
    for var in range(problem.n_vars):
        sep = problem.separation(var, x_star)
        if hi[var] - lo[var] <= sep:
            continue
        # cheap: look for a second feasible point with this variable displaced
        found = None
        for delta in (max(16 * sep, 0.05 * (hi[var] - lo[var]) if math.isfinite(hi[var] - lo[var]) else 16 * sep),):
            for sign in (+1.0, -1.0):
                target = x_star[var] + sign * delta
                target = min(max(target, lo[var]), hi[var])
                if abs(target - x_star[var]) <= sep:
                    continue
                out = solve_pinned(problem, var, float(target), probe_config)
                if out.feasible:
                    found = out.valuation
                    break
            if found:
                break
        if found is not None:
            return Classification(Verdict.UNDETERMINED, (base.valuation, found))
        # tight: bound the variable's feasible range by constrained probes
        up = _range_probe(problem, x_star, var, +1, lo, hi, config)
        down = _range_probe(problem, x_star, var, -1, lo, hi, config)
        if up is None or down is None:
            caveat = True
            continue
        if up[var] - down[var] > sep:
            pick = up if abs(up[var] - x_star[var]) >= abs(down[var] - x_star[var]) else down
            pinned = solve_pinned(problem, var, float(pick[var]), probe_config)
            if pinned.feasible and abs(pick[var] - x_star[var]) > sep:
                return Classification(Verdict.UNDETERMINED, (base.valuation, pinned.valuation))
            caveat = True
    if caveat:
        return Classification(Verdict.UNDETERMINED, None, caveat=True)
    return Classification(Verdict.DETERMINED)


# ---------------------------------------------------------------------------
# Unsat core
# ---------------------------------------------------------------------------

def unsat_core(tree, domain, constraints, config=None) -> UnsatCore:
    """Deletion-based minimization over the soft set, hard set implicit.

    Deletion order is the soft predicates' file order; different orders may
    surface different (equally minimal) cores.
    """
    config = config or SolverConfig()
    full = solve(tree, domain, constraints, config)
    if full.feasible:
        raise SolverError("constraint set is feasible; no unsat core exists")
    hard_only = solve(tree, domain, ConstraintSet(list(constraints.hard), []), config)
    if not hard_only.feasible:
        raise SolverError("hard predicates alone are infeasible")

    work = list(constraints.soft_ids())
    for pid in list(work):
        trial = [p for p in work if p != pid]
        out = solve(tree, domain, constraints.restrict_soft(trial), config)
        if not out.feasible:
            work = trial
    checks = {}
    minimal = True
    for pid in work:
        out = solve(
            tree, domain, constraints.restrict_soft([p for p in work if p != pid]), config
        )
        checks[pid] = out.status
        if not out.feasible:
            minimal = False
    return UnsatCore(work, minimal, checks)


def recheck(tree, constraints, valuation) -> list:
    """Ids of predicates that fail holds() at the valuation (solver-independent)."""
    return [p.id for p in constraints if not holds(p, valuation)]
