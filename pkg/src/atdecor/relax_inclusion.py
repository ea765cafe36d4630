"""Relaxation by dropping soft predicates (set-inclusion weakening).

Two flavours: the order-dependent greedy pass (add predicates one by one,
drop any addition that makes the set infeasible) and an exact variant that
searches subset sizes top-down until a feasible subset is found, so the
returned cardinality is maximum.  The greedy result is inclusion-maximal
but not necessarily maximum; outputs are labelled accordingly.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

from .predicates import ConstraintSet
from .solver import SolverConfig, SolverError, Status, solve


@dataclass
class InclusionResult:
    kept: list
    dropped: list
    valuation: dict | None
    exact: bool
    flagged: list = field(default_factory=list)  # dropped without an interval proof

    def to_json(self):
        return {
            "kept": self.kept,
            "dropped": self.dropped,
            "valuation": self.valuation,
            "exact": self.exact,
            "flagged": self.flagged,
        }


def _require_hard_feasible(tree, domain, constraints, config):
    out = solve(tree, domain, ConstraintSet(list(constraints.hard), []), config)
    if not out.feasible:
        raise SolverError("hard predicates alone are infeasible")
    return out


def relax_inclusion_greedy(tree, domain, constraints, order=None, config=None) -> InclusionResult:
    """Greedy pass in the given order (default: soft file order).

    A trial addition whose feasibility comes back unproved-infeasible or
    unknown is dropped conservatively and listed in ``flagged``.
    """
    config = config or SolverConfig()
    hard_out = _require_hard_feasible(tree, domain, constraints, config)
    soft_ids = constraints.soft_ids()
    order = list(order) if order is not None else list(soft_ids)
    if sorted(order) != sorted(soft_ids):
        raise SolverError("order must be a permutation of the soft predicate ids")

    kept: list = []
    flagged: list = []
    valuation = hard_out.valuation
    for pid in order:
        out = solve(tree, domain, constraints.restrict_soft(kept + [pid]), config)
        if out.feasible:
            kept.append(pid)
            valuation = out.valuation
        elif out.status is not Status.INFEASIBLE_PROVED:
            flagged.append(pid)
    dropped = [pid for pid in order if pid not in kept]
    return InclusionResult(kept, dropped, valuation, exact=False, flagged=flagged)


def relax_inclusion_exact(tree, domain, constraints, config=None,
                          max_soft=24, solve_budget=4000) -> InclusionResult:
    """Maximum-cardinality feasible soft subset via top-down subset search.

    Levels above the greedy cardinality are enumerated with infeasible-subset
    pruning; once they are exhausted the greedy set is itself maximum.  A
    spent solve budget returns the best set found with exact=False.
    """
    config = config or SolverConfig()
    soft_ids = constraints.soft_ids()
    n = len(soft_ids)
    if n > max_soft:
        raise SolverError(f"soft set too large for exact search ({n} > {max_soft})")

    greedy = relax_inclusion_greedy(tree, domain, constraints, None, config)
    floor = len(greedy.kept)
    budget = solve_budget
    conclusive = not greedy.flagged
    cores: list[frozenset] = []

    for m in range(n, floor, -1):
        for subset in itertools.combinations(soft_ids, m):
            fs = frozenset(subset)
            if any(core <= fs for core in cores):
                continue
            if budget <= 0:
                best = greedy
                return InclusionResult(best.kept, best.dropped, best.valuation,
                                       exact=False, flagged=best.flagged)
            budget -= 1
            out = solve(tree, domain, constraints.restrict_soft(list(subset)), config)
            if out.feasible:
                dropped = [pid for pid in soft_ids if pid not in fs]
                return InclusionResult(list(subset), dropped, out.valuation,
                                       exact=conclusive)
            cores.append(fs)
            if out.status is not Status.INFEASIBLE_PROVED:
                conclusive = False

    return InclusionResult(greedy.kept, greedy.dropped, greedy.valuation,
                           exact=conclusive, flagged=greedy.flagged)
