"""Built-in attribute domains and the classic bottom-up machinery.

A domain is a closed value interval plus two unranked combinators, one
applied at OR nodes and one at AND nodes.  Four domains ship:

  prob-independent  [0,1]   OR: 1 - prod(1-x_i)   AND: product
  prob-sum          [0,1]   OR: sum               AND: product
  cost              [0,inf) OR: min               AND: sum
  min-time          [0,inf) OR: min               AND: max

Two probability domains exist on purpose.  The textbook rule "OR adds the
probabilities" is not closed on [0,1]; treating children as independent
events (noisy-OR) is, and it is what the shipped reference valuations for
the ATM case were generated with, except the relaxation tool run, which
used plain sums.  prob-sum therefore stays available but evaluation
rejects instances where a sum leaves the unit interval.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .predicates import (
    Cmp,
    Const,
    Label,
    NaryOp,
    Predicate,
    Provenance,
    or_indep,
    _fold_add,
    _fold_mul,
)
from .tree import AttackTree, Refinement, check_unique_labels, leaf_labels

ORACLE_EPS = 1e-9


class DomainError(ValueError):
    pass


_RULES = {
    "sum": _fold_add,
    "product": _fold_mul,
    "min": min,
    "max": max,
    "or_indep": or_indep,
}

_RULE_AST_OP = {
    "sum": "add",
    "product": "mul",
    "min": "min",
    "max": "max",
    "or_indep": "or_indep",
}


@dataclass(frozen=True)
class AttributeDomain:
    name: str
    lower: float
    upper: float
    or_rule: str
    and_rule: str
    closed: bool = True  # False when a rule can leave the bounds (prob-sum)

    @property
    def bounds(self) -> tuple[float, float]:
        return (self.lower, self.upper)

    def or_value(self, values) -> float:
        return _RULES[self.or_rule](list(values))

    def and_value(self, values) -> float:
        return _RULES[self.and_rule](list(values))

    def combine(self, refinement: Refinement, values) -> float:
        if refinement is Refinement.OR:
            return self.or_value(values)
        if refinement is Refinement.AND:
            return self.and_value(values)
        raise ValueError("leaf nodes have no combinator")

    def rule_expr(self, refinement: Refinement, child_exprs):
        rule = self.or_rule if refinement is Refinement.OR else self.and_rule
        return NaryOp(_RULE_AST_OP[rule], tuple(child_exprs))

    def in_bounds(self, v: float) -> bool:
        return self.lower - ORACLE_EPS <= v <= self.upper + ORACLE_EPS


_BUILTINS = {
    "prob-independent": AttributeDomain("prob-independent", 0.0, 1.0, "or_indep", "product"),
    "prob-sum": AttributeDomain("prob-sum", 0.0, 1.0, "sum", "product", closed=False),
    "cost": AttributeDomain("cost", 0.0, math.inf, "min", "sum"),
    "min-time": AttributeDomain("min-time", 0.0, math.inf, "min", "max"),
}


def builtin_domain(name: str) -> AttributeDomain:
    try:
        return _BUILTINS[name]
    except KeyError:
        known = ", ".join(sorted(_BUILTINS))
        raise DomainError(f"unknown domain {name!r} (known: {known})") from None


def builtin_domain_names() -> list[str]:
    return sorted(_BUILTINS)


def _require_unique(tree: AttackTree):
    ok, dups = check_unique_labels(tree)
    if not ok:
        raise DomainError(f"tree has duplicate labels: {dups}")


def bottom_up_constraints(tree: AttackTree, domain: AttributeDomain) -> list[Predicate]:
    """One equality per refined node: label = rule(children labels).

    Leaf nodes contribute nothing; result order is document order.
    """
    _require_unique(tree)
    out = []
    for node in tree:
        if node.is_leaf:
            continue
        rhs = domain.rule_expr(node.refinement, [Label(c.label) for c in node.children])
        out.append(Predicate(Cmp("eq", Label(node.label), rhs), Provenance.HARD_STRUCTURAL))
    return out


def evaluate_bottom_up(tree: AttackTree, domain: AttributeDomain, leaves: dict) -> dict:
    """Classic bottom-up evaluation from a total leaf assignment.

    The result is the unique valuation consistent with the structural
    equalities, so this doubles as the oracle for the constraint solver.
    """
    _require_unique(tree)
    expected = set(leaf_labels(tree))
    got = set(leaves)
    if expected != got:
        missing = sorted(expected - got)
        extra = sorted(got - expected)
        parts = []
        if missing:
            parts.append(f"missing leaf values for {missing}")
        if extra:
            parts.append(f"values for non-leaf labels {extra}")
        raise DomainError("; ".join(parts))
    for name, v in leaves.items():
        if not domain.in_bounds(v):
            raise DomainError(
                f"value {v} for {name!r} outside [{domain.lower}, {domain.upper}]"
            )

    valuation: dict[str, float] = {}

    def walk(node: AttackTree) -> float:
        if node.is_leaf:
            v = float(leaves[node.label])
        else:
            v = domain.combine(node.refinement, [walk(c) for c in node.children])
            if not domain.in_bounds(v):
                raise DomainError(
                    f"combinator left the domain bounds at {node.label!r}: {v}"
                    + ("" if domain.closed else f" ({domain.name} is not closed)")
                )
        valuation[node.label] = v
        return v

    walk(tree)
    return valuation


def leaf_equalities(leaves: dict) -> list[Predicate]:
    """Pin predicates 'l = v' for a leaf assignment."""
    return [
        Predicate(Cmp("eq", Label(name), Const(float(v))))
        for name, v in leaves.items()
    ]


def valuation_to_csv(valuation: dict) -> str:
    """Two-column label,value export for spreadsheets."""
    import csv
    import io

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["label", "value"])
    for label in sorted(valuation):
        writer.writerow([label, repr(float(valuation[label]))])
    return buf.getvalue()
