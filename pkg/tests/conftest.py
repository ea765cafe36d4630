import itertools

import numpy as np
import pytest

from atdecor.corpus import load_corpus
from atdecor.domains import builtin_domain
from atdecor.predicates import ConstraintSet
from atdecor.tree import AttackTree, Refinement


@pytest.fixture(scope="session")
def fig1():
    return load_corpus("fig1")


@pytest.fixture(scope="session")
def fig2():
    return load_corpus("fig2")


@pytest.fixture(scope="session")
def atm():
    return load_corpus("atm")


@pytest.fixture(scope="session")
def atm_constraints(atm):
    """Canonical full ATM constraint set (knowledge before historical)."""
    return atm.constraint_set()


@pytest.fixture(scope="session")
def prob_domain():
    return builtin_domain("prob-independent")


def random_tree(rng, max_nodes=30, max_arity=4) -> AttackTree:
    """Random unique-label tree with the given size and arity caps."""
    target = int(rng.integers(1, max_nodes + 1))
    counter = itertools.count()
    budget = [target]

    def build(depth):
        budget[0] -= 1
        label = f"n{next(counter)}"
        if budget[0] <= 0 or depth >= 6 or rng.random() < 0.25:
            return AttackTree(label)
        arity = int(rng.integers(1, max_arity + 1))
        arity = min(arity, max(1, budget[0]))
        children = tuple(build(depth + 1) for _ in range(arity))
        kind = Refinement.OR if rng.random() < 0.5 else Refinement.AND
        return AttackTree(label, kind, children)

    return build(0)


def random_leaves(rng, tree, domain) -> dict:
    from atdecor.tree import leaf_labels

    hi = 1.0 if domain.upper == 1.0 else 10.0
    return {name: float(rng.uniform(0.0, hi)) for name in leaf_labels(tree)}


def pinned_instance(rng, tree, domain):
    """Structural constraints plus exact leaf pins: a determined instance."""
    from atdecor.domains import bottom_up_constraints, leaf_equalities

    leaves = random_leaves(rng, tree, domain)
    cs = ConstraintSet(bottom_up_constraints(tree, domain), leaf_equalities(leaves))
    return cs, leaves
