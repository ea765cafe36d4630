import itertools
import math

import numpy as np
import pytest

from atdecor.domains import builtin_domain
from atdecor.predicates import ConstraintSet, classify_ineq, holds, parse_predicate
from atdecor.relax_inclusion import relax_inclusion_exact, relax_inclusion_greedy
from atdecor.solver import SolverConfig, SolverError

CFG = SolverConfig(seed=0, restarts=16)
COST = builtin_domain("cost")


def _leaf_cs(*texts):
    from atdecor.tree import parse_tree

    labels = set()
    preds = [parse_predicate(t) for t in texts]
    for p in preds:
        labels |= p.labels()
    names = sorted(labels)
    if len(names) == 1:
        tree = parse_tree(f'"{names[0]}"')
    else:
        quoted = ", ".join(f'"{n}"' for n in names)
        tree = parse_tree(f'OR({quoted})@"root!"')
    return tree, ConstraintSet([], preds)


from oracles import bf_feasible


def _random_ineq_set(rng, labels, count):
    from atdecor.predicates import IneqKind, IneqPredicate

    out = []
    for _ in range(count):
        kind = rng.choice(list(IneqKind))
        left = str(rng.choice(labels))
        a = float(np.round(rng.uniform(0, 1), 3))
        if kind is IneqKind.LE_LABEL_PLUS:
            right = str(rng.choice([l for l in labels if l != left])) if len(labels) > 1 else None
            if right is None:
                kind = IneqKind.LE_CONST
                out.append(IneqPredicate(kind, left, a))
                continue
            out.append(IneqPredicate(kind, left, float(np.round(rng.uniform(-0.5, 0.5), 3)), right))
        else:
            out.append(IneqPredicate(kind, left, a))
    return out


# ---------------------------------------------------------------------------
# greedy
# ---------------------------------------------------------------------------

def test_greedy_trace_by_hand():
    tree, cs = _leaf_cs('"x" <= 1', '"x" >= 2', '"x" >= 0')
    res = relax_inclusion_greedy(tree, COST, cs, None, CFG)
    assert res.kept == ['"x" <= 1', '"x" >= 0']
    assert res.dropped == ['"x" >= 2']
    assert not res.exact
    assert holds(cs.soft[0], res.valuation)


def test_greedy_keeps_feasible_set_untouched(atm, prob_domain):
    cs = atm.constraint_set(knowledge=False)
    res = relax_inclusion_greedy(atm.tree, prob_domain, cs, None, CFG)
    assert res.kept == cs.soft_ids() and res.dropped == []


def test_greedy_atm_drops_cash_trapping_pin(atm, prob_domain):
    res = relax_inclusion_greedy(atm.tree, prob_domain, atm.constraint_set(), None, CFG)
    assert res.dropped == ['"cash trapping" = 0.015']
    kept_preds = [atm.constraint_set().by_id(pid) for pid in res.kept]
    assert all(holds(p, res.valuation) for p in kept_preds)


def test_greedy_result_is_inclusion_maximal(atm, prob_domain):
    """Post-hoc: no single dropped predicate can rejoin the kept set."""
    from atdecor.solver import solve

    cs = atm.constraint_set()
    res = relax_inclusion_greedy(atm.tree, prob_domain, cs, None, CFG)
    for pid in res.dropped:
        out = solve(atm.tree, prob_domain, cs.restrict_soft(res.kept + [pid]), CFG)
        assert not out.feasible, pid


def test_greedy_order_distribution_bounded_by_exact(atm, prob_domain):
    rng = np.random.default_rng(4)
    cs = atm.constraint_set()
    exact = relax_inclusion_exact(atm.tree, prob_domain, cs, CFG)
    ids = cs.soft_ids()
    sizes = set()
    for _ in range(5):
        order = list(ids)
        rng.shuffle(order)
        got = relax_inclusion_greedy(atm.tree, prob_domain, cs, order, CFG)
        sizes.add(len(got.kept))
        assert len(got.kept) <= len(exact.kept)
    assert max(sizes) <= len(exact.kept)


def test_greedy_order_matters(atm, prob_domain):
    # historical pins first: the conflict then surfaces at the equality
    cs = atm.constraint_set()
    order = [p.id for p in atm.historical] + [p.id for p in atm.knowledge]
    res = relax_inclusion_greedy(atm.tree, prob_domain, cs, order, CFG)
    assert res.dropped == ['"cash trapping" = "card trapping"']


def test_greedy_rejects_bad_order(atm, prob_domain):
    with pytest.raises(SolverError):
        relax_inclusion_greedy(atm.tree, prob_domain, atm.constraint_set(), ["nope"], CFG)


def test_greedy_requires_feasible_hard():
    from atdecor.tree import parse_tree

    cs = ConstraintSet(
        [parse_predicate('"x" <= 1'), parse_predicate('"x" >= 2')],
        [parse_predicate('"x" >= 0')],
    )
    with pytest.raises(SolverError):
        relax_inclusion_greedy(parse_tree('"x"'), COST, cs, None, CFG)


# ---------------------------------------------------------------------------
# exact
# ---------------------------------------------------------------------------

def test_exact_prefers_consistent_pair():
    tree, cs = _leaf_cs('"x" <= 1', '"x" >= 2', '"x" >= 3')
    res = relax_inclusion_exact(tree, COST, cs, CFG)
    assert sorted(res.kept) == ['"x" >= 2', '"x" >= 3']
    assert res.exact


def test_exact_feasible_set_trivial():
    tree, cs = _leaf_cs('"x" <= 5', '"x" >= 1')
    res = relax_inclusion_exact(tree, COST, cs, CFG)
    assert sorted(res.kept) == sorted(cs.soft_ids())
    assert res.exact


def test_exact_atm_confirms_greedy_is_maximum(atm, prob_domain):
    res = relax_inclusion_exact(atm.tree, prob_domain, atm.constraint_set(), CFG)
    assert len(res.kept) == len(atm.constraint_set().soft) - 1
    assert res.exact


def test_exact_at_least_greedy_random():
    rng = np.random.default_rng(33)
    labels = ["a", "b", "c"]
    for _ in range(15):
        ineqs = _random_ineq_set(rng, labels, int(rng.integers(2, 6)))
        texts = [str(iq) for iq in ineqs]
        # dedupe: identical text would collide on ids
        texts = list(dict.fromkeys(texts))
        tree, cs = _leaf_cs(*texts)
        greedy = relax_inclusion_greedy(tree, COST, cs, None, CFG)
        exact = relax_inclusion_exact(tree, COST, cs, CFG)
        assert len(exact.kept) >= len(greedy.kept)

        # oracle: enumerate all subsets with the difference-constraint check
        parsed = {p.id: classify_ineq(p) for p in cs.soft}
        best = 0
        for r in range(len(cs.soft), 0, -1):
            if any(
                bf_feasible([parsed[p] for p in sub])
                for sub in itertools.combinations(cs.soft_ids(), r)
            ):
                best = r
                break
        assert len(exact.kept) == best
