import math

import numpy as np
import pytest
from scipy import optimize

from atdecor.domains import builtin_domain
from atdecor.predicates import (
    ConstraintSet,
    IneqKind,
    IneqPredicate,
    holds,
    parse_predicate,
    set_distance,
)
from atdecor.relax_maxweak import (
    ineq_normalize,
    relax_maxweak,
    verify_weakening,
    weakened_constant,
)
from atdecor.solver import SolverConfig, SolverError
from atdecor.tree import parse_tree

CFG = SolverConfig(seed=0, restarts=16)
PROB = builtin_domain("prob-independent")
COST = builtin_domain("cost")


def _leaf_tree(labels):
    if len(labels) == 1:
        return parse_tree(f'"{labels[0]}"')
    quoted = ", ".join(f'"{l}"' for l in labels)
    return parse_tree(f'OR({quoted})@"root!"')


# ---------------------------------------------------------------------------
# normalization
# ---------------------------------------------------------------------------

def test_normalize_label_equality_splits():
    got, rejected = ineq_normalize([parse_predicate('"cash trapping" = "card trapping"')])
    assert not rejected
    assert [(iq.kind, iq.left_label, iq.right_label, iq.constant) for iq in got] == [
        (IneqKind.LE_LABEL_PLUS, "cash trapping", "card trapping", 0.0),
        (IneqKind.LE_LABEL_PLUS, "card trapping", "cash trapping", 0.0),
    ]


def test_normalize_const_equality_splits():
    got, rejected = ineq_normalize([parse_predicate('"card trapping" = 0.0094')])
    assert not rejected
    assert [(iq.kind, iq.constant) for iq in got] == [
        (IneqKind.LE_CONST, 0.0094),
        (IneqKind.GE_CONST, 0.0094),
    ]
    assert {iq.part for iq in got} == {"le", "ge"}


def test_normalize_passthrough_and_reject():
    keep = parse_predicate('"x" <= 0.3')
    bad = parse_predicate('"x" = min("y", "z")')
    got, rejected = ineq_normalize([keep, bad])
    assert len(got) == 1 and got[0].kind is IneqKind.LE_CONST
    assert len(rejected) == 1 and rejected[0][0].id == bad.id


def test_normalize_ge_between_labels():
    got, _ = ineq_normalize([parse_predicate('"x" >= "y" + 0.2')])
    assert [(iq.left_label, iq.right_label, iq.constant) for iq in got] == [("y", "x", -0.2)]


# ---------------------------------------------------------------------------
# optimization
# ---------------------------------------------------------------------------

def test_satisfiable_instance_distance_zero(atm):
    res = relax_maxweak(atm.tree, PROB, atm.constraint_set(knowledge=False), CFG)
    assert res.distance <= 1e-7
    assert res.converged
    assert max(row["shift"] for row in res.per_predicate) <= 1e-7


def test_two_pin_split():
    tree = _leaf_tree(["x"])
    cs = ConstraintSet([], [parse_predicate('"x" <= 1'), parse_predicate('"x" >= 2')])
    res = relax_maxweak(tree, COST, cs, CFG)
    assert res.valuation["x"] == pytest.approx(1.5, abs=1e-6)
    assert res.distance == pytest.approx(math.sqrt(0.5), abs=1e-6)
    by_kind = {iq.kind: iq.constant for iq in res.weakened}
    assert by_kind[IneqKind.LE_CONST] == pytest.approx(1.5, abs=1e-6)
    assert by_kind[IneqKind.GE_CONST] == pytest.approx(1.5, abs=1e-6)


def test_weakening_direction_invariant():
    rng = np.random.default_rng(17)
    for _ in range(10):
        labels = ["a", "b"]
        tree = _leaf_tree(labels)
        texts = []
        for _ in range(int(rng.integers(2, 6))):
            l = str(rng.choice(labels))
            k = round(float(rng.uniform(0, 1)), 3)
            texts.append(f'"{l}" <= {k}' if rng.random() < 0.5 else f'"{l}" >= {k}')
        texts = list(dict.fromkeys(texts))
        cs = ConstraintSet([], [parse_predicate(t) for t in texts])
        res = relax_maxweak(tree, PROB, cs, CFG)
        for iq, w in zip(ineq_normalize(cs.soft)[0], res.weakened):
            if iq.kind is IneqKind.GE_CONST:
                assert w.constant <= iq.constant + 1e-12
            else:
                assert w.constant >= iq.constant - 1e-12


def test_atm_maxweak(atm):
    res = relax_maxweak(atm.tree, PROB, atm.constraint_set(), SolverConfig(seed=0, restarts=32))
    assert res.converged
    # well under the recorded upper bound
    assert res.distance <= 1.1 * 0.01750
    # the contradiction spreads evenly across the three involved halfspaces
    assert res.distance == pytest.approx(0.0056 / math.sqrt(3), abs=2e-4)
    shifted = {row["text"]: row["shift"] for row in res.per_predicate if row["shift"] > 1e-4}
    assert set(shifted) == {
        '"card trapping" <= 0.0094',
        '"cash trapping" >= 0.015',
        '"cash trapping" <= "card trapping" + 0',
    }
    report = verify_weakening(res, ineq_normalize(atm.constraint_set().soft)[0], atm.hard)
    assert report["ok"]


def test_atm_maxweak_matches_free_bijection_distance(atm):
    """Origin-respecting scoring equals the unrestricted set distance here."""
    res = relax_maxweak(atm.tree, PROB, atm.constraint_set(), CFG)
    originals, _ = ineq_normalize(atm.constraint_set().soft)
    d, _ = set_distance(res.weakened, originals)
    assert d == pytest.approx(res.distance, rel=1e-6)


def test_rejects_soft_outside_fragment():
    tree = parse_tree('OR("a", "b")@"r"')
    cs = ConstraintSet([], [parse_predicate('"r" = min("a", "b")')])
    with pytest.raises(SolverError):
        relax_maxweak(tree, COST, cs, CFG)


def test_requires_feasible_hard():
    tree = _leaf_tree(["x"])
    cs = ConstraintSet(
        [parse_predicate('"x" <= 1'), parse_predicate('"x" >= 2')],
        [parse_predicate('"x" >= 0')],
    )
    with pytest.raises(SolverError):
        relax_maxweak(tree, COST, cs, CFG)


def test_verify_weakening_flags_wrong_direction():
    origin = IneqPredicate(IneqKind.GE_CONST, "x", 0.2)
    fake = origin.with_constant(0.3)  # strengthened, not weakened
    from atdecor.relax_maxweak import MaxWeakResult

    res = MaxWeakResult([fake], {"x": 0.3}, 0.1, [], True, 0.0, 0.0)
    report = verify_weakening(res, [origin])
    assert not report["ok"] and report["implication_failures"]


def test_monotonicity_of_distance():
    tree = _leaf_tree(["x"])
    base = [parse_predicate('"x" <= 1'), parse_predicate('"x" >= 2')]
    extra = parse_predicate('"x" >= 3')
    d1 = relax_maxweak(tree, COST, ConstraintSet([], base), CFG).distance
    d2 = relax_maxweak(tree, COST, ConstraintSet([], base + [extra]), CFG).distance
    assert d2 >= d1 - 1e-9


# ---------------------------------------------------------------------------
# self-consistency: closed-form inner step vs joint optimization
# ---------------------------------------------------------------------------

def _joint_optimum(ineqs, n_vars, var_index, bounds):
    """Optimize over (valuation, weakened constants) jointly with SLSQP."""
    k = len(ineqs)

    def pack_obj(z):
        shifts = z[n_vars:] - np.array([iq.constant for iq in ineqs])
        return float(shifts @ shifts)

    cons = []
    for j, iq in enumerate(ineqs):
        i = var_index[iq.left_label]
        if iq.kind is IneqKind.LE_CONST:
            cons.append({"type": "ineq", "fun": lambda z, i=i, j=j: z[n_vars + j] - z[i]})
        elif iq.kind is IneqKind.GE_CONST:
            cons.append({"type": "ineq", "fun": lambda z, i=i, j=j: z[i] - z[n_vars + j]})
        else:
            r = var_index[iq.right_label]
            cons.append(
                {"type": "ineq", "fun": lambda z, i=i, r=r, j=j: z[r] + z[n_vars + j] - z[i]}
            )
    lo, hi = bounds
    z0 = np.concatenate([np.full(n_vars, (lo + hi) / 2), [iq.constant for iq in ineqs]])
    bnds = [(lo, hi)] * n_vars + [(None, None)] * k
    res = optimize.minimize(
        pack_obj, z0, method="SLSQP", bounds=bnds, constraints=cons,
        options={"maxiter": 400, "ftol": 1e-14},
    )
    return float(res.fun)


def test_alpha_only_matches_joint_optimizer():
    cases = [
        ['"x" <= 1', '"x" >= 2'],
        ['"x" <= 0.2', '"x" >= 0.8', '"y" >= 0.5', '"x" <= "y" + -0.4'],
        ['"x" >= 0.9', '"y" <= 0.1', '"x" <= "y" + 0.2'],
    ]
    for texts in cases:
        preds = [parse_predicate(t) for t in texts]
        labels = sorted({l for p in preds for l in p.labels()})
        tree = _leaf_tree(labels)
        cs = ConstraintSet([], preds)
        res = relax_maxweak(tree, PROB, cs, SolverConfig(seed=1, restarts=32))
        ineqs, _ = ineq_normalize(preds)
        var_index = {l: i for i, l in enumerate(labels)}
        joint = _joint_optimum(ineqs, len(labels), var_index, (0.0, 1.0))
        assert res.distance**2 == pytest.approx(joint, abs=1e-9)


def test_weakened_constant_is_clamp():
    iq_le = IneqPredicate(IneqKind.LE_CONST, "x", 0.4)
    assert weakened_constant(iq_le, {"x": 0.3}) == 0.4
    assert weakened_constant(iq_le, {"x": 0.7}) == 0.7
    iq_ge = IneqPredicate(IneqKind.GE_CONST, "x", 0.4)
    assert weakened_constant(iq_ge, {"x": 0.7}) == 0.4
    assert weakened_constant(iq_ge, {"x": 0.3}) == 0.3


def test_weakened_set_holds_at_valuation():
    tree = _leaf_tree(["x", "y"])
    cs = ConstraintSet(
        [],
        [parse_predicate('"x" >= 0.8'), parse_predicate('"y" <= 0.2'),
         parse_predicate('"x" <= "y" + 0.1')],
    )
    res = relax_maxweak(tree, PROB, cs, CFG)
    for w in res.weakened:
        assert holds(w.to_predicate(), res.valuation), str(w)
