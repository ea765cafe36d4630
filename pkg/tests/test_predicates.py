import itertools
import math

import numpy as np
import pytest

from atdecor.predicates import (
    Cmp,
    ConstraintSet,
    IneqKind,
    IneqPredicate,
    Label,
    NotInClass,
    PredicateSyntaxError,
    classify_ineq,
    falsify_implication,
    format_expr,
    holds,
    implies_ineq,
    parse_predicate,
    parse_predicate_file,
    pred_distance,
    set_distance,
)


def ineq(kind, left, a, right=None):
    return IneqPredicate(kind, left, a, right)


# ---------------------------------------------------------------------------
# parsing / printing / truth
# ---------------------------------------------------------------------------

def test_parse_le_const():
    got = classify_ineq(parse_predicate('"hack account" <= 0.01'))
    assert (got.kind, got.left_label, got.constant) == (IneqKind.LE_CONST, "hack account", 0.01)
    assert got.right_label is None


def test_parse_min_equality_roundtrip():
    text = '"steal money" = min("get money at ATM", "hack account")'
    p = parse_predicate(text)
    assert format_expr(p.expr) == text
    assert parse_predicate(format_expr(p.expr)).expr == p.expr


def test_parse_label_plus_const():
    p = parse_predicate('"take card" <= "card skimming" + 0')
    got = classify_ineq(p)
    assert got.kind is IneqKind.LE_LABEL_PLUS
    assert (got.left_label, got.right_label, got.constant) == ("take card", "card skimming", 0.0)


def test_parse_unicode_comparators():
    assert classify_ineq(parse_predicate('"x" ≤ 1')).kind is IneqKind.LE_CONST
    assert classify_ineq(parse_predicate('"x" ≥ 1')).kind is IneqKind.GE_CONST


@pytest.mark.parametrize("bad", [
    '"x" <',
    '"x" < 1',          # strict comparisons unsupported
    'min("x", "y")',    # no comparison
    '"x" = frob("y")',  # unknown function
    '"x" = = 1',
])
def test_parse_errors(bad):
    with pytest.raises(PredicateSyntaxError):
        parse_predicate(bad)


def test_holds_min_equality():
    p1 = parse_predicate('"steal money" = min("get money at ATM", "hack account")')
    v = {"steal money": 3, "get money at ATM": 3, "hack account": 5}
    assert holds(p1, v)
    assert not holds(parse_predicate('"steal money" = 5'), v)


def test_holds_inequality_violated():
    assert not holds(parse_predicate('"hack account" <= 0.01'), {"hack account": 0.02})


def test_holds_tolerances():
    v = {"x": 1.0 + 4e-10}
    assert holds(parse_predicate('"x" = 1'), v)
    assert holds(parse_predicate('"x" <= 1'), v)  # one-sided 1e-9 slack
    assert not holds(parse_predicate('"x" <= 1'), {"x": 1.0 + 1e-6})


def test_holds_boolean_connectives():
    p = parse_predicate('("x" <= 1 and "y" >= 2) or "z" = 0')
    assert holds(p, {"x": 5, "y": 0, "z": 0})
    assert holds(p, {"x": 0, "y": 3, "z": 9})
    assert not holds(p, {"x": 5, "y": 0, "z": 1})
    assert holds(parse_predicate('not "x" <= 1'), {"x": 2})


def test_unbound_label_raises():
    with pytest.raises(KeyError):
        holds(parse_predicate('"x" <= 1'), {})


def test_predicate_file_parsing():
    cs = parse_predicate_file(
        '# comment\nhard: "a" = min("b", "c")\nsoft: "b" <= 1\n\nsoft: "c" >= 2\n'
    )
    assert [p.id for p in cs.hard] == ['"a" = min("b", "c")']
    assert len(cs.soft) == 2


def test_predicate_file_bad_prefix():
    with pytest.raises(PredicateSyntaxError) as err:
        parse_predicate_file('maybe: "a" <= 1')
    assert err.value.line == 1


def test_constraint_set_rejects_duplicate_ids():
    p = parse_predicate('"x" <= 1')
    with pytest.raises(ValueError):
        ConstraintSet([p], [parse_predicate('"x" <= 1')])


def test_predicate_json_roundtrip():
    from atdecor.predicates import predicate_from_json, predicate_to_json

    texts = [
        '"hack account" <= 0.01',
        '"steal money" = min("get money at ATM", "hack account")',
        '"take card" <= "card skimming" + 0',
        '("x" <= 1 and "y" >= 2) or not "z" = 0',
        '"r" = or_indep("a", "b") * max("c", 0.5) - 0.1',
    ]
    for text in texts:
        p = parse_predicate(text)
        back = predicate_from_json(predicate_to_json(p))
        assert back.expr == p.expr
        assert back.id == p.id


# ---------------------------------------------------------------------------
# the inequality fragment
# ---------------------------------------------------------------------------

def test_classify_ge_const():
    got = classify_ineq(parse_predicate('"x" >= 0.2'))
    assert (got.kind, got.left_label, got.constant) == (IneqKind.GE_CONST, "x", 0.2)


def test_classify_negative_offset():
    got = classify_ineq(parse_predicate('"x" <= "y" + -0.1'))
    assert got.kind is IneqKind.LE_LABEL_PLUS and got.constant == -0.1


def test_classify_rewrites_ge_between_labels():
    # x >= y + a is the same halfspace as y <= x - a
    got = classify_ineq(parse_predicate('"x" >= "y" + 0.5'))
    assert (got.left_label, got.right_label, got.constant) == ("y", "x", -0.5)


def test_classify_equality_not_in_class():
    assert isinstance(classify_ineq(parse_predicate('"x" = 0.5')), NotInClass)


def test_implies_le_direction():
    assert implies_ineq(ineq(IneqKind.LE_CONST, "x", 3), ineq(IneqKind.LE_CONST, "x", 5))
    assert not implies_ineq(ineq(IneqKind.LE_CONST, "x", 5), ineq(IneqKind.LE_CONST, "x", 3))


def test_implies_ge_direction():
    assert not implies_ineq(ineq(IneqKind.GE_CONST, "x", 3), ineq(IneqKind.GE_CONST, "x", 5))
    assert implies_ineq(ineq(IneqKind.GE_CONST, "x", 5), ineq(IneqKind.GE_CONST, "x", 3))


def test_implies_requires_same_labels():
    assert not implies_ineq(ineq(IneqKind.LE_CONST, "x", 3), ineq(IneqKind.LE_CONST, "y", 5))


def test_implies_reflexive_transitive():
    rng = np.random.default_rng(3)
    for kind in IneqKind:
        right = "y" if kind is IneqKind.LE_LABEL_PLUS else None
        consts = rng.normal(size=6)
        ps = [ineq(kind, "x", float(a), right) for a in consts]
        for p in ps:
            assert implies_ineq(p, p)
        for a, b, c in itertools.permutations(ps, 3):
            if implies_ineq(a, b) and implies_ineq(b, c):
                assert implies_ineq(a, c)


def test_implication_soundness_on_samples():
    rng = np.random.default_rng(10)
    kinds = [
        (IneqKind.LE_CONST, None),
        (IneqKind.GE_CONST, None),
        (IneqKind.LE_LABEL_PLUS, "y"),
    ]
    for kind, right in kinds:
        for _ in range(20):
            a, b = rng.normal(size=2)
            p, q = ineq(kind, "x", float(a), right), ineq(kind, "x", float(b), right)
            if not implies_ineq(p, q):
                continue
            for _ in range(50):
                v = {"x": float(rng.uniform(-4, 4)), "y": float(rng.uniform(-4, 4))}
                if holds(p.to_predicate(), v):
                    assert holds(q.to_predicate(), v)


def test_pred_distance_basics():
    assert pred_distance(ineq(IneqKind.LE_CONST, "x", 3), ineq(IneqKind.LE_CONST, "x", 5)) == 2
    assert pred_distance(ineq(IneqKind.LE_CONST, "x", 3), ineq(IneqKind.GE_CONST, "x", 3)) == math.inf
    assert pred_distance(ineq(IneqKind.LE_CONST, "x", 3), ineq(IneqKind.LE_CONST, "y", 3)) == math.inf


def test_pred_distance_label_offset_row():
    a = ineq(IneqKind.LE_LABEL_PLUS, "cash trapping", 0.0, "card trapping")
    b = ineq(IneqKind.LE_LABEL_PLUS, "cash trapping", 0.0018, "card trapping")
    assert pred_distance(a, b) == pytest.approx(0.0018)


def test_pred_distance_metric_properties():
    rng = np.random.default_rng(4)
    pool = [ineq(IneqKind.LE_CONST, "x", float(a)) for a in rng.normal(size=8)]
    for p, q, r in itertools.permutations(pool, 3):
        assert pred_distance(p, q) == pred_distance(q, p)
        assert (pred_distance(p, q) == 0) == (p.constant == q.constant)
        assert pred_distance(p, r) <= pred_distance(p, q) + pred_distance(q, r) + 1e-12


def test_set_distance_identity_and_cardinality():
    S = [ineq(IneqKind.LE_CONST, "x", 1.0), ineq(IneqKind.GE_CONST, "y", 2.0)]
    d, matching = set_distance(S, S)
    assert d == 0 and sorted(matching) == [(0, 0), (1, 1)]
    assert set_distance(S, S[:1])[0] == math.inf


def test_set_distance_requires_valid_bijection():
    # weakened {x<=1} against original {x<=2}: original does not imply it
    d, _ = set_distance([ineq(IneqKind.LE_CONST, "x", 1.0)], [ineq(IneqKind.LE_CONST, "x", 2.0)])
    assert d == math.inf


def test_set_distance_recorded_weakening_table():
    weakened = [
        ineq(IneqKind.LE_CONST, "card trapping", 0.0113),
        ineq(IneqKind.GE_CONST, "cash trapping", 0.0131),
        ineq(IneqKind.LE_LABEL_PLUS, "take card", 0.0172, "card skimming"),
        ineq(IneqKind.LE_LABEL_PLUS, "cash trapping", 0.0018, "card trapping"),
    ]
    originals = [
        ineq(IneqKind.LE_CONST, "card trapping", 0.0094),
        ineq(IneqKind.GE_CONST, "cash trapping", 0.015),
        ineq(IneqKind.LE_LABEL_PLUS, "take card", 0.0, "card skimming"),
        ineq(IneqKind.LE_LABEL_PLUS, "cash trapping", 0.0, "card trapping"),
    ]
    d, matching = set_distance(weakened, originals)
    assert d == pytest.approx(math.sqrt(0.0019**2 + 0.0019**2 + 0.0172**2 + 0.0018**2), abs=1e-9)
    assert d == pytest.approx(0.0175014, abs=1e-6)
    assert sorted(matching) == [(0, 0), (1, 1), (2, 2), (3, 3)]


def test_set_distance_matches_bruteforce():
    rng = np.random.default_rng(11)
    for _ in range(40):
        n = int(rng.integers(1, 6))
        # one shared group so permutations matter
        S = [ineq(IneqKind.LE_CONST, "x", float(a)) for a in rng.uniform(0, 1, n)]
        Sp = [ineq(IneqKind.LE_CONST, "x", float(a)) for a in rng.uniform(0, 1, n)]
        got, _ = set_distance(S, Sp)
        best = math.inf
        for perm in itertools.permutations(range(n)):
            if all(implies_ineq(Sp[perm[i]], S[i]) for i in range(n)):
                cost = math.sqrt(sum((S[i].constant - Sp[perm[i]].constant) ** 2 for i in range(n)))
                best = min(best, cost)
        assert got == pytest.approx(best) or (math.isinf(got) and math.isinf(best))


def test_falsifier_finds_counterexample():
    p = parse_predicate('"x" <= 3')
    q = parse_predicate('"x" <= 1')
    rng = np.random.default_rng(0)
    v = falsify_implication(p, q, {"x"}, (0.0, 10.0), rng)
    assert v is not None and holds(p, v) and not holds(q, v)
    # entailed direction: no counterexample found
    assert falsify_implication(q, p, {"x"}, (0.0, 10.0), rng, samples=500) is None
