"""Predicate language over tree labels: AST, parser, evaluation, inequalities.

Grammar (one predicate):

    pred   := disj
    disj   := conj ("or" conj)*
    conj   := unit ("and" unit)*
    unit   := "not" unit | "(" pred ")" | comparison
    cmp    := sum ("=" | "==" | "<=" | ">=") sum
    sum    := term (("+" | "-") term)*
    term   := factor ("*" factor)*
    factor := NUMBER | STRING | FUNC "(" sum ("," sum)* ")" | "(" sum ")" | "-" factor
    FUNC   := "min" | "max" | "or_indep"

Labels are double-quoted strings, "#" starts a line comment.  Predicate files
hold one predicate per line prefixed "hard:" or "soft:".

Comparison tolerances (used by holds): equality passes when
|lhs - rhs| <= 1e-9 * max(1, |lhs|, |rhs|); "<="/">=" get a one-sided
absolute slack of 1e-9 so optimizer outputs sitting on a boundary validate.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace
from enum import Enum

EQ_RTOL = 1e-9
INEQ_SLACK = 1e-9

INFINITY = math.inf


class PredicateSyntaxError(ValueError):
    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        where = f" (line {line}, column {column})" if line is not None else ""
        super().__init__(message + where)


class UnboundLabelError(KeyError):
    pass


# ---------------------------------------------------------------------------
# AST
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class Label:
    name: str


@dataclass(frozen=True)
class NaryOp:
    """Associative numeric operator: 'add', 'mul', 'min', 'max', 'or_indep'."""

    op: str
    args: tuple


@dataclass(frozen=True)
class Sub:
    left: object
    right: object


@dataclass(frozen=True)
class Neg:
    arg: object


@dataclass(frozen=True)
class Cmp:
    """Comparison; op is 'eq', 'le' or 'ge'."""

    op: str
    left: object
    right: object


@dataclass(frozen=True)
class BoolOp:
    """'and' / 'or' over boolean sub-expressions."""

    op: str
    args: tuple


@dataclass(frozen=True)
class Not:
    arg: object


class Provenance(Enum):
    HARD_STRUCTURAL = "hard-structural"
    SOFT_HISTORICAL = "soft-historical"
    SOFT_DOMAIN_KNOWLEDGE = "soft-domain-knowledge"


@dataclass(frozen=True)
class Predicate:
    expr: object  # Cmp | BoolOp | Not
    provenance: Provenance = Provenance.SOFT_DOMAIN_KNOWLEDGE
    id: str = ""

    def __post_init__(self):
        if not self.id:
            object.__setattr__(self, "id", format_expr(self.expr))

    @property
    def is_hard(self) -> bool:
        return self.provenance is Provenance.HARD_STRUCTURAL

    def labels(self) -> set[str]:
        return expr_labels(self.expr)

    def __str__(self) -> str:
        return format_expr(self.expr)


def expr_labels(expr) -> set[str]:
    if isinstance(expr, Label):
        return {expr.name}
    if isinstance(expr, Const):
        return set()
    if isinstance(expr, NaryOp):
        out = set()
        for a in expr.args:
            out |= expr_labels(a)
        return out
    if isinstance(expr, Sub):
        return expr_labels(expr.left) | expr_labels(expr.right)
    if isinstance(expr, (Neg, Not)):
        return expr_labels(expr.arg)
    if isinstance(expr, Cmp):
        return expr_labels(expr.left) | expr_labels(expr.right)
    if isinstance(expr, BoolOp):
        out = set()
        for a in expr.args:
            out |= expr_labels(a)
        return out
    raise TypeError(f"not an expression: {expr!r}")


# ---------------------------------------------------------------------------
# Numeric evaluation / truth
# ---------------------------------------------------------------------------

def or_indep(values) -> float:
    """Probability that at least one of independent events occurs."""
    acc = 1.0
    for v in values:
        acc *= 1.0 - v
    return 1.0 - acc


def _fold_add(vs):
    acc = 0.0
    for v in vs:
        acc += v
    return acc


def _fold_mul(vs):
    acc = 1.0
    for v in vs:
        acc *= v
    return acc


_FOLDS = {
    "add": _fold_add,
    "mul": _fold_mul,
    "min": min,
    "max": max,
    "or_indep": or_indep,
}


def eval_expr(expr, valuation) -> float:
    """Evaluate a numeric expression under a label->value mapping."""
    if isinstance(expr, Const):
        return expr.value
    if isinstance(expr, Label):
        try:
            return valuation[expr.name]
        except KeyError:
            raise UnboundLabelError(expr.name) from None
    if isinstance(expr, NaryOp):
        return _FOLDS[expr.op]([eval_expr(a, valuation) for a in expr.args])
    if isinstance(expr, Sub):
        return eval_expr(expr.left, valuation) - eval_expr(expr.right, valuation)
    if isinstance(expr, Neg):
        return -eval_expr(expr.arg, valuation)
    raise TypeError(f"not a numeric expression: {expr!r}")


def _cmp_holds(op, lhs, rhs) -> bool:
    if op == "eq":
        return abs(lhs - rhs) <= EQ_RTOL * max(1.0, abs(lhs), abs(rhs))
    if op == "le":
        return lhs <= rhs + INEQ_SLACK
    if op == "ge":
        return lhs >= rhs - INEQ_SLACK
    raise ValueError(op)


def holds(pred, valuation) -> bool:
    """Truth of a predicate (or bare boolean expression) under a valuation."""
    expr = pred.expr if isinstance(pred, Predicate) else pred
    return _holds_expr(expr, valuation)


def _holds_expr(expr, valuation) -> bool:
    if isinstance(expr, Cmp):
        return _cmp_holds(
            expr.op, eval_expr(expr.left, valuation), eval_expr(expr.right, valuation)
        )
    if isinstance(expr, BoolOp):
        results = (_holds_expr(a, valuation) for a in expr.args)
        return all(results) if expr.op == "and" else any(results)
    if isinstance(expr, Not):
        return not _holds_expr(expr.arg, valuation)
    raise TypeError(f"not a boolean expression: {expr!r}")


# ---------------------------------------------------------------------------
# Pretty-printing (canonical text; also the default predicate id)
# ---------------------------------------------------------------------------

_CMP_TEXT = {"eq": "=", "le": "<=", "ge": ">="}


def format_number(v: float) -> str:
    if v == int(v) and abs(v) < 1e15:
        return str(int(v))
    return repr(v)


def format_expr(expr, _parent_prec=0) -> str:
    if isinstance(expr, Const):
        return format_number(expr.value)
    if isinstance(expr, Label):
        return '"' + expr.name.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(expr, NaryOp):
        if expr.op in ("min", "max", "or_indep"):
            inner = ", ".join(format_expr(a) for a in expr.args)
            return f"{expr.op}({inner})"
        sep = " + " if expr.op == "add" else " * "
        prec = 1 if expr.op == "add" else 2
        text = sep.join(format_expr(a, prec) for a in expr.args)
        return f"({text})" if _parent_prec > prec else text
    if isinstance(expr, Sub):
        text = f"{format_expr(expr.left, 1)} - {format_expr(expr.right, 2)}"
        return f"({text})" if _parent_prec > 1 else text
    if isinstance(expr, Neg):
        return f"-{format_expr(expr.arg, 3)}"
    if isinstance(expr, Cmp):
        return f"{format_expr(expr.left, 1)} {_CMP_TEXT[expr.op]} {format_expr(expr.right, 1)}"
    if isinstance(expr, BoolOp):
        sep = f" {expr.op} "
        return "(" + sep.join(format_expr(a) for a in expr.args) + ")"
    if isinstance(expr, Not):
        return f"not {format_expr(expr.arg)}"
    raise TypeError(f"not an expression: {expr!r}")


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

_FUNCS = ("min", "max", "or_indep")


class _Lexer:
    PUNCT = {"(", ")", ",", "+", "-", "*"}

    def __init__(self, text, line_offset=0):
        self.text = text
        self.pos = 0
        self.line = 1 + line_offset
        self.col = 1

    def error(self, message):
        raise PredicateSyntaxError(message, self.line, self.col)

    def _advance(self, n=1):
        for _ in range(n):
            if self.pos < len(self.text) and self.text[self.pos] == "\n":
                self.line += 1
                self.col = 1
            else:
                self.col += 1
            self.pos += 1

    def tokens(self):
        text = self.text
        while True:
            while self.pos < len(text) and (
                text[self.pos].isspace() or text[self.pos] == "#"
            ):
                if text[self.pos] == "#":
                    while self.pos < len(text) and text[self.pos] != "\n":
                        self._advance()
                else:
                    self._advance()
            if self.pos >= len(text):
                yield ("eof", "", self.line, self.col)
                return
            ch = text[self.pos]
            line, col = self.line, self.col
            if ch == '"':
                yield ("label", self._string(), line, col)
            elif ch.isdigit() or (ch == "." and self._peek_digit()):
                yield ("num", self._number(), line, col)
            elif ch in ("=", "<", ">", "≤", "≥"):
                yield ("cmp", self._cmp_op(), line, col)
            elif ch in self.PUNCT:
                self._advance()
                yield ("punct", ch, line, col)
            elif ch.isalpha() or ch == "_":
                start = self.pos
                while self.pos < len(text) and (
                    text[self.pos].isalnum() or text[self.pos] == "_"
                ):
                    self._advance()
                yield ("word", text[start : self.pos], line, col)
            else:
                self.error(f"unexpected character {ch!r}")

    def _peek_digit(self):
        return self.pos + 1 < len(self.text) and self.text[self.pos + 1].isdigit()

    def _string(self):
        self._advance()
        out = []
        while True:
            if self.pos >= len(self.text):
                self.error("unterminated label string")
            ch = self.text[self.pos]
            if ch == '"':
                self._advance()
                return "".join(out)
            if ch == "\\":
                self._advance()
                if self.pos >= len(self.text) or self.text[self.pos] not in ('"', "\\"):
                    self.error("bad escape in label")
                out.append(self.text[self.pos])
                self._advance()
            else:
                out.append(ch)
                self._advance()

    def _number(self):
        start = self.pos
        while self.pos < len(self.text) and (
            self.text[self.pos].isdigit() or self.text[self.pos] in ".eE"
        ):
            if self.text[self.pos] in "eE" and self.pos + 1 < len(self.text) and self.text[
                self.pos + 1
            ] in "+-":
                self._advance()
            self._advance()
        try:
            return float(self.text[start : self.pos])
        except ValueError:
            self.error(f"bad number {self.text[start:self.pos]!r}")

    def _cmp_op(self):
        ch = self.text[self.pos]
        if ch == "≤":
            self._advance()
            return "le"
        if ch == "≥":
            self._advance()
            return "ge"
        if ch == "=":
            self._advance()
            if self.pos < len(self.text) and self.text[self.pos] == "=":
                self._advance()
            return "eq"
        nxt = self.text[self.pos + 1] if self.pos + 1 < len(self.text) else ""
        if nxt != "=":
            self.error(f"strict comparison {ch!r} not supported, use {ch}=")
        self._advance(2)
        return "le" if ch == "<" else "ge"


class _PredParser:
    def __init__(self, text, line_offset=0):
        self._toks = list(_Lexer(text, line_offset).tokens())
        self._idx = 0

    @property
    def tok(self):
        return self._toks[self._idx]

    def _next(self):
        if self._idx < len(self._toks) - 1:
            self._idx += 1

    def error(self, message):
        raise PredicateSyntaxError(message, self.tok[2], self.tok[3])

    def _eat_punct(self, ch):
        if self.tok[0] == "punct" and self.tok[1] == ch:
            self._next()
            return True
        return False

    def parse(self):
        expr = self.disjunction()
        if self.tok[0] != "eof":
            self.error(f"trailing input {self.tok[1]!r}")
        return expr

    def disjunction(self):
        parts = [self.conjunction()]
        while self.tok[0] == "word" and self.tok[1] == "or":
            self._next()
            parts.append(self.conjunction())
        return parts[0] if len(parts) == 1 else BoolOp("or", tuple(parts))

    def conjunction(self):
        parts = [self.unit()]
        while self.tok[0] == "word" and self.tok[1] == "and":
            self._next()
            parts.append(self.unit())
        return parts[0] if len(parts) == 1 else BoolOp("and", tuple(parts))

    def unit(self):
        if self.tok[0] == "word" and self.tok[1] == "not":
            self._next()
            return Not(self.unit())
        # Parenthesised boolean vs numeric group is ambiguous up front; parse a
        # sum and require a comparison unless it already reduced to a boolean.
        expr = self.sum()
        if isinstance(expr, (Cmp, BoolOp, Not)):
            return expr
        if self.tok[0] != "cmp":
            self.error("expected a comparison operator")
        op = self.tok[1]
        self._next()
        rhs = self.sum()
        return Cmp(op, expr, rhs)

    def sum(self):
        parts = [self.term()]
        ops = []
        while self.tok[0] == "punct" and self.tok[1] in "+-":
            ops.append(self.tok[1])
            self._next()
            parts.append(self.term())
        expr = parts[0]
        for op, rhs in zip(ops, parts[1:]):
            if op == "+":
                if isinstance(expr, NaryOp) and expr.op == "add":
                    expr = NaryOp("add", expr.args + (rhs,))
                else:
                    expr = NaryOp("add", (expr, rhs))
            else:
                expr = Sub(expr, rhs)
        return expr

    def term(self):
        parts = [self.factor()]
        while self.tok[0] == "punct" and self.tok[1] == "*":
            self._next()
            parts.append(self.factor())
        if len(parts) == 1:
            return parts[0]
        return NaryOp("mul", tuple(parts))

    def factor(self):
        kind, value, line, col = self.tok
        if kind == "num":
            self._next()
            return Const(value)
        if kind == "label":
            self._next()
            return Label(value)
        if kind == "punct" and value == "-":
            self._next()
            arg = self.factor()
            if isinstance(arg, Const):
                return Const(-arg.value)
            return Neg(arg)
        if kind == "punct" and value == "(":
            boolean = self._paren_holds_comparison()
            self._next()
            inner = self.disjunction() if boolean else self.sum()
            if not self._eat_punct(")"):
                self.error("expected ')'")
            return inner
        if kind == "word":
            if value in _FUNCS:
                self._next()
                if not self._eat_punct("("):
                    self.error(f"expected '(' after {value}")
                args = [self.sum()]
                while self._eat_punct(","):
                    args.append(self.sum())
                if not self._eat_punct(")"):
                    self.error("expected ')'")
                return NaryOp(value, tuple(args))
            self.error(f"unknown function or keyword {value!r}")
        self.error("expected a number, label, or function")

    def _paren_holds_comparison(self):
        """Lookahead from a '(' to its mate; a comparison inside means the
        group is boolean, otherwise it is a parenthesised numeric term."""
        depth = 0
        for k in range(self._idx, len(self._toks)):
            kind, value = self._toks[k][0], self._toks[k][1]
            if kind == "punct" and value == "(":
                depth += 1
            elif kind == "punct" and value == ")":
                depth -= 1
                if depth == 0:
                    return False
            elif kind == "cmp":
                return True
            elif kind == "eof":
                return False
        return False


def parse_predicate(source: str, provenance=Provenance.SOFT_DOMAIN_KNOWLEDGE,
                    id: str | None = None) -> Predicate:
    """Parse one predicate; round-trips through format_expr."""
    expr = _PredParser(source).parse()
    if not isinstance(expr, (Cmp, BoolOp, Not)):
        raise PredicateSyntaxError("expression is not a predicate (no comparison)")
    return Predicate(expr, provenance, id or "")


# ---------------------------------------------------------------------------
# Constraint sets and the predicate file format
# ---------------------------------------------------------------------------

@dataclass
class ConstraintSet:
    hard: list = field(default_factory=list)
    soft: list = field(default_factory=list)

    def __post_init__(self):
        ids = [p.id for p in self.hard] + [p.id for p in self.soft]
        dup = {i for i in ids if ids.count(i) > 1}
        if dup:
            raise ValueError(f"duplicate predicate ids: {sorted(dup)}")

    def __iter__(self):
        yield from self.hard
        yield from self.soft

    def labels(self) -> set[str]:
        out = set()
        for p in self:
            out |= p.labels()
        return out

    def soft_ids(self) -> list[str]:
        return [p.id for p in self.soft]

    def by_id(self, pid: str):
        for p in self:
            if p.id == pid:
                return p
        raise KeyError(pid)

    def restrict_soft(self, keep_ids) -> "ConstraintSet":
        keep = set(keep_ids)
        return ConstraintSet(list(self.hard), [p for p in self.soft if p.id in keep])

    def with_extra_soft(self, extra) -> "ConstraintSet":
        return ConstraintSet(list(self.hard), list(self.soft) + list(extra))


def parse_predicate_file(text: str, soft_provenance=Provenance.SOFT_DOMAIN_KNOWLEDGE) -> ConstraintSet:
    """Parse 'hard:'/'soft:' prefixed lines into a ConstraintSet."""
    hard, soft = [], []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("hard:"):
            body, prov, sink = line[5:], Provenance.HARD_STRUCTURAL, hard
        elif line.startswith("soft:"):
            body, prov, sink = line[5:], soft_provenance, soft
        else:
            raise PredicateSyntaxError(
                "line must start with 'hard:' or 'soft:'", lineno, 1
            )
        expr = _PredParser(body, line_offset=lineno - 1).parse()
        if not isinstance(expr, (Cmp, BoolOp, Not)):
            raise PredicateSyntaxError("not a predicate", lineno, 1)
        sink.append(Predicate(expr, prov))
    return ConstraintSet(hard, soft)


def predicate_to_json(p: Predicate) -> dict:
    return {
        "id": p.id,
        "text": str(p),
        "provenance": p.provenance.value,
        "expr": expr_to_json(p.expr),
    }


def expr_to_json(expr) -> dict:
    """AST-mirroring JSON form (alternative to the line format)."""
    if isinstance(expr, Const):
        return {"const": expr.value}
    if isinstance(expr, Label):
        return {"label": expr.name}
    if isinstance(expr, NaryOp):
        return {"op": expr.op, "args": [expr_to_json(a) for a in expr.args]}
    if isinstance(expr, Sub):
        return {"op": "sub", "args": [expr_to_json(expr.left), expr_to_json(expr.right)]}
    if isinstance(expr, Neg):
        return {"op": "neg", "args": [expr_to_json(expr.arg)]}
    if isinstance(expr, Cmp):
        return {"cmp": expr.op, "left": expr_to_json(expr.left), "right": expr_to_json(expr.right)}
    if isinstance(expr, BoolOp):
        return {"bool": expr.op, "args": [expr_to_json(a) for a in expr.args]}
    if isinstance(expr, Not):
        return {"not": expr_to_json(expr.arg)}
    raise TypeError(f"not an expression: {expr!r}")


def expr_from_json(doc: dict):
    if "const" in doc:
        return Const(float(doc["const"]))
    if "label" in doc:
        return Label(doc["label"])
    if "cmp" in doc:
        return Cmp(doc["cmp"], expr_from_json(doc["left"]), expr_from_json(doc["right"]))
    if "bool" in doc:
        return BoolOp(doc["bool"], tuple(expr_from_json(a) for a in doc["args"]))
    if "not" in doc:
        return Not(expr_from_json(doc["not"]))
    if "op" in doc:
        op = doc["op"]
        args = [expr_from_json(a) for a in doc["args"]]
        if op == "sub":
            return Sub(args[0], args[1])
        if op == "neg":
            return Neg(args[0])
        if op in ("add", "mul", "min", "max", "or_indep"):
            return NaryOp(op, tuple(args))
    raise PredicateSyntaxError(f"bad expression JSON: {doc!r}")


def predicate_from_json(doc: dict) -> Predicate:
    prov = Provenance(doc.get("provenance", Provenance.SOFT_DOMAIN_KNOWLEDGE.value))
    return Predicate(expr_from_json(doc["expr"]), prov, doc.get("id", ""))


# ---------------------------------------------------------------------------
# The inequality fragment: three shapes closed under implication
# ---------------------------------------------------------------------------

class IneqKind(Enum):
    LE_CONST = "le-const"        # l <= a
    GE_CONST = "ge-const"        # l >= a
    LE_LABEL_PLUS = "le-label"   # l <= l' + a


@dataclass(frozen=True)
class IneqPredicate:
    kind: IneqKind
    left_label: str
    constant: float
    right_label: str | None = None
    source_id: str = ""
    part: str | None = None  # "le"/"ge"/"fwd"/"rev" when split from an equality

    def __post_init__(self):
        needs_right = self.kind is IneqKind.LE_LABEL_PLUS
        if needs_right != (self.right_label is not None):
            raise ValueError("right_label must be set exactly for l <= l' + a")

    def group_key(self):
        return (self.kind, self.left_label, self.right_label)

    def with_constant(self, a: float) -> "IneqPredicate":
        return replace(self, constant=a)

    def to_predicate(self, provenance=Provenance.SOFT_DOMAIN_KNOWLEDGE) -> Predicate:
        lhs = Label(self.left_label)
        if self.kind is IneqKind.LE_CONST:
            expr = Cmp("le", lhs, Const(self.constant))
        elif self.kind is IneqKind.GE_CONST:
            expr = Cmp("ge", lhs, Const(self.constant))
        else:
            expr = Cmp("le", lhs, NaryOp("add", (Label(self.right_label), Const(self.constant))))
        pid = self.source_id + (f"#{self.part}" if self.part else "")
        return Predicate(expr, provenance, pid or "")

    def __str__(self) -> str:
        return format_expr(self.to_predicate().expr)


@dataclass(frozen=True)
class NotInClass:
    reason: str


def _label_plus_const(expr):
    """Match l' + a (any argument order) or bare l'; returns (label, a) or None."""
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


def classify_ineq(pred):
    """Recognize the three inequality shapes, or return NotInClass.

    Mirrored spellings are normalized: a >= l becomes l <= a, and
    l >= l' + a is rewritten as l' <= l - a.
    """
    expr = pred.expr if isinstance(pred, Predicate) else pred
    sid = pred.id if isinstance(pred, Predicate) else ""
    if not isinstance(expr, Cmp):
        return NotInClass("not a comparison")
    if expr.op == "eq":
        return NotInClass("equality is not one of the three shapes")
    op, left, right = expr.op, expr.left, expr.right
    if op == "ge":  # flip to a 'le' with sides swapped
        op, left, right = "le", right, left
    # now: left <= right
    if isinstance(left, Label) and isinstance(right, Const):
        return IneqPredicate(IneqKind.LE_CONST, left.name, right.value, source_id=sid)
    if isinstance(left, Const) and isinstance(right, Label):
        return IneqPredicate(IneqKind.GE_CONST, right.name, left.value, source_id=sid)
    lp = _label_plus_const(right)
    if isinstance(left, Label) and lp is not None:
        return IneqPredicate(IneqKind.LE_LABEL_PLUS, left.name, lp[1], lp[0], source_id=sid)
    lp = _label_plus_const(left)
    if lp is not None and isinstance(right, Label):
        # l + a <= l'  ==  l <= l' - a
        return IneqPredicate(IneqKind.LE_LABEL_PLUS, lp[0], -lp[1], right.name, source_id=sid)
    return NotInClass("sides are not label/constant in a recognized shape")


def implies_ineq(p: IneqPredicate, q: IneqPredicate) -> bool:
    """Whether p entails q; only predicates of identical shape can be related."""
    if p.group_key() != q.group_key():
        return False
    if p.kind is IneqKind.GE_CONST:
        return p.constant >= q.constant
    return p.constant <= q.constant


def pred_distance(p: IneqPredicate, q: IneqPredicate) -> float:
    """|a - a'| for same shape and labels, infinity otherwise.

    Cross-label distance is infinite because no implication can relate
    predicates over different labels, so such matchings are never valid.
    """
    if p.group_key() != q.group_key():
        return INFINITY
    return abs(p.constant - q.constant)


def _group(preds):
    groups = {}
    for i, p in enumerate(preds):
        groups.setdefault(p.group_key(), []).append(i)
    return groups


def set_distance(S, Sprime):
    """Minimal root-sum-square constant gap over implication-respecting bijections.

    Returns (distance, matching) where matching maps index-in-S to
    index-in-Sprime; (inf, None) when no valid bijection exists.  The bijection
    f must satisfy f(p) => p for every p in S.
    """
    S = list(S)
    Sprime = list(Sprime)
    if len(S) != len(Sprime):
        return INFINITY, None
    ga, gb = _group(S), _group(Sprime)
    if set(ga) != set(gb) or any(len(ga[k]) != len(gb[k]) for k in ga):
        return INFINITY, None
    total = 0.0
    matching = {}
    for key, ia in ga.items():
        ib = gb[key]
        if len(ia) != len(ib):
            return INFINITY, None
        best = _match_group([S[i] for i in ia], [Sprime[j] for j in ib])
        if best is None:
            return INFINITY, None
        cost, perm = best
        total += cost
        for pos, i in enumerate(ia):
            matching[i] = ib[perm[pos]]
    return math.sqrt(total), [(i, matching[i]) for i in sorted(matching)]


def _match_group(ps, qs):
    """Best assignment within one (kind, labels) group; brute force for tiny
    groups, sorted matching otherwise (optimal for a single shared direction)."""
    n = len(ps)
    if n <= 6:
        best = None
        for perm in itertools.permutations(range(n)):
            if not all(implies_ineq(qs[perm[i]], ps[i]) for i in range(n)):
                continue
            cost = sum((ps[i].constant - qs[perm[i]].constant) ** 2 for i in range(n))
            if best is None or cost < best[0]:
                best = (cost, perm)
        return best
    order_p = sorted(range(n), key=lambda i: ps[i].constant)
    order_q = sorted(range(n), key=lambda j: qs[j].constant)
    perm = [0] * n
    cost = 0.0
    for a, b in zip(order_p, order_q):
        if not implies_ineq(qs[b], ps[a]):
            return None
        perm[a] = b
        cost += (ps[a].constant - qs[b].constant) ** 2
    return cost, tuple(perm)


# ---------------------------------------------------------------------------
# Sampling falsifier for entailment outside the decidable fragment
# ---------------------------------------------------------------------------

def falsify_implication(p, q, labels, bounds, rng, samples=2000):
    """Search for a valuation where p holds but q fails; None if none found.

    Only a falsifier: failure to find a counterexample is not a proof of
    entailment for general predicates.
    """
    lo, hi = bounds
    hi = min(hi, lo + 1e3)
    names = sorted(labels)
    for _ in range(samples):
        point = {name: float(rng.uniform(lo, hi)) for name in names}
        if holds(p, point) and not holds(q, point):
            return point
    return None
