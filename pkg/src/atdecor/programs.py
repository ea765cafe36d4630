"""Lowering of predicates to flat expression programs for the hot kernels.

Expressions are hash-consed into a single arena: a DAG in topological order
with explicit child indices, so shared subterms (a label's closed form used
by several predicates) are evaluated once.  Each predicate contributes

  * a nonnegative "violation" output node (zero iff the predicate holds,
    up to comparison tolerance), used by the penalty objective, and
  * zero or more comparison triples (op, lhs node, rhs node) that drive
    interval contraction and constrained probes.

Opcode numbering must match _native.pyx.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernel
from .predicates import (
    BoolOp,
    Cmp,
    Const,
    Label,
    NaryOp,
    Neg,
    Not,
    Predicate,
    Sub,
)

OP_CONST = 0
OP_VAR = 1
OP_ADD = 2
OP_SUB = 3
OP_NEG = 4
OP_MUL = 5
OP_MIN = 6
OP_MAX = 7
OP_ORI = 8
OP_HINGE = 9
OP_ABS = 10

_NARY_OPS = {"add": OP_ADD, "mul": OP_MUL, "min": OP_MIN, "max": OP_MAX, "or_indep": OP_ORI}


class LoweringError(ValueError):
    pass


class ArenaBuilder:
    def __init__(self):
        self._ops: list[int] = []
        self._args: list[tuple[int, ...]] = []
        self._aux_i: list[int] = []
        self._aux_f: list[float] = []
        self._memo: dict = {}

    def __len__(self):
        return len(self._ops)

    def _node(self, op, args=(), aux_i=-1, aux_f=0.0):
        key = (op, args, aux_i, aux_f)
        hit = self._memo.get(key)
        if hit is not None:
            return hit
        idx = len(self._ops)
        self._ops.append(op)
        self._args.append(args)
        self._aux_i.append(aux_i)
        self._aux_f.append(aux_f)
        self._memo[key] = idx
        return idx

    def const(self, value: float) -> int:
        return self._node(OP_CONST, aux_f=float(value))

    def var(self, index: int) -> int:
        return self._node(OP_VAR, aux_i=index)

    def nary(self, op: int, children) -> int:
        children = tuple(children)
        if len(children) == 1:
            return children[0]  # all combinators are identity on one argument
        return self._node(op, children)

    def sub(self, a: int, b: int) -> int:
        return self._node(OP_SUB, (a, b))

    def neg(self, a: int) -> int:
        return self._node(OP_NEG, (a,))

    def hinge(self, a: int) -> int:
        return self._node(OP_HINGE, (a,))

    def abs(self, a: int) -> int:
        return self._node(OP_ABS, (a,))

    def lower_expr(self, expr, env: dict) -> int:
        """Lower a numeric expression; env maps label -> node id."""
        if isinstance(expr, Const):
            return self.const(expr.value)
        if isinstance(expr, Label):
            try:
                return env[expr.name]
            except KeyError:
                raise LoweringError(f"label {expr.name!r} not bound") from None
        if isinstance(expr, NaryOp):
            return self.nary(_NARY_OPS[expr.op], [self.lower_expr(a, env) for a in expr.args])
        if isinstance(expr, Sub):
            return self.sub(self.lower_expr(expr.left, env), self.lower_expr(expr.right, env))
        if isinstance(expr, Neg):
            return self.neg(self.lower_expr(expr.arg, env))
        raise LoweringError(f"cannot lower {expr!r}")

    def lower_predicate(self, pred, env: dict):
        """Returns (violation node id, list of (op, lhs node, rhs node))."""
        expr = pred.expr if isinstance(pred, Predicate) else pred
        return self._lower_bool(_push_negations(expr), env)

    def _lower_bool(self, expr, env):
        if isinstance(expr, Cmp):
            ln = self.lower_expr(expr.left, env)
            rn = self.lower_expr(expr.right, env)
            if expr.op == "eq":
                viol = self.abs(self.sub(ln, rn))
            elif expr.op == "le":
                viol = self.hinge(self.sub(ln, rn))
            else:
                viol = self.hinge(self.sub(rn, ln))
            return viol, [(expr.op, ln, rn)]
        if isinstance(expr, BoolOp):
            parts = [self._lower_bool(a, env) for a in expr.args]
            viols = [v for v, _ in parts]
            if expr.op == "and":
                # a conjunction is violated as much as its worst conjunct,
                # and every conjunct propagates intervals
                triples = [t for _, ts in parts for t in ts]
                return self.nary(OP_MAX, viols), triples
            # disjuncts cannot contract intervals individually
            return self.nary(OP_MIN, viols), []
        raise LoweringError(f"cannot lower boolean {expr!r}")

    def build(self):
        argptr = np.zeros(len(self._ops) + 1, dtype=np.int32)
        for i, a in enumerate(self._args):
            argptr[i + 1] = argptr[i] + len(a)
        flat = np.fromiter(
            (c for a in self._args for c in a), dtype=np.int32, count=int(argptr[-1])
        )
        return Arena(
            ops=np.asarray(self._ops, dtype=np.int32),
            argptr=argptr,
            args=flat,
            aux_i=np.asarray(self._aux_i, dtype=np.int32),
            aux_f=np.asarray(self._aux_f, dtype=np.float64),
        )


def _push_negations(expr, negate=False):
    """Negation normal form; strict/non-strict distinction collapses at the
    comparison tolerance, and a negated equality has no usable relaxation."""
    if isinstance(expr, Not):
        return _push_negations(expr.arg, not negate)
    if isinstance(expr, BoolOp):
        op = expr.op
        if negate:
            op = "or" if op == "and" else "and"
        return BoolOp(op, tuple(_push_negations(a, negate) for a in expr.args))
    if isinstance(expr, Cmp):
        if not negate:
            return expr
        if expr.op == "eq":
            raise LoweringError("negated equality cannot be solved for")
        flipped = "ge" if expr.op == "le" else "le"
        return Cmp(flipped, expr.left, expr.right)
    raise LoweringError(f"cannot normalize {expr!r}")


@dataclass
class Arena:
    ops: np.ndarray
    argptr: np.ndarray
    args: np.ndarray
    aux_i: np.ndarray
    aux_f: np.ndarray

    def __len__(self):
        return len(self.ops)


@dataclass
class CompiledSystem:
    """An arena plus chosen output nodes, bound to the active kernel backend.

    Instances hold per-instance scratch buffers; clone() before handing one
    to another worker thread.
    """

    arena: Arena
    n_vars: int
    out_ids: np.ndarray
    weights: np.ndarray = None
    _vals: np.ndarray = field(default=None, repr=False)
    _adj: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        self.out_ids = np.asarray(self.out_ids, dtype=np.int32)
        if self.weights is None:
            self.weights = np.ones(len(self.out_ids))
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self._vals = np.empty(len(self.arena))
        self._adj = np.empty(len(self.arena))

    def clone(self) -> "CompiledSystem":
        return CompiledSystem(self.arena, self.n_vars, self.out_ids.copy(), self.weights.copy())

    @property
    def n_outputs(self) -> int:
        return len(self.out_ids)

    def values(self, X: np.ndarray) -> np.ndarray:
        """Outputs at many points; X is (m, n_vars), result (n_outputs, m)."""
        X = np.ascontiguousarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.n_vars:
            raise ValueError(f"expected points of dimension {self.n_vars}")
        out = np.empty((self.n_outputs, X.shape[0]))
        a = self.arena
        kernel.forward(a.ops, a.argptr, a.args, a.aux_i, a.aux_f, X, self.out_ids, out)
        return out

    def values_at(self, x) -> np.ndarray:
        return self.values(np.asarray(x, dtype=np.float64)[None, :])[:, 0]

    def penalty(self, x) -> float:
        return float(self.penalty_grad(x)[0])

    def penalty_grad(self, x):
        """Sum of weighted squared outputs and its gradient (reverse mode)."""
        x = np.ascontiguousarray(x, dtype=np.float64)
        grad = np.zeros(self.n_vars)
        a = self.arena
        f = kernel.penalty_grad(
            a.ops, a.argptr, a.args, a.aux_i, a.aux_f,
            x, self.out_ids, self.weights, grad, self._vals, self._adj,
        )
        return f, grad

    def jacobian(self, x) -> np.ndarray:
        """d(out_i)/d(x_j), one backward sweep per output."""
        x = np.ascontiguousarray(x, dtype=np.float64)
        jac = np.zeros((self.n_outputs, self.n_vars))
        a = self.arena
        kernel.jacobian(
            a.ops, a.argptr, a.args, a.aux_i, a.aux_f,
            x, self.out_ids, jac, self._vals, self._adj,
        )
        return jac
