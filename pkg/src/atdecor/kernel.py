"""Evaluation kernels: compiled extension when available, numpy fallback else.

The compiled backend (atdecor._native, built from _native.pyx) and the
fallback below implement the same three entry points over the flat arena
arrays described in programs.py:

    forward(ops, argptr, args, aux_i, aux_f, X, out_ids, out)
    penalty_grad(ops, argptr, args, aux_i, aux_f, x, out_ids, w, grad, vals, adj) -> float
    jacobian(ops, argptr, args, aux_i, aux_f, x, out_ids, jac, vals, adj)

Set ATDECOR_PURE_PYTHON=1 to force the fallback (used by the benchmark).
Opcode numbers mirror programs.py and _native.pyx.
"""

from __future__ import annotations

import os

import numpy as np

_CONST, _VAR, _ADD, _SUB, _NEG, _MUL, _MIN, _MAX, _ORI, _HINGE, _ABS = range(11)


def _forward_py(ops, argptr, args, aux_i, aux_f, X, out_ids, out):
    m = X.shape[0]
    vals = np.empty((len(ops), m))
    for i in range(len(ops)):
        op = ops[i]
        lo, hi = argptr[i], argptr[i + 1]
        if op == _CONST:
            vals[i] = aux_f[i]
        elif op == _VAR:
            vals[i] = X[:, aux_i[i]]
        elif op == _ADD:
            acc = vals[args[lo]].copy()
            for k in range(lo + 1, hi):
                acc += vals[args[k]]
            vals[i] = acc
        elif op == _SUB:
            vals[i] = vals[args[lo]] - vals[args[lo + 1]]
        elif op == _NEG:
            vals[i] = -vals[args[lo]]
        elif op == _MUL:
            acc = vals[args[lo]].copy()
            for k in range(lo + 1, hi):
                acc *= vals[args[k]]
            vals[i] = acc
        elif op == _MIN:
            acc = vals[args[lo]].copy()
            for k in range(lo + 1, hi):
                np.minimum(acc, vals[args[k]], out=acc)
            vals[i] = acc
        elif op == _MAX:
            acc = vals[args[lo]].copy()
            for k in range(lo + 1, hi):
                np.maximum(acc, vals[args[k]], out=acc)
            vals[i] = acc
        elif op == _ORI:
            acc = 1.0 - vals[args[lo]]
            for k in range(lo + 1, hi):
                acc *= 1.0 - vals[args[k]]
            vals[i] = 1.0 - acc
        elif op == _HINGE:
            vals[i] = np.maximum(0.0, vals[args[lo]])
        elif op == _ABS:
            vals[i] = np.abs(vals[args[lo]])
        else:
            raise ValueError(f"bad opcode {op}")
    for j, o in enumerate(out_ids):
        out[j] = vals[o]


def _forward_scalar(ops, argptr, args, aux_i, aux_f, x, vals):
    for i in range(len(ops)):
        op = ops[i]
        lo, hi = argptr[i], argptr[i + 1]
        if op == _CONST:
            vals[i] = aux_f[i]
        elif op == _VAR:
            vals[i] = x[aux_i[i]]
        elif op == _ADD:
            acc = vals[args[lo]]
            for k in range(lo + 1, hi):
                acc += vals[args[k]]
            vals[i] = acc
        elif op == _SUB:
            vals[i] = vals[args[lo]] - vals[args[lo + 1]]
        elif op == _NEG:
            vals[i] = -vals[args[lo]]
        elif op == _MUL:
            acc = vals[args[lo]]
            for k in range(lo + 1, hi):
                acc *= vals[args[k]]
            vals[i] = acc
        elif op == _MIN:
            acc = vals[args[lo]]
            for k in range(lo + 1, hi):
                v = vals[args[k]]
                if v < acc:
                    acc = v
            vals[i] = acc
        elif op == _MAX:
            acc = vals[args[lo]]
            for k in range(lo + 1, hi):
                v = vals[args[k]]
                if v > acc:
                    acc = v
            vals[i] = acc
        elif op == _ORI:
            acc = 1.0 - vals[args[lo]]
            for k in range(lo + 1, hi):
                acc *= 1.0 - vals[args[k]]
            vals[i] = 1.0 - acc
        elif op == _HINGE:
            v = vals[args[lo]]
            vals[i] = v if v > 0.0 else 0.0
        elif op == _ABS:
            vals[i] = abs(vals[args[lo]])
        else:
            raise ValueError(f"bad opcode {op}")


def _backward_scalar(ops, argptr, args, aux_i, vals, adj, grad):
    for i in range(len(ops) - 1, -1, -1):
        a = adj[i]
        if a == 0.0:
            continue
        op = ops[i]
        lo, hi = argptr[i], argptr[i + 1]
        if op == _VAR:
            grad[aux_i[i]] += a
        elif op == _CONST:
            pass
        elif op == _ADD:
            for k in range(lo, hi):
                adj[args[k]] += a
        elif op == _SUB:
            adj[args[lo]] += a
            adj[args[lo + 1]] -= a
        elif op == _NEG:
            adj[args[lo]] -= a
        elif op == _MUL:
            out = vals[i]
            for k in range(lo, hi):
                vj = vals[args[k]]
                if vj != 0.0:
                    p = out / vj
                else:
                    p = 1.0
                    for k2 in range(lo, hi):
                        if k2 != k:
                            p *= vals[args[k2]]
                adj[args[k]] += a * p
        elif op == _MIN:
            best = lo
            for k in range(lo + 1, hi):
                if vals[args[k]] < vals[args[best]]:
                    best = k
            adj[args[best]] += a
        elif op == _MAX:
            best = lo
            for k in range(lo + 1, hi):
                if vals[args[k]] > vals[args[best]]:
                    best = k
            adj[args[best]] += a
        elif op == _ORI:
            q = 1.0 - vals[i]
            for k in range(lo, hi):
                uj = 1.0 - vals[args[k]]
                if uj != 0.0:
                    p = q / uj
                else:
                    p = 1.0
                    for k2 in range(lo, hi):
                        if k2 != k:
                            p *= 1.0 - vals[args[k2]]
                adj[args[k]] += a * p
        elif op == _HINGE:
            if vals[args[lo]] > 0.0:
                adj[args[lo]] += a
        elif op == _ABS:
            v = vals[args[lo]]
            if v > 0.0:
                adj[args[lo]] += a
            elif v < 0.0:
                adj[args[lo]] -= a


def _penalty_grad_py(ops, argptr, args, aux_i, aux_f, x, out_ids, weights, grad, vals, adj):
    _forward_scalar(ops, argptr, args, aux_i, aux_f, x, vals)
    adj[:] = 0.0
    f = 0.0
    for j, o in enumerate(out_ids):
        v = vals[o]
        f += weights[j] * v * v
        adj[o] += 2.0 * weights[j] * v
    _backward_scalar(ops, argptr, args, aux_i, vals, adj, grad)
    return f


def _jacobian_py(ops, argptr, args, aux_i, aux_f, x, out_ids, jac, vals, adj):
    _forward_scalar(ops, argptr, args, aux_i, aux_f, x, vals)
    for j, o in enumerate(out_ids):
        adj[:] = 0.0
        adj[o] = 1.0
        _backward_scalar(ops, argptr, args, aux_i, vals, adj, jac[j])


_native = None
if os.environ.get("ATDECOR_PURE_PYTHON") != "1":
    try:
        from . import _native  # type: ignore[attr-defined]
    except ImportError:
        _native = None

if _native is not None:
    BACKEND = "native"
    forward = _native.forward
    penalty_grad = _native.penalty_grad
    jacobian = _native.jacobian
else:
    BACKEND = "python"
    forward = _forward_py
    penalty_grad = _penalty_grad_py
    jacobian = _jacobian_py

HAVE_NATIVE = BACKEND == "native"


def python_backend():
    """Explicit handles to the fallback, for parity tests and benchmarks."""
    return _forward_py, _penalty_grad_py, _jacobian_py
