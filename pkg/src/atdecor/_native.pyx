# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled evaluation kernel for expression programs.

Same contract as the fallback in kernel.py; opcode numbers must match
programs.py.  All loops run without the GIL held where possible.
"""

import numpy as _np


cdef enum:
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


cdef inline void _forward_one(const int[::1] ops, const int[::1] argptr,
                              const int[::1] args, const int[::1] aux_i,
                              const double[::1] aux_f, const double[:, ::1] X,
                              Py_ssize_t row, double[::1] vals) nogil:
    cdef Py_ssize_t i, k, lo, hi
    cdef int op
    cdef double acc, v
    for i in range(ops.shape[0]):
        op = ops[i]
        lo = argptr[i]
        hi = argptr[i + 1]
        if op == OP_CONST:
            vals[i] = aux_f[i]
        elif op == OP_VAR:
            vals[i] = X[row, aux_i[i]]
        elif op == OP_ADD:
            acc = vals[args[lo]]
            for k in range(lo + 1, hi):
                acc += vals[args[k]]
            vals[i] = acc
        elif op == OP_SUB:
            vals[i] = vals[args[lo]] - vals[args[lo + 1]]
        elif op == OP_NEG:
            vals[i] = -vals[args[lo]]
        elif op == OP_MUL:
            acc = vals[args[lo]]
            for k in range(lo + 1, hi):
                acc *= vals[args[k]]
            vals[i] = acc
        elif op == OP_MIN:
            acc = vals[args[lo]]
            for k in range(lo + 1, hi):
                v = vals[args[k]]
                if v < acc:
                    acc = v
            vals[i] = acc
        elif op == OP_MAX:
            acc = vals[args[lo]]
            for k in range(lo + 1, hi):
                v = vals[args[k]]
                if v > acc:
                    acc = v
            vals[i] = acc
        elif op == OP_ORI:
            acc = 1.0 - vals[args[lo]]
            for k in range(lo + 1, hi):
                acc *= 1.0 - vals[args[k]]
            vals[i] = 1.0 - acc
        elif op == OP_HINGE:
            v = vals[args[lo]]
            vals[i] = v if v > 0.0 else 0.0
        else:  # OP_ABS
            v = vals[args[lo]]
            vals[i] = v if v >= 0.0 else -v


cdef inline void _backward(const int[::1] ops, const int[::1] argptr,
                           const int[::1] args, const int[::1] aux_i,
                           const double[::1] vals, double[::1] adj,
                           double[::1] grad) nogil:
    cdef Py_ssize_t i, k, k2, lo, hi, best
    cdef int op
    cdef double a, out, vj, p, q, uj
    for i in range(ops.shape[0] - 1, -1, -1):
        a = adj[i]
        if a == 0.0:
            continue
        op = ops[i]
        lo = argptr[i]
        hi = argptr[i + 1]
        if op == OP_VAR:
            grad[aux_i[i]] += a
        elif op == OP_CONST:
            pass
        elif op == OP_ADD:
            for k in range(lo, hi):
                adj[args[k]] += a
        elif op == OP_SUB:
            adj[args[lo]] += a
            adj[args[lo + 1]] -= a
        elif op == OP_NEG:
            adj[args[lo]] -= a
        elif op == OP_MUL:
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
        elif op == OP_MIN:
            best = lo
            for k in range(lo + 1, hi):
                if vals[args[k]] < vals[args[best]]:
                    best = k
            adj[args[best]] += a
        elif op == OP_MAX:
            best = lo
            for k in range(lo + 1, hi):
                if vals[args[k]] > vals[args[best]]:
                    best = k
            adj[args[best]] += a
        elif op == OP_ORI:
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
        elif op == OP_HINGE:
            if vals[args[lo]] > 0.0:
                adj[args[lo]] += a
        else:  # OP_ABS
            vj = vals[args[lo]]
            if vj > 0.0:
                adj[args[lo]] += a
            elif vj < 0.0:
                adj[args[lo]] -= a


def forward(const int[::1] ops, const int[::1] argptr, const int[::1] args,
            const int[::1] aux_i, const double[::1] aux_f,
            const double[:, ::1] X, const int[::1] out_ids,
            double[:, ::1] out):
    cdef Py_ssize_t m = X.shape[0]
    cdef Py_ssize_t n = ops.shape[0]
    cdef Py_ssize_t row, j
    scratch = _np.empty(n, dtype=_np.float64)
    cdef double[::1] vals = scratch
    with nogil:
        for row in range(m):
            _forward_one(ops, argptr, args, aux_i, aux_f, X, row, vals)
            for j in range(out_ids.shape[0]):
                out[j, row] = vals[out_ids[j]]


cdef inline void _forward_point(const int[::1] ops, const int[::1] argptr,
                                const int[::1] args, const int[::1] aux_i,
                                const double[::1] aux_f, const double[::1] x,
                                double[::1] vals) nogil:
    cdef Py_ssize_t i, k, lo, hi
    cdef int op
    cdef double acc, v
    for i in range(ops.shape[0]):
        op = ops[i]
        lo = argptr[i]
        hi = argptr[i + 1]
        if op == OP_CONST:
            vals[i] = aux_f[i]
        elif op == OP_VAR:
            vals[i] = x[aux_i[i]]
        elif op == OP_ADD:
            acc = vals[args[lo]]
            for k in range(lo + 1, hi):
                acc += vals[args[k]]
            vals[i] = acc
        elif op == OP_SUB:
            vals[i] = vals[args[lo]] - vals[args[lo + 1]]
        elif op == OP_NEG:
            vals[i] = -vals[args[lo]]
        elif op == OP_MUL:
            acc = vals[args[lo]]
            for k in range(lo + 1, hi):
                acc *= vals[args[k]]
            vals[i] = acc
        elif op == OP_MIN:
            acc = vals[args[lo]]
            for k in range(lo + 1, hi):
                v = vals[args[k]]
                if v < acc:
                    acc = v
            vals[i] = acc
        elif op == OP_MAX:
            acc = vals[args[lo]]
            for k in range(lo + 1, hi):
                v = vals[args[k]]
                if v > acc:
                    acc = v
            vals[i] = acc
        elif op == OP_ORI:
            acc = 1.0 - vals[args[lo]]
            for k in range(lo + 1, hi):
                acc *= 1.0 - vals[args[k]]
            vals[i] = 1.0 - acc
        elif op == OP_HINGE:
            v = vals[args[lo]]
            vals[i] = v if v > 0.0 else 0.0
        else:  # OP_ABS
            v = vals[args[lo]]
            vals[i] = v if v >= 0.0 else -v


def penalty_grad(const int[::1] ops, const int[::1] argptr, const int[::1] args,
                 const int[::1] aux_i, const double[::1] aux_f,
                 const double[::1] x, const int[::1] out_ids,
                 const double[::1] weights, double[::1] grad,
                 double[::1] vals, double[::1] adj):
    cdef Py_ssize_t i, j
    cdef double f = 0.0
    cdef double v
    with nogil:
        _forward_point(ops, argptr, args, aux_i, aux_f, x, vals)
        for i in range(adj.shape[0]):
            adj[i] = 0.0
        for j in range(out_ids.shape[0]):
            v = vals[out_ids[j]]
            f += weights[j] * v * v
            adj[out_ids[j]] += 2.0 * weights[j] * v
        _backward(ops, argptr, args, aux_i, vals, adj, grad)
    return f


def jacobian(const int[::1] ops, const int[::1] argptr, const int[::1] args,
             const int[::1] aux_i, const double[::1] aux_f,
             const double[::1] x, const int[::1] out_ids,
             double[:, ::1] jac, double[::1] vals, double[::1] adj):
    cdef Py_ssize_t i, j
    with nogil:
        _forward_point(ops, argptr, args, aux_i, aux_f, x, vals)
        for j in range(out_ids.shape[0]):
            for i in range(adj.shape[0]):
                adj[i] = 0.0
            adj[out_ids[j]] = 1.0
            _backward(ops, argptr, args, aux_i, vals, adj, jac[j])
