"""Forward-backward interval contraction over compiled constraint systems.

Contraction runs on the comparison triples produced when predicates were
lowered: each sweep evaluates interval hulls for every reachable arena node
bottom-up, clips the two sides of every comparison against each other, and
projects the narrowed intervals back down to the variables.  An empty
variable box is a proof of infeasibility; the returned certificate can be
replayed to confirm it.

Intersections are padded by a relative 1e-12 before an interval is declared
empty, so plain double rounding cannot manufacture a bogus proof.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .programs import (
    OP_ABS,
    OP_ADD,
    OP_CONST,
    OP_HINGE,
    OP_MAX,
    OP_MIN,
    OP_MUL,
    OP_NEG,
    OP_ORI,
    OP_SUB,
    OP_VAR,
)

INF = math.inf
_PAD = 1e-12


class _EmptyBox(Exception):
    def __init__(self, pred_idx, node):
        self.pred_idx = pred_idx
        self.node = node


def _pad(lo, hi):
    eps = _PAD * max(1.0, abs(lo) if lo not in (INF, -INF) else 0.0,
                     abs(hi) if hi not in (INF, -INF) else 0.0)
    return lo - eps, hi + eps


def _imul2(alo, ahi, blo, bhi):
    corners = []
    for x in (alo, ahi):
        for y in (blo, bhi):
            if x == 0.0 or y == 0.0:
                corners.append(0.0)
            else:
                corners.append(x * y)
    return min(corners), max(corners)


def _idiv(ylo, yhi, dlo, dhi):
    """y / d, or None when d straddles zero (no usable contraction)."""
    if dlo <= 0.0 <= dhi:
        return None
    corners = []
    for x in (ylo, yhi):
        for y in (dlo, dhi):
            if x == 0.0:
                corners.append(0.0)
            elif y in (INF, -INF):
                corners.append(0.0 if x not in (INF, -INF) else math.copysign(INF, x * y))
            else:
                corners.append(x / y)
    return min(corners), max(corners)


def _guard(lo, hi):
    if math.isnan(lo):
        lo = -INF
    if math.isnan(hi):
        hi = INF
    return lo, hi


@dataclass
class Certificate:
    """Replayable record of a contraction run that proved emptiness."""

    box_lo: list
    box_hi: list
    sweeps: int
    empty: bool
    emptied_by: int | None = None  # index into the constraint triple list
    events: list = field(default_factory=list)  # (pred_idx, var_idx, old, new)

    def to_json(self):
        def clean(v):
            return None if v in (INF, -INF) and False else v
        return {
            "box_lo": [v if v != -INF else "-inf" for v in self.box_lo],
            "box_hi": [v if v != INF else "inf" for v in self.box_hi],
            "sweeps": self.sweeps,
            "empty": self.empty,
            "emptied_by": self.emptied_by,
            "contractions": len(self.events),
        }


class IntervalContractor:
    """HC4-style contractor bound to one arena and its comparison triples."""

    def __init__(self, arena, n_vars, triples):
        self.arena = arena
        self.n_vars = n_vars
        self.triples = list(triples)
        n = len(arena)
        self._children = [
            arena.args[arena.argptr[i] : arena.argptr[i + 1]].tolist() for i in range(n)
        ]
        reach = np.zeros(n, dtype=bool)
        stack = [t[1] for t in self.triples] + [t[2] for t in self.triples]
        while stack:
            i = stack.pop()
            if reach[i]:
                continue
            reach[i] = True
            stack.extend(self._children[i])
        self._reach = reach
        if reach[arena.ops == OP_HINGE].any() or reach[arena.ops == OP_ABS].any():
            raise ValueError("comparison subtrees must not contain residual ops")

    # -- forward -----------------------------------------------------------

    def _forward(self, nlo, nhi, vlo, vhi):
        ops, aux_i, aux_f = self.arena.ops, self.arena.aux_i, self.arena.aux_f
        for i in range(len(self.arena)):
            if not self._reach[i]:
                continue
            op = ops[i]
            ch = self._children[i]
            if op == OP_CONST:
                nlo[i] = nhi[i] = aux_f[i]
            elif op == OP_VAR:
                nlo[i], nhi[i] = vlo[aux_i[i]], vhi[aux_i[i]]
            elif op == OP_ADD:
                lo = hi = 0.0
                for c in ch:
                    lo += nlo[c]
                    hi += nhi[c]
                nlo[i], nhi[i] = _guard(lo, hi)
            elif op == OP_SUB:
                a, b = ch
                nlo[i], nhi[i] = _guard(nlo[a] - nhi[b], nhi[a] - nlo[b])
            elif op == OP_NEG:
                nlo[i], nhi[i] = -nhi[ch[0]], -nlo[ch[0]]
            elif op == OP_MUL:
                lo, hi = nlo[ch[0]], nhi[ch[0]]
                for c in ch[1:]:
                    lo, hi = _imul2(lo, hi, nlo[c], nhi[c])
                nlo[i], nhi[i] = lo, hi
            elif op == OP_MIN:
                nlo[i] = min(nlo[c] for c in ch)
                nhi[i] = min(nhi[c] for c in ch)
            elif op == OP_MAX:
                nlo[i] = max(nlo[c] for c in ch)
                nhi[i] = max(nhi[c] for c in ch)
            elif op == OP_ORI:
                lo, hi = 1.0 - nhi[ch[0]], 1.0 - nlo[ch[0]]
                for c in ch[1:]:
                    lo, hi = _imul2(lo, hi, 1.0 - nhi[c], 1.0 - nlo[c])
                nlo[i], nhi[i] = 1.0 - hi, 1.0 - lo

    # -- backward ----------------------------------------------------------

    def _tighten(self, state, node, lo, hi, pred_idx):
        """Intersect node's interval with [lo, hi]; recurse into children."""
        nlo, nhi, vlo, vhi, events = state
        lo, hi = _guard(*_pad(lo, hi))
        new_lo = max(nlo[node], lo)
        new_hi = min(nhi[node], hi)
        if new_lo > new_hi:
            raise _EmptyBox(pred_idx, node)
        scale = max(1.0, abs(new_lo) if new_lo not in (INF, -INF) else 1.0,
                    abs(new_hi) if new_hi not in (INF, -INF) else 1.0)
        improved = (new_lo > nlo[node] + 1e-11 * scale) or (new_hi < nhi[node] - 1e-11 * scale)
        if not improved:
            return
        nlo[node], nhi[node] = new_lo, new_hi
        op = self.arena.ops[node]
        ch = self._children[node]
        if op == OP_VAR:
            v = self.arena.aux_i[node]
            old = (vlo[v], vhi[v])
            vlo[v], vhi[v] = max(vlo[v], new_lo), min(vhi[v], new_hi)
            events.append((pred_idx, int(v), old, (vlo[v], vhi[v])))
            if vlo[v] > vhi[v]:
                raise _EmptyBox(pred_idx, node)
        elif op == OP_CONST:
            pass
        elif op == OP_ADD:
            for j, c in enumerate(ch):
                olo = ohi = 0.0
                for k, c2 in enumerate(ch):
                    if k != j:
                        olo += nlo[c2]
                        ohi += nhi[c2]
                self._tighten(state, c, new_lo - ohi, new_hi - olo, pred_idx)
        elif op == OP_SUB:
            a, b = ch
            self._tighten(state, a, new_lo + nlo[b], new_hi + nhi[b], pred_idx)
            self._tighten(state, b, nlo[a] - new_hi, nhi[a] - new_lo, pred_idx)
        elif op == OP_NEG:
            self._tighten(state, ch[0], -new_hi, -new_lo, pred_idx)
        elif op == OP_MUL:
            for j, c in enumerate(ch):
                olo, ohi = 1.0, 1.0
                for k, c2 in enumerate(ch):
                    if k != j:
                        olo, ohi = _imul2(olo, ohi, nlo[c2], nhi[c2])
                q = _idiv(new_lo, new_hi, olo, ohi)
                if q is not None:
                    self._tighten(state, c, q[0], q[1], pred_idx)
        elif op == OP_MIN:
            reachable = [c for c in ch if nlo[c] <= new_hi + _PAD]
            for c in ch:
                self._tighten(state, c, new_lo, INF, pred_idx)
            if not reachable:
                raise _EmptyBox(pred_idx, node)
            if len(reachable) == 1:
                self._tighten(state, reachable[0], -INF, new_hi, pred_idx)
        elif op == OP_MAX:
            reachable = [c for c in ch if nhi[c] >= new_lo - _PAD]
            for c in ch:
                self._tighten(state, c, -INF, new_hi, pred_idx)
            if not reachable:
                raise _EmptyBox(pred_idx, node)
            if len(reachable) == 1:
                self._tighten(state, reachable[0], new_lo, INF, pred_idx)
        elif op == OP_ORI:
            zlo, zhi = 1.0 - new_hi, 1.0 - new_lo
            for j, c in enumerate(ch):
                olo, ohi = 1.0, 1.0
                for k, c2 in enumerate(ch):
                    if k != j:
                        olo, ohi = _imul2(olo, ohi, 1.0 - nhi[c2], 1.0 - nlo[c2])
                q = _idiv(zlo, zhi, olo, ohi)
                if q is not None:
                    self._tighten(state, c, 1.0 - q[1], 1.0 - q[0], pred_idx)

    # -- driver ------------------------------------------------------------

    def contract(self, box_lo, box_hi, max_sweeps=30):
        """Returns (lo, hi, certificate); certificate.empty marks a proof."""
        vlo = np.asarray(box_lo, dtype=float).copy()
        vhi = np.asarray(box_hi, dtype=float).copy()
        n = len(self.arena)
        nlo = np.empty(n)
        nhi = np.empty(n)
        events: list = []
        sweeps = 0
        try:
            for sweeps in range(1, max_sweeps + 1):
                before = (vlo.copy(), vhi.copy())
                self._forward(nlo, nhi, vlo, vhi)
                state = (nlo, nhi, vlo, vhi, events)
                for idx, (op, ln, rn) in enumerate(self.triples):
                    if op == "eq":
                        llo, lhi = nlo[ln], nhi[ln]
                        rlo, rhi = nlo[rn], nhi[rn]
                        self._tighten(state, ln, rlo, rhi, idx)
                        self._tighten(state, rn, llo, lhi, idx)
                    elif op == "le":
                        self._tighten(state, ln, -INF, nhi[rn], idx)
                        self._tighten(state, rn, nlo[ln], INF, idx)
                    else:  # ge
                        self._tighten(state, ln, nlo[rn], INF, idx)
                        self._tighten(state, rn, -INF, nhi[ln], idx)
                same = np.isclose(vlo, before[0], rtol=1e-10, atol=1e-12) & np.isclose(
                    vhi, before[1], rtol=1e-10, atol=1e-12
                )
                if same.all():
                    break
        except _EmptyBox as empty:
            cert = Certificate(
                list(box_lo), list(box_hi), sweeps, True, empty.pred_idx, events
            )
            return vlo, vhi, cert
        return vlo, vhi, Certificate(list(box_lo), list(box_hi), sweeps, False, None, events)


def replay_certificate(contractor: IntervalContractor, cert: Certificate) -> bool:
    """Re-run contraction from the certificate's starting box and confirm the
    emptiness verdict is reproduced."""
    _, _, again = contractor.contract(cert.box_lo, cert.box_hi)
    return again.empty == cert.empty
