"""Candidate-condition pools scored by sorted cumulative sums.

For a fixed set of rows, every axis-parallel condition ``x[f] <= t`` selects
a prefix of the rows sorted by feature ``f``. Summing a weight vector over
all such conditions is therefore one cumulative sum per feature, which lets
rule growth and swap search score thousands of candidates for the price of
a few array passes.
"""

from __future__ import annotations

import numpy as np

from .dataset import Dataset
from .rules import EQ, GT, LE, NE, Condition

OPS = (LE, GT, EQ, NE)
_OPCODE = {op: i for i, op in enumerate(OPS)}


class ConditionPool:
    """All candidate conditions over the rows ``rows`` of ``data``.

    Continuous features get ``<=``/``>`` tests at midpoints between adjacent
    distinct values; categorical features get ``==``/``!=`` tests for every
    level present. Candidates are ordered by feature, then threshold (or
    level), then operator (``<=`` before ``>``, ``==`` before ``!=``), so the
    lowest index is also the preferred tie-break.
    """

    def __init__(self, data: Dataset, rows=None):
        self.data = data
        self.rows = np.arange(data.n) if rows is None else np.asarray(rows)
        self.Xs = data.X[self.rows]
        self.n = len(self.rows)
        feats, ops, vals = [], [], []
        self._blocks = []
        # sorted-order layout: candidate i holds on positions [lo, hi) of its
        # block's order, or on the complement for the odd opcodes (> and !=)
        orders, los, his = [], [], []
        start = 0
        for f, feat in enumerate(data.schema.features):
            col = self.Xs[:, f]
            if feat.is_categorical:
                codes = np.unique(col)
                if codes.size < 2:
                    continue
                onehot = (col[:, None] == codes[None, :]).astype(float)
                self._blocks.append((False, start, onehot))
                width = codes.size
                ops.append(np.tile([2, 3], width))
                vals.append(np.repeat(codes, 2))
                order = np.argsort(col, kind="stable")
                xs = col[order]
                lo = np.searchsorted(xs, codes, side="left")
                hi = np.searchsorted(xs, codes, side="right")
            else:
                order = np.argsort(col, kind="stable")
                xs = col[order]
                cut = np.flatnonzero(xs[1:] != xs[:-1])
                if cut.size == 0:
                    continue
                thr = (xs[cut] + xs[cut + 1]) / 2.0
                # midpoint of adjacent floats can round up onto the upper value
                thr = np.where(thr < xs[cut + 1], thr, xs[cut])
                self._blocks.append((True, start, (order, cut)))
                width = cut.size
                ops.append(np.tile([0, 1], width))
                vals.append(np.repeat(thr, 2))
                lo, hi = np.zeros(width, dtype=np.int64), cut + 1
            orders.append(order)
            los.append(np.repeat(lo, 2))
            his.append(np.repeat(hi, 2))
            feats.append(np.full(2 * width, f))
            start += 2 * width
        self.size = start
        self.block_order = np.array(orders, dtype=np.int64).reshape(len(orders), self.n)
        self.block_rank = np.empty_like(self.block_order)
        for b, order in enumerate(self.block_order):
            self.block_rank[b, order] = np.arange(self.n)
        self.block_start = np.array([b[1] for b in self._blocks] + [start], dtype=np.int64)
        self.lo = np.concatenate(los).astype(np.int64) if los else np.zeros(0, dtype=np.int64)
        self.hi = np.concatenate(his).astype(np.int64) if his else np.zeros(0, dtype=np.int64)
        self.feature = np.concatenate(feats) if feats else np.zeros(0, dtype=int)
        self.opcode = np.concatenate(ops) if ops else np.zeros(0, dtype=int)
        self.value = np.concatenate(vals) if vals else np.zeros(0)
        self._masks: dict[int, np.ndarray] = {}

    def __len__(self):
        return self.size

    def condition(self, i: int) -> Condition:
        f, op, v = int(self.feature[i]), OPS[self.opcode[i]], self.value[i]
        if op in (EQ, NE):
            v = self.data.levels[f][int(v)]
        return Condition(f, op, float(v) if op in (LE, GT) else v)

    @property
    def conditions(self) -> list[Condition]:
        return [self.condition(i) for i in range(self.size)]

    def sums(self, W) -> np.ndarray:
        """Sum each row of ``W`` (q x n over pool rows) over every candidate's cases.

        Returns an array of shape (q, len(pool)).
        """
        W = np.atleast_2d(np.asarray(W, dtype=float))
        out = np.empty((W.shape[0], self.size))
        total = W.sum(axis=1)[:, None]
        for continuous, start, payload in self._blocks:
            if continuous:
                order, cut = payload
                inside = np.cumsum(W[:, order], axis=1)[:, cut]
            else:
                inside = W @ payload
            stop = start + 2 * inside.shape[1]
            out[:, start:stop:2] = inside
            out[:, start + 1:stop:2] = total - inside
        return out

    def counts(self, B) -> np.ndarray:
        """Like :meth:`sums` for boolean masks, as exact integers."""
        return np.rint(self.sums(np.asarray(B, dtype=float))).astype(np.int64)

    def mask(self, i: int) -> np.ndarray:
        """Row mask (over pool rows) of candidate ``i``."""
        m = self._masks.get(i)
        if m is None:
            col = self.Xs[:, self.feature[i]]
            op, v = self.opcode[i], self.value[i]
            m = (col <= v, col > v, col == v, col != v)[op]
            self._masks[i] = m
        return m

    def index_of(self, cond: Condition) -> int:
        """Pool index of ``cond``, or -1 when the pool has no such candidate."""
        op = _OPCODE[cond.op]
        if op >= 2:
            v = self.data.code_of(cond.feature, cond.value)
        else:
            v = cond.value
        hit = np.flatnonzero((self.feature == cond.feature) & (self.opcode == op) & (self.value == v))
        return int(hit[0]) if hit.size else -1

    def compatible_with(self, existing) -> np.ndarray:
        """Candidates that may join the conjunction ``existing`` without duplicating a test.

        Continuous features allow one ``<=`` and one ``>`` each. A categorical
        feature allows either a single ``==`` or any number of distinct ``!=``.
        """
        ok = np.ones(self.size, dtype=bool)
        for c in existing:
            same = self.feature == c.feature
            if c.op in (LE, GT):
                ok &= ~(same & (self.opcode == _OPCODE[c.op]))
            elif c.op == EQ:
                ok &= ~same
            else:
                code = self.data.code_of(c.feature, c.value)
                ok &= ~(same & ((self.opcode == 2) | (self.value == code)))
        return ok


def compatible(existing, cand: Condition) -> bool:
    for c in existing:
        if c.feature != cand.feature:
            continue
        if cand.op in (LE, GT):
            if c.op == cand.op:
                return False
        elif c == cand or c.op == EQ or cand.op == EQ:
            return False
    return True
