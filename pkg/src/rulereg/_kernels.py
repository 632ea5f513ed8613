"""Compiled inner loops for rule-set pruning and condition swapping.

A rule set is held as flat arrays: per condition its feature, opcode
(0 ``<=``, 1 ``>``, 2 ``==``, 3 ``!=``), value (threshold or level code) and
training mask, with ``start`` giving each rule's slice of conditions.
Rule and default values are always the first-match roster medians.
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def _median(v):
    s = np.sort(v)
    mid = s.size // 2
    if s.size % 2:
        return s[mid]
    return (s[mid - 1] + s[mid]) / 2.0


@njit(cache=True)
def condition_mask(col, op, value):
    n = col.shape[0]
    out = np.empty(n, dtype=np.bool_)
    for k in range(n):
        x = col[k]
        if op == 0:
            out[k] = x <= value
        elif op == 1:
            out[k] = x > value
        elif op == 2:
            out[k] = x == value
        else:
            out[k] = x != value
    return out


@njit(cache=True)
def evaluate(M, start, y):
    """First-match state of the rule set.

    Returns ``(S, match, fallback, values, err, size)``: per rule and case
    the number of satisfied conditions, the first matching rule (``R`` for
    the default), the rule that would claim the case if its own rule were
    gone (``R`` for none), the median values with the default last, the
    per-case absolute error and each roster's size.
    """
    R = start.shape[0] - 1
    n = y.shape[0]
    S = np.zeros((R, n), dtype=np.int32)
    for r in range(R):
        for c in range(start[r], start[r + 1]):
            for k in range(n):
                S[r, k] += M[c, k]
    match = np.full(n, R, dtype=np.int64)
    fallback = np.full(n, R, dtype=np.int64)
    for k in range(n):
        for r in range(R):
            if S[r, k] == start[r + 1] - start[r]:
                if match[k] == R:
                    match[k] = r
                else:
                    fallback[k] = r
                    break
    size = np.zeros(R + 1, dtype=np.int64)
    for k in range(n):
        size[match[k]] += 1
    values = np.empty(R + 1)
    buf = np.empty(n)
    for r in range(R + 1):
        m = 0
        for k in range(n):
            if match[k] == r:
                buf[m] = y[k]
                m += 1
        if m:
            values[r] = _median(buf[:m])
        else:
            values[r] = _median(y) if r == R else np.nan
    err = np.empty(n)
    for k in range(n):
        err[k] = abs(y[k] - values[match[k]])
    return S, match, fallback, values, err, size


@njit(cache=True)
def prune_choice(M, start, y, S, match, fallback, values, err):
    """Weakest-link deletion by frozen-value error increase per condition removed.

    Returns ``(rule, condition)`` with ``condition == -1`` for deleting the
    whole rule. Ties prefer more conditions removed, then the earlier rule,
    then the earlier condition (rule deletion first).
    """
    R = start.shape[0] - 1
    n = y.shape[0]
    d_rule = np.zeros(R)
    for k in range(n):
        r = match[k]
        if r < R:
            d_rule[r] += abs(y[k] - values[fallback[k]]) - err[k]
    tail = np.zeros(R + 1, dtype=np.int64)
    for r in range(R - 1, -1, -1):
        tail[r] = tail[r + 1] + start[r + 1] - start[r]

    best_ratio, best_removed, br, bj = np.inf, 0, -1, -1
    for r in range(R):
        L = start[r + 1] - start[r]
        ratio = d_rule[r] / n / L
        if ratio < best_ratio or (ratio == best_ratio and L > best_removed):
            best_ratio, best_removed, br, bj = ratio, L, r, -1
        removed = 1 + tail[r + 1] if L == 1 else 1
        for c in range(start[r], start[r + 1]):
            d = 0.0
            for k in range(n):
                if (match[k] > r) and S[r, k] - M[c, k] == L - 1:
                    d += abs(y[k] - values[r]) - err[k]
            ratio = d / n / removed
            if ratio < best_ratio or (ratio == best_ratio and removed > best_removed):
                best_ratio, best_removed, br, bj = ratio, removed, r, c - start[r]
    return br, bj


@njit(cache=True)
def _blocked(f, op, v, c, start_r, stop_r, cf, co, cv):
    for k in range(start_r, stop_r):
        if k == c or cf[k] != f:
            continue
        o = co[k]
        if op < 2:
            if o == op:
                return True
        elif o == 2 or op == 2 or cv[k] == v:
            return True
    return False


@njit(cache=True)
def _reachable(match_k, r, s, mk, L):
    return match_k >= r and s - mk == L - 1


@njit(cache=True)
def _score_pair(i0, inside, cnt, tot, z, td, c, r, start, cf, co, cv, p_op, p_feat, p_val,
                tol, best, bt, bi):
    """Score candidate ``i0`` (covering ``cnt`` reachable cases of weight
    ``inside``) and its complement ``i0 + 1``. Changes within ``tol`` of the
    best count as ties and go to the earliest (slot, candidate)."""
    for i in (i0, i0 + 1):
        if i != i0:
            inside = tot - inside
            cnt = z - cnt
        if cnt <= 0:
            continue
        # change = losses of roster cases left out + gains of cases captured
        delta = td + inside
        if bi < 0:
            better = delta < best
        elif delta < best - tol:
            better = True
        else:
            better = delta <= best + tol and (c < bt or (c == bt and i < bi))
        if not better:
            continue
        if _blocked(p_feat[i], p_op[i], p_val[i], c, start[r], start[r + 1], cf, co, cv):
            continue
        best, bt, bi = delta, c, i
    return best, bt, bi


@njit(cache=True)
def swap_choice(M, start, cf, co, cv, y, S, match, fallback, values, err,
                order, rank, block_start, lo, hi, p_op, p_feat, p_val, tol):
    """Best single-condition replacement by frozen-value training error.

    Every condition slot is scored against every pool candidate (pool
    candidate ``i`` holds on positions ``[lo[i], hi[i])`` of its block's
    sorted order, or the complement for odd opcodes). A replacement must
    leave the rule reachable by at least one case and must not duplicate a
    test of the rule's other conditions. The first strict minimum in
    (slot, candidate) order wins; slots are visited by increasing lower
    bound so hopeless ones are skipped. Returns ``(slot, candidate)`` or
    ``(-1, -1)`` when nothing lowers the error by more than ``tol``.

    Only cases that could land in the edited rule carry weight, so along a
    threshold block the score is constant between their ranks and only the
    first threshold of each run needs scoring.
    """
    R = start.shape[0] - 1
    C = M.shape[0]
    nb, n = order.shape
    rule_of = np.empty(C, dtype=np.int64)
    for r in range(R):
        for c in range(start[r], start[r + 1]):
            rule_of[c] = r

    lost = np.empty(n)
    for k in range(n):
        lost[k] = abs(y[k] - values[fallback[k]]) - err[k]
    drop_tot = np.zeros(R)
    drop_neg = np.zeros(R)
    for k in range(n):
        r = match[k]
        if r < R:
            drop_tot[r] += lost[k]
            if lost[k] < 0:
                drop_neg[r] += lost[k]

    # lower bound on each slot's best change
    bound = np.empty(C)
    for c in range(C):
        r = rule_of[c]
        L = start[r + 1] - start[r]
        neg = 0.0
        for k in range(n):
            if match[k] > r and S[r, k] - M[c, k] == L - 1:
                g = abs(y[k] - values[r]) - err[k]
                if g < 0:
                    neg += g
        bound[c] = drop_neg[r] + neg - tol

    zk = np.empty(n, dtype=np.int64)
    zw = np.empty(n)
    zf = np.empty(n, dtype=np.int64)
    qs = np.empty(n, dtype=np.int64)
    P = np.zeros(n + 1)
    Pn = np.zeros(n + 1)
    Cn = np.zeros(n + 1, dtype=np.int64)
    best, bt, bi = -tol, -1, -1
    for c in np.argsort(bound, kind="mergesort"):
        if bound[c] > best + tol or (bi < 0 and bound[c] >= best):
            break
        r = rule_of[c]
        L = start[r + 1] - start[r]
        td = drop_tot[r]
        z = 0
        for k in range(n):
            if _reachable(match[k], r, S[r, k], M[c, k], L):
                zk[z] = k
                zw[k] = -lost[k] if match[k] == r else abs(y[k] - values[r]) - err[k]
                zf[k] = 1
                z += 1
            else:
                zw[k] = 0.0
                zf[k] = 0
        for b in range(nb):
            b0, b1 = block_start[b], block_start[b + 1]
            W = (b1 - b0) // 2
            if z * 8 >= n or p_op[b0] >= 2:
                # dense: prefix sums over the whole block order
                lo_p, hi_p = 0.0, 0.0
                for q in range(n):
                    k = order[b, q]
                    Pn[q + 1] = Pn[q] + zw[k]
                    Cn[q + 1] = Cn[q] + zf[k]
                    lo_p = min(lo_p, Pn[q + 1])
                    hi_p = max(hi_p, Pn[q + 1])
                # a candidate scores td + P or td + total - P, so the prefix
                # range bounds every threshold of this block
                cut = best + tol - td
                tot = Pn[n]
                if p_op[b0] < 2 and lo_p > cut and tot - hi_p > cut:
                    continue
                for m in range(W):
                    i0 = b0 + 2 * m
                    a, e = lo[i0], hi[i0]
                    inside = Pn[e] - Pn[a]
                    if inside > cut and tot - inside > cut:
                        continue
                    best, bt, bi = _score_pair(i0, Pn[e] - Pn[a], Cn[e] - Cn[a], Pn[n], z, td,
                                               c, r, start, cf, co, cv, p_op, p_feat, p_val,
                                               tol, best, bt, bi)
                continue
            # sparse: sorted ranks of the few reachable cases; the score only
            # changes where a threshold takes in the next one of them
            for j in range(z):
                qs[j] = rank[b, zk[j]]
            ranks = np.sort(qs[:z])
            for j in range(z):
                P[j + 1] = P[j] + zw[order[b, ranks[j]]]
            m, jb = 0, 0
            while m < W:
                i0 = b0 + 2 * m
                while jb < z and ranks[jb] < hi[i0]:
                    jb += 1
                best, bt, bi = _score_pair(i0, P[jb], jb, P[z], z, td, c, r, start, cf, co, cv,
                                           p_op, p_feat, p_val, tol, best, bt, bi)
                if jb >= z:
                    break
                q, a, e = ranks[jb], m + 1, W
                while a < e:
                    mid = (a + e) // 2
                    if hi[b0 + 2 * mid] > q:
                        e = mid
                    else:
                        a = mid + 1
                m = a
    return bt, bi

