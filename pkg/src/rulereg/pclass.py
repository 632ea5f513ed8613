"""Pseudo-class construction: partition sorted target values into contiguous bands.

The search is a k-means-like local search restricted to moves between
adjacent classes. Identical target values always travel together, so a
class is a run of distinct values in sorted order and a move is a shift of
one class boundary by one value group.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

ABSOLUTE = "absolute"
SQUARED = "squared"


@dataclass(frozen=True, eq=False)
class PseudoClassAssignment:
    class_of: np.ndarray      # class id per case, in input order
    class_means: np.ndarray   # ascending
    err: float
    k_effective: int

    def members(self, c: int) -> np.ndarray:
        return np.flatnonzero(self.class_of == c)


def _dist(kind):
    if kind == ABSOLUTE:
        return lambda v, m: abs(v - m)
    if kind == SQUARED:
        return lambda v, m: (v - m) * (v - m)
    raise ValueError(f"unknown distance {kind!r}")


def _initial_bounds(counts: np.ndarray, n: int, k: int) -> list[int]:
    """Equal case-count blocks (remainder to the first classes), snapped to value groups.

    Returns group-index boundaries ``[0, b1, ..., G]``.
    """
    base, extra = divmod(n, k)
    sizes = [base + (1 if c < extra else 0) for c in range(k)]
    case_bounds = np.cumsum([0] + sizes)
    group_start = np.concatenate([[0], np.cumsum(counts)])  # case index where group g starts
    bounds = [0]
    for b in case_bounds[1:-1]:
        # group containing case b-1 .. does it straddle b?
        g = int(np.searchsorted(group_start, b, side="right")) - 1
        s, e = group_start[g], group_start[g + 1]
        if s == b:
            gb = g
        else:
            below, above = b - s, e - b
            gb = g + 1 if below >= above else g
        if gb > bounds[-1]:
            bounds.append(gb)
    if bounds[-1] != len(counts):
        bounds.append(len(counts))
    return bounds


def p_class(y, k: int, distance: str = ABSOLUTE) -> PseudoClassAssignment:
    """Assign target values to at most ``k`` contiguous pseudo-classes.

    Cases are visited in ascending order of ``y``; the lowest value group
    of a class moves to the previous class, or failing that the highest
    group moves to the next class, whenever it is strictly closer to that
    class's mean. Means are updated after every move. Passes repeat while
    the total distance to class means keeps falling; the best pass is kept.
    """
    y = np.asarray(y, dtype=float)
    n = y.size
    if k <= 0:
        raise ValueError("k must be positive")
    if k > n:
        raise ValueError(f"k={k} exceeds the number of cases ({n})")
    if not np.all(np.isfinite(y)):
        raise ValueError("target values must be finite")
    dist = _dist(distance)

    values, inverse, counts = np.unique(y, return_inverse=True, return_counts=True)
    vals = values.tolist()
    cnts = counts.tolist()
    gsum = (values * counts).tolist()

    bounds = _initial_bounds(counts, n, k)

    def class_stats(bounds):
        sums, sizes = [], []
        for a, b in zip(bounds[:-1], bounds[1:]):
            sums.append(sum(gsum[a:b]))
            sizes.append(sum(cnts[a:b]))
        return sums, sizes

    def total_err(bounds, sums, sizes):
        err = 0.0
        for c, (a, b) in enumerate(zip(bounds[:-1], bounds[1:])):
            m = sums[c] / sizes[c]
            for g in range(a, b):
                err += cnts[g] * dist(vals[g], m)
        return err

    sums, sizes = class_stats(bounds)
    err_new = total_err(bounds, sums, sizes)
    best = (list(bounds), err_new)

    while True:
        err_old = err_new
        g = 0
        while g < len(vals):
            c = _class_index(bounds, g)
            moved = False
            mean_c = sums[c] / sizes[c]
            if c > 0 and bounds[c] == g:
                if dist(vals[g], sums[c - 1] / sizes[c - 1]) < dist(vals[g], mean_c):
                    bounds[c] += 1
                    _shift(sums, sizes, c, c - 1, gsum[g], cnts[g])
                    moved = True
            if not moved and c < len(sizes) - 1 and bounds[c + 1] - 1 == g:
                if dist(vals[g], sums[c + 1] / sizes[c + 1]) < dist(vals[g], mean_c):
                    bounds[c + 1] -= 1
                    _shift(sums, sizes, c, c + 1, gsum[g], cnts[g])
                    moved = True
            if moved and sizes[c] == 0:
                del bounds[c + 1 if bounds[c] == bounds[c + 1] else c]
                del sums[c]
                del sizes[c]
            g += 1
        err_new = total_err(bounds, sums, sizes)
        if err_new < best[1]:
            best = (list(bounds), err_new)
        if not err_new < err_old:
            break

    bounds, err = best
    bounds = _merge_equal_means(bounds, gsum, cnts)
    sums, sizes = class_stats(bounds)
    means = np.array([s / z for s, z in zip(sums, sizes)])
    group_class = np.empty(len(vals), dtype=int)
    for c, (a, b) in enumerate(zip(bounds[:-1], bounds[1:])):
        group_class[a:b] = c
    err = total_err(bounds, sums, sizes)
    return PseudoClassAssignment(group_class[inverse], means, float(err), len(means))


def _class_index(bounds: list[int], g: int) -> int:
    # bounds is short (≤ k+1); linear scan is fine
    c = 0
    while bounds[c + 1] <= g:
        c += 1
    return c


def _shift(sums, sizes, src, dst, s, z):
    sums[src] -= s
    sizes[src] -= z
    sums[dst] += s
    sizes[dst] += z


def _merge_equal_means(bounds, gsum, cnts):
    out = [bounds[0]]
    prev_mean = None
    for a, b in zip(bounds[:-1], bounds[1:]):
        m = sum(gsum[a:b]) / sum(cnts[a:b])
        if prev_mean is not None and m == prev_mean:
            out[-1] = b
        else:
            out.append(b)
        prev_mean = m
    return out


def split_in_two(y, distance: str = ABSOLUTE) -> PseudoClassAssignment:
    """Two-way pseudo-class split used to break up the final class during covering."""
    y = np.asarray(y, dtype=float)
    if y.size < 2:
        raise ValueError("need at least two values to split")
    return p_class(y, 2, distance)
