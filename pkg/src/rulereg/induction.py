"""Covering induction of an ordered rule set for a pseudo-class problem.

Classes are covered one at a time in ascending order of their mean. For the
current class, rules are grown against the remaining live cases (current
class versus all higher classes) until every live case of the class is
covered. The last class is not left as one big default: while enough live
cases remain it is split in two and the lower half is covered in turn.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import Dataset
from .pclass import ABSOLUTE, PseudoClassAssignment, split_in_two
from .rules import Condition, MaskCache, RuleSet, make_ruleset
from .scan import ConditionPool


def enumerate_conditions(data: Dataset, live=None) -> list[Condition]:
    """Every candidate condition over the live cases (all cases by default)."""
    return ConditionPool(data, live).conditions


@dataclass
class CoverState:
    data: Dataset
    live: np.ndarray        # indices into data not yet covered
    positive: np.ndarray    # bool per live case: belongs to the current class


def _best(fp: np.ndarray, tp: np.ndarray, ok: np.ndarray) -> int:
    """Index minimizing false positives, then maximizing true positives, then lowest index."""
    cand = np.flatnonzero(ok)
    if cand.size == 0:
        return -1
    order = np.lexsort((cand, -tp[cand], fp[cand]))
    return int(cand[order[0]])


def grow_rule(state: CoverState, m: int, pool: ConditionPool | None = None) -> tuple[Condition, ...]:
    """Grow one conjunction for the current class over the live cases.

    Conditions are added greedily by fewest false positives (ties: more
    true positives, then pool order, i.e. lowest feature and smallest
    threshold), never letting current-class coverage drop below ``m`` (or
    the whole live class when it is smaller). After each addition every
    condition is offered for replacement by any candidate that lowers false
    positives without losing true positives.
    """
    pool = pool or ConditionPool(state.data, state.live)
    pos = np.asarray(state.positive, dtype=bool)
    neg = ~pos
    tp, fp = int(pos.sum()), int(neg.sum())
    if tp == 0:
        raise ValueError("no live case of the current class")
    floor = min(m, tp)
    chosen: list[int] = []
    cover = np.ones(pool.n, dtype=bool)

    while fp > 0:
        TP, FP = pool.counts(np.vstack([cover & pos, cover & neg]))
        ok = (TP >= floor) & (FP < fp) & pool.compatible_with([pool.condition(i) for i in chosen])
        i = _best(FP, TP, ok)
        if i < 0:
            break
        chosen.append(i)
        cover &= pool.mask(i)
        tp, fp = int(TP[i]), int(FP[i])
        chosen, cover, tp, fp = _swap_pass(pool, chosen, pos, neg, tp, fp)

    return tuple(pool.condition(i) for i in chosen)


def _swap_pass(pool, chosen, pos, neg, tp, fp):
    """Best-improvement single-condition replacement until none lowers false positives."""
    while fp > 0 and len(chosen) > 1:
        masks = [pool.mask(i) for i in chosen]
        rows, best = [], None
        for j in range(len(chosen)):
            base = np.ones(pool.n, dtype=bool)
            for k, mk in enumerate(masks):
                if k != j:
                    base &= mk
            rows += [base & pos, base & neg]
        S = pool.counts(np.vstack(rows))
        for j in range(len(chosen)):
            TP, FP = S[2 * j], S[2 * j + 1]
            others = [pool.condition(i) for k, i in enumerate(chosen) if k != j]
            ok = (FP < fp) & (TP >= tp) & pool.compatible_with(others)
            i = _best(FP, TP, ok)
            if i < 0:
                continue
            key = (FP[i], -TP[i], j, i)
            if best is None or key < best:
                best = key
        if best is None:
            break
        fpn, ntp, j, i = best
        chosen = chosen[:j] + [int(i)] + chosen[j + 1:]
        tp, fp = int(-ntp), int(fpn)
    cover = np.ones(pool.n, dtype=bool)
    for i in chosen:
        cover &= pool.mask(i)
    return chosen, cover, tp, fp


def _cover_class(data, live, positive, m, rules):
    """Append rules until no live positive case remains; return the new live set."""
    positive = positive.copy()
    while positive.any():
        pool = ConditionPool(data, live)
        conds = grow_rule(CoverState(data, live, positive), m, pool)
        covered = np.ones(len(live), dtype=bool)
        for c in conds:
            covered &= c.mask(data)[live]
        if not (covered & positive).any():  # pragma: no cover - grow_rule guarantees coverage
            break
        rules.append(conds)
        live, positive = live[~covered], positive[~covered]
        if not conds:
            break
    return live


def induce_covering(train: Dataset, assignment: PseudoClassAssignment, m: int = 3,
                    distance: str = ABSOLUTE) -> RuleSet:
    """Covering rule set for the pseudo-class problem, valued by first-match medians."""
    if train.n == 0:
        raise ValueError("empty dataset")
    if m < 1:
        raise ValueError("m must be at least 1")
    labels = np.asarray(assignment.class_of)
    n_classes = int(labels.max()) + 1
    live = np.arange(train.n)
    rules: list[tuple[Condition, ...]] = []

    for c in range(n_classes - 1):
        if live.size == 0:
            break
        live = _cover_class(train, live, labels[live] == c, m, rules)
        if rules and not rules[-1]:
            live = live[:0]

    while live.size >= max(m, 2):
        split = split_in_two(train.y[live], distance)
        if split.k_effective < 2:
            break
        live = _cover_class(train, live, split.class_of == 0, m, rules)
        if rules and not rules[-1]:
            break

    return make_ruleset(rules, train, MaskCache(train))
