"""Weakest-link rule pruning, swap optimization and the train/select pipeline.

Both pruning and swapping score candidate edits against the *current*
rule values (medians frozen) and only recompute medians once an edit has
been chosen. Scoring is incremental: an edit to rule ``r`` can only change
the prediction of cases whose first match is ``r`` (they may fall through)
or comes after ``r`` (they may be captured).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .dataset import Dataset
from .induction import induce_covering
from .metrics import gcv, mad
from .pclass import ABSOLUTE, p_class
from .rules import DEFAULT, EQ, NE, Condition, MaskCache, Rule, RuleSet, complexity, recompute_medians
from ._kernels import condition_mask, evaluate, prune_choice, swap_choice
from .scan import _OPCODE, OPS, ConditionPool
from .selection import select_by_cv

log = logging.getLogger(__name__)


class NothingToPrune(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class PruneCandidate:
    kind: str                 # "delete-rule" | "delete-condition"
    rule: int
    condition: int | None
    delta: float
    n_removed: int

    @property
    def ratio(self) -> float:
        return self.delta / self.n_removed


@dataclass(eq=False)
class _Frozen:
    """First-match bookkeeping for a rule set on its training data."""

    rs: RuleSet
    y: np.ndarray
    cover: np.ndarray      # (R, n) rule coverage
    match: np.ndarray      # first match per case, DEFAULT for the default
    values: np.ndarray     # rule values + default value at the end
    err: np.ndarray        # per-case absolute error
    fallback: np.ndarray   # rule that would claim each case if its own rule vanished

    @classmethod
    def build(cls, rs: RuleSet, train: Dataset, masks: MaskCache):
        R, n = len(rs.rules), train.n
        cover = np.array([masks.rule(r) for r in rs.rules]).reshape(R, n)
        claimed = np.where(cover.any(axis=0), cover.argmax(axis=0), DEFAULT) if R else np.full(n, DEFAULT)
        values = rs.values
        err = np.abs(train.y - values[claimed])
        own = np.where(claimed == DEFAULT, R, claimed)
        later = cover & (np.arange(R)[:, None] > own[None, :])
        fallback = np.where(later.any(axis=0), later.argmax(axis=0), DEFAULT) if R else claimed
        return cls(rs, train.y, cover, claimed, values, err, fallback)

    def after(self, r: int) -> np.ndarray:
        """Cases whose first match comes after rule ``r`` (default included)."""
        return (self.match > r) | (self.match == DEFAULT)


def _condition_table(rs: RuleSet, masks: MaskCache):
    rule_of, cond_of, mats = [], [], []
    for r, rule in enumerate(rs.rules):
        for j, c in enumerate(rule.conditions):
            rule_of.append(r)
            cond_of.append(j)
            mats.append(masks(c))
    return np.array(rule_of, dtype=int), np.array(cond_of, dtype=int), mats


def _others_hold(rs: RuleSet, mats, rule_of, n):
    """For every (rule, condition): mask of cases satisfying the rule's *other* conditions."""
    M = np.array(mats).reshape(len(mats), n)
    lengths = np.array([len(r.conditions) for r in rs.rules])
    starts = np.concatenate([[0], np.cumsum(lengths)[:-1]])
    S = np.add.reduceat(M.astype(np.int32), starts, axis=0) if len(M) else np.zeros((0, n), int)
    L = lengths[rule_of][:, None]
    Sr = S[rule_of]
    return (Sr == L) | ((Sr == L - 1) & ~M)


def prune_candidates(rs: RuleSet, train: Dataset, masks: MaskCache | None = None) -> list[PruneCandidate]:
    """Every single-rule and single-condition deletion with its frozen-median MAD increase."""
    masks = masks or MaskCache(train)
    st = _Frozen.build(rs, train, masks)
    n, R = train.n, len(rs.rules)
    lengths = [len(r.conditions) for r in rs.rules]
    out = []

    lost = np.abs(st.y - st.values[st.fallback]) - st.err
    own = st.match >= 0
    d_rule = np.bincount(st.match[own], weights=lost[own], minlength=R) / n
    for r in range(R):
        out.append(PruneCandidate("delete-rule", r, None, float(d_rule[r]), lengths[r]))

    rule_of, cond_of, mats = _condition_table(rs, masks)
    if len(mats):
        B = _others_hold(rs, mats, rule_of, n)
        after = (st.match[None, :] > rule_of[:, None]) | (st.match[None, :] == DEFAULT)
        gain = np.abs(st.y[None, :] - st.values[rule_of][:, None]) - st.err[None, :]
        d_cond = np.where(B & after, gain, 0.0).sum(axis=1) / n
        tail = np.cumsum(lengths[::-1])[::-1]  # conditions in rules r.. end
        for t, (r, j) in enumerate(zip(rule_of, cond_of)):
            if lengths[r] == 1:
                # rule becomes always-true: later rules become unreachable
                removed = 1 + (int(tail[r + 1]) if r + 1 < R else 0)
            else:
                removed = 1
            out.append(PruneCandidate("delete-condition", int(r), int(j), float(d_cond[t]), removed))
    return out


def _select(cands: list[PruneCandidate]) -> PruneCandidate:
    def key(c):
        j = -1 if c.condition is None else c.condition
        return (c.ratio, -c.n_removed, c.rule, j)
    return min(cands, key=key)


def apply_prune(rs: RuleSet, cand: PruneCandidate) -> RuleSet:
    """Structural edit only; values are stale until medians are recomputed."""
    rules = list(rs.rules)
    if cand.kind == "delete-rule":
        del rules[cand.rule]
    else:
        r = rules[cand.rule]
        conds = r.conditions[:cand.condition] + r.conditions[cand.condition + 1:]
        rules[cand.rule] = Rule(conds, r.value)
    return RuleSet(tuple(rules), rs.default_value, rs.schema)


class _Arrays:
    """Rule set as flat condition arrays over one training set.

    Structural edits keep the arrays normalized the same way
    :func:`recompute_medians` does: rules after a condition-free rule are
    cut and rules whose roster is empty are removed.
    """

    def __init__(self, rs: RuleSet, train: Dataset, masks: MaskCache):
        self.train = train
        self.y = np.ascontiguousarray(train.y, dtype=float)
        conds = [c for r in rs.rules for c in r.conditions]
        n = train.n
        self.M = np.array([masks(c) for c in conds], dtype=bool).reshape(len(conds), n)
        self.cf = np.array([c.feature for c in conds], dtype=np.int64)
        self.co = np.array([_OPCODE[c.op] for c in conds], dtype=np.int64)
        self.cv = np.array([train.code_of(c.feature, c.value) if c.is_categorical else c.value
                            for c in conds], dtype=float)
        self.start = np.concatenate([[0], np.cumsum([len(r.conditions) for r in rs.rules])]).astype(np.int64)
        self.normalize()

    @property
    def complexity(self) -> int:
        return int(self.start[-1])

    def evaluate(self):
        self.state = evaluate(self.M, self.start, self.y)
        return self.state

    def _set_rules(self, keep_rules: np.ndarray, lengths: np.ndarray):
        owner = np.repeat(np.arange(len(lengths)), lengths)
        keep = keep_rules[owner] if len(owner) else np.zeros(0, dtype=bool)
        self.M, self.cf, self.co, self.cv = self.M[keep], self.cf[keep], self.co[keep], self.cv[keep]
        self.start = np.concatenate([[0], np.cumsum(lengths[keep_rules])]).astype(np.int64)

    def normalize(self):
        lengths = np.diff(self.start)
        empty = np.flatnonzero(lengths == 0)
        if empty.size:
            self._set_rules(np.arange(len(lengths)) < empty[0], lengths)
        S, match, fallback, values, err, size = self.evaluate()
        dead = size[:-1] == 0
        if dead.any():
            self._set_rules(~dead, np.diff(self.start))
            self.evaluate()

    def delete_rule(self, r: int):
        keep = np.ones(len(self.start) - 1, dtype=bool)
        keep[r] = False
        self._set_rules(keep, np.diff(self.start))
        self.normalize()

    def delete_condition(self, r: int, j: int):
        c = self.start[r] + j
        keep = np.ones(len(self.cf), dtype=bool)
        keep[c] = False
        self.M, self.cf, self.co, self.cv = self.M[keep], self.cf[keep], self.co[keep], self.cv[keep]
        self.start = self.start.copy()
        self.start[r + 1:] -= 1
        self.normalize()

    def replace(self, c: int, pool: ConditionPool, i: int):
        f, op, v = int(pool.feature[i]), int(pool.opcode[i]), float(pool.value[i])
        self.M[c] = condition_mask(self.train.X[:, f], op, v)
        self.cf[c], self.co[c], self.cv[c] = f, op, v
        self.normalize()

    def prune(self):
        if self.complexity == 0:
            raise NothingToPrune("rule set has no conditions left to prune")
        S, match, fallback, values, err, _ = self.state
        r, j = prune_choice(self.M, self.start, self.y, S, match, fallback, values, err)
        if j < 0:
            self.delete_rule(r)
        else:
            self.delete_condition(r, j)

    def swap_round(self, pool: ConditionPool) -> bool:
        S, match, fallback, values, err, _ = self.state
        # strict improvement, guarded against rounding noise
        tol = 1e-9 * max(1.0, float(err.sum()))
        c, i = swap_choice(self.M, self.start, self.cf, self.co, self.cv, self.y, S, match,
                           fallback, values, err, pool.block_order, pool.block_rank, pool.block_start,
                           pool.lo, pool.hi, pool.opcode, pool.feature, pool.value, tol)
        if c < 0:
            return False
        self.replace(c, pool, i)
        return True

    def swap_optimize(self, pool: ConditionPool, max_iter: int = 10_000):
        for _ in range(max_iter):
            if self.complexity == 0 or not self.swap_round(pool):
                return
        log.warning("swap optimization stopped after %d rounds", max_iter)

    def ruleset(self, masks: MaskCache | None = None) -> RuleSet:
        levels = self.train.levels
        rules = []
        for r in range(len(self.start) - 1):
            conds = []
            for c in range(self.start[r], self.start[r + 1]):
                f, op, v = int(self.cf[c]), OPS[self.co[c]], self.cv[c]
                conds.append(Condition(f, op, levels[f][int(v)] if op in (EQ, NE) else float(v)))
            rules.append(Rule(tuple(conds), 0.0))
        return recompute_medians(RuleSet(tuple(rules), 0.0, self.train.schema), self.train, masks)


def prune_step(rs: RuleSet, train: Dataset, masks: MaskCache | None = None) -> RuleSet:
    """Apply the deletion with the smallest MAD increase per condition removed."""
    if complexity(rs) == 0:
        raise NothingToPrune("rule set has no conditions left to prune")
    masks = masks or MaskCache(train)
    arr = _Arrays(rs, train, masks)
    arr.prune()
    return arr.ruleset(masks)


def swap_optimize(rs: RuleSet, train: Dataset, masks: MaskCache | None = None,
                  pool: ConditionPool | None = None, max_iter: int = 10_000) -> RuleSet:
    """Local search replacing one condition at a time by the best alternative.

    Each round scores every (rule, condition, replacement) triple by training
    MAD with the current rule values, applies the single best strict
    improvement and recomputes medians. Replacements must leave the edited
    rule with a non-empty roster and must not duplicate a test in the rule.
    """
    masks = masks or MaskCache(train)
    arr = _Arrays(rs, train, masks)
    arr.swap_optimize(pool or ConditionPool(train), max_iter)
    return arr.ruleset(masks)


@dataclass(frozen=True)
class RuleConfig:
    k_classes: int = 5
    m: int = 3
    checkpoint_ratio: float = 0.9
    folds: int = 10
    seed: int = 0
    selection: str = "cv"           # "cv" | "gcv"
    distance: str = ABSOLUTE

    def __post_init__(self):
        if self.k_classes < 1:
            raise ValueError("k_classes must be at least 1")
        if self.m < 1:
            raise ValueError("m must be at least 1")
        if not 0 < self.checkpoint_ratio <= 1:
            raise ValueError("checkpoint_ratio must be in (0, 1]")
        if self.selection not in ("cv", "gcv"):
            raise ValueError("selection must be 'cv' or 'gcv'")
        if self.selection == "cv" and self.folds < 2:
            raise ValueError("cv selection needs at least 2 folds")


@dataclass(eq=False)
class LadderEntry:
    ruleset: RuleSet
    complexity: int
    train_mad: float
    est_mad: float = float("nan")


@dataclass(eq=False)
class ModelLadder:
    saved: list[LadderEntry] = field(default_factory=list)

    def __len__(self):
        return len(self.saved)

    def __iter__(self):
        return iter(self.saved)

    def best(self) -> LadderEntry:
        return min(self.saved, key=lambda e: (e.est_mad, e.complexity))

    def dump(self) -> str:
        lines = ["complexity  train_mad  est_mad"]
        for e in self.saved:
            lines.append(f"{e.complexity:10d}  {e.train_mad:9.4f}  {e.est_mad:7.4f}")
        return "\n".join(lines)


def build_ladder(train: Dataset, k_classes: int, m: int = 3, checkpoint_ratio: float = 0.9,
                 distance: str = ABSOLUTE) -> ModelLadder:
    """Covering set followed by progressively pruned, swap-optimized rule sets.

    Pruning runs one weakest-link step at a time; once complexity drops
    below ``checkpoint_ratio`` times the last saved complexity the set is
    swap-optimized and saved. The last entry is always the default-only set.
    """
    masks = MaskCache(train)
    pool = ConditionPool(train)
    assignment = p_class(train.y, min(k_classes, train.n), distance)
    cur = induce_covering(train, assignment, m, distance)
    ladder = ModelLadder([_entry(cur, train)])
    arr = _Arrays(cur, train, masks)
    while arr.complexity > 0:
        arr.prune()
        c = arr.complexity
        if c < checkpoint_ratio * ladder.saved[-1].complexity or c == 0:
            arr.swap_optimize(pool)
            ladder.saved.append(_entry(arr.ruleset(masks), train))
    return ladder


def _entry(rs: RuleSet, train: Dataset) -> LadderEntry:
    return LadderEntry(rs, complexity(rs), mad(train.y, rs.predict(train)))


def train_pipeline(train: Dataset, config: RuleConfig = RuleConfig()) -> tuple[RuleSet, ModelLadder]:
    """Learn a rule set: pseudo-classes, covering, prune/optimize ladder, selection."""
    if train.n == 0:
        raise ValueError("empty training set")

    def make(data):
        return build_ladder(data, config.k_classes, config.m, config.checkpoint_ratio,
                            config.distance).saved

    if config.selection == "cv" and train.n >= config.folds:
        entries, est = select_by_cv(train, make, config.folds, config.seed,
                                    predict=lambda e, d: e.ruleset.predict(d))
    else:
        entries = make(train)
        est = [_gcv_or_inf(e.train_mad, e.complexity, train.n) for e in entries]
    for e, v in zip(entries, est):
        e.est_mad = float(v)
    ladder = ModelLadder(entries)
    return ladder.best().ruleset, ladder


def _gcv_or_inf(train_mad, c, n):
    return gcv(train_mad, c, n) if c < n else float("inf")
