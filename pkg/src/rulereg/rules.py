"""Ordered rule sets (decision lists) with median-valued regions.

A rule set predicts with the first rule whose conjunction holds; cases no
rule claims fall through to a mandatory default. Each rule's *roster* is the
set of training cases for which it is the first satisfied rule, and its
value is the median of the roster's targets.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .dataset import Dataset, FeatureSchema
from .metrics import median

LE, GT, EQ, NE = "<=", ">", "==", "!="
CONTINUOUS_OPS = (LE, GT)
CATEGORICAL_OPS = (EQ, NE)
DEFAULT = -1


@dataclass(frozen=True, order=True)
class Condition:
    """A single test on one feature: ``x[f] <= t``, ``x[f] > t``, ``x[f] == v`` or ``x[f] != v``."""

    feature: int
    op: str
    value: float | str

    def __post_init__(self):
        if self.op in CONTINUOUS_OPS:
            v = float(self.value)
            if not np.isfinite(v):
                raise ValueError("thresholds must be finite")
            object.__setattr__(self, "value", v)
        elif self.op in CATEGORICAL_OPS:
            object.__setattr__(self, "value", str(self.value))
        else:
            raise ValueError(f"unknown operator {self.op!r}")

    @property
    def is_categorical(self) -> bool:
        return self.op in CATEGORICAL_OPS

    def holds(self, v) -> bool:
        if self.op == LE:
            return float(v) <= self.value
        if self.op == GT:
            return float(v) > self.value
        if self.op == EQ:
            return v is not None and str(v) == self.value
        return v is None or str(v) != self.value

    def mask(self, data: Dataset) -> np.ndarray:
        col = data.X[:, self.feature]
        if self.op == LE:
            return col <= self.value
        if self.op == GT:
            return col > self.value
        code = data.code_of(self.feature, self.value)
        if self.op == EQ:
            return col == code if code >= 0 else np.zeros(len(col), dtype=bool)
        return col != code if code >= 0 else np.ones(len(col), dtype=bool)

    def negate(self) -> "Condition":
        flip = {LE: GT, GT: LE, EQ: NE, NE: EQ}
        return Condition(self.feature, flip[self.op], self.value)

    def describe(self, schema: FeatureSchema | None = None) -> str:
        name = schema.features[self.feature].name if schema else f"x{self.feature}"
        op = {EQ: "=", NE: "!="}.get(self.op, self.op)
        val = f"{self.value:.6g}" if isinstance(self.value, float) else self.value
        return f"{name} {op} {val}"


def collapse(conditions: Sequence[Condition]) -> tuple[Condition, ...]:
    """Drop conditions made redundant by a tighter one on the same feature.

    Keeps the smallest ``<=`` and the largest ``>`` threshold per feature and
    removes duplicate categorical tests, preserving first-seen order.
    """
    tight = {}
    for c in conditions:
        key = (c.feature, c.op)
        if c.op == LE:
            tight[key] = min(tight.get(key, c.value), c.value)
        elif c.op == GT:
            tight[key] = max(tight.get(key, c.value), c.value)
    out, seen = [], set()
    for c in conditions:
        key = (c.feature, c.op)
        if c.op in CONTINUOUS_OPS:
            if key in seen:
                continue
            seen.add(key)
            out.append(Condition(c.feature, c.op, tight[key]))
        elif c not in seen:
            seen.add(c)
            out.append(c)
    return tuple(out)


@dataclass(frozen=True)
class Rule:
    conditions: tuple[Condition, ...]
    value: float

    def holds(self, x: Sequence) -> bool:
        return all(c.holds(x[c.feature]) for c in self.conditions)

    def describe(self, schema=None) -> str:
        if not self.conditions:
            return "TRUE"
        return " AND ".join(c.describe(schema) for c in self.conditions)


@dataclass(frozen=True, eq=False)
class RuleSet:
    rules: tuple[Rule, ...]
    default_value: float
    schema: FeatureSchema
    rosters: tuple[np.ndarray, ...] = ()
    default_roster: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))

    def __len__(self):
        return len(self.rules)

    @property
    def values(self) -> np.ndarray:
        """Rule values with the default value appended (so index -1 is the default)."""
        return np.array([r.value for r in self.rules] + [self.default_value])

    def match(self, data: Dataset, masks=None) -> np.ndarray:
        """First-match rule index per case; DEFAULT (-1) when no rule holds."""
        return match_index(self.rules, data, masks)

    def predict(self, data: Dataset) -> np.ndarray:
        return self.values[self.match(data)]

    def regions(self) -> list[np.ndarray]:
        """Training rosters for each rule followed by the default roster."""
        return list(self.rosters) + [self.default_roster]

    def same_structure(self, other: "RuleSet") -> bool:
        return [r.conditions for r in self.rules] == [r.conditions for r in other.rules]


class MaskCache:
    """Memoized condition masks over one dataset."""

    def __init__(self, data: Dataset):
        self.data = data
        self._cache: dict[Condition, np.ndarray] = {}

    def __call__(self, cond: Condition) -> np.ndarray:
        m = self._cache.get(cond)
        if m is None:
            m = cond.mask(self.data)
            if len(self._cache) > 200_000:
                self._cache.clear()
            self._cache[cond] = m
        return m

    def rule(self, rule: Rule) -> np.ndarray:
        out = np.ones(self.data.n, dtype=bool)
        for c in rule.conditions:
            out &= self(c)
        return out


def match_index(rules: Sequence[Rule], data: Dataset, masks: MaskCache | None = None) -> np.ndarray:
    masks = masks or MaskCache(data)
    idx = np.full(data.n, DEFAULT, dtype=int)
    open_ = np.ones(data.n, dtype=bool)
    for i, r in enumerate(rules):
        hit = open_ & masks.rule(r)
        idx[hit] = i
        open_ &= ~hit
        if not open_.any():
            break
    return idx


def first_match(rs: RuleSet, x: Sequence) -> int:
    """Index of the first rule satisfied by raw case values ``x``, or DEFAULT."""
    for i, r in enumerate(rs.rules):
        if r.holds(x):
            return i
    return DEFAULT


def predict_constant(rs: RuleSet, x: Sequence) -> float:
    i = first_match(rs, x)
    return rs.default_value if i == DEFAULT else rs.rules[i].value


def complexity(rs: RuleSet) -> int:
    """Total number of conditions over all rules."""
    return sum(len(r.conditions) for r in rs.rules)


def make_ruleset(conditions: Sequence[Sequence[Condition]], train: Dataset,
                 masks: MaskCache | None = None) -> RuleSet:
    """Build a rule set from condition lists, valuing rules from ``train``."""
    rules = tuple(Rule(tuple(c), 0.0) for c in conditions)
    return recompute_medians(RuleSet(rules, 0.0, train.schema), train, masks)


def recompute_medians(rs: RuleSet, train: Dataset, masks: MaskCache | None = None) -> RuleSet:
    """Rebuild first-match rosters on ``train`` and reset every value to its roster median.

    Rules with an empty roster are deleted. A rule with no conditions claims
    every remaining case, so it and everything after it collapse into the
    default. The default value is the median of unclaimed cases, or the
    global median when every case is claimed.
    """
    masks = masks or MaskCache(train)
    kept = []
    for r in rs.rules:
        if not r.conditions:
            break
        kept.append(r)
    idx = match_index(kept, train, masks)
    rules, rosters = [], []
    for i, r in enumerate(kept):
        roster = np.flatnonzero(idx == i)
        if roster.size == 0:
            continue
        rules.append(Rule(r.conditions, median(train.y[roster])))
        rosters.append(roster)
    default_roster = np.flatnonzero(idx == DEFAULT)
    if default_roster.size:
        default_value = median(train.y[default_roster])
    else:
        default_value = median(train.y)
    return RuleSet(tuple(rules), default_value, train.schema, tuple(rosters), default_roster)


def with_frozen_values(rs: RuleSet, conditions: Sequence[Sequence[Condition]], values) -> RuleSet:
    """Rule set with explicit values, used to score edits before medians are recomputed."""
    rules = tuple(Rule(tuple(c), float(v)) for c, v in zip(conditions, values))
    return replace(rs, rules=rules, rosters=(), default_roster=np.zeros(0, dtype=int))


def format_ruleset(rs: RuleSet) -> str:
    """One line per rule, in order, then the default line."""
    lines = []
    for r, roster in zip(rs.rules, rs.rosters or [None] * len(rs.rules)):
        cov = "" if roster is None else f" (covers {len(roster)})"
        lines.append(f"IF {r.describe(rs.schema)} THEN y = {r.value:.6g}{cov}")
    cov = f" (covers {len(rs.default_roster)})" if rs.rosters or rs.default_roster.size else ""
    lines.append(f"ELSE y = {rs.default_value:.6g}{cov}")
    return "\n".join(lines)
