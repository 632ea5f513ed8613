import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rulereg.induction import CoverState, enumerate_conditions, grow_rule, induce_covering
from rulereg.pclass import p_class
from rulereg.rules import Condition
from rulereg.scan import ConditionPool, compatible

from conftest import make_data, random_data


def test_pool_candidates_are_midpoints_and_levels():
    d = make_data([[1, 0], [3, 1], [3, 0], [6, 2]], [0, 0, 0, 0],
                  kinds=["continuous", "categorical"])
    conds = enumerate_conditions(d)
    assert conds[:4] == [Condition(0, "<=", 2), Condition(0, ">", 2),
                         Condition(0, "<=", 4.5), Condition(0, ">", 4.5)]
    assert {c for c in conds if c.feature == 1} == {
        Condition(1, op, f"v{v}") for v in range(3) for op in ("==", "!=")}


@given(st.integers(0, 10_000))
@settings(max_examples=60)
def test_pool_sums_match_masks(seed):
    rng = np.random.default_rng(seed)
    d = random_data(rng, n=25, p=3, n_cat=1)
    rows = np.sort(rng.choice(d.n, 18, replace=False))
    pool = ConditionPool(d, rows)
    W = rng.normal(size=(2, len(rows)))
    sums = pool.sums(W)
    for i in range(len(pool)):
        m = pool.condition(i).mask(d)[rows]
        assert np.array_equal(m, pool.mask(i))
        assert np.allclose(sums[:, i], W[:, m].sum(axis=1))
        assert pool.index_of(pool.condition(i)) == i


def test_compatible_rules():
    le, gt = Condition(0, "<=", 1), Condition(0, ">", 0)
    assert compatible([le], gt) and not compatible([le], Condition(0, "<=", 5))
    eq, ne = Condition(1, "==", "a"), Condition(1, "!=", "b")
    assert not compatible([eq], ne) and compatible([ne], Condition(1, "!=", "c"))
    assert not compatible([ne], ne) and compatible([eq], le)


def test_compatible_with_matches_scalar_rule():
    rng = np.random.default_rng(3)
    d = random_data(rng, n=30, p=3, n_cat=1)
    pool = ConditionPool(d)
    conds = pool.conditions
    for _ in range(50):
        existing = [conds[i] for i in rng.choice(len(conds), 2, replace=False)]
        ok = pool.compatible_with(existing)
        assert ok.tolist() == [compatible(existing, c) for c in conds]


def test_grow_rule_separates_when_possible():
    X = [[i] for i in range(10)]
    d = make_data(X, [0] * 10)
    pos = np.array([i < 4 for i in range(10)])
    conds = grow_rule(CoverState(d, np.arange(10), pos), m=3)
    assert conds == (Condition(0, "<=", 3.5),)


def test_grow_rule_respects_minimum_coverage():
    X = [[i] for i in range(10)]
    d = make_data(X, [0] * 10)
    pos = np.array([i in (0, 1, 5, 6) for i in range(10)])
    conds = grow_rule(CoverState(d, np.arange(10), pos), m=3)
    cover = np.ones(10, dtype=bool)
    for c in conds:
        cover &= c.mask(d)
    assert (cover & pos).sum() >= 3


def test_grow_rule_rejects_empty_class():
    d = make_data([[0], [1]], [0, 0])
    with pytest.raises(ValueError):
        grow_rule(CoverState(d, np.arange(2), np.zeros(2, dtype=bool)), m=1)


def test_covering_fits_separable_classes_exactly():
    rng = np.random.default_rng(0)
    X = rng.uniform(0, 10, (60, 2))
    y = np.where(X[:, 0] < 3, 1.0, np.where(X[:, 1] < 5, 5.0, 9.0))
    d = make_data(X, y)
    rs = induce_covering(d, p_class(y, 3), m=3)
    assert np.array_equal(rs.predict(d), y)


@given(st.integers(0, 10_000), st.integers(1, 5))
@settings(max_examples=40)
def test_covering_invariants(seed, m):
    rng = np.random.default_rng(seed)
    d = random_data(rng, n=30)
    k = int(rng.integers(1, 5))
    rs = induce_covering(d, p_class(d.y, k), m=m)
    assert all(len(r) > 0 for r in rs.rosters)
    assert all(r.conditions for r in rs.rules)
    for r in rs.rules:
        feats_ops = [(c.feature, c.op) for c in r.conditions if c.op in ("<=", ">")]
        assert len(feats_ops) == len(set(feats_ops))
    assert sorted(np.concatenate(rs.regions()).tolist()) == list(range(d.n))
