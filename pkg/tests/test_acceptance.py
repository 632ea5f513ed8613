"""Acceptance criteria, one test and one printed PASS/FAIL line each.

Benchmark runs are shared between criteria through module-scoped fixtures.
"""

import sys
import time

import numpy as np
import pytest

from rulereg import modelio
from rulereg.benchmarks import available, fetch, load_benchmark
from rulereg.evaluation import FoldPlan, cross_validate, cross_validate_views
from rulereg.metrics import mad, median
from rulereg.methods import METHODS, RunConfig, fit
from rulereg.pclass import _initial_bounds, p_class
from rulereg.refine import build_ladder, swap_optimize
from rulereg.tree import predict_tree, tree_predict, tree_to_rules
from rulereg.rules import predict_constant

from conftest import make_data, random_data
from test_pclass import brute_min, partition_err
from test_refine import covering
from test_tree import random_tree

pytestmark = pytest.mark.slow


def timed(fn):
    t = time.perf_counter()
    out = fn()
    return out, time.perf_counter() - t


def run_views(name, method):
    data = load_benchmark(name)
    reports, secs = timed(lambda: cross_validate_views(RunConfig(method), data))
    return reports, secs


@pytest.fixture(scope="module")
def housing():
    rules, t_rules = run_views("housing", "rule-knn")
    tree, t_tree = run_views("housing", "tree")
    knn, t_knn = run_views("housing", "knn")
    return {**rules, **tree, **knn}, t_rules + t_tree + t_knn


def within(value, target, tol):
    return abs(value - target) <= tol


def fmt(reports, names):
    return " ".join(f"{n}={reports[n].relative_error:.3f}" for n in names)


# ---------------------------------------------------------------------------

def test_criterion_1_property_suite(record):
    failures = []
    t0 = time.perf_counter()
    rng = np.random.default_rng(101)

    for _ in range(1000):
        y = rng.integers(-50, 50, rng.integers(1, 15)).astype(float)
        if np.abs(y - median(y)).sum() > np.abs(y[:, None] - y[None, :]).sum(axis=0).min() + 1e-9:
            failures.append("median")
            break

    for _ in range(500):
        n = int(rng.integers(1, 13))
        k = int(rng.integers(1, min(4, n) + 1))
        y = rng.integers(0, 10, n).astype(float)
        a = p_class(y, k)
        vals, cnts = np.unique(y, return_counts=True)
        start = partition_err(vals, cnts, _initial_bounds(cnts, n, k))
        contiguous = np.all(np.diff(a.class_of[np.argsort(y, kind="stable")]) >= 0)
        if not (contiguous and brute_min(y, k) - 1e-9 <= a.err <= start + 1e-9):
            failures.append("p-class")
            break

    for _ in range(500):
        d = random_data(rng, n=100)
        root = random_tree(rng, d, int(rng.integers(0, 7)))
        rs = tree_to_rules(root, d.schema)
        batch = predict_tree(root, d)
        single = [tree_predict(root, d.row(i)) for i in range(d.n)]
        if not (np.array_equal(batch, rs.predict(d)) and batch.tolist() == single
                and single == [predict_constant(rs, d.row(i)) for i in range(d.n)]):
            failures.append("tree-rules")
            break

    for _ in range(50):
        d, rs = covering(rng)
        if mad(d.y, swap_optimize(rs, d).predict(d)) > mad(d.y, rs.predict(d)) + 1e-12:
            failures.append("swap")
            break

    for _ in range(20):
        cs = [e.complexity for e in build_ladder(random_data(rng, n=40), int(rng.integers(2, 6)))]
        if not all(a > b for a, b in zip(cs, cs[1:])):
            failures.append("ladder")
            break

    for n, folds in ((57, 10), (10, 10), (101, 7)):
        plan = FoldPlan.make(n, folds, 5)
        seen = sorted(np.concatenate([plan.test_indices(f) for f in range(folds)]).tolist())
        if seen != list(range(n)):
            failures.append("folds")
    d = make_data(np.arange(57)[:, None], np.arange(57) * 1000.0)
    seen_train = []

    class Spy:
        def predict(self, data):
            return np.zeros(data.n)

    def trainer(train):
        seen_train.append(set(train.y))
        return Spy()

    cross_validate(trainer, d, folds=10, seed=5)
    plan = FoldPlan.make(57, 10, 5)
    if any(set(d.y[plan.test_indices(f)]) & seen_train[f] for f in range(10)):
        failures.append("leakage")

    train = random_data(rng, n=50)
    for method in METHODS:
        m = fit(RunConfig(method, k_classes=(2, 3), folds=3), train)
        text = modelio.dumps(m)
        if modelio.dumps(modelio.loads(text)) != text:
            failures.append(f"round-trip {method}")

    secs = time.perf_counter() - t0
    ok = not failures
    record(1, ok, f"all property checks exact ({secs:.0f}s)" if ok else f"failed: {failures}")
    assert ok


def test_criterion_2_two_valued_target(record):
    y = np.array([2.0, 9, 9, 2, 2, 9, 2, 9, 9, 9, 2])
    a = p_class(y, 2)
    ok = a.k_effective == 2 and np.array_equal(a.class_of, (y == 9).astype(int))
    record(2, ok, f"classes={a.k_effective} means={a.class_means.tolist()}")
    assert ok


def test_criterion_3_synthetic_recovery(record):
    rng = np.random.default_rng(2024)
    X = rng.integers(0, 20, (300, 4)).astype(float)
    y = np.where(X[:, 0] <= 5, 10.0,
                 np.where(X[:, 1] > 12, 30.0, np.where(X[:, 2] <= 8, 50.0, 70.0)))
    d = make_data(X, y)
    t0 = time.perf_counter()
    model = fit(RunConfig("rule"), d)
    train_mad = mad(y, model.predict(d))
    cv = cross_validate(RunConfig("rule"), d)
    secs = time.perf_counter() - t0
    bound = 0.02 * np.ptp(y)
    ok = train_mad == 0 and cv.mean_mad <= bound and secs < 60
    record(3, ok, f"train MAD={train_mad:.4g} CV MAD={cv.mean_mad:.4g} (bound {bound:.2g}) "
                  f"complexity={model.complexity} {secs:.0f}s")
    assert ok


def test_criterion_4_housing(record, housing):
    r, secs = housing
    rel = {n: r[n].relative_error for n in ("tree", "rule", "knn", "rule-knn")}
    targets = {"tree": 0.42, "rule": 0.38, "knn": 0.42, "rule-knn": 0.36}
    misses = [n for n in targets if not within(rel[n], targets[n], 0.08)]
    hybrid_ok = rel["rule-knn"] <= rel["rule"] + 0.02
    ok = not misses and hybrid_ok and secs < 600
    detail = fmt(r, targets) + f" time={secs:.0f}s"
    if misses:
        detail += f" outside tolerance: {misses}"
    if not hybrid_ok:
        detail += " rule-knn not within 0.02 of rule"
    if secs >= 600:
        detail += " over 10 minutes"
    record(4, ok, detail)
    assert ok


def test_criterion_5_auto_mpg(record):
    rules, t1 = run_views("mpg", "rule-knn")
    tree, t2 = run_views("mpg", "tree")
    knn, t3 = run_views("mpg", "knn")
    r = {**rules, **tree, **knn}
    secs = t1 + t2 + t3
    targets = {"tree": (0.35, 0.08), "rule": (0.33, 0.08), "rule-knn": (0.31, 0.08),
               "knn": (0.33, 0.06)}
    misses = [n for n, (t, tol) in targets.items() if not within(r[n].relative_error, t, tol)]
    ok = not misses and secs < 300
    record(5, ok, fmt(r, targets) + f" time={secs:.0f}s" + (f" outside: {misses}" if misses else ""))
    assert ok


def test_criterion_6_servo_and_cpu(record):
    parts, ok = [], True
    for name, targets in (("servo", {"rule": 0.25, "rule-knn": 0.24}),
                          ("cpu", {"rule": 0.35, "rule-knn": 0.34})):
        if not available(name):
            try:
                fetch(name, timeout=15)
            except OSError as exc:
                ok = False
                parts.append(f"{name}: data unavailable (not bundled; download failed: {exc})")
                continue
        r, _ = run_views(name, "rule-knn")
        misses = [n for n, t in targets.items() if not within(r[n].relative_error, t, 0.10)]
        text = f"{name}: " + fmt(r, targets)
        if name == "cpu":
            tree, _ = run_views(name, "tree")
            beat = r["rule"].relative_error <= tree["tree"].relative_error + 0.03
            text += f" tree={tree['tree'].relative_error:.3f}"
            if not beat:
                misses.append("rule vs tree")
        if misses:
            ok = False
            text += f" outside: {misses}"
        parts.append(text)
    record(6, ok, "; ".join(parts))
    assert ok


def test_criterion_7_pseudo_class_sweep(record, housing):
    r, _ = housing
    curve = [r[f"rule k={k}"].relative_error for k in range(2, 9)]
    i = int(np.argmin(curve))
    tail = curve[i:]
    below = curve[i] < curve[0]
    plateau = max(tail) - min(tail) < 0.05
    ok = below and plateau
    shape = " ".join(f"k{k}={v:.3f}" for k, v in zip(range(2, 9), curve))
    record(7, ok, f"{shape} min at k={i + 2} post-min range={max(tail) - min(tail):.3f}")
    assert ok


def test_criterion_8_exclusions(record):
    # Systems and datasets that cannot be reproduced are not offered as methods.
    excluded = {"mars", "mt", "nnet", "mt-3nn"}
    ok = not excluded & set(METHODS)
    record(8, ok, "external systems and unavailable datasets excluded; nothing depends on them")
    assert ok


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v"]))
