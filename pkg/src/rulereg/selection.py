"""Fold plans and cross-validated selection along a model ladder."""

from __future__ import annotations

import numpy as np

from .dataset import Dataset


def fold_plan(n: int, folds: int, seed: int) -> np.ndarray:
    """Seeded shuffle, then round-robin fold ids."""
    if folds < 2 or folds > n:
        raise ValueError(f"need 2 <= folds <= n (folds={folds}, n={n})")
    perm = np.random.default_rng(seed).permutation(n)
    fold_of = np.empty(n, dtype=int)
    fold_of[perm] = np.arange(n) % folds
    return fold_of


def nearest_by_complexity(complexities, c) -> int:
    """Index of the entry whose complexity is closest to ``c`` (ties: the simpler one)."""
    cs = np.asarray(complexities)
    d = np.abs(cs - c)
    cand = np.flatnonzero(d == d.min())
    return int(cand[np.argmin(cs[cand])])


def cv_estimates(ladder_complexities, fold_results, n: int) -> np.ndarray:
    """Map held-out errors of per-fold ladders onto a full-data ladder.

    ``fold_results`` holds, per fold, a list of ``(complexity, abs_error_sum)``
    pairs. Each full-data entry takes, in every fold, the error of the fold
    model with the nearest complexity.
    """
    est = np.zeros(len(ladder_complexities))
    for results in fold_results:
        cs = [c for c, _ in results]
        for e, c in enumerate(ladder_complexities):
            est[e] += results[nearest_by_complexity(cs, c)][1]
    return est / n


def select_by_cv(train: Dataset, make_ladder, folds: int, seed: int,
                 predict=lambda model, data: model.predict(data),
                 complexity_of=lambda entry: entry.complexity,
                 predict_ladder=None):
    """Run ``make_ladder`` on the full data and on each inner training fold.

    ``predict_ladder(entries, data)``, when given, returns every entry's
    predictions at once and replaces per-entry ``predict`` calls. Returns
    the full ladder's entries and their cross-validated MAD estimates.
    """
    if predict_ladder is None:
        def predict_ladder(entries, data):
            return [predict(e, data) for e in entries]
    full = make_ladder(train)
    plan = fold_plan(train.n, folds, seed)
    fold_results = []
    for f in range(folds):
        tr, te = np.flatnonzero(plan != f), np.flatnonzero(plan == f)
        test = train.subset(te)
        lad = make_ladder(train.subset(tr))
        preds = predict_ladder(lad, test)
        fold_results.append([
            (complexity_of(e), float(np.abs(test.y - p).sum())) for e, p in zip(lad, preds)
        ])
    return full, cv_estimates([complexity_of(e) for e in full], fold_results, train.n)
