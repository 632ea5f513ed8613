"""Error measures and cheap model-selection estimators."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def _pair(actual, predicted):
    a = np.asarray(actual, dtype=float)
    p = np.asarray(predicted, dtype=float)
    if a.shape != p.shape:
        raise ValueError(f"length mismatch: {a.shape} vs {p.shape}")
    if a.size == 0:
        raise ValueError("empty input")
    return a, p


def mad(actual, predicted) -> float:
    """Mean absolute distance between paired values."""
    a, p = _pair(actual, predicted)
    return float(np.mean(np.abs(a - p)))


def variance_err(actual, predicted) -> float:
    """Mean squared distance between paired values."""
    a, p = _pair(actual, predicted)
    return float(np.mean((a - p) ** 2))


def median(values) -> float:
    """Sample median; even-length input averages the two middle values."""
    v = np.sort(np.asarray(values, dtype=float))
    if v.size == 0:
        raise ValueError("median of empty input")
    mid = v.size // 2
    if v.size % 2:
        return float(v[mid])
    return float((v[mid - 1] + v[mid]) / 2.0)


def relative_error(model_mad: float, baseline_mad: float) -> float:
    """Model MAD normalized by the MAD of always predicting the median."""
    if baseline_mad <= 0:
        raise ValueError("baseline MAD is zero: the target is constant")
    return model_mad / baseline_mad


def baseline_mad(y) -> float:
    """MAD of predicting ``median(y)`` for every case of ``y``."""
    y = np.asarray(y, dtype=float)
    return float(np.mean(np.abs(y - median(y))))


def gcv(train_mad: float, c_model: float, n: int) -> float:
    """Generalized cross-validation estimate: ``train_mad / (1 - C(M)/n)``.

    ``c_model`` is the model complexity: condition count for rule sets,
    internal-node count for trees.
    """
    if c_model < 0:
        raise ValueError("complexity must be non-negative")
    if c_model >= n:
        raise ValueError(f"complexity {c_model} must be less than n={n}")
    return train_mad / (1.0 - c_model / n)


@dataclass(frozen=True)
class ErrorSummary:
    mad: float
    variance: float
    n: int


def summarize(actual, predicted) -> ErrorSummary:
    a, p = _pair(actual, predicted)
    return ErrorSummary(mad(a, p), variance_err(a, p), a.size)
