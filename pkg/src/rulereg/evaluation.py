"""Cross-validation, holdout evaluation, and the two-standard-error comparison.

All errors are absolute deviations. A report's relative error divides its
mean MAD by the MAD of predicting the median of the whole dataset.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .dataset import Dataset, check_compatible
from .metrics import baseline_mad
from .methods import FittedModel, RunConfig, complexity_of, fit, predict_with
from .selection import fold_plan


class FoldError(RuntimeError):
    """A trainer failed on one fold; ``fold`` names it."""

    def __init__(self, fold: int, cause: Exception):
        super().__init__(f"training failed on fold {fold}: {cause}")
        self.fold = fold


@dataclass(frozen=True, eq=False)
class FoldPlan:
    seed: int
    fold_count: int
    fold_of: np.ndarray

    @classmethod
    def make(cls, n: int, folds: int = 10, seed: int = 0, y=None) -> "FoldPlan":
        """Seeded shuffle, then round-robin fold ids.

        With ``y`` given the shuffled cases are first stably sorted by target,
        so every fold spans the target range.
        """
        if y is None:
            return cls(seed, folds, fold_plan(n, folds, seed))
        if folds < 2 or folds > n:
            raise ValueError(f"need 2 <= folds <= n (folds={folds}, n={n})")
        perm = np.random.default_rng(seed).permutation(n)
        order = perm[np.argsort(np.asarray(y)[perm], kind="stable")]
        fold_of = np.empty(n, dtype=int)
        fold_of[order] = np.arange(n) % folds
        return cls(seed, folds, fold_of)

    def test_indices(self, f: int) -> np.ndarray:
        return np.flatnonzero(self.fold_of == f)

    def train_indices(self, f: int) -> np.ndarray:
        return np.flatnonzero(self.fold_of != f)

    @property
    def sizes(self) -> np.ndarray:
        return np.bincount(self.fold_of, minlength=self.fold_count)


@dataclass(eq=False)
class EvalReport:
    """Errors of one method under one protocol.

    ``se`` is the spread of fold MADs over the square root of the fold
    count; ``case_se`` is the spread of per-case errors over the square
    root of the case count. Holdout reports have a single fold and use the
    case-based value for both.
    """

    label: str
    errors: np.ndarray              # absolute error per case, in case order
    fold_of: np.ndarray             # fold id per case
    baseline: float
    complexity: float
    protocol: tuple
    model: FittedModel | None = field(default=None, repr=False)

    @property
    def n(self) -> int:
        return len(self.errors)

    @property
    def fold_ids(self) -> np.ndarray:
        return np.unique(self.fold_of)

    @property
    def fold_sizes(self) -> list[int]:
        return [int((self.fold_of == f).sum()) for f in self.fold_ids]

    @property
    def fold_mads(self) -> list[float]:
        return [float(self.errors[self.fold_of == f].mean()) for f in self.fold_ids]

    @property
    def mean_mad(self) -> float:
        return float(self.errors.mean())

    @property
    def case_se(self) -> float:
        if self.n < 2:
            return 0.0
        return float(self.errors.std(ddof=1) / np.sqrt(self.n))

    @property
    def se(self) -> float:
        mads = self.fold_mads
        if len(mads) < 2:
            return self.case_se
        return float(np.std(mads, ddof=1) / np.sqrt(len(mads)))

    @property
    def relative_error(self) -> float:
        if self.baseline <= 0:
            return 0.0 if self.mean_mad == 0 else float("inf")
        return self.mean_mad / self.baseline


def _as_trainer(method) -> Callable[[Dataset], object]:
    if isinstance(method, RunConfig):
        return lambda train: fit(method, train)
    if isinstance(method, str):
        config = RunConfig(method=method)
        return lambda train: fit(config, train)
    return method


def _label(method, label):
    if label:
        return label
    if isinstance(method, RunConfig):
        return method.method
    return method if isinstance(method, str) else getattr(method, "__name__", "model")


def _views(model, label):
    views = getattr(model, "views", None) or {}
    return {label: model, **{k: v for k, v in views.items() if k != label}}


def _predict(model, data):
    if hasattr(model, "predict"):
        return model.predict(data)
    return predict_with(model, data)


def cross_validate_views(method, data: Dataset, folds: int = 10, seed: int = 0, label: str = "",
                         final: bool = False, stratify: bool = False) -> dict[str, EvalReport]:
    """Cross-validate ``method`` and every view its fold models expose.

    ``method`` is a RunConfig, a method name, or any callable turning a
    training Dataset into an object with ``predict``. Each fold's model sees
    only its training portion. With ``final`` a last model is trained on
    all of ``data`` and attached to the main report (11 trainings for 10
    folds).
    """
    if data.n < folds:
        raise ValueError(f"need at least {folds} cases for {folds}-fold CV, got {data.n}")
    trainer, label = _as_trainer(method), _label(method, label)
    plan = FoldPlan.make(data.n, folds, seed, data.y if stratify else None)
    errors: dict[str, np.ndarray] = {}
    comp: dict[str, list[int]] = {}
    for f in range(folds):
        tr, te = plan.train_indices(f), plan.test_indices(f)
        test = data.subset(te)
        try:
            model = trainer(data.subset(tr))
        except Exception as exc:
            raise FoldError(f, exc) from exc
        for name, view in _views(model, label).items():
            errors.setdefault(name, np.full(data.n, np.nan))[te] = np.abs(test.y - _predict(view, test))
            comp.setdefault(name, []).append(_complexity(view))
    base = baseline_mad(data.y)
    protocol = ("cv", data.n, folds, seed, stratify)
    reports = {name: EvalReport(name, err, plan.fold_of.copy(), base, float(np.mean(comp[name])),
                                protocol)
               for name, err in errors.items() if not np.isnan(err).any()}
    if final:
        model = trainer(data)
        reports[label].model = model
        reports[label].complexity = float(_complexity(model))
    return reports


def cross_validate(method, data: Dataset, folds: int = 10, seed: int = 0, label: str = "",
                   final: bool = False, stratify: bool = False) -> EvalReport:
    """Report of ``folds``-fold cross-validation of ``method`` on ``data``."""
    label = _label(method, label)
    return cross_validate_views(method, data, folds, seed, label, final, stratify)[label]


def _complexity(model) -> int:
    if isinstance(model, FittedModel):
        return model.complexity
    return complexity_of(model)


def holdout_evaluate(model, test: Dataset, baseline: float | None = None,
                     label: str = "") -> EvalReport:
    """Report of ``model`` on independent test cases.

    ``baseline`` defaults to the MAD of predicting the test median.
    """
    if test.n == 0:
        raise ValueError("empty test set")
    if isinstance(model, FittedModel):
        check_compatible(model.schema, test)
        label = label or model.method
    err = np.abs(test.y - _predict(model, test))
    base = baseline_mad(test.y) if baseline is None else float(baseline)
    return EvalReport(label or "model", err, np.zeros(test.n, dtype=int), base,
                      float(_complexity(model)), ("holdout", test.n),
                      model if isinstance(model, FittedModel) else None)


@dataclass(frozen=True)
class Comparison:
    significant: bool
    winner: str | None          # lower-MAD label when significant
    difference: float           # |mean MAD a - mean MAD b|
    threshold: float            # 2 x the larger standard error

    def describe(self) -> str:
        if not self.significant:
            return (f"no significant difference (|diff| {self.difference:.4g} "
                    f"<= {self.threshold:.4g})")
        return (f"{self.winner} significantly better (|diff| {self.difference:.4g} "
                f"> {self.threshold:.4g})")


def compare(a: EvalReport, b: EvalReport) -> Comparison:
    """Significant iff the mean MADs differ by more than twice the larger SE."""
    if a.protocol != b.protocol:
        raise ValueError(f"reports use different protocols: {a.protocol} vs {b.protocol}")
    diff = abs(a.mean_mad - b.mean_mad)
    threshold = 2.0 * max(a.se, b.se)
    if diff > threshold:
        winner = a.label if a.mean_mad < b.mean_mad else b.label
        return Comparison(True, winner, diff, threshold)
    return Comparison(False, None, diff, threshold)


def format_table(reports) -> str:
    """Aligned text table: method, MAD, SE, relative error, complexity."""
    header = ("method", "MAD", "SE", "Error", "complexity")
    rows = [(r.label, f"{r.mean_mad:.4f}", f"{r.se:.4f}", f"{r.relative_error:.3f}",
             f"{r.complexity:.1f}") for r in reports]
    widths = [max(len(x) for x in col) for col in zip(header, *rows)]
    lines = []
    for i, row in enumerate([header] + rows):
        cells = [row[0].ljust(widths[0])] + [c.rjust(w) for c, w in zip(row[1:], widths[1:])]
        lines.append("  ".join(cells).rstrip())
        if i == 0:
            lines.append("  ".join("-" * w for w in widths))
    lines.append("SE: standard deviation of fold MADs / sqrt(folds)")
    return "\n".join(lines)


def report_csv(reports) -> str:
    """One row per (method, fold): fold size, fold MAD, and the overall figures."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["method", "fold", "n", "mad", "mean_mad", "se", "case_se", "relative_error",
                "protocol"])
    for r in reports:
        protocol = ":".join(str(p) for p in r.protocol)
        for f, n, m in zip(r.fold_ids, r.fold_sizes, r.fold_mads):
            w.writerow([r.label, int(f), n, repr(m), repr(r.mean_mad), repr(r.se),
                        repr(r.case_se), repr(r.relative_error), protocol])
    return buf.getvalue()
