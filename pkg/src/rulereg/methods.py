"""Learning methods behind a common run configuration.

Every method turns a training Dataset into a :class:`FittedModel` whose
``predict`` accepts any dataset with the same schema. Rule methods sweep the
number of pseudo-classes and keep the ``k`` whose selected rule set has the
lowest estimated error.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .dataset import Dataset, FeatureSchema, check_compatible
from .knn import HybridModel, NeighborModel, hybrid_predict, knn_predict
from .metrics import mad, median
from .refine import RuleConfig, train_pipeline
from .rules import RuleSet, complexity, predict_constant
from .tree import TreeNode, internal_count, predict_tree, train_tree, tree_predict

METHODS = ("rule", "rule-knn", "tree", "tree-knn", "knn", "median-baseline")
DEFAULT_SWEEP = tuple(range(2, 9))


@dataclass(frozen=True)
class RunConfig:
    """Method choice and its parameters."""

    method: str = "rule"
    k_classes: tuple[int, ...] = DEFAULT_SWEEP
    m: int = 3
    K: int = 5
    folds: int = 10
    seed: int = 0
    checkpoint_ratio: float = 0.9
    selection: str = "cv"

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; choose from {', '.join(METHODS)}")
        ks = tuple(int(k) for k in np.atleast_1d(self.k_classes))
        if not ks:
            raise ValueError("k_classes sweep range is empty")
        object.__setattr__(self, "k_classes", ks)
        if min(ks) < 1 or self.m < 1 or self.K < 1:
            raise ValueError("k_classes, m and K must be positive")
        if self.folds < 2:
            raise ValueError("folds must be at least 2")
        if not 0 < self.checkpoint_ratio <= 1:
            raise ValueError("checkpoint_ratio must be in (0, 1]")
        if self.selection not in ("cv", "gcv"):
            raise ValueError("selection must be 'cv' or 'gcv'")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")

    def rule_config(self, k: int) -> RuleConfig:
        return RuleConfig(k_classes=k, m=self.m, checkpoint_ratio=self.checkpoint_ratio,
                          folds=self.folds, seed=self.seed, selection=self.selection)


def predict_with(predictor, data: Dataset) -> np.ndarray:
    """Batch predictions of any supported predictor."""
    if isinstance(predictor, RuleSet):
        return predictor.predict(data)
    if isinstance(predictor, TreeNode):
        return predict_tree(predictor, data)
    if isinstance(predictor, (NeighborModel, HybridModel)):
        return predictor.predict(data)
    return np.full(data.n, float(predictor))


def predict_case_with(predictor, x: Sequence) -> float:
    """Prediction for one raw case (floats and tokens)."""
    if isinstance(predictor, RuleSet):
        return predict_constant(predictor, x)
    if isinstance(predictor, TreeNode):
        return tree_predict(predictor, x)
    if isinstance(predictor, NeighborModel):
        return knn_predict(predictor, x)
    if isinstance(predictor, HybridModel):
        return hybrid_predict(predictor, x)
    return float(predictor)


def complexity_of(predictor) -> int:
    if isinstance(predictor, RuleSet):
        return complexity(predictor)
    if isinstance(predictor, TreeNode):
        return internal_count(predictor)
    if isinstance(predictor, HybridModel):
        return complexity_of(predictor.base)
    return 0


@dataclass(eq=False)
class FittedModel:
    """A trained predictor plus the facts reported about it.

    ``views`` holds related predictors trained along the way (the per-``k``
    rule sets of a sweep, the plain and hybrid variants of the same base
    model); evaluation can score them without retraining.
    """

    method: str
    schema: FeatureSchema
    predictor: object
    train_mad: float
    est_mad: float = float("nan")
    k_classes: int | None = None
    ladder: str = ""
    views: dict = field(default_factory=dict)
    warnings: tuple[str, ...] = ()

    @property
    def complexity(self) -> int:
        return complexity_of(self.predictor)

    def predict(self, data: Dataset) -> np.ndarray:
        check_compatible(self.schema, data)
        return predict_with(self.predictor, data)

    def predict_case(self, x: Sequence) -> float:
        return predict_case_with(self.predictor, x)

    def summary(self) -> str:
        parts = [f"method={self.method}", f"complexity={self.complexity}",
                 f"train_mad={self.train_mad:.6g}", f"est_mad={self.est_mad:.6g}"]
        if self.k_classes is not None:
            parts.append(f"k_classes={self.k_classes}")
        return " ".join(parts)


def _rules(train: Dataset, config: RunConfig):
    """Rule set per ``k`` and the ``k`` with the lowest estimated error (ties: smaller k)."""
    per_k = {}
    for k in config.k_classes:
        rs, ladder = train_pipeline(train, config.rule_config(k))
        per_k[k] = (rs, ladder)
    best_k = min(per_k, key=lambda k: (per_k[k][1].best().est_mad, k))
    return best_k, per_k


def fit(config: RunConfig, train: Dataset) -> FittedModel:
    """Train ``config.method`` on ``train``."""
    if train.n == 0:
        raise ValueError("empty training set")
    warnings = ()
    if np.all(train.y == train.y[0]):
        warnings = ("target is constant; the model predicts a single value",)
    method, y = config.method, train.y

    if method == "median-baseline":
        v = median(y)
        return FittedModel(method, train.schema, v, mad(y, np.full(train.n, v)),
                           warnings=warnings)

    if method == "knn":
        nm = NeighborModel.fit(train, config.K)
        return FittedModel(method, train.schema, nm, mad(y, nm.predict(train)),
                           views={"knn": nm}, warnings=warnings)

    if method in ("tree", "tree-knn"):
        root, ladder = train_tree(train, folds=config.folds, seed=config.seed,
                                  selection=config.selection)
        hybrid = HybridModel.fit(root, train, config.K)
        pred = root if method == "tree" else hybrid
        return FittedModel(method, train.schema, pred, mad(y, predict_with(pred, train)),
                           ladder.best().est_mad, ladder=ladder.dump(),
                           views={"tree": root, "tree-knn": hybrid}, warnings=warnings)

    best_k, per_k = _rules(train, config)
    rs, ladder = per_k[best_k]
    hybrid = HybridModel.fit(rs, train, config.K)
    pred = rs if method == "rule" else hybrid
    views = {"rule": rs, "rule-knn": hybrid}
    if len(per_k) > 1:
        views.update({f"rule k={k}": per_k[k][0] for k in per_k})
    return FittedModel(method, train.schema, pred, mad(y, predict_with(pred, train)),
                       ladder.best().est_mad, best_k, ladder.dump(), views, warnings)
