"""Nearest-neighbor regression, alone or inside the regions of a rule set or tree.

Continuous features are min-max scaled on the training data; a categorical
feature contributes 0 when two cases share the level and 1 otherwise.
Distances are Euclidean over these per-feature differences. Among equally
distant neighbors the earlier stored case wins.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .dataset import Dataset, NormalizationStats, fit_normalization, recode, scale_01
from .rules import DEFAULT, RuleSet, first_match
from .tree import TreeNode, leaf_index, leaves

RULES, TREE = "rules", "tree"


def distance(a: Sequence, b: Sequence, categorical: Sequence[bool]) -> float:
    """Distance between two scaled cases.

    Categorical entries (tokens or level codes) count 0 when equal and 1
    otherwise; a missing token (``None``) or unknown code (-1) never matches.
    """
    total = 0.0
    for u, v, cat in zip(a, b, categorical):
        if cat:
            unknown = u is None or v is None or u == -1 or v == -1
            total += 0.0 if (u == v and not unknown) else 1.0
        else:
            total += (float(u) - float(v)) ** 2
    return float(np.sqrt(total))


def _sq_distances(Q: np.ndarray, Z: np.ndarray, categorical: np.ndarray) -> np.ndarray:
    """Squared distances between query rows ``Q`` and stored rows ``Z`` (scaled, coded)."""
    cont = ~categorical
    d = np.zeros((Q.shape[0], Z.shape[0]))
    if cont.any():
        diff = Q[:, None, cont] - Z[None, :, cont]
        d += np.einsum("ijk,ijk->ij", diff, diff)
    if categorical.any():
        qc, zc = Q[:, None, categorical], Z[None, :, categorical]
        d += ((qc != zc) | (qc < 0)).sum(axis=2)
    return d


def _neighbor_means(Q, Z, y, K, categorical, chunk=256) -> np.ndarray:
    out = np.empty(Q.shape[0])
    k = min(K, Z.shape[0])
    for s in range(0, Q.shape[0], chunk):
        d = _sq_distances(Q[s:s + chunk], Z, categorical)
        idx = np.argsort(d, axis=1, kind="stable")[:, :k]
        out[s:s + chunk] = y[idx].mean(axis=1)
    return out


@dataclass(frozen=True, eq=False)
class NeighborModel:
    """Stored training cases (scaled) with their targets."""

    Z: np.ndarray
    y: np.ndarray
    K: int
    stats: NormalizationStats
    levels: tuple

    def __post_init__(self):
        if self.K < 1:
            raise ValueError("K must be at least 1")
        if len(self.y) == 0:
            raise ValueError("no stored cases")

    @classmethod
    def fit(cls, train: Dataset, K: int = 5) -> "NeighborModel":
        stats = fit_normalization(train)
        return cls(stats.transform(train.X), train.y.copy(), K, stats, train.levels)

    @property
    def categorical(self) -> np.ndarray:
        return self.stats.categorical

    def scale(self, data: Dataset) -> np.ndarray:
        """Scaled feature matrix of ``data`` with categorical codes in this model's levels."""
        return self.stats.transform(recode(data, self.levels))

    def scale_case(self, x: Sequence) -> np.ndarray:
        vals = scale_01(self.stats, x)
        out = np.empty(len(vals))
        for j, v in enumerate(vals):
            if self.categorical[j]:
                lv = self.levels[j]
                out[j] = lv.index(str(v)) if v is not None and str(v) in lv else -1
            else:
                out[j] = v
        return out

    def predict(self, data: Dataset) -> np.ndarray:
        return _neighbor_means(self.scale(data), self.Z, self.y, self.K, self.categorical)


def knn_predict(model: NeighborModel, x: Sequence) -> float:
    """Mean target of the ``K`` stored cases nearest to raw case ``x``."""
    q = model.scale_case(x)[None, :]
    return float(_neighbor_means(q, model.Z, model.y, model.K, model.categorical)[0])


@dataclass(frozen=True, eq=False)
class HybridModel:
    """A rule set or tree whose regions answer with the mean of nearby region members.

    ``region`` gives each stored case's region: the first-match rule (the
    default last) for rule sets, the depth-first leaf for trees. Regions
    without stored cases answer with their constant value, as does every
    region when ``constant`` is set.
    """

    kind: str
    base: RuleSet | TreeNode
    neighbors: NeighborModel
    region: np.ndarray
    constant: bool = False

    @classmethod
    def fit(cls, base, train: Dataset, K: int = 5, constant: bool = False) -> "HybridModel":
        kind = TREE if isinstance(base, TreeNode) else RULES
        nm = NeighborModel.fit(train, K)
        return cls(kind, base, nm, _regions(kind, base, train), constant)

    @property
    def K(self) -> int:
        return self.neighbors.K

    @property
    def region_values(self) -> np.ndarray:
        if self.kind == TREE:
            return np.array([leaf.value for leaf in leaves(self.base)])
        return self.base.values

    def regions_of(self, data: Dataset) -> np.ndarray:
        return _regions(self.kind, self.base, data)

    def predict(self, data: Dataset) -> np.ndarray:
        values = self.region_values
        reg = self.regions_of(data)
        out = values[reg]
        if self.constant:
            return out
        Q = self.neighbors.scale(data)
        for g in np.unique(reg):
            members = np.flatnonzero(self.region == g)
            if members.size == 0:
                continue
            rows = np.flatnonzero(reg == g)
            out[rows] = _neighbor_means(Q[rows], self.neighbors.Z[members],
                                        self.neighbors.y[members], self.K, self.neighbors.categorical)
        return out


def _regions(kind, base, data: Dataset) -> np.ndarray:
    if kind == TREE:
        return leaf_index(base, data)
    idx = base.match(data)
    return np.where(idx == DEFAULT, len(base.rules), idx)


def hybrid_predict(model: HybridModel, x: Sequence) -> float:
    """Prediction for one raw case."""
    if model.kind == TREE:
        node = model.base
        while not node.is_leaf:
            node = node.left if node.split.holds(x[node.split.feature]) else node.right
        g = [id(leaf) for leaf in leaves(model.base)].index(id(node))
        value = node.value
    else:
        i = first_match(model.base, x)
        g = len(model.base.rules) if i == DEFAULT else i
        value = model.base.default_value if i == DEFAULT else model.base.rules[i].value
    members = np.flatnonzero(model.region == g)
    if model.constant or members.size == 0:
        return float(value)
    q = model.neighbors.scale_case(x)[None, :]
    return float(_neighbor_means(q, model.neighbors.Z[members], model.neighbors.y[members],
                                 model.K, model.neighbors.categorical)[0])
