"""Versioned JSON model files.

A file holds the feature schema, the method summary and the predictor:
ordered rules (feature index, operator, threshold or token, value), a tree,
or stored cases. Hybrid files embed every region's stored cases (scaled
features and targets), so a file is enough to predict. Serialization is
canonical (sorted keys, fixed layout), which makes
serialize -> parse -> serialize byte-identical.
"""

from __future__ import annotations

import json
import math
import os
import tempfile
from pathlib import Path

import numpy as np

from .dataset import FeatureSchema, NormalizationStats
from .knn import RULES, TREE, HybridModel, NeighborModel
from .methods import FittedModel
from .rules import Condition, Rule, RuleSet
from .tree import TreeNode

FORMAT = "rulereg-model"
VERSION = 1


class ModelFormatError(ValueError):
    """The file is not a model file this version can read."""


def _num(v):
    v = float(v)
    return None if math.isnan(v) else v


def _unnum(v):
    return float("nan") if v is None else float(v)


def _cond(c: Condition) -> list:
    return [int(c.feature), c.op, c.value]


def _rules_to(rs: RuleSet) -> dict:
    rosters = rs.rosters or [np.zeros(0, dtype=int)] * len(rs.rules)
    return {
        "kind": "rules",
        "rules": [{"conditions": [_cond(c) for c in r.conditions], "value": float(r.value),
                   "roster": [int(i) for i in ro]} for r, ro in zip(rs.rules, rosters)],
        "default": float(rs.default_value),
        "default_roster": [int(i) for i in rs.default_roster],
    }


def _rules_from(d: dict, schema: FeatureSchema) -> RuleSet:
    rules = tuple(Rule(tuple(Condition(f, op, v) for f, op, v in r["conditions"]), float(r["value"]))
                  for r in d["rules"])
    rosters = tuple(np.array(r["roster"], dtype=int) for r in d["rules"])
    return RuleSet(rules, float(d["default"]), schema, rosters,
                   np.array(d["default_roster"], dtype=int))


def _tree_to(root: TreeNode) -> dict:
    def node(nd):
        out = {"value": float(nd.value), "sad": float(nd.sad)}
        if nd.is_leaf:
            out["roster"] = [int(i) for i in nd.roster]
        else:
            out.update(split=_cond(nd.split), left=node(nd.left), right=node(nd.right))
        return out
    return {"kind": "tree", "root": node(root)}


def _tree_from(d: dict) -> TreeNode:
    def node(x):
        if "split" not in x:
            return TreeNode(float(x["value"]), np.array(x["roster"], dtype=int), float(x["sad"]))
        left, right = node(x["left"]), node(x["right"])
        roster = np.sort(np.concatenate([left.roster, right.roster]))
        return TreeNode(float(x["value"]), roster, float(x["sad"]), Condition(*x["split"]),
                        left, right)
    return node(d["root"])


def _neighbors_to(nm: NeighborModel) -> dict:
    return {"K": int(nm.K), "normalization": nm.stats.to_dict(),
            "levels": [list(lv) for lv in nm.levels]}


def _predictor_to(p) -> dict:
    if isinstance(p, RuleSet):
        return _rules_to(p)
    if isinstance(p, TreeNode):
        return _tree_to(p)
    if isinstance(p, NeighborModel):
        return {"kind": "knn", **_neighbors_to(p), "cases": p.Z.tolist(), "y": p.y.tolist()}
    if isinstance(p, HybridModel):
        nm = p.neighbors
        base = _rules_to(p.base) if p.kind == RULES else _tree_to(p.base)
        regions = []
        for g in range(len(p.region_values)):
            members = np.flatnonzero(p.region == g)
            regions.append({"cases": nm.Z[members].tolist(), "y": nm.y[members].tolist()})
        return {"kind": "hybrid", "base": base, "constant": bool(p.constant),
                **_neighbors_to(nm), "regions": regions}
    return {"kind": "constant", "value": float(p)}


def _predictor_from(d: dict, schema: FeatureSchema):
    kind = d["kind"]
    if kind == "rules":
        return _rules_from(d, schema)
    if kind == "tree":
        return _tree_from(d)
    if kind == "constant":
        return float(d["value"])
    stats = NormalizationStats.from_dict(d["normalization"])
    levels = tuple(tuple(lv) for lv in d["levels"])
    width = len(schema)
    if kind == "knn":
        Z = np.array(d["cases"], dtype=float).reshape(-1, width)
        return NeighborModel(Z, np.array(d["y"], dtype=float), int(d["K"]), stats, levels)
    if kind == "hybrid":
        base_d = d["base"]
        base = _rules_from(base_d, schema) if base_d["kind"] == "rules" else _tree_from(base_d)
        Z = [np.array(r["cases"], dtype=float).reshape(-1, width) for r in d["regions"]]
        y = [np.array(r["y"], dtype=float) for r in d["regions"]]
        region = np.concatenate([np.full(len(v), g, dtype=int) for g, v in enumerate(y)])
        nm = NeighborModel(np.vstack(Z), np.concatenate(y), int(d["K"]), stats, levels)
        return HybridModel(RULES if base_d["kind"] == "rules" else TREE, base, nm, region,
                           bool(d["constant"]))
    raise ModelFormatError(f"unknown predictor kind {kind!r}")


def to_dict(model: FittedModel) -> dict:
    return {
        "format": FORMAT,
        "version": VERSION,
        "method": model.method,
        "schema": model.schema.to_dict(),
        "summary": {"train_mad": _num(model.train_mad), "est_mad": _num(model.est_mad),
                    "k_classes": model.k_classes, "complexity": int(model.complexity)},
        "warnings": list(model.warnings),
        "predictor": _predictor_to(model.predictor),
    }


def from_dict(d: dict) -> FittedModel:
    if d.get("format") != FORMAT:
        raise ModelFormatError("not a rulereg model file")
    if d.get("version") != VERSION:
        raise ModelFormatError(f"unsupported model file version {d.get('version')!r}")
    schema = FeatureSchema.from_dict(d["schema"])
    s = d["summary"]
    return FittedModel(d["method"], schema, _predictor_from(d["predictor"], schema),
                       _unnum(s["train_mad"]), _unnum(s["est_mad"]), s["k_classes"],
                       warnings=tuple(d.get("warnings", ())))


def dumps(model: FittedModel) -> str:
    return json.dumps(to_dict(model), sort_keys=True, indent=1, allow_nan=False) + "\n"


def loads(text: str) -> FittedModel:
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"model file is not valid JSON: {exc}") from exc
    if not isinstance(d, dict):
        raise ModelFormatError("not a rulereg model file")
    return from_dict(d)


def atomic_write(path, text: str) -> None:
    """Write ``text`` to ``path`` via a temporary file in the same directory."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent or ".")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def save(model: FittedModel, path) -> None:
    atomic_write(path, dumps(model))


def load(path) -> FittedModel:
    with open(path, encoding="utf-8") as fh:
        return loads(fh.read())
