"""Tabular data model, CSV ingestion and min-max normalization.

Continuous features are stored as floats. Categorical features are stored
as integer codes into a per-dataset level table, so a categorical column of
``X`` holds ``0.0, 1.0, ...``; the tokens themselves live in
``Dataset.levels``. Code ``-1`` marks a token the dataset has never seen
(only produced when re-encoding data against another dataset's levels).
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

log = logging.getLogger(__name__)

CONTINUOUS = "continuous"
CATEGORICAL = "categorical"
KINDS = (CONTINUOUS, CATEGORICAL)

MISSING_TOKENS = frozenset({"", "?", "NA", "na", "NaN", "nan"})


class DataError(ValueError):
    """Raised for malformed input data or schema violations."""


@dataclass(frozen=True)
class Feature:
    name: str
    kind: str

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DataError(f"unknown feature kind {self.kind!r} for {self.name!r}")

    @property
    def is_categorical(self) -> bool:
        return self.kind == CATEGORICAL


@dataclass(frozen=True)
class FeatureSchema:
    features: tuple[Feature, ...]
    target_name: str

    def __post_init__(self):
        names = [f.name for f in self.features]
        if len(set(names)) != len(names):
            raise DataError("feature names must be unique")
        if self.target_name in names:
            raise DataError("target column cannot also be a feature")

    @property
    def names(self) -> list[str]:
        return [f.name for f in self.features]

    @property
    def categorical_mask(self) -> np.ndarray:
        return np.array([f.is_categorical for f in self.features], dtype=bool)

    def __len__(self):
        return len(self.features)

    def to_dict(self) -> dict:
        return {
            "target": self.target_name,
            "features": [[f.name, f.kind] for f in self.features],
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "FeatureSchema":
        return cls(tuple(Feature(n, k) for n, k in d["features"]), d["target"])


@dataclass(frozen=True, eq=False)
class Dataset:
    """Immutable table of cases: feature matrix ``X``, target ``y``.

    ``levels[j]`` is the ordered token tuple of categorical feature ``j``
    (empty for continuous features).
    """

    schema: FeatureSchema
    X: np.ndarray
    y: np.ndarray
    levels: tuple[tuple[str, ...], ...] = field(default=())

    def __post_init__(self):
        X = np.ascontiguousarray(self.X, dtype=float)
        y = np.ascontiguousarray(self.y, dtype=float)
        if X.ndim != 2 or X.shape[1] != len(self.schema):
            raise DataError(f"X has shape {X.shape}, schema has {len(self.schema)} features")
        if y.shape != (X.shape[0],):
            raise DataError("y must have one value per case")
        if not np.all(np.isfinite(y)):
            raise DataError("target values must be finite")
        levels = self.levels or tuple(() for _ in self.schema.features)
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "levels", tuple(tuple(lv) for lv in levels))

    @property
    def n(self) -> int:
        return len(self.y)

    def __len__(self):
        return self.n

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx)
        if idx.size == 0:
            idx = idx.astype(int)
        return Dataset(self.schema, self.X[idx], self.y[idx], self.levels)

    def with_y(self, y) -> "Dataset":
        return Dataset(self.schema, self.X, np.asarray(y, dtype=float), self.levels)

    def row(self, i: int) -> list:
        """Feature values of case ``i`` as floats / tokens."""
        out = []
        for j, f in enumerate(self.schema.features):
            v = self.X[i, j]
            out.append(self.token(j, v) if f.is_categorical else float(v))
        return out

    def token(self, j: int, code: float):
        c = int(code)
        return self.levels[j][c] if c >= 0 else None

    def code_of(self, j: int, token: str) -> int:
        try:
            return self.levels[j].index(token)
        except ValueError:
            return -1

    def column_tokens(self, j: int) -> np.ndarray:
        """Categorical column ``j`` as an object array of tokens."""
        lv = np.array(list(self.levels[j]) + [None], dtype=object)
        return lv[self.X[:, j].astype(int)]

    def equals(self, other: "Dataset") -> bool:
        return (
            self.schema == other.schema
            and self.levels == other.levels
            and np.array_equal(self.X, other.X)
            and np.array_equal(self.y, other.y)
        )

    @classmethod
    def from_rows(cls, schema: FeatureSchema, rows: Sequence[Sequence], y=None) -> "Dataset":
        """Build a dataset from raw rows (floats for continuous, tokens for categorical)."""
        n = len(rows)
        X = np.zeros((n, len(schema)))
        levels = []
        for j, f in enumerate(schema.features):
            col = [r[j] for r in rows]
            if f.is_categorical:
                lv = tuple(sorted({str(v) for v in col}))
                X[:, j] = [lv.index(str(v)) for v in col]
                levels.append(lv)
            else:
                X[:, j] = [float(v) for v in col]
                levels.append(())
        y = np.zeros(n) if y is None else np.asarray(y, dtype=float)
        return cls(schema, X, y, tuple(levels))


def recode(data: Dataset, levels: Sequence[Sequence[str]]) -> np.ndarray:
    """Return ``data.X`` with categorical codes re-expressed against ``levels``.

    Tokens absent from ``levels`` get code -1.
    """
    X = data.X.copy()
    for j, f in enumerate(data.schema.features):
        if not f.is_categorical or tuple(levels[j]) == data.levels[j]:
            continue
        lookup = {t: i for i, t in enumerate(levels[j])}
        table = np.array([lookup.get(t, -1) for t in data.levels[j]] + [-1], dtype=float)
        X[:, j] = table[X[:, j].astype(int)]
    return X


def check_compatible(expected: FeatureSchema, data: Dataset) -> None:
    """Raise DataError naming the first column where ``data`` disagrees with ``expected``."""
    got = data.schema
    for f in expected.features:
        match = [g for g in got.features if g.name == f.name]
        if not match:
            raise DataError(f"column {f.name!r} missing from data")
        if match[0].kind != f.kind:
            raise DataError(f"column {f.name!r} is {match[0].kind}, model expects {f.kind}")
    if got.names != expected.names:
        extra = [n for n in got.names if n not in expected.names]
        if extra:
            raise DataError(f"unexpected column {extra[0]!r}")
        raise DataError("columns are in a different order than the model expects")


def _parse_float(s: str):
    try:
        v = float(s)
    except ValueError:
        return None
    return v if math.isfinite(v) else None


def read_schema_file(path) -> dict[str, str]:
    """Parse a schema sidecar: one ``name,kind`` line per column."""
    kinds = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = [p.strip() for p in line.split(",")]
            if len(parts) != 2 or parts[1] not in KINDS:
                raise DataError(f"{path}:{lineno}: expected 'name,kind'")
            kinds[parts[0]] = parts[1]
    return kinds


def load_csv(
    path,
    target: str,
    schema_override: Mapping[str, str] | None = None,
    drop_missing: bool = False,
) -> Dataset:
    """Load a header-first CSV file into a Dataset.

    A column is continuous iff every value parses as a real number, unless
    ``schema_override`` says otherwise. Rows with a missing target are
    dropped with a warning. A missing feature value is an error unless
    ``drop_missing`` is set, in which case the row is dropped.
    """
    path = Path(path)
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        raw = [r for r in reader if r and any(c.strip() for c in r)]

    if target not in header:
        raise DataError(f"{path}: target column {target!r} not in header")
    if len(set(header)) != len(header):
        raise DataError(f"{path}: duplicate column names")
    override = dict(schema_override or {})
    unknown = set(override) - set(header)
    if unknown:
        raise DataError(f"schema names unknown column(s): {sorted(unknown)}")
    ti = header.index(target)

    rows = []
    dropped_target = dropped_feature = 0
    for lineno, r in enumerate(raw, 2):
        if len(r) != len(header):
            raise DataError(f"{path}:{lineno}: expected {len(header)} fields, got {len(r)}")
        r = [c.strip() for c in r]
        if r[ti] in MISSING_TOKENS:
            dropped_target += 1
            continue
        if _parse_float(r[ti]) is None:
            raise DataError(f"{path}:{lineno}: target value {r[ti]!r} is not a finite number")
        if any(c in MISSING_TOKENS for i, c in enumerate(r) if i != ti):
            if not drop_missing:
                col = next(header[i] for i, c in enumerate(r) if i != ti and c in MISSING_TOKENS)
                raise DataError(f"{path}:{lineno}: missing value in column {col!r}")
            dropped_feature += 1
            continue
        rows.append(r)
    if dropped_target:
        log.warning("%s: dropped %d row(s) with a missing target", path, dropped_target)
    if dropped_feature:
        log.info("%s: dropped %d row(s) with missing feature values", path, dropped_feature)
    if not rows:
        raise DataError(f"{path}: no usable rows")

    features = []
    columns = []
    levels = []
    for i, name in enumerate(header):
        if i == ti:
            continue
        vals = [r[i] for r in rows]
        parsed = [_parse_float(v) for v in vals]
        kind = override.get(name) or (
            CONTINUOUS if all(p is not None for p in parsed) else CATEGORICAL
        )
        if kind == CONTINUOUS:
            if any(p is None for p in parsed):
                bad = next(v for v, p in zip(vals, parsed) if p is None)
                raise DataError(f"{path}: column {name!r} declared continuous but has {bad!r}")
            columns.append(np.array(parsed, dtype=float))
            levels.append(())
        else:
            lv = tuple(sorted(set(vals)))
            index = {t: c for c, t in enumerate(lv)}
            columns.append(np.array([index[v] for v in vals], dtype=float))
            levels.append(lv)
        features.append(Feature(name, kind))

    schema = FeatureSchema(tuple(features), target)
    X = np.column_stack(columns) if columns else np.zeros((len(rows), 0))
    y = np.array([float(r[ti]) for r in rows])
    return Dataset(schema, X, y, tuple(levels))


@dataclass(frozen=True, eq=False)
class NormalizationStats:
    """Per-feature min/max from training data; NaN for categorical features."""

    lo: np.ndarray
    hi: np.ndarray
    categorical: np.ndarray

    def transform(self, X: np.ndarray) -> np.ndarray:
        """Min-max scale continuous columns into [0, 1], clamping out-of-range values.

        Constant features map to 0. Categorical codes pass through.
        """
        X = np.asarray(X, dtype=float)
        out = X.copy()
        cont = ~self.categorical
        if cont.any():
            lo, hi = self.lo[cont], self.hi[cont]
            span = hi - lo
            safe = np.where(span > 0, span, 1.0)
            z = (X[:, cont] - lo) / safe
            z = np.where(span > 0, np.clip(z, 0.0, 1.0), 0.0)
            out[:, cont] = z
        return out

    def to_dict(self) -> dict:
        return {
            "min": [None if c else float(v) for v, c in zip(self.lo, self.categorical)],
            "max": [None if c else float(v) for v, c in zip(self.hi, self.categorical)],
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "NormalizationStats":
        cat = np.array([v is None for v in d["min"]], dtype=bool)
        lo = np.array([np.nan if v is None else v for v in d["min"]], dtype=float)
        hi = np.array([np.nan if v is None else v for v in d["max"]], dtype=float)
        return cls(lo, hi, cat)


def fit_normalization(train: Dataset) -> NormalizationStats:
    if train.n == 0:
        raise DataError("cannot fit normalization on an empty dataset")
    cat = train.schema.categorical_mask
    lo = train.X.min(axis=0)
    hi = train.X.max(axis=0)
    lo = np.where(cat, np.nan, lo)
    hi = np.where(cat, np.nan, hi)
    return NormalizationStats(lo, hi, cat)


def scale_01(stats: NormalizationStats, case: Iterable) -> list:
    """Scale one case's feature values; categorical tokens pass through unchanged."""
    out = []
    for j, v in enumerate(case):
        if stats.categorical[j]:
            out.append(v)
            continue
        lo, hi = stats.lo[j], stats.hi[j]
        if hi == lo:
            out.append(0.0)
        else:
            out.append(min(1.0, max(0.0, (float(v) - lo) / (hi - lo))))
    return out
