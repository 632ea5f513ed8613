"""Public benchmark datasets: download, reshape into the CSV contract, cache.

Each dataset is reshaped into a header-first CSV plus a ``.schema`` sidecar
listing column kinds. Bundled copies of housing, auto-mpg and cpu ship with
the package; ``fetch`` re-downloads from the UCI archive into the cache
directory (``$RULEREG_DATA`` or ``~/.cache/rulereg``), which takes
precedence when present.
"""

from __future__ import annotations

import csv
import io
import logging
import os
import shlex
import urllib.request
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Callable

from .dataset import Dataset, load_csv, read_schema_file

log = logging.getLogger(__name__)

UCI = "https://archive.ics.uci.edu/ml/machine-learning-databases"
CACHE_ENV = "RULEREG_DATA"


@dataclass(frozen=True)
class Benchmark:
    name: str
    url: str
    target: str
    columns: tuple[str, ...]
    kinds: dict
    reshape: Callable[[str], list[list[str]]]
    n_cases: int


def _whitespace_rows(text: str) -> list[list[str]]:
    return [line.split() for line in text.splitlines() if line.strip()]


def _comma_rows(text: str) -> list[list[str]]:
    return [[c.strip() for c in r] for r in csv.reader(io.StringIO(text)) if r]


def reshape_housing(text: str) -> list[list[str]]:
    """``housing.data``: 14 whitespace-separated numbers per line."""
    rows = _whitespace_rows(text)
    bad = [r for r in rows if len(r) != 14]
    if bad:
        raise ValueError(f"housing: expected 14 fields, got {len(bad[0])}")
    return rows


def reshape_auto_mpg(text: str) -> list[list[str]]:
    """``auto-mpg.data``: 8 numeric fields then a quoted car name (dropped).

    Horsepower is ``?`` for six cars; those rows keep the marker so the
    loader's missing-value policy decides their fate.
    """
    out = []
    for line in text.splitlines():
        if not line.strip():
            continue
        fields = shlex.split(line.replace("\t", " "))
        if len(fields) < 9:
            raise ValueError(f"auto-mpg: short line {line!r}")
        out.append(fields[:8])
    return out


def reshape_cpu(text: str) -> list[list[str]]:
    """``machine.data``: vendor, model, six attributes, PRP, ERP.

    Vendor and model names are identifiers and ERP is the original study's
    estimate, so only the six attributes and PRP are kept.
    """
    return [r[2:9] for r in _comma_rows(text)]


def reshape_servo(text: str) -> list[list[str]]:
    """``servo.data``: motor, screw, pgain, vgain, class."""
    rows = _comma_rows(text)
    if any(len(r) != 5 for r in rows):
        raise ValueError("servo: expected 5 fields per line")
    return rows


CATALOG = {
    b.name: b
    for b in [
        Benchmark(
            "housing", f"{UCI}/housing/housing.data", "MEDV",
            ("CRIM", "ZN", "INDUS", "CHAS", "NOX", "RM", "AGE", "DIS", "RAD", "TAX",
             "PTRATIO", "B", "LSTAT", "MEDV"),
            {}, reshape_housing, 506,
        ),
        Benchmark(
            "mpg", f"{UCI}/auto-mpg/auto-mpg.data", "mpg",
            ("mpg", "cylinders", "displacement", "horsepower", "weight",
             "acceleration", "model_year", "origin"),
            {"cylinders": "categorical", "origin": "categorical"}, reshape_auto_mpg, 392,
        ),
        Benchmark(
            "cpu", f"{UCI}/cpu-performance/machine.data", "PRP",
            ("MYCT", "MMIN", "MMAX", "CACH", "CHMIN", "CHMAX", "PRP"),
            {}, reshape_cpu, 209,
        ),
        Benchmark(
            "servo", f"{UCI}/servo/servo.data", "class",
            ("motor", "screw", "pgain", "vgain", "class"),
            {"motor": "categorical", "screw": "categorical",
             "pgain": "categorical", "vgain": "categorical"},
            reshape_servo, 167,
        ),
    ]
}


def cache_dir() -> Path:
    return Path(os.environ.get(CACHE_ENV) or Path.home() / ".cache" / "rulereg")


def write_csv(bench: Benchmark, rows: list[list[str]], directory: Path) -> Path:
    """Write ``rows`` and the schema sidecar atomically into ``directory``."""
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / f"{bench.name}.csv"
    tmp = path.with_suffix(".csv.tmp")
    with open(tmp, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(bench.columns)
        w.writerows(rows)
    os.replace(tmp, path)
    schema = directory / f"{bench.name}.schema"
    with open(schema, "w", encoding="utf-8") as fh:
        for col in bench.columns:
            if col != bench.target:
                fh.write(f"{col},{bench.kinds.get(col, 'continuous')}\n")
    return path


def fetch(name: str, directory: Path | None = None, timeout: float = 30.0) -> Path:
    """Download a benchmark from UCI, reshape it, and store it in the cache."""
    bench = CATALOG[name]
    log.info("downloading %s", bench.url)
    with urllib.request.urlopen(bench.url, timeout=timeout) as resp:
        text = resp.read().decode("latin-1")
    return write_csv(bench, bench.reshape(text), directory or cache_dir())


def locate(name: str) -> tuple[Path, Path] | None:
    """Paths of a benchmark's CSV and schema: cache first, then bundled copy."""
    if name not in CATALOG:
        raise KeyError(f"unknown benchmark {name!r}; choose from {sorted(CATALOG)}")
    cached = cache_dir() / f"{name}.csv"
    if cached.exists():
        return cached, cached.with_suffix(".schema")
    bundled = resources.files("rulereg") / "data" / f"{name}.csv"
    if bundled.is_file():
        p = Path(str(bundled))
        return p, p.with_suffix(".schema")
    return None


def available(name: str) -> bool:
    return locate(name) is not None


def load_benchmark(name: str) -> Dataset:
    """Load a benchmark as a Dataset; rows with missing values are dropped."""
    found = locate(name)
    if found is None:
        raise FileNotFoundError(
            f"benchmark {name!r} is not bundled or cached; run `rulereg fetch {name}`"
        )
    path, schema = found
    kinds = read_schema_file(schema) if schema.exists() else None
    return load_csv(path, CATALOG[name].target, kinds, drop_missing=True)
