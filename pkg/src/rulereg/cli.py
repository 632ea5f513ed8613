"""Command-line front end: train, predict, evaluate, sweep, compare, show, fetch.

``--data`` takes a CSV path or the name of a bundled/cached benchmark
(``housing``, ``mpg``, ``cpu``, ``servo``). Benchmarks are cached under
``$RULEREG_DATA`` (default ``~/.cache/rulereg``).
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from dataclasses import dataclass
from pathlib import Path

from . import benchmarks, modelio
from .dataset import MISSING_TOKENS, DataError, Dataset, load_csv, read_schema_file
from .evaluation import FoldError, compare, cross_validate_views, format_table, report_csv
from .knn import HybridModel, NeighborModel
from .methods import DEFAULT_SWEEP, METHODS, RunConfig, fit
from .rules import RuleSet, format_ruleset
from .tree import TreeNode, format_tree

log = logging.getLogger("rulereg")


class CliError(Exception):
    """A failure reported to the user with exit status 1."""


def parse_k_range(text: str) -> tuple[int, ...]:
    """``"5"``, ``"2..8"`` or ``"2,4,6"`` as a tuple of pseudo-class counts."""
    try:
        if ".." in text:
            a, b = (int(p) for p in text.split("..", 1))
            ks = tuple(range(a, b + 1))
        else:
            ks = tuple(int(p) for p in text.split(",") if p.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad k range {text!r}") from None
    if not ks or min(ks) < 1:
        raise argparse.ArgumentTypeError(f"k range {text!r} must be non-empty and positive")
    return ks


def _positive(kind):
    def parse(text):
        try:
            v = kind(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
        if v <= 0:
            raise argparse.ArgumentTypeError(f"must be positive: {text!r}")
        return v
    return parse


def load_data(args) -> Dataset:
    path = Path(args.data)
    if not path.exists() and args.data in benchmarks.CATALOG:
        if args.target or args.schema:
            raise CliError("--target/--schema apply to CSV files, not benchmark names")
        return benchmarks.load_benchmark(args.data)
    if not path.exists():
        raise CliError(f"no such data file: {args.data}")
    if not args.target:
        raise CliError("--target is required for CSV data")
    kinds = read_schema_file(args.schema) if args.schema else None
    return load_csv(path, args.target, kinds, drop_missing=args.drop_missing)


def run_config(args) -> RunConfig:
    try:
        return RunConfig(method=args.method, k_classes=args.k_classes, m=args.min_cover,
                         K=args.knn, folds=args.folds, seed=args.seed,
                         checkpoint_ratio=args.checkpoint_ratio, selection=args.selection)
    except ValueError as exc:
        raise CliError(str(exc)) from exc


def _write(path, text: str) -> None:
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        modelio.atomic_write(path, text)


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------

def cmd_train(args) -> int:
    data = load_data(args)
    model = fit(run_config(args), data)
    for w in model.warnings:
        print(f"warning: {w}", file=sys.stderr)
    modelio.save(model, args.model)
    print(model.summary())
    return 0


def cmd_predict(args) -> int:
    model = modelio.load(args.model)
    preds = model.predict(_prediction_data(args, model))
    _write(args.out, "".join(f"{p!r}\n" for p in map(float, preds)))
    return 0


def _prediction_data(args, model) -> Dataset:
    """Cases to predict, typed by the model's schema; the target column is optional."""
    path = Path(args.data)
    if not path.exists() and args.data in benchmarks.CATALOG:
        return benchmarks.load_benchmark(args.data)
    if not path.exists():
        raise CliError(f"no such data file: {args.data}")
    schema = model.schema
    kinds = read_schema_file(args.schema) if args.schema else {
        f.name: f.kind for f in schema.features}
    with open(path, encoding="utf-8", newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if not rows:
        raise CliError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    target = args.target or schema.target_name
    if target in header:
        kinds = {k: v for k, v in kinds.items() if k in header}
        return load_csv(path, target, kinds, drop_missing=args.drop_missing)
    for name in header:
        if name not in schema.names:
            raise DataError(f"unexpected column {name!r}")
    if header != schema.names:
        missing = [n for n in schema.names if n not in header]
        raise DataError(f"column {missing[0]!r} missing from data" if missing
                        else "columns are in a different order than the model expects")
    cases = []
    for lineno, r in enumerate(rows[1:], 2):
        r = [c.strip() for c in r]
        if len(r) != len(header):
            raise DataError(f"{path}:{lineno}: expected {len(header)} fields, got {len(r)}")
        if any(c in MISSING_TOKENS for c in r):
            if args.drop_missing:
                continue
            raise DataError(f"{path}:{lineno}: missing value")
        case = []
        for f, v in zip(schema.features, r):
            if f.is_categorical:
                case.append(v)
                continue
            try:
                case.append(float(v))
            except ValueError:
                raise DataError(f"{path}:{lineno}: column {f.name!r} expects a number, "
                                f"got {v!r}") from None
        cases.append(case)
    if not cases:
        raise CliError(f"{path}: no usable rows")
    return Dataset.from_rows(schema, cases)


def cmd_evaluate(args) -> int:
    data = load_data(args)
    config = run_config(args)
    reports = cross_validate_views(config, data, args.folds, args.seed)
    main = reports[config.method]
    print(format_table([main]))
    if args.out:
        _write(args.out, report_csv([main]))
    return 0


def cmd_sweep(args) -> int:
    data = load_data(args)
    config = run_config(args)
    if config.method not in ("rule", "rule-knn"):
        raise CliError("sweep varies the pseudo-class count and needs a rule method")
    reports = cross_validate_views(config, data, args.folds, args.seed)
    rows = []
    for k in config.k_classes:
        r = reports.get(f"rule k={k}") or reports["rule"]
        r.label = f"k={k}"
        rows.append(r)
    print(format_table(rows))
    if args.out:
        _write(args.out, report_csv(rows))
    return 0


@dataclass
class _Summary:
    label: str
    mean_mad: float
    se: float
    protocol: tuple


def read_report(path) -> _Summary:
    """The overall figures of an ``evaluate --out`` CSV file."""
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise CliError(f"{path}: no report rows")
    labels = {r["method"] for r in rows}
    if len(labels) != 1:
        raise CliError(f"{path}: expected one method, found {sorted(labels)}")
    r = rows[0]
    return _Summary(r["method"], float(r["mean_mad"]), float(r["se"]), (r["protocol"],))


def cmd_compare(args) -> int:
    a, b = read_report(args.a), read_report(args.b)
    if a.label == b.label:
        a.label, b.label = f"{a.label} ({args.a})", f"{b.label} ({args.b})"
    try:
        result = compare(a, b)
    except ValueError as exc:
        raise CliError(str(exc)) from exc
    print(f"{a.label}: MAD {a.mean_mad:.4f} (SE {a.se:.4f})")
    print(f"{b.label}: MAD {b.mean_mad:.4f} (SE {b.se:.4f})")
    print(result.describe())
    return 0


def cmd_show(args) -> int:
    model = modelio.load(args.model)
    print(model.summary())
    p = model.predictor
    if isinstance(p, HybridModel):
        print(f"{p.K}-nn inside the regions of:")
        p = p.base
    if isinstance(p, RuleSet):
        print(format_ruleset(p))
    elif isinstance(p, TreeNode):
        print(format_tree(p, model.schema))
    elif isinstance(p, NeighborModel):
        print(f"{p.K}-nn over {len(p.y)} stored cases")
    else:
        print(f"y = {float(p):.6g}")
    return 0


def cmd_fetch(args) -> int:
    names = args.names or sorted(benchmarks.CATALOG)
    for name in names:
        if name not in benchmarks.CATALOG:
            raise CliError(f"unknown benchmark {name!r}; choose from {sorted(benchmarks.CATALOG)}")
    for name in names:
        try:
            path = benchmarks.fetch(name, Path(args.out) if args.out else None)
        except OSError as exc:
            raise CliError(f"could not download {name}: {exc}") from exc
        print(path)
    return 0


# --------------------------------------------------------------------------
# parser
# --------------------------------------------------------------------------

def _data_flags(p):
    p.add_argument("--data", required=True, help="CSV file or benchmark name")
    p.add_argument("--target", help="target column (CSV data)")
    p.add_argument("--schema", help="schema sidecar with 'name,kind' lines")
    p.add_argument("--drop-missing", action="store_true", help="drop rows with missing features")


def _method_flags(p, default_method="rule"):
    p.add_argument("--method", choices=METHODS, default=default_method)
    p.add_argument("--k-classes", type=parse_k_range, default=DEFAULT_SWEEP,
                   help="pseudo-class count or range, e.g. 5 or 2..8 (default 2..8)")
    p.add_argument("--min-cover", type=_positive(int), default=3, help="minimum rule coverage")
    p.add_argument("--knn", type=_positive(int), default=5, help="neighbor count K")
    p.add_argument("--folds", type=_positive(int), default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--selection", choices=("cv", "gcv"), default="cv")
    p.add_argument("--checkpoint-ratio", type=_positive(float), default=0.9)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rulereg", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a model and write it to --model")
    _data_flags(p)
    _method_flags(p)
    p.add_argument("--model", required=True, help="output model file")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="print one prediction per row")
    _data_flags(p)
    p.add_argument("--model", required=True)
    p.add_argument("--out", help="write predictions here instead of standard output")
    p.set_defaults(func=cmd_predict)

    for name, func, helptext in (
        ("evaluate", cmd_evaluate, "cross-validate one method"),
        ("sweep", cmd_sweep, "cross-validated error for each pseudo-class count"),
    ):
        p = sub.add_parser(name, help=helptext)
        _data_flags(p)
        _method_flags(p)
        p.add_argument("--out", help="CSV report with one row per fold")
        p.set_defaults(func=func)

    p = sub.add_parser("compare", help="two-standard-error test between two evaluate reports")
    p.add_argument("a")
    p.add_argument("b")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("show", help="print a model's rules or tree")
    p.add_argument("--model", required=True)
    p.set_defaults(func=cmd_show)

    p = sub.add_parser("fetch", help="download benchmarks into the cache directory")
    p.add_argument("names", nargs="*", help=f"any of {', '.join(sorted(benchmarks.CATALOG))}")
    p.add_argument("--out", help="directory (default: $RULEREG_DATA or ~/.cache/rulereg)")
    p.set_defaults(func=cmd_fetch)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except (CliError, DataError, modelio.ModelFormatError, FoldError, OSError) as exc:
        print(f"rulereg {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
