"""Command-line entry point: ``parboruta {synth,select,eval,report,bench}``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 internal error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import os
import sys
import tempfile
from concurrent.futures import ThreadPoolExecutor
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .boruta import STATE_NAMES, BorutaConfig, aggregate_runs, run_boruta
from .data import DataError, SyntheticSpec, TaskKind, VARIANTS, generate_synthetic, load_csv
from .evaluation import BenchmarkRecord, benchmark, benchmark_csv, cross_validate
from .forest import ForestParams
from .importance import METHODS

logger = logging.getLogger("parboruta")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 0, 1, 2, 3
MANIFEST_NAME = "manifest.json"
BOXPLOT_COLUMNS = ("feature", "min", "q1", "median", "q3", "max", "state")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}")


# -- file helpers ----------------------------------------------------------

def atomic_write(path, text: str) -> None:
    """Write via a temp file in the same directory, then rename over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return "sha256:" + h.hexdigest()


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


class Manifest:
    def __init__(self, command, args):
        self.doc = {
            "command": command,
            "config": {k: v for k, v in sorted(vars(args).items())
                       if k not in ("func", "config") and not k.startswith("_")},
            "seeds": [],
            "inputs": {},
            "outputs": [],
            "tool_version": __version__,
            "started": _now(),
        }

    def add_input(self, path):
        self.doc["inputs"][str(path)] = file_digest(path)

    def write(self, path, **extra):
        self.doc.update(extra)
        self.doc["finished"] = _now()
        atomic_write(path, json.dumps(self.doc, indent=2, default=str) + "\n")


def _with_manifest(doc: dict, manifest_name: str) -> dict:
    return {"manifest": manifest_name, **doc}


# -- argument helpers ------------------------------------------------------

def _int_list(text):
    return [int(v) for v in str(text).split(",") if v.strip()]


def _max_features(text):
    if text is None or text in ("sqrt", "all"):
        return text
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected 'sqrt', 'all' or a fraction, got {text!r}")


def _bool(text):
    if isinstance(text, bool):
        return text
    low = str(text).strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise UsageError(f"expected a boolean, got {text!r}")


def _add_task_flags(p):
    p.add_argument("--data", required=True, help="CSV dataset (header row, numeric cells)")
    p.add_argument("--target", default="y", help="target column name or 0-based index")
    p.add_argument("--task", choices=("regression", "classification"), default="regression")
    p.add_argument("--num-classes", type=int, default=2)


def _add_forest_flags(p):
    p.add_argument("--trees", type=int, default=100)
    p.add_argument("--max-depth", type=int, default=None)
    p.add_argument("--min-samples-split", type=int, default=2)
    p.add_argument("--max-features", type=_max_features, default=None)
    p.add_argument("--no-bootstrap", action="store_true")


def _forest_params(args, seed=0) -> ForestParams:
    try:
        return ForestParams(
            num_trees=args.trees,
            max_depth=args.max_depth,
            min_samples_split=args.min_samples_split,
            max_features=args.max_features,
            bootstrap=not args.no_bootstrap,
            seed=seed,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _task(args) -> TaskKind:
    if args.task == "classification":
        return TaskKind.classification(args.num_classes)
    return TaskKind.regression()


def _parse_seeds(text, base):
    text = str(text)
    if "," in text:
        return _int_list(text)
    count = int(text)
    if count < 1:
        raise UsageError("--seeds must be a positive count or a comma-separated list")
    return list(range(base, base + count))


# -- commands --------------------------------------------------------------

def cmd_synth(args) -> int:
    if args.n < 1:
        raise UsageError("--n must be >= 1")
    spec = SyntheticSpec(
        n_samples=args.n, seed=args.seed, variant=args.variant,
        noise_sigma1=args.noise_sigma1, noise_sigma2=args.noise_sigma2,
        bias_fraction=args.bias_fraction, bias_value=args.bias_value,
    )
    data = generate_synthetic(spec)
    lines = [",".join([*data.feature_names, "y"])]
    for row, t in zip(data.values.tolist(), data.target.tolist()):
        lines.append(",".join(repr(v) for v in [*row, t]))
    out = Path(args.out)
    manifest = Manifest("synth", args)
    atomic_write(out, "\n".join(lines) + "\n")
    manifest.write(out.with_name(out.name + ".manifest.json"), seeds=[args.seed],
                   outputs=[str(out)], output_digest=file_digest(out))
    return EXIT_OK


def _boruta_config(args, seed) -> BorutaConfig:
    try:
        return BorutaConfig(
            max_iterations=args.max_iter,
            alpha=args.alpha,
            bonferroni=not args.no_bonferroni,
            method=args.method,
            shadow_mode=args.shadow_mode,
            kl_direction=args.kl_direction,
            forest_params=_forest_params(args),
            seed=seed,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def cmd_select(args) -> int:
    seeds = _parse_seeds(args.seeds, args.seed_base)
    configs = {s: _boruta_config(args, s) for s in seeds}
    data = load_csv(args.data, args.target, _task(args))
    manifest = Manifest("select", args)
    manifest.add_input(args.data)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    def one(seed):
        report = run_boruta(data, configs[seed], n_jobs=1)
        rpath = out / f"report_seed{seed}.json"
        hpath = out / f"history_seed{seed}.csv"
        atomic_write(rpath, json.dumps(_with_manifest(report.to_dict(), MANIFEST_NAME), indent=2) + "\n")
        written.append(rpath)
        atomic_write(hpath, report.history_csv())
        written.append(hpath)
        logger.info("seed %d: %d accepted after %d iterations", seed, len(report.accepted),
                    report.iterations_run)
        return report

    try:
        if args.jobs > 1 and len(seeds) > 1:
            with ThreadPoolExecutor(max_workers=args.jobs) as pool:
                reports = list(pool.map(one, seeds))
        else:
            reports = [one(s) for s in seeds]
        agg = aggregate_runs(reports)
        apath = out / "aggregate.json"
        atomic_write(apath, json.dumps(_with_manifest(agg.to_dict(), MANIFEST_NAME), indent=2) + "\n")
        written.append(apath)
    except BaseException:
        for path in written:
            path.unlink(missing_ok=True)
        raise
    timings = {str(r.seed): list(r.iteration_seconds) for r in reports}
    manifest.write(out / MANIFEST_NAME, seeds=seeds, outputs=[str(p) for p in written],
                   iteration_seconds=timings)
    accepted = ", ".join(agg.accepted) or "(none)"
    print(f"accepted ({len(agg.accepted)}): {accepted}")
    return EXIT_OK


def _read_feature_list(path, data) -> list:
    if path == "all":
        return list(data.feature_names)
    path = Path(path)
    if not path.is_file():
        raise DataError(f"no such features file: {path}")
    text = path.read_text()
    if path.suffix == ".json":
        doc = json.loads(text)
        feats = doc.get("features", doc)
        if isinstance(feats, dict):
            names = [n for n, rec in feats.items()
                     if rec.get("consensus_state", rec.get("state")) == "accepted"]
        else:
            names = list(feats)
    else:
        names = [line.strip() for line in text.splitlines()
                 if line.strip() and not line.startswith("#")]
    missing = [n for n in names if n not in data.feature_names]
    if missing:
        raise DataError(f"features not in dataset: {', '.join(missing)}")
    if not names:
        raise DataError(f"{path}: no features listed")
    return names


def cmd_eval(args) -> int:
    if args.k < 2:
        raise UsageError("--k must be >= 2")
    data = load_csv(args.data, args.target, _task(args))
    if args.k > data.n_samples:
        raise UsageError(f"--k must be <= number of rows ({data.n_samples})")
    features = _read_feature_list(args.features, data)
    manifest = Manifest("eval", args)
    manifest.add_input(args.data)
    if args.features != "all":
        manifest.add_input(args.features)
    metrics = cross_validate(data, features, _forest_params(args, args.seed), args.k, args.seed,
                             n_jobs=args.jobs)
    doc = _with_manifest({"k": args.k, "seed": args.seed, "n_features": len(features),
                          "features": features, "metrics": metrics.to_dict()},
                         Path(args.out).name + ".manifest.json")
    atomic_write(args.out, json.dumps(doc, indent=2) + "\n")
    manifest.write(Path(args.out).with_name(Path(args.out).name + ".manifest.json"),
                   seeds=[args.seed], outputs=[str(args.out)])
    print(json.dumps(metrics.to_dict()))
    return EXIT_OK


def read_history_csv(path) -> dict:
    """feature -> list of importances from one history file."""
    out = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["iteration", "feature", "importance"]:
            raise DataError(f"{path}: expected header iteration,feature,importance")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise DataError(f"{path}:{lineno}: expected 3 fields, got {len(row)}")
            try:
                int(row[0])
                value = float(row[2])
            except ValueError:
                raise DataError(f"{path}:{lineno}: malformed row {row!r}") from None
            out.setdefault(row[1], []).append(value)
    return out


def _read_states(path) -> dict:
    doc = json.loads(Path(path).read_text())
    feats = doc.get("features", {})
    return {n: rec.get("consensus_state", rec.get("state", "")) for n, rec in feats.items()}


def boxplot_rows(histories, states=None) -> list:
    """Five-number summaries per feature, sorted by decreasing median."""
    pooled = {}
    for hist in histories:
        for name, values in hist.items():
            pooled.setdefault(name, []).extend(values)
    rows = []
    for name, values in pooled.items():
        q = np.percentile(values, [0, 25, 50, 75, 100])
        rows.append((name, *map(float, q), (states or {}).get(name, "")))
    rows.sort(key=lambda r: (-r[3], r[0]))
    return rows


def cmd_report(args) -> int:
    if not args.histories:
        raise UsageError("report needs at least one history CSV")
    histories = []
    for path in args.histories:
        if not Path(path).is_file():
            raise DataError(f"no such history file: {path}")
        histories.append(read_history_csv(path))
    states = _read_states(args.states) if args.states else None
    rows = boxplot_rows(histories, states)
    lines = [",".join(BOXPLOT_COLUMNS)]
    for name, *stats, state in rows:
        lines.append(",".join([name, *(repr(v) for v in stats), state]))
    manifest = Manifest("report", args)
    for path in args.histories:
        manifest.add_input(path)
    atomic_write(args.out, "\n".join(lines) + "\n")
    manifest.write(Path(args.out).with_name(Path(args.out).name + ".manifest.json"),
                   outputs=[str(args.out)])
    return EXIT_OK


def _parse_sizes(text):
    sizes = []
    for item in str(text).split(","):
        try:
            n, p = item.lower().split("x")
            sizes.append((int(n), int(p)))
        except ValueError:
            raise UsageError(f"bad size {item!r}; expected NxP, e.g. 1000x20") from None
    if any(n < 2 or p < 1 for n, p in sizes):
        raise UsageError("sizes need n >= 2 and p >= 1")
    return sizes


def cmd_bench(args) -> int:
    sizes = _parse_sizes(args.sizes)
    records = benchmark(sizes, _forest_params(args, args.seed), args.method, args.repeats, args.seed)
    manifest = Manifest("bench", args)
    atomic_write(args.out, benchmark_csv(records))
    manifest.write(Path(args.out).with_name(Path(args.out).name + ".manifest.json"),
                   seeds=[args.seed], outputs=[str(args.out)])
    for r in records:
        print(",".join(str(v) for v in r.csv_row()))
    return EXIT_OK


# -- parser ----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="parboruta", description="Boruta feature selection with two importance backends.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="per-iteration log lines")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth", help="write a synthetic benchmark dataset as CSV")
    p.add_argument("--variant", choices=VARIANTS, default="direct")
    p.add_argument("--n", type=int, default=10000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--noise-sigma1", type=float, default=1e-5)
    p.add_argument("--noise-sigma2", type=float, default=0.01)
    p.add_argument("--bias-fraction", type=float, default=0.99)
    p.add_argument("--bias-value", type=float, default=-1.0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("select", help="run Boruta for one or more seeds")
    _add_task_flags(p)
    p.add_argument("--method", choices=METHODS, default="permut")
    p.add_argument("--seeds", default="1", help="a count (seeds base..base+count-1) or a list '3,5,8'")
    p.add_argument("--seed-base", type=int, default=0)
    p.add_argument("--max-iter", type=int, default=100)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--no-bonferroni", action="store_true")
    p.add_argument("--shadow-mode", choices=("per_column", "joint_rows"), default="per_column")
    p.add_argument("--kl-direction", choices=("baseline", "permuted"), default="baseline")
    _add_forest_flags(p)
    p.add_argument("--jobs", type=int, default=1, help="seeds run concurrently")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("eval", help="k-fold cross-validation on a feature subset")
    _add_task_flags(p)
    p.add_argument("--features", default="all",
                   help="'all', a text file with one name per line, or a report/aggregate JSON")
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    _add_forest_flags(p)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("report", help="box-plot statistics from importance histories")
    p.add_argument("histories", nargs="*", help="history CSV files")
    p.add_argument("--states", help="report or aggregate JSON supplying final states")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("bench", help="time fitting and importance over a size grid")
    p.add_argument("--sizes", required=True, help="comma-separated NxP list, e.g. 2000x20,2000x40")
    p.add_argument("--method", choices=METHODS, default="permut")
    p.add_argument("--repeats", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    _add_forest_flags(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_bench)

    for action in sub.choices.values():
        action.add_argument("--config", help="flat key=value file; flags override it")
    return parser


def read_config(path) -> dict:
    """``key = value`` lines; keys use flag names with or without dashes."""
    out = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.lstrip("-").replace("-", "_")] = value
    return out


def _config_defaults(subparser, config_path, command) -> dict:
    actions = {a.dest: a for a in subparser._actions}
    defaults = {}
    for key, raw in read_config(config_path).items():
        action = actions.get(key)
        if action is None or key in ("help", "config"):
            raise UsageError(f"{config_path}: unknown key {key!r} for '{command}'")
        if isinstance(action, argparse._StoreTrueAction):
            value = _bool(raw)
        elif action.type is not None:
            try:
                value = action.type(raw)
            except (ValueError, argparse.ArgumentTypeError) as exc:
                raise UsageError(f"{config_path}: bad value for {key}: {exc}") from None
        else:
            value = raw
        if action.choices is not None and value not in action.choices:
            raise UsageError(f"{config_path}: {key} must be one of {list(action.choices)}")
        defaults[key] = value
    return defaults


def parse_args(argv=None):
    """Parse ``argv``; values from ``--config`` sit between defaults and flags."""
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    config_path = None
    for i, tok in enumerate(argv):
        if tok == "--config" and i + 1 < len(argv):
            config_path = argv[i + 1]
        elif tok.startswith("--config="):
            config_path = tok.split("=", 1)[1]
    if config_path is None:
        return parser.parse_args(argv)
    # first pass only finds the subcommand; the config may supply required flags
    sub = parser._subparsers._group_actions[0].choices
    required = [a for p in sub.values() for a in p._actions if a.required]
    for a in required:
        a.required = False
    command = parser.parse_args(argv).command
    defaults = _config_defaults(sub[command], config_path, command)
    sub[command].set_defaults(**defaults)
    for a in required:
        a.required = a.dest not in defaults
    return parser.parse_args(argv)


def main(argv=None) -> int:
    try:
        args = parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        if args.verbose:
            logging.getLogger("parboruta").setLevel(logging.INFO)
        return args.func(args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except (DataError, FileNotFoundError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except KeyboardInterrupt:
        return EXIT_INTERNAL
    except Exception as exc:  # noqa: BLE001 - mapped to the internal-error exit code
        logging.getLogger("parboruta").debug("internal error", exc_info=True)
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
