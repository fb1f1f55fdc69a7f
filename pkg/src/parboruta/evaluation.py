"""Metrics, k-fold evaluation of feature subsets, and importance-cost benchmarks."""

from __future__ import annotations

import csv
import io
import math
import time
import timeit
from dataclasses import asdict, dataclass

import numpy as np

from ._random import derive_rng
from .data import DataMatrix, TaskKind, kfold_split, select_columns
from .forest import ForestParams, fit_arrays, fit_forest, forest_stats, predict
from .importance import PERMUT, TREE_IMP, compute_importance


@dataclass(frozen=True)
class RegressionMetrics:
    mse: float
    mae: float
    r2: float  # NaN when the true values are constant

    def to_dict(self) -> dict:
        return {k: (None if isinstance(v, float) and math.isnan(v) else v)
                for k, v in asdict(self).items()}


@dataclass(frozen=True)
class ClassificationMetrics:
    accuracy: float
    recall: float
    precision: float
    f1: float
    zero_division: bool = False  # set when precision or recall had an empty denominator

    def to_dict(self) -> dict:
        return asdict(self)


def regression_metrics(y_true, y_pred) -> RegressionMetrics:
    y_true = np.asarray(y_true, dtype=np.float64).ravel()
    y_pred = np.asarray(y_pred, dtype=np.float64).ravel()
    if y_true.shape != y_pred.shape:
        raise ValueError(f"length mismatch: {y_true.size} vs {y_pred.size}")
    if y_true.size < 2:
        raise ValueError("need at least two samples")
    err = y_true - y_pred
    sse = float(np.sum(err * err))
    sst = float(np.sum((y_true - y_true.mean()) ** 2))
    r2 = 1.0 - sse / sst if sst > 0 else math.nan
    return RegressionMetrics(mse=sse / y_true.size, mae=float(np.mean(np.abs(err))), r2=r2)


def classification_metrics(y_true, y_pred, positive_class=1) -> ClassificationMetrics:
    """Binary accuracy, recall, precision and F1; 0/0 ratios are reported as 0."""
    y_true = np.asarray(y_true).ravel()
    y_pred = np.asarray(y_pred).ravel()
    if y_true.size == 0:
        raise ValueError("empty input")
    if y_true.shape != y_pred.shape:
        raise ValueError(f"length mismatch: {y_true.size} vs {y_pred.size}")
    pos_t = y_true == positive_class
    pos_p = y_pred == positive_class
    tp = int(np.sum(pos_t & pos_p))
    fp = int(np.sum(~pos_t & pos_p))
    fn = int(np.sum(pos_t & ~pos_p))
    tn = int(np.sum(~pos_t & ~pos_p))
    zero_div = tp + fp == 0 or tp + fn == 0
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return ClassificationMetrics(
        accuracy=(tp + tn) / y_true.size,
        recall=recall,
        precision=precision,
        f1=f1,
        zero_division=zero_div,
    )


def _average(metrics):
    cls = type(metrics[0])
    fields = [f for f in asdict(metrics[0]) if f != "zero_division"]
    avg = {f: float(np.mean([getattr(m, f) for m in metrics])) for f in fields}
    if cls is ClassificationMetrics:
        avg["zero_division"] = any(m.zero_division for m in metrics)
    return cls(**avg)


def cross_validate(data: DataMatrix, feature_subset=None, forest_params: ForestParams | None = None,
                   k: int = 5, seed: int = 0, n_jobs: int = 1, return_folds: bool = False):
    """Fit on k-1 folds, score on the held-out fold, average over folds.

    ``feature_subset`` is a list of column indices or names (``None`` keeps
    every column). Classification is scored with class 1 as positive.
    """
    if k < 2:
        raise ValueError("k must be >= 2")
    if feature_subset is not None:
        cols = [data.feature_index(c) if isinstance(c, str) else int(c) for c in feature_subset]
        if not cols:
            raise ValueError("feature subset is empty")
        data = select_columns(data, cols)
    forest_params = forest_params or ForestParams()
    folds = kfold_split(data, k, seed)
    scores = []
    for train, test in folds:
        if np.intersect1d(train, test).size:
            raise AssertionError("train and test folds overlap")
        forest = fit_forest(data.subset_rows(train), forest_params, n_jobs=n_jobs)
        pred = predict(forest, data.values[test], n_jobs=n_jobs)
        if data.task.is_classification:
            scores.append(classification_metrics(data.target[test], pred.argmax(axis=1)))
        else:
            scores.append(regression_metrics(data.target[test], pred))
    avg = _average(scores)
    return (avg, folds, scores) if return_folds else avg


@dataclass(frozen=True)
class BenchmarkRecord:
    n: int
    p: int
    num_trees: int
    avg_depth: float
    fit_time: float
    importance_time: float
    total_time: float

    CSV_COLUMNS = ("n", "p", "trees", "avg_depth", "fit_s", "importance_s", "total_s")

    def csv_row(self) -> list:
        return [self.n, self.p, self.num_trees, self.avg_depth,
                self.fit_time, self.importance_time, self.total_time]

    def to_dict(self) -> dict:
        return dict(zip(self.CSV_COLUMNS, self.csv_row()))


def benchmark_data(n: int, p: int, seed: int = 0):
    """Uniform features; the target depends on (at most) the first ten."""
    rng = derive_rng(seed, "benchmark", n, p)
    X = rng.random((n, p))
    k = min(p, 10)
    y = np.sin(3.14 * X[:, :k]).sum(axis=1) + 0.01 * rng.standard_normal(n)
    return X, y


def _median_time(fn, repeats, min_batch=0.05):
    """Median seconds per call over ``repeats`` timed batches.

    A calibration pass, also the discarded warm-up, doubles the batch size
    until one batch lasts ``min_batch`` seconds, so millisecond-scale calls
    stay above timer jitter.
    """
    timer = timeit.Timer(fn, timer=time.perf_counter)
    number = 1
    while timer.timeit(number) < min_batch:
        number *= 2
    return float(np.median([t / number for t in timer.repeat(repeat=repeats, number=number)]))


def benchmark(sizes, forest_params: ForestParams | None = None, method: str = PERMUT,
              repeats: int = 3, seed: int = 0, min_batch: float = 0.05) -> list:
    """Time forest fitting and importance separately for each ``(n, p)``.

    Each timing is the per-call median of ``repeats`` batches of at least
    ``min_batch`` seconds, after a discarded warm-up. Runs are sequential
    and single-threaded.
    """
    if method not in (TREE_IMP, PERMUT):
        raise ValueError(f"unknown method {method!r}")
    forest_params = forest_params or ForestParams()
    task = TaskKind.regression()
    records = []
    for n, p in sizes:
        X, y = benchmark_data(n, p, seed)
        holder = {}

        def fit():
            holder["forest"] = fit_arrays(X, y, task, forest_params)

        fit_s = _median_time(fit, repeats, min_batch)
        forest = holder["forest"]
        imp_s = _median_time(lambda: compute_importance(method, forest, X, seed=seed), repeats,
                             min_batch)
        records.append(BenchmarkRecord(
            n=n, p=p, num_trees=forest_params.num_trees,
            avg_depth=forest_stats(forest)["avg_depth"],
            fit_time=fit_s, importance_time=imp_s, total_time=fit_s + imp_s,
        ))
    return records


def benchmark_csv(records) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(BenchmarkRecord.CSV_COLUMNS)
    for r in records:
        writer.writerow(r.csv_row())
    return buf.getvalue()
