"""Datasets: the in-memory matrix type, CSV I/O, synthetic generators and splits."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from ._random import derive_rng

N_SYNTHETIC_FEATURES = 50

# 1-based column numbers of the features entering the synthetic target
INFORMATIVE_FEATURES = (27, 49, 31, 46, 14, 40, 18, 20, 26, 33)
BIASED_FEATURE = 20

# target column -> (source columns, weights), all 1-based
COLLINEAR_COMBINATIONS = {
    13: ((14, 40, 7, 42), (0.1, 0.2, 0.3, 0.4)),
    5: ((31, 46, 47, 48), (0.4, 0.2, 0.3, 0.1)),
    38: ((18, 49, 16, 10), (0.1, 0.3, 0.2, 0.4)),
    9: ((27, 26, 17, 25), (0.4, 0.3, 0.2, 0.1)),
    4: ((33, 20, 35, 32), (0.2, 0.4, 0.1, 0.3)),
}

VARIANTS = ("direct", "biased", "multicollinear")


class DataError(ValueError):
    """Raised when a dataset cannot be read or violates a structural rule."""


@dataclass(frozen=True)
class TaskKind:
    """Regression, or classification over ``num_classes`` contiguous labels."""

    kind: str
    num_classes: int | None = None

    def __post_init__(self):
        if self.kind not in ("regression", "classification"):
            raise ValueError(f"unknown task kind {self.kind!r}")
        if self.kind == "classification":
            if self.num_classes is None or self.num_classes < 2:
                raise ValueError("classification needs num_classes >= 2")
        elif self.num_classes is not None:
            raise ValueError("regression takes no num_classes")

    @classmethod
    def regression(cls) -> "TaskKind":
        return cls("regression")

    @classmethod
    def classification(cls, num_classes: int) -> "TaskKind":
        return cls("classification", int(num_classes))

    @property
    def is_classification(self) -> bool:
        return self.kind == "classification"

    def __str__(self):
        if self.is_classification:
            return f"classification({self.num_classes})"
        return "regression"


@dataclass(frozen=True, eq=False)
class DataMatrix:
    """Feature matrix, target vector and task, frozen after construction.

    ``values`` is an ``(n, p)`` float array and ``target`` has length ``n``.
    Both arrays are made read-only so instances can be shared freely between
    worker threads.
    """

    values: np.ndarray
    target: np.ndarray
    feature_names: tuple = field(default=())
    task: TaskKind = field(default_factory=TaskKind.regression)

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64, order="C")
        if values.ndim != 2:
            raise DataError(f"values must be 2-d, got shape {values.shape}")
        target = np.array(self.target, dtype=np.float64).ravel()
        n, p = values.shape
        if target.shape[0] != n:
            raise DataError(f"{n} rows but target has length {target.shape[0]}")
        if n == 0:
            raise DataError("empty dataset")
        if not np.all(np.isfinite(values)):
            r, c = np.argwhere(~np.isfinite(values))[0]
            raise DataError(f"non-finite value at row {r}, column {c}")
        if not np.all(np.isfinite(target)):
            raise DataError("non-finite target value")
        names = tuple(self.feature_names) or default_feature_names(p)
        if len(names) != p:
            raise DataError(f"{len(names)} feature names for {p} columns")
        if self.task.is_classification:
            k = self.task.num_classes
            if np.any(target != np.round(target)) or target.min() < 0 or target.max() >= k:
                raise DataError(f"classification labels must be integers in [0, {k})")
        values.setflags(write=False)
        target.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "target", target)
        object.__setattr__(self, "feature_names", tuple(str(s) for s in names))

    @property
    def n_samples(self) -> int:
        return self.values.shape[0]

    @property
    def n_features(self) -> int:
        return self.values.shape[1]

    @property
    def shape(self):
        return self.values.shape

    def subset_rows(self, rows) -> "DataMatrix":
        rows = np.asarray(rows, dtype=np.intp)
        return DataMatrix(self.values[rows], self.target[rows], self.feature_names, self.task)

    def feature_index(self, name: str) -> int:
        try:
            return self.feature_names.index(name)
        except ValueError:
            raise DataError(f"unknown feature {name!r}") from None

    def equals(self, other: "DataMatrix") -> bool:
        return (
            self.task == other.task
            and self.feature_names == other.feature_names
            and np.array_equal(self.values, other.values)
            and np.array_equal(self.target, other.target)
        )


def default_feature_names(p: int) -> tuple:
    return tuple(f"feature-{i + 1}" for i in range(p))


def load_csv(path, target_column, task: TaskKind) -> DataMatrix:
    """Read a headed, comma-separated numeric file.

    ``target_column`` is a header name or a 0-based column index. Class
    labels for classification are mapped onto ``0..k-1`` in sorted order of
    their numeric values.
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"no such file: {path}")
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        rows = [row for row in reader if row]
    if not rows:
        raise DataError(f"{path}: no data rows")

    if isinstance(target_column, str) and not target_column.lstrip("-").isdigit():
        if target_column not in header:
            raise DataError(f"{path}: target column {target_column!r} not in header")
        t_idx = header.index(target_column)
    else:
        t_idx = int(target_column)
        if not -len(header) <= t_idx < len(header):
            raise DataError(f"{path}: target column index {t_idx} out of range")
        t_idx %= len(header)

    table = np.empty((len(rows), len(header)))
    for i, row in enumerate(rows):
        if len(row) != len(header):
            raise DataError(f"{path}: row {i + 1} has {len(row)} fields, expected {len(header)}")
        for j, cell in enumerate(row):
            try:
                table[i, j] = float(cell)
            except ValueError:
                raise DataError(
                    f"{path}: non-numeric cell {cell!r} at row {i + 1}, column {header[j]!r}"
                ) from None
            if not math.isfinite(table[i, j]):
                raise DataError(
                    f"{path}: non-finite cell {cell!r} at row {i + 1}, column {header[j]!r}"
                )

    target = table[:, t_idx]
    values = np.delete(table, t_idx, axis=1)
    names = tuple(h for j, h in enumerate(header) if j != t_idx)
    if values.shape[1] == 0:
        raise DataError(f"{path}: no feature columns besides the target")
    if task.is_classification:
        labels, target = np.unique(target, return_inverse=True)
        if len(labels) > task.num_classes:
            raise DataError(
                f"{path}: found {len(labels)} distinct labels, task declares {task.num_classes}"
            )
    return DataMatrix(values, target, names, task)


def write_csv(data: DataMatrix, path, target_name: str = "y") -> None:
    """Write ``data`` in the dialect ``load_csv`` reads, target last."""
    with Path(path).open("w", newline="") as fh:
        _write_rows(data, fh, target_name)


def _write_rows(data, fh, target_name):
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow([*data.feature_names, target_name])
    fmt = repr
    for row, t in zip(data.values.tolist(), data.target.tolist()):
        writer.writerow([fmt(v) for v in row] + [fmt(t)])


@dataclass(frozen=True)
class SyntheticSpec:
    """Parameters of the 50-feature synthetic regression benchmark."""

    n_samples: int
    seed: int = 0
    variant: str = "direct"
    noise_sigma1: float = 1e-5
    noise_sigma2: float = 0.01
    bias_fraction: float = 0.99
    bias_value: float = -1.0

    def __post_init__(self):
        if self.n_samples < 1:
            raise ValueError("n_samples must be >= 1")
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if self.noise_sigma1 < 0 or self.noise_sigma2 < 0:
            raise ValueError("noise sigmas must be >= 0")
        if not 0.0 <= self.bias_fraction <= 1.0:
            raise ValueError("bias_fraction must lie in [0, 1]")
        if self.seed < 0 or self.seed >= 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")


def synthetic_target(X: np.ndarray) -> np.ndarray:
    """Noise-free target of the synthetic benchmark; ``X`` has 50 columns."""
    c = lambda j: X[:, j - 1]  # noqa: E731 - 1-based column access
    return (
        5 * c(27) ** 3
        + 4 * c(49) ** 2
        + 5 * c(31) * c(46)
        + 2 * c(14)
        - 2.5 * c(40)
        + 3.5 * np.cbrt(c(18))
        + np.exp(c(20))
        + 2 * np.sin(3.14 * c(26))
        + 5 * np.cos(3.14 * c(33))
    )


def generate_synthetic(spec: SyntheticSpec) -> DataMatrix:
    """Build one of the synthetic regimes (direct, biased, multicollinear).

    The direct matrix and target are drawn first from one stream; the
    biased and multicollinear variants only overwrite columns afterwards,
    using independent streams, so all untouched columns and the target are
    identical across variants for the same seed.
    """
    n = spec.n_samples
    rng = derive_rng(spec.seed, "synthetic")
    X = rng.random((n, N_SYNTHETIC_FEATURES))
    y = synthetic_target(X) + rng.normal(0.0, spec.noise_sigma1, size=n)

    if spec.variant == "biased":
        rows_rng = derive_rng(spec.seed, "synthetic", "biased")
        k = int(math.floor(spec.bias_fraction * n))
        rows = rows_rng.choice(n, size=k, replace=False)
        X[rows, BIASED_FEATURE - 1] = spec.bias_value
    elif spec.variant == "multicollinear":
        noise_rng = derive_rng(spec.seed, "synthetic", "multicollinear")
        base = X.copy()
        for target_col in sorted(COLLINEAR_COMBINATIONS):
            sources, weights = COLLINEAR_COMBINATIONS[target_col]
            mix = sum(w * base[:, s - 1] for s, w in zip(sources, weights))
            X[:, target_col - 1] = mix + noise_rng.normal(0.0, spec.noise_sigma2, size=n)

    return DataMatrix(X, y, default_feature_names(N_SYNTHETIC_FEATURES), TaskKind.regression())


def kfold_split(data: DataMatrix | int, k: int, seed: int = 0) -> list:
    """Shuffle row indices once and cut them into ``k`` test folds.

    Returns a list of ``(train_idx, test_idx)`` pairs. Fold sizes differ by
    at most one; the larger folds come first.
    """
    n = data if isinstance(data, (int, np.integer)) else data.n_samples
    if k < 2 or k > n:
        raise ValueError(f"k must lie in [2, {n}], got {k}")
    order = derive_rng(seed, "kfold").permutation(n)
    folds = np.array_split(order, k)
    out = []
    for i, test in enumerate(folds):
        train = np.concatenate([f for j, f in enumerate(folds) if j != i])
        out.append((np.sort(train), np.sort(test)))
    return out


def select_columns(data: DataMatrix, columns: Sequence[int] | np.ndarray) -> DataMatrix:
    """Return a matrix with only ``columns``, given as indices or a boolean mask."""
    cols = np.asarray(columns)
    if cols.dtype == bool:
        if cols.shape != (data.n_features,):
            raise IndexError(f"mask length {cols.shape} does not match {data.n_features} features")
        cols = np.flatnonzero(cols)
    cols = cols.astype(np.intp, copy=False).ravel()
    if cols.size == 0:
        raise ValueError("cannot select zero columns")
    if cols.min() < 0 or cols.max() >= data.n_features:
        raise IndexError(f"column index out of range for {data.n_features} features")
    names = tuple(data.feature_names[i] for i in cols)
    return DataMatrix(data.values[:, cols], data.target, names, data.task)
