"""CART random forests whose nodes keep split gain and instance counts.

Trees are grown by the compiled kernel in ``_kernels`` and stored as flat
node arrays. Fitting is parallel over trees and prediction parallel over
row blocks; both give identical results for any worker count.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from functools import cached_property

import numpy as np

from . import _kernels
from ._random import check_seed, derive_rng, derive_seed
from .data import DataMatrix, TaskKind

FOREST_FORMAT = "parboruta-forest"
FOREST_FORMAT_VERSION = 1

_ROW_BLOCK = 512


@dataclass(frozen=True)
class ForestParams:
    """Hyper-parameters of a forest.

    ``max_features`` is ``"sqrt"``, ``"all"``, a fraction in ``(0, 1]``, or
    ``None`` for the task default (``"sqrt"`` for classification, ``1/3``
    for regression). ``max_depth=None`` grows trees until leaves are pure.
    """

    num_trees: int = 100
    max_depth: int | None = None
    min_samples_split: int = 2
    max_features: str | float | None = None
    bootstrap: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.num_trees < 1:
            raise ValueError("num_trees must be >= 1")
        if self.max_depth is not None and self.max_depth < 1:
            raise ValueError("max_depth must be >= 1 or None")
        if self.min_samples_split < 2:
            raise ValueError("min_samples_split must be >= 2")
        mf = self.max_features
        if isinstance(mf, str):
            if mf not in ("sqrt", "all"):
                raise ValueError(f"max_features must be 'sqrt', 'all' or a fraction, got {mf!r}")
        elif mf is not None and not 0.0 < float(mf) <= 1.0:
            raise ValueError(f"max_features fraction must lie in (0, 1], got {mf}")
        object.__setattr__(self, "seed", check_seed(self.seed))

    def resolve_max_features(self, n_features: int, task: TaskKind) -> int:
        mf = self.max_features
        if mf is None:
            mf = "sqrt" if task.is_classification else 1.0 / 3.0
        if mf == "sqrt":
            k = int(math.sqrt(n_features))
        elif mf == "all":
            k = n_features
        else:
            k = int(float(mf) * n_features)
        return min(max(1, k), n_features)

    def replace(self, **changes) -> "ForestParams":
        return ForestParams(**{**asdict(self), **changes})

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True, eq=False)
class Tree:
    """One fitted tree as parallel node arrays (node 0 is the root).

    ``feature[i] == -1`` marks a leaf. ``gain`` is the unweighted impurity
    decrease at a split node and ``count`` the number of (bootstrap) training
    rows reaching the node. ``value`` is ``(n_nodes, 1)`` for regression and
    ``(n_nodes, num_classes)`` class proportions for classification.
    """

    feature: np.ndarray
    threshold: np.ndarray
    gain: np.ndarray
    impurity: np.ndarray
    count: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    def __post_init__(self):
        for name in ("feature", "threshold", "gain", "impurity", "count", "left", "right", "value"):
            arr = np.ascontiguousarray(getattr(self, name))
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n_nodes(self) -> int:
        return self.feature.shape[0]

    @property
    def is_leaf(self) -> np.ndarray:
        return self.feature == _kernels.LEAF

    @cached_property
    def depths(self) -> np.ndarray:
        d = np.zeros(self.n_nodes, dtype=np.int64)
        # children always have larger ids than their parent
        for i in np.flatnonzero(~self.is_leaf):
            d[self.left[i]] = d[i] + 1
            d[self.right[i]] = d[i] + 1
        return d

    @property
    def depth(self) -> int:
        return int(self.depths.max())

    @property
    def n_leaves(self) -> int:
        return int(self.is_leaf.sum())

    def to_dict(self, node: int = 0) -> dict:
        """Nested node records, the JSON form of the tree."""
        if self.feature[node] == _kernels.LEAF:
            payload = self.value[node]
            return {
                "instance_count": int(self.count[node]),
                "impurity": float(self.impurity[node]),
                "value": float(payload[0]) if payload.shape[0] == 1 else [float(v) for v in payload],
            }
        return {
            "split_feature": int(self.feature[node]),
            "threshold": float(self.threshold[node]),
            "gain": float(self.gain[node]),
            "instance_count": int(self.count[node]),
            "impurity": float(self.impurity[node]),
            "children": [self.to_dict(self.left[node]), self.to_dict(self.right[node])],
        }

    @classmethod
    def from_dict(cls, root: dict, width: int) -> "Tree":
        """Inverse of ``to_dict``; ``impurity`` and leaf ``value`` are optional."""
        rows = []

        def visit(rec):
            i = len(rows)
            rows.append(None)
            if "children" in rec:
                kids = rec["children"]
                if len(kids) != 2:
                    raise ValueError("split nodes need exactly two children")
                left = visit(kids[0])
                right = visit(kids[1])
                rows[i] = (int(rec["split_feature"]), float(rec.get("threshold", 0.0)),
                           float(rec["gain"]), float(rec.get("impurity", 0.0)),
                           int(rec["instance_count"]), left, right, np.zeros(width))
            else:
                value = np.zeros(width)
                if "value" in rec:
                    value[:] = rec["value"]
                rows[i] = (_kernels.LEAF, 0.0, 0.0, float(rec.get("impurity", 0.0)),
                           int(rec.get("instance_count", 0)), -1, -1, value)
            return i

        visit(root)
        cols = list(zip(*rows))
        return cls(
            feature=np.array(cols[0], dtype=np.int64),
            threshold=np.array(cols[1], dtype=np.float64),
            gain=np.array(cols[2], dtype=np.float64),
            impurity=np.array(cols[3], dtype=np.float64),
            count=np.array(cols[4], dtype=np.int64),
            left=np.array(cols[5], dtype=np.int64),
            right=np.array(cols[6], dtype=np.int64),
            value=np.array(cols[7], dtype=np.float64).reshape(len(rows), width),
        )


class _PackedForest:
    """All trees concatenated into one node table for the traversal kernel."""

    def __init__(self, trees):
        sizes = [t.n_nodes for t in trees]
        offsets = np.concatenate([[0], np.cumsum(sizes)[:-1]]).astype(np.int64)
        self.roots = offsets
        self.feature = np.concatenate([t.feature for t in trees])
        self.threshold = np.concatenate([t.threshold for t in trees])
        self.left = np.concatenate(
            [np.where(t.left >= 0, t.left + o, -1) for t, o in zip(trees, offsets)])
        self.right = np.concatenate(
            [np.where(t.right >= 0, t.right + o, -1) for t, o in zip(trees, offsets)])
        self.value = np.ascontiguousarray(np.concatenate([t.value for t in trees]))


@dataclass(frozen=True, eq=False)
class Forest:
    """A fitted ensemble; immutable and safe to share between threads."""

    trees: tuple
    params: ForestParams
    num_features: int
    task: TaskKind

    def __post_init__(self):
        object.__setattr__(self, "trees", tuple(self.trees))
        for tree in self.trees:
            used = tree.feature[tree.feature != _kernels.LEAF]
            if used.size and used.max() >= self.num_features:
                raise ValueError("split feature index out of range")

    @property
    def width(self) -> int:
        return self.task.num_classes if self.task.is_classification else 1

    @cached_property
    def packed(self) -> _PackedForest:
        return _PackedForest(self.trees)

    @cached_property
    def used_features(self) -> np.ndarray:
        used = np.zeros(self.num_features, dtype=bool)
        for tree in self.trees:
            used[tree.feature[tree.feature != _kernels.LEAF]] = True
        return used

    def predict(self, X, n_jobs: int = 1) -> np.ndarray:
        return predict(self, X, n_jobs=n_jobs)

    def to_dict(self) -> dict:
        return {
            "format": FOREST_FORMAT,
            "version": FOREST_FORMAT_VERSION,
            "task": self.task.kind,
            "num_classes": self.task.num_classes,
            "num_features": self.num_features,
            "params": self.params.to_dict(),
            "trees": [t.to_dict() for t in self.trees],
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_dict(cls, doc: dict) -> "Forest":
        if doc.get("format", FOREST_FORMAT) != FOREST_FORMAT:
            raise ValueError(f"not a forest document: format={doc.get('format')!r}")
        if doc.get("task", "regression") == "classification":
            task = TaskKind.classification(doc["num_classes"])
        else:
            task = TaskKind.regression()
        width = task.num_classes if task.is_classification else 1
        trees = [Tree.from_dict(t, width) for t in doc["trees"]]
        params = ForestParams(**doc["params"]) if "params" in doc else ForestParams(num_trees=len(trees))
        return cls(trees, params, int(doc["num_features"]), task)

    @classmethod
    def from_json(cls, text: str) -> "Forest":
        return cls.from_dict(json.loads(text))


def _tree_from_kernel(out) -> Tree:
    feature, threshold, gain, impurity, count, left, right, _depth, value = out
    return Tree(feature, threshold, gain, impurity, count, left, right, value)


def fit_arrays(X: np.ndarray, y: np.ndarray, task: TaskKind, params: ForestParams,
               n_jobs: int = 1) -> Forest:
    """Fit on raw arrays; ``X`` must be finite float64 and ``y`` task-encoded."""
    # column-major so the per-node column gathers stay in cache
    X = np.asfortranarray(X, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    n, p = X.shape
    if p < 1:
        raise ValueError("cannot fit a forest on zero features")
    if n < params.min_samples_split:
        raise ValueError(f"{n} samples is fewer than min_samples_split={params.min_samples_split}")
    n_classes = task.num_classes if task.is_classification else 0
    max_features = params.resolve_max_features(p, task)
    max_depth = -1 if params.max_depth is None else params.max_depth

    def grow(i):
        if params.bootstrap:
            rows = derive_rng(params.seed, "bootstrap", i).integers(0, n, size=n)
        else:
            rows = np.arange(n)
        out = _kernels.build_tree(X, y, n_classes, rows.astype(np.int64), max_features,
                                  max_depth, params.min_samples_split,
                                  derive_seed(params.seed, "splits", i))
        return _tree_from_kernel(out)

    trees = _map(grow, range(params.num_trees), n_jobs)
    return Forest(tuple(trees), params, p, task)


def fit_forest(data: DataMatrix, params: ForestParams, n_jobs: int = 1) -> Forest:
    """Grow ``params.num_trees`` trees on ``data``.

    Each tree draws its bootstrap rows and split candidates from streams
    keyed by ``(params.seed, tree index)``, so the forest is the same
    whatever ``n_jobs`` is.
    """
    return fit_arrays(data.values, data.target, data.task, params, n_jobs=n_jobs)


def _map(fn, items, n_jobs):
    items = list(items)
    if n_jobs is None or n_jobs <= 1 or len(items) <= 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=n_jobs) as pool:
        return list(pool.map(fn, items))


def check_matrix(forest: Forest, X) -> np.ndarray:
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError(f"expected a 2-d matrix, got shape {X.shape}")
    if X.shape[1] != forest.num_features:
        raise ValueError(f"X has {X.shape[1]} columns, forest was fitted on {forest.num_features}")
    return X


def predict_raw(forest: Forest, X: np.ndarray, swap_col: int = -1, swap_values=None,
                n_jobs: int = 1) -> np.ndarray:
    """``(n, width)`` averaged leaf payloads, optionally with one column replaced."""
    n = X.shape[0]
    out = np.empty((n, forest.width))
    if swap_values is None:
        swap_values = np.empty(0)
    pk = forest.packed

    def block(start):
        _kernels.predict_rows(X, start, min(start + _ROW_BLOCK, n), pk.roots, pk.feature,
                              pk.threshold, pk.left, pk.right, pk.value, swap_col,
                              swap_values, out)

    _map(block, range(0, n, _ROW_BLOCK), n_jobs)
    return out


def predict(forest: Forest, X, n_jobs: int = 1) -> np.ndarray:
    """Mean of per-tree leaf values (regression) or class probabilities.

    Returns a length-n vector for regression and an ``(n, num_classes)``
    matrix for classification.
    """
    X = check_matrix(forest, X)
    out = predict_raw(forest, X, n_jobs=n_jobs)
    return out if forest.task.is_classification else out[:, 0]


def forest_stats(forest: Forest) -> dict:
    """Average tree depth and leaf count, and the total node count."""
    depths = [t.depth for t in forest.trees]
    leaves = [t.n_leaves for t in forest.trees]
    return {
        "avg_depth": float(np.mean(depths)),
        "avg_leaves": float(np.mean(leaves)),
        "total_nodes": int(sum(t.n_nodes for t in forest.trees)),
    }
