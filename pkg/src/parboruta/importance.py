"""Feature importance from tree structure and from shared-permutation divergence."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from ._random import derive_rng
from .forest import Forest, _map, check_matrix, predict_raw

TREE_IMP = "treeimp"
PERMUT = "permut"
METHODS = (TREE_IMP, PERMUT)

KL_EPSILON = 1e-12


@dataclass(frozen=True, eq=False)
class ImportanceVector:
    scores: np.ndarray
    method: str
    normalized: bool

    def __post_init__(self):
        scores = np.array(self.scores, dtype=np.float64)
        scores.setflags(write=False)
        object.__setattr__(self, "scores", scores)

    def __len__(self):
        return self.scores.shape[0]

    def to_dict(self, feature_names=None) -> dict:
        names = feature_names or [f"feature-{i + 1}" for i in range(len(self))]
        return {name: float(s) for name, s in zip(names, self.scores)}

    def to_json(self, feature_names=None, **kwargs) -> str:
        return json.dumps(self.to_dict(feature_names), **kwargs)


def tree_gain_totals(tree, num_features: int) -> np.ndarray:
    """Sum of ``gain * instance_count`` per split feature for one tree."""
    split = tree.feature >= 0
    return np.bincount(
        tree.feature[split],
        weights=tree.gain[split] * tree.count[split],
        minlength=num_features,
    ).astype(np.float64)


def impurity_importance(forest: Forest) -> ImportanceVector:
    """Per-tree normalised impurity decrease, averaged over trees.

    A tree without splits (or with zero total gain) contributes a zero
    vector. If every tree is like that the zero vector comes back with
    ``normalized=False`` instead of dividing by zero.
    """
    p = forest.num_features
    if not forest.trees:
        raise ValueError("forest has no trees")
    acc = np.zeros(p)
    # fixed tree order keeps the reduction independent of scheduling
    for tree in forest.trees:
        totals = tree_gain_totals(tree, p)
        s = totals.sum()
        if s > 0:
            acc += totals / s
    acc /= len(forest.trees)
    total = acc.sum()
    if total <= 0:
        return ImportanceVector(np.zeros(p), TREE_IMP, normalized=False)
    return ImportanceVector(acc / total, TREE_IMP, normalized=True)


def loss_mse(a, b) -> float:
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.shape[0]} vs {b.shape[0]}")
    if a.size == 0:
        raise ValueError("loss of empty vectors")
    d = a - b
    return float(np.mean(d * d))


def loss_kl(P, Q, eps: float = KL_EPSILON) -> float:
    """Mean over rows of KL(P_row || Q_row).

    Entries are clamped to ``eps`` inside the logarithm and zero entries of
    ``P`` contribute nothing, so the value is finite and exactly 0 when
    ``P == Q``.
    """
    P = np.asarray(P, dtype=np.float64)
    Q = np.asarray(Q, dtype=np.float64)
    if P.ndim == 1:
        P = P[None, :]
        Q = Q[None, :] if Q.ndim == 1 else Q
    if P.shape != Q.shape:
        raise ValueError(f"shape mismatch: {P.shape} vs {Q.shape}")
    if P.shape[0] == 0:
        raise ValueError("loss of empty matrices")
    ratio = np.log(np.maximum(P, eps)) - np.log(np.maximum(Q, eps))
    terms = np.where(P > 0, P * ratio, 0.0)
    return max(float(np.mean(terms.sum(axis=1))), 0.0)


def permutation_importance(forest: Forest, X, seed: int = 0, *, permutation=None,
                           kl_direction: str = "baseline", n_jobs: int = 1) -> ImportanceVector:
    """Prediction divergence when one column is shuffled, for every column.

    The reference is the forest's own prediction on ``X``, not a target.
    One row permutation is drawn from ``seed`` (or passed explicitly) and
    reused for every column. Regression scores are MSE; classification
    scores are mean KL divergence between class-probability rows, with the
    baseline as the first argument unless ``kl_direction="permuted"``.
    ``X`` is never written to.
    """
    X = check_matrix(forest, X)
    n, p = X.shape
    if kl_direction not in ("baseline", "permuted"):
        raise ValueError(f"kl_direction must be 'baseline' or 'permuted', got {kl_direction!r}")
    if permutation is None:
        permutation = derive_rng(seed, "permutation").permutation(n)
    else:
        permutation = np.asarray(permutation, dtype=np.intp)
        if permutation.shape != (n,) or not np.array_equal(np.sort(permutation), np.arange(n)):
            raise ValueError("permutation must be a permutation of range(n)")

    baseline = predict_raw(forest, X)
    classification = forest.task.is_classification

    def score(i):
        shuffled = np.ascontiguousarray(X[permutation, i])
        pred = predict_raw(forest, X, swap_col=i, swap_values=shuffled)
        if not classification:
            return loss_mse(baseline[:, 0], pred[:, 0])
        if kl_direction == "baseline":
            return loss_kl(baseline, pred)
        return loss_kl(pred, baseline)

    scores = np.array(_map(score, range(p), n_jobs), dtype=np.float64)
    return ImportanceVector(scores, PERMUT, normalized=False)


def compute_importance(method: str, forest: Forest, X, seed: int = 0, n_jobs: int = 1,
                       **kwargs) -> ImportanceVector:
    if method == TREE_IMP:
        return impurity_importance(forest)
    if method == PERMUT:
        return permutation_importance(forest, X, seed, n_jobs=n_jobs, **kwargs)
    raise ValueError(f"unknown importance method {method!r}; expected one of {METHODS}")
