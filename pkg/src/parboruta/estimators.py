"""scikit-learn compatible wrappers around the forest and the Boruta loop."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, RegressorMixin
from sklearn.feature_selection import SelectorMixin
from sklearn.utils.multiclass import type_of_target
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .boruta import ACCEPTED, TENTATIVE, BorutaConfig, run_boruta
from .data import DataMatrix, TaskKind
from .forest import ForestParams, fit_arrays, predict
from .importance import PERMUT, impurity_importance


def _forest_params(est) -> ForestParams:
    return ForestParams(
        num_trees=est.n_estimators,
        max_depth=est.max_depth,
        min_samples_split=est.min_samples_split,
        max_features=est.max_features,
        bootstrap=est.bootstrap,
        seed=0 if est.random_state is None else est.random_state,
    )


class _BaseForest(BaseEstimator):
    def __init__(self, n_estimators=100, *, max_depth=None, min_samples_split=2,
                 max_features=None, bootstrap=True, random_state=None, n_jobs=1):
        self.n_estimators = n_estimators
        self.max_depth = max_depth
        self.min_samples_split = min_samples_split
        self.max_features = max_features
        self.bootstrap = bootstrap
        self.random_state = random_state
        self.n_jobs = n_jobs

    @property
    def feature_importances_(self):
        check_is_fitted(self, "forest_")
        return impurity_importance(self.forest_).scores

    def _check_X(self, X):
        check_is_fitted(self, "forest_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(
                f"X has {X.shape[1]} features, but {type(self).__name__} "
                f"is expecting {self.n_features_in_} features as input"
            )
        return X


class CARTForestRegressor(RegressorMixin, _BaseForest):
    """Random forest regressor (variance impurity) with inspectable trees.

    The fitted ensemble is exposed as ``forest_``; see ``parboruta.forest``.
    """

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=np.float64, y_numeric=True)
        self.forest_ = fit_arrays(X, y, TaskKind.regression(), _forest_params(self), self.n_jobs)
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        X = self._check_X(X)
        return predict(self.forest_, X, n_jobs=self.n_jobs)


class CARTForestClassifier(ClassifierMixin, _BaseForest):
    """Random forest classifier (Gini impurity) with soft voting."""

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=np.float64)
        self.classes_, encoded = np.unique(y, return_inverse=True)
        if self.classes_.shape[0] < 2:
            raise ValueError("classification needs at least two classes")
        task = TaskKind.classification(self.classes_.shape[0])
        self.forest_ = fit_arrays(X, encoded, task, _forest_params(self), self.n_jobs)
        self.n_features_in_ = X.shape[1]
        return self

    def predict_proba(self, X):
        X = self._check_X(X)
        return predict(self.forest_, X, n_jobs=self.n_jobs)

    def predict(self, X):
        return self.classes_[np.argmax(self.predict_proba(X), axis=1)]


class BorutaSelector(SelectorMixin, BaseEstimator):
    """All-relevant feature selection with shadow features.

    Parameters
    ----------
    method : {"permut", "treeimp"}, default="permut"
        Importance backend: shared-permutation prediction divergence or
        normalised impurity decrease.
    max_iter : int, default=100
        Maximum number of Boruta iterations.
    alpha : float, default=0.05
        Significance level of the per-iteration binomial test.
    bonferroni : bool, default=True
        Divide ``alpha`` by the number of undecided features.
    shadow_mode : {"per_column", "joint_rows"}, default="per_column"
        How shadow columns are shuffled.
    task : {"auto", "regression", "classification"}, default="auto"
        ``"auto"`` calls anything sklearn types as binary/multiclass a
        classification problem.
    n_estimators, max_depth, min_samples_split, max_features, bootstrap
        Forest settings used in every iteration.
    random_state : int or None
        Root seed; iteration and tree seeds are derived from it.
    n_jobs : int, default=1
        Worker threads. Results do not depend on it.

    Attributes
    ----------
    support_ : ndarray of bool
        Accepted features.
    support_weak_ : ndarray of bool
        Tentative features.
    ranking_ : ndarray of int
        1 accepted, 2 tentative, 3.. rejected by decreasing median importance.
    report_ : SelectionReport
        Full run record including the importance history.
    """

    def __init__(self, method=PERMUT, *, max_iter=100, alpha=0.05, bonferroni=True,
                 shadow_mode="per_column", task="auto", n_estimators=100, max_depth=None,
                 min_samples_split=2, max_features=None, bootstrap=True, random_state=None,
                 n_jobs=1):
        self.method = method
        self.max_iter = max_iter
        self.alpha = alpha
        self.bonferroni = bonferroni
        self.shadow_mode = shadow_mode
        self.task = task
        self.n_estimators = n_estimators
        self.max_depth = max_depth
        self.min_samples_split = min_samples_split
        self.max_features = max_features
        self.bootstrap = bootstrap
        self.random_state = random_state
        self.n_jobs = n_jobs

    def _resolve_task(self, y):
        task = self.task
        if task == "auto":
            kind = type_of_target(y)
            task = "classification" if kind in ("binary", "multiclass") else "regression"
        if task == "classification":
            self.classes_, y = np.unique(y, return_inverse=True)
            return TaskKind.classification(max(len(self.classes_), 2)), y
        if task == "regression":
            return TaskKind.regression(), y
        raise ValueError(f"task must be 'auto', 'regression' or 'classification', got {task!r}")

    def fit(self, X, y):
        feature_names = getattr(X, "columns", None)
        X, y = check_X_y(X, y, dtype=np.float64, y_numeric=False)
        task, y = self._resolve_task(y)
        names = tuple(str(c) for c in feature_names) if feature_names is not None else ()
        data = DataMatrix(X, np.asarray(y, dtype=np.float64), names, task)
        config = BorutaConfig(
            max_iterations=self.max_iter,
            alpha=self.alpha,
            bonferroni=self.bonferroni,
            method=self.method,
            shadow_mode=self.shadow_mode,
            forest_params=_forest_params(self),
            seed=0 if self.random_state is None else self.random_state,
        )
        self.report_ = run_boruta(data, config, n_jobs=self.n_jobs)
        self.n_features_in_ = X.shape[1]
        if feature_names is not None:
            self.feature_names_in_ = np.asarray(names, dtype=object)
        self.support_ = self.report_.state == ACCEPTED
        self.support_weak_ = self.report_.state == TENTATIVE
        self.ranking_ = self.report_.rank.copy()
        self.n_features_ = int(self.support_.sum())
        return self

    def _get_support_mask(self):
        check_is_fitted(self, "support_")
        return self.support_
