"""The Boruta loop: shadow features, hit counting, binomial decisions, ranking."""

from __future__ import annotations

import io
import json
import logging
import time
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.stats import binom

from ._random import check_seed, derive_rng, derive_seed
from .data import DataMatrix
from .forest import ForestParams, fit_arrays
from .importance import METHODS, PERMUT, compute_importance

logger = logging.getLogger(__name__)

ACCEPTED, TENTATIVE, REJECTED = 1, 0, -1
STATE_NAMES = {ACCEPTED: "accepted", TENTATIVE: "tentative", REJECTED: "rejected"}
STATE_CODES = {v: k for k, v in STATE_NAMES.items()}
SHADOW_MODES = ("per_column", "joint_rows")
MIN_SHADOWS = 5


@dataclass(frozen=True)
class BorutaConfig:
    """Settings of one selection run.

    ``alpha`` is the per-iteration significance level; with ``bonferroni``
    it is divided by the number of still-undecided features.
    """

    max_iterations: int = 100
    alpha: float = 0.05
    bonferroni: bool = True
    method: str = PERMUT
    shadow_mode: str = "per_column"
    kl_direction: str = "baseline"
    forest_params: ForestParams = field(default_factory=ForestParams)
    seed: int = 0

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie in (0, 1)")
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.shadow_mode not in SHADOW_MODES:
            raise ValueError(f"shadow_mode must be one of {SHADOW_MODES}, got {self.shadow_mode!r}")
        object.__setattr__(self, "seed", check_seed(self.seed))

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, doc: dict) -> "BorutaConfig":
        doc = dict(doc)
        if isinstance(doc.get("forest_params"), dict):
            doc["forest_params"] = ForestParams(**doc["forest_params"])
        return cls(**doc)


def build_shadow(X_cur: np.ndarray, mode: str = "per_column", seed=0) -> np.ndarray:
    """Shuffled copies of ``X_cur``, doubled column-wise until there are at least 5.

    ``per_column`` shuffles every shadow column with its own permutation;
    ``joint_rows`` applies one row permutation to the whole block.
    ``seed`` may also be a ``numpy.random.Generator``.
    """
    X_cur = np.asarray(X_cur, dtype=np.float64)
    if X_cur.ndim != 2 or X_cur.shape[1] == 0:
        raise ValueError("need at least one column to build shadows")
    rng = seed if isinstance(seed, np.random.Generator) else derive_rng(seed, "shadow")
    shadow = X_cur.copy()
    while shadow.shape[1] < MIN_SHADOWS:
        shadow = np.hstack([shadow, shadow])
    if mode == "per_column":
        return rng.permuted(shadow, axis=0)
    if mode == "joint_rows":
        return shadow[rng.permutation(shadow.shape[0])]
    raise ValueError(f"shadow mode must be one of {SHADOW_MODES}, got {mode!r}")


def update_hits(imp_cur, imp_sha, hits) -> np.ndarray:
    """Add one hit where a feature strictly beats the best shadow."""
    imp_cur = np.asarray(imp_cur, dtype=np.float64)
    hits = np.asarray(hits)
    if imp_cur.shape != hits.shape:
        raise ValueError(f"length mismatch: {imp_cur.shape[0]} importances, {hits.shape[0]} hit counts")
    return hits + (imp_cur > np.max(imp_sha)).astype(hits.dtype)


def significance_test(hits, t: int, alpha: float = 0.05, bonferroni: bool = True,
                      num_undecided: int | None = None) -> np.ndarray:
    """Two-sided binomial decision per feature: +1 accept, -1 reject, 0 keep.

    Accept when P[Bin(t, 1/2) >= hits] < alpha', reject when
    P[Bin(t, 1/2) <= hits] < alpha', where alpha' is ``alpha`` divided by
    ``num_undecided`` (default ``len(hits)``) under Bonferroni.
    """
    hits = np.asarray(hits, dtype=np.int64)
    if np.any(hits < 0) or np.any(hits > t):
        raise ValueError(f"hit counts must lie in [0, {t}]")
    if num_undecided is None:
        num_undecided = hits.shape[0]
    level = alpha / max(num_undecided, 1) if bonferroni else alpha
    upper = binom.sf(hits - 1, t, 0.5)
    lower = binom.cdf(hits, t, 0.5)
    out = np.zeros(hits.shape, dtype=np.int8)
    out[upper < level] = ACCEPTED
    out[lower < level] = REJECTED
    return out


def rank_features(state, history) -> np.ndarray:
    """1 for accepted, 2 for tentative, 3, 4, ... for rejected features.

    Rejected features are ordered by descending median importance over the
    iterations they took part in; equal medians go to the lower index.
    """
    state = np.asarray(state)
    rank = np.ones(state.shape[0], dtype=np.int64)
    rank[state == TENTATIVE] = 2
    rejected = np.flatnonzero(state == REJECTED)
    if rejected.size:
        med = _column_medians(history)[rejected]
        order = np.lexsort((rejected, -med))
        rank[rejected[order]] = 3 + np.arange(rejected.size)
    return rank


def _column_medians(history) -> np.ndarray:
    history = np.asarray(history, dtype=np.float64)
    out = np.full(history.shape[1], np.nan)
    for j in range(history.shape[1]):
        col = history[:, j]
        col = col[~np.isnan(col)]
        if col.size:
            out[j] = np.median(col)
    return out


@dataclass(frozen=True, eq=False)
class SelectionReport:
    """Outcome of one ``run_boruta`` call.

    ``history`` has one row per iteration and NaN where a feature had
    already been rejected. ``iteration_seconds`` is wall time and is left
    out of ``to_dict`` unless asked for, so reports are reproducible byte
    for byte.
    """

    feature_names: tuple
    state: np.ndarray
    rank: np.ndarray
    hits: np.ndarray
    history: np.ndarray
    iterations_run: int
    seed: int
    config: BorutaConfig
    iteration_seconds: tuple = ()

    @property
    def median_importance(self) -> np.ndarray:
        return _column_medians(self.history)

    def _names(self, code):
        return [n for n, s in zip(self.feature_names, self.state) if s == code]

    @property
    def accepted(self) -> list:
        return self._names(ACCEPTED)

    @property
    def tentative(self) -> list:
        return self._names(TENTATIVE)

    @property
    def rejected(self) -> list:
        return self._names(REJECTED)

    def to_dict(self, include_timings: bool = False) -> dict:
        med = self.median_importance
        doc = {
            "seed": self.seed,
            "method": self.config.method,
            "iterations_run": self.iterations_run,
            "config": self.config.to_dict(),
            "features": {
                name: {
                    "state": STATE_NAMES[int(self.state[i])],
                    "rank": int(self.rank[i]),
                    "hits": int(self.hits[i]),
                    "median_importance": float(med[i]),
                }
                for i, name in enumerate(self.feature_names)
            },
        }
        if include_timings:
            doc["iteration_seconds"] = list(self.iteration_seconds)
        return doc

    def to_json(self, include_timings: bool = False) -> str:
        return json.dumps(self.to_dict(include_timings), indent=2)

    def history_csv(self) -> str:
        """Long-format history: ``iteration,feature,importance``."""
        buf = io.StringIO()
        buf.write("iteration,feature,importance\n")
        for t, row in enumerate(self.history, start=1):
            for name, v in zip(self.feature_names, row):
                if not np.isnan(v):
                    buf.write(f"{t},{name},{float(v)!r}\n")
        return buf.getvalue()


def run_boruta(data: DataMatrix, config: BorutaConfig, n_jobs: int = 1) -> SelectionReport:
    """Run the Boruta loop on ``data``.

    Every iteration refits a forest on the not-yet-rejected columns plus
    fresh shadows, scores all columns with ``config.method``, counts hits
    against the best shadow and tests undecided features. Random streams
    are keyed by ``(config.seed, iteration)``; ``n_jobs`` only changes speed.
    """
    X = data.values
    y = data.target
    p = data.n_features
    if p < 1:
        raise ValueError("dataset has no features")

    state = np.zeros(p, dtype=np.int8)
    hits = np.zeros(p, dtype=np.int64)
    history = []
    seconds = []
    t = 0
    while t < config.max_iterations and np.any(state == TENTATIVE):
        t += 1
        started = time.perf_counter()
        cols = np.flatnonzero(state >= 0)
        X_cur = X[:, cols]
        X_sha = build_shadow(X_cur, config.shadow_mode, derive_rng(config.seed, "shadow", t))
        X_all = np.hstack([X_cur, X_sha])

        params = config.forest_params.replace(seed=derive_seed(config.seed, "forest", t))
        forest = fit_arrays(X_all, y, data.task, params, n_jobs=n_jobs)
        extra = {"kl_direction": config.kl_direction} if config.method == PERMUT else {}
        imp = compute_importance(config.method, forest, X_all,
                                 seed=derive_seed(config.seed, "importance", t),
                                 n_jobs=n_jobs, **extra).scores
        imp_cur, imp_sha = imp[: cols.size], imp[cols.size:]

        row = np.full(p, np.nan)
        row[cols] = imp_cur
        history.append(row)
        hits[cols] = update_hits(imp_cur, imp_sha, hits[cols])

        undecided = np.flatnonzero(state == TENTATIVE)
        decision = significance_test(hits[undecided], t, config.alpha, config.bonferroni,
                                     num_undecided=undecided.size)
        state[undecided] = decision
        seconds.append(time.perf_counter() - started)
        logger.info(
            "iter %d: %d accepted, %d tentative, %d rejected (%.2fs)",
            t, np.sum(state == ACCEPTED), np.sum(state == TENTATIVE),
            np.sum(state == REJECTED), seconds[-1],
        )

    history = np.vstack(history)
    return SelectionReport(
        feature_names=data.feature_names,
        state=state,
        rank=rank_features(state, history),
        hits=hits,
        history=history,
        iterations_run=t,
        seed=config.seed,
        config=config,
        iteration_seconds=tuple(seconds),
    )


@dataclass(frozen=True, eq=False)
class AggregateResult:
    feature_names: tuple
    median_importance: np.ndarray
    consensus_state: np.ndarray
    votes: np.ndarray  # (p, 3) counts of rejected / tentative / accepted
    seeds: tuple

    @property
    def accepted(self) -> list:
        return [n for n, s in zip(self.feature_names, self.consensus_state) if s == ACCEPTED]

    def to_dict(self) -> dict:
        return {
            "seeds": list(self.seeds),
            "features": {
                name: {
                    "consensus_state": STATE_NAMES[int(self.consensus_state[i])],
                    "median_importance": float(self.median_importance[i]),
                    "votes": {
                        "accepted": int(self.votes[i, 2]),
                        "tentative": int(self.votes[i, 1]),
                        "rejected": int(self.votes[i, 0]),
                    },
                }
                for i, name in enumerate(self.feature_names)
            },
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def consensus(states) -> np.ndarray:
    """Plurality state per column of ``states`` (runs x features); ties -> tentative."""
    states = np.asarray(states)
    votes = np.stack([(states == s).sum(axis=0) for s in (REJECTED, TENTATIVE, ACCEPTED)], axis=1)
    out = np.zeros(states.shape[1], dtype=np.int8)
    top = votes.max(axis=1)
    unique = (votes == top[:, None]).sum(axis=1) == 1
    winner = np.array([REJECTED, TENTATIVE, ACCEPTED])[votes.argmax(axis=1)]
    out[unique] = winner[unique]
    return out


def aggregate_runs(reports) -> AggregateResult:
    """Median of per-run median importances and plurality vote on states."""
    reports = list(reports)
    if not reports:
        raise ValueError("need at least one report")
    names = reports[0].feature_names
    for r in reports[1:]:
        if r.feature_names != names:
            raise ValueError("reports cover different feature sets")
    medians = np.vstack([r.median_importance for r in reports])
    states = np.vstack([r.state for r in reports])
    votes = np.stack([(states == s).sum(axis=0) for s in (REJECTED, TENTATIVE, ACCEPTED)], axis=1)
    return AggregateResult(
        feature_names=names,
        median_importance=np.median(medians, axis=0),
        consensus_state=consensus(states),
        votes=votes,
        seeds=tuple(r.seed for r in reports),
    )
