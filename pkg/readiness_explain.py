#!/usr/bin/env python3
"""Readiness Explain — permutation importance, Shapley values and explanation consistency.

Shapley values use the marginal value function
    v(S) = mean over background rows b of f(x_S, b_rest)
so the baseline v({}) is the mean prediction over the background. Players are
the model's own features; every other schema feature gets phi = 0.
"""

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.special import comb
from scipy.stats import spearmanr

from readiness_config import get_background_size, get_exact_shapley_max_p
from readiness_core import CATEGORICAL, Dataset, r_squared, rmse
from readiness_models import FittedModel, predict
from readiness_shared import DataError, audit_event, derive_rng, parallel_map, timed

logger = logging.getLogger("readiness.explain")

EXACT = "exact"
SAMPLED = "sampled"
METRICS = {"rmse": rmse, "r2": r_squared}


# ---------------------------------------------------------------------------
# Permutation importance
# ---------------------------------------------------------------------------
@dataclass
class FeatureImportance:
    name: str
    permuted_mean: float
    permuted_sd: float
    importance: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class ImportanceReport:
    metric: str
    baseline: float
    n_repeats: int
    seed: int
    features: list

    def importances(self) -> dict:
        return {f.name: f.importance for f in self.features}

    def top(self, k: int) -> list:
        """Names of the k most important features (ties keep schema order)."""
        order = sorted(range(len(self.features)), key=lambda i: -self.features[i].importance)
        return [self.features[i].name for i in order[:k]]

    def to_dict(self) -> dict:
        return {"metric": self.metric, "baseline": self.baseline, "n_repeats": self.n_repeats,
                "seed": self.seed, "features": [f.to_dict() for f in self.features]}

    @classmethod
    def from_dict(cls, d: dict) -> "ImportanceReport":
        return cls(d["metric"], d["baseline"], d["n_repeats"], d["seed"],
                   [FeatureImportance(**f) for f in d["features"]])


def permutation_importance(model: FittedModel, ds: Dataset, metric: str = "rmse", n_repeats: int = 5,
                           seed: int = 0, features=None, n_jobs: int | None = None) -> ImportanceReport:
    """Loss of accuracy when one column is shuffled, for every feature of ``ds``.

    Importance is permuted - baseline for rmse and baseline - permuted for r2,
    so larger always means more relied upon.
    """
    if metric not in METRICS:
        raise DataError(f"unknown metric {metric!r}; expected one of {', '.join(METRICS)}")
    if n_repeats < 1:
        raise DataError(f"n_repeats must be >= 1, got {n_repeats}")
    score = METRICS[metric]
    features = list(features or ds.feature_names)
    ds.require(features)
    y = ds.response
    baseline = score(y, predict(model, ds))

    def shuffle_scores(i: int) -> FeatureImportance:
        name = features[i]
        rng = derive_rng(seed, i)
        column = ds.column(name)
        scores = []
        for _ in range(n_repeats):
            shuffled = ds.replace_column(name, column[rng.permutation(ds.n)])
            scores.append(score(y, predict(model, shuffled)))
        mean = float(np.mean(scores))
        importance = mean - baseline if metric == "rmse" else baseline - mean
        return FeatureImportance(name, mean, float(np.std(scores)), importance)

    out = parallel_map(shuffle_scores, range(len(features)), n_jobs=n_jobs)
    return ImportanceReport(metric, float(baseline), n_repeats, seed, out)


# ---------------------------------------------------------------------------
# Shapley values
# ---------------------------------------------------------------------------
def background_sample(ds: Dataset, size: int | None = None, seed: int = 0) -> Dataset:
    """min(size, n) rows drawn without replacement, kept in dataset order."""
    size = get_background_size() if size is None else size
    if size < 1:
        raise DataError(f"background size must be >= 1, got {size}")
    if size >= ds.n:
        return ds
    rows = np.sort(np.random.default_rng(seed).choice(ds.n, size=size, replace=False))
    return ds.take(rows)


@dataclass
class ShapleyExplanation:
    instance: int
    features: list
    phi: np.ndarray
    baseline: float
    prediction: float
    mode: str
    n_samples: int | None = None
    seed: int | None = None
    se: np.ndarray | None = None

    def to_dict(self) -> dict:
        return {
            "instance": self.instance, "features": list(self.features),
            "phi": [float(v) for v in self.phi], "baseline": self.baseline,
            "prediction": self.prediction, "mode": self.mode, "n_samples": self.n_samples,
            "seed": self.seed, "se": None if self.se is None else [float(v) for v in self.se],
        }


def _coalition_values(model, instance: Dataset, background: Dataset, players: list,
                      masks: np.ndarray) -> np.ndarray:
    """v(S) for every coalition bitmask (bit j set = player j taken from the instance)."""
    m = background.n
    reps = masks.size
    cols = {}
    for name in background.names:
        bg = np.tile(background.column(name), reps)
        if name in players:
            j = players.index(name)
            take_instance = np.repeat(((masks >> j) & 1).astype(bool), m)
            cols[name] = np.where(take_instance, instance.column(name)[0], bg)
        else:
            cols[name] = bg
    stacked = Dataset(background.schema, cols)
    return predict(model, stacked).reshape(reps, m).mean(axis=1)


def _exact_phi(model, instance, background, players) -> tuple:
    p = len(players)
    masks = np.arange(1 << p, dtype=np.int64)
    v = _coalition_values(model, instance, background, players, masks)
    size = np.array([bin(int(s)).count("1") for s in masks])
    phi = np.zeros(p)
    for j in range(p):
        bit = 1 << j
        without = masks[(masks & bit) == 0]
        weights = 1.0 / (p * comb(p - 1, size[without]))
        phi[j] = float(np.sum(weights * (v[without | bit] - v[without])))
    return phi, float(v[0]), float(v[-1])


def _sampled_phi(model, instance, background, players, n_samples: int, rng) -> tuple:
    p = len(players)
    perms = np.array([rng.permutation(p) for _ in range(n_samples)])
    masks = np.zeros((n_samples, p + 1), dtype=np.int64)
    for step in range(p):
        masks[:, step + 1] = masks[:, step] | (1 << perms[:, step])
    unique, inverse = np.unique(masks.ravel(), return_inverse=True)
    v = _coalition_values(model, instance, background, players, unique)[inverse.ravel()].reshape(n_samples, p + 1)
    contrib = np.zeros((n_samples, p))
    rows = np.arange(n_samples)
    for step in range(p):
        contrib[rows, perms[:, step]] = v[:, step + 1] - v[:, step]
    phi = contrib.mean(axis=0)
    se = contrib.std(axis=0, ddof=1) / np.sqrt(n_samples) if n_samples > 1 else np.full(p, np.inf)
    return phi, float(v[0, 0]), float(v[0, -1]), se


def shapley_values(model: FittedModel, instance: Dataset, background: Dataset, mode: str = EXACT,
                   n_samples: int = 256, seed: int = 0, features=None, instance_index: int = 0) -> ShapleyExplanation:
    """Shapley attribution of the prediction at the single-row ``instance``."""
    if background.n < 1:
        raise DataError("Shapley background is empty")
    if instance.n != 1:
        raise DataError(f"instance must be a single row, got {instance.n}")
    features = list(features or background.feature_names)
    players = [f for f in features if f in model.features]
    p = len(players)
    phi_full = np.zeros(len(features))
    se_full = None
    if mode == EXACT:
        if p > get_exact_shapley_max_p():
            raise DataError(
                f"exact Shapley needs p <= {get_exact_shapley_max_p()} players, model has {p}; use sampled mode"
            )
        if p:
            phi, baseline, full = _exact_phi(model, instance, background, players)
        else:
            phi = np.zeros(0)
            baseline = full = float(np.mean(predict(model, background)))
    elif mode == SAMPLED:
        if n_samples < 1:
            raise DataError(f"n_samples must be >= 1, got {n_samples}")
        rng = derive_rng(seed, instance_index)
        if p:
            phi, baseline, full, se = _sampled_phi(model, instance, background, players, n_samples, rng)
        else:
            phi, se = np.zeros(0), np.zeros(0)
            baseline = full = float(np.mean(predict(model, background)))
        se_full = np.zeros(len(features))
        for j, name in enumerate(players):
            se_full[features.index(name)] = se[j]
    else:
        raise DataError(f"unknown Shapley mode {mode!r}; expected exact or sampled")
    for j, name in enumerate(players):
        phi_full[features.index(name)] = phi[j]
    prediction = float(predict(model, instance)[0])
    return ShapleyExplanation(
        instance_index, features, phi_full, baseline, prediction, mode,
        n_samples if mode == SAMPLED else None, seed if mode == SAMPLED else None, se_full,
    )


# ---------------------------------------------------------------------------
# Summaries
# ---------------------------------------------------------------------------
def _numeric_view(ds: Dataset, name: str) -> np.ndarray:
    """Feature values for trend estimation; categoricals map to their level index."""
    if ds.kind(name) == CATEGORICAL:
        levels = ds.levels(name)
        return np.array([levels.index(v) for v in ds.column(name)], dtype=np.float64)
    return np.asarray(ds.column(name), dtype=np.float64)


def trend_sign(x, phi) -> int:
    """Sign of the Spearman correlation; 0 when undefined (a constant vector)."""
    if np.ptp(x) == 0 or np.ptp(phi) == 0:
        return 0
    rho = spearmanr(x, phi)[0]
    if not np.isfinite(rho) or rho == 0:
        return 0
    return 1 if rho > 0 else -1


@dataclass
class ShapleySummary:
    label: str
    features: list
    mean_abs: np.ndarray
    trend: list
    phi: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)
    baseline: float = 0.0
    mode: str = EXACT

    def ranking(self) -> list:
        order = sorted(range(len(self.features)), key=lambda j: -self.mean_abs[j])
        return [self.features[j] for j in order]

    def to_dict(self) -> dict:
        return {
            "label": self.label, "features": list(self.features), "mode": self.mode,
            "baseline": self.baseline,
            "mean_abs_phi": {f: float(v) for f, v in zip(self.features, self.mean_abs)},
            "trend_sign": dict(zip(self.features, self.trend)),
            "phi": self.phi.tolist(), "values": self.values.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ShapleySummary":
        feats = d["features"]
        return cls(d["label"], feats, np.array([d["mean_abs_phi"][f] for f in feats]),
                   [d["trend_sign"][f] for f in feats], np.asarray(d["phi"], dtype=np.float64).reshape(-1, len(feats)),
                   np.asarray(d["values"], dtype=np.float64).reshape(-1, len(feats)), d["baseline"], d["mode"])


def shapley_summary(model: FittedModel, ds: Dataset, background: Dataset, mode: str = EXACT,
                    n_samples: int = 256, seed: int = 0, features=None, label: str = "",
                    n_jobs: int | None = None) -> ShapleySummary:
    """Explain every row of ``ds``; mean |phi| and trend sign per feature."""
    features = list(features or ds.feature_names)

    def explain(i: int) -> ShapleyExplanation:
        return shapley_values(model, ds.take([i]), background, mode, n_samples, seed, features, instance_index=i)

    with timed() as t:
        explanations = parallel_map(explain, range(ds.n), n_jobs=n_jobs)
    phi = np.vstack([e.phi for e in explanations])
    values = np.column_stack([_numeric_view(ds, f) for f in features])
    trend = [trend_sign(values[:, j], phi[:, j]) for j in range(len(features))]
    summary = ShapleySummary(label or model.family, features, np.abs(phi).mean(axis=0), trend, phi, values,
                             explanations[0].baseline, mode)
    logger.debug(f"Shapley summary {summary.label}: ranking {summary.ranking()}")
    audit_event("shapley_summary", summary.label, duration_ms=t.ms, n=ds.n, mode=mode)
    return summary


# ---------------------------------------------------------------------------
# Consistency
# ---------------------------------------------------------------------------
@dataclass
class ConsistencyReport:
    a: str
    b: str
    rank_correlation: float
    trend_a: dict
    trend_b: dict
    disagreements: list

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def explanation_consistency(a: ShapleySummary, b: ShapleySummary) -> ConsistencyReport:
    """Rank agreement of mean |phi| and per-feature trend-sign agreement."""
    if set(a.features) != set(b.features):
        raise DataError(
            f"feature sets differ: only in {a.label}: {sorted(set(a.features) - set(b.features))}, "
            f"only in {b.label}: {sorted(set(b.features) - set(a.features))}"
        )
    names = list(a.features)
    mean_a = np.asarray(a.mean_abs, dtype=np.float64)
    mean_b = np.array([b.mean_abs[b.features.index(f)] for f in names])
    trend_a = dict(zip(a.features, a.trend))
    trend_b = {f: b.trend[b.features.index(f)] for f in names}
    if np.array_equal(mean_a, mean_b):
        rho = 1.0
    else:
        rho = spearmanr(mean_a, mean_b)[0] if len(names) > 1 else 0.0
        rho = float(rho) if np.isfinite(rho) else 0.0
    disagreements = [f for f in names if trend_a[f] != trend_b[f]]
    return ConsistencyReport(a.label, b.label, rho, trend_a, trend_b, disagreements)
