#!/usr/bin/env python3
"""Readiness Validation — random k-fold CV, grouped (leave-one-combination-out) CV
and the traditional-vs-adapted contrast.

Adapted CV holds out every row of one unique combination of the grouping
features at a time, so a model is always scored on a combination it never saw.
Pooled metrics are computed over the concatenated out-of-fold predictions.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from readiness_config import get_group_cap
from readiness_core import (
    Dataset,
    GroupKey,
    SplitIndices,
    group_codes,
    median_abs_error,
    rmse,
    safe_r_squared,
)
from readiness_models import ModelSpec, fit_model, predict
from readiness_shared import ConvergenceError, DataError, ReadinessError, audit_event, parallel_map, timed

logger = logging.getLogger("readiness.validation")

KFOLD = "kfold"
GROUPED = "grouped"


# ---------------------------------------------------------------------------
# Plans
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class CVPlan:
    kind: str
    k: int | None = None
    seed: int | None = None
    group_features: tuple = ()

    def __post_init__(self):
        if self.kind == KFOLD:
            if not isinstance(self.k, int) or self.k < 2:
                raise DataError(f"kfold plan needs k >= 2, got {self.k!r}")
        elif self.kind == GROUPED:
            if not self.group_features:
                raise DataError("grouped plan needs at least one group feature")
            object.__setattr__(self, "group_features", tuple(self.group_features))
        else:
            raise DataError(f"unknown CV plan kind {self.kind!r}")

    @property
    def label(self) -> str:
        if self.kind == KFOLD:
            return f"kfold:{self.k}"
        return "grouped:" + ",".join(self.group_features)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "k": self.k, "seed": self.seed, "group_features": list(self.group_features)}

    @classmethod
    def from_dict(cls, d: dict) -> "CVPlan":
        return cls(d["kind"], d.get("k"), d.get("seed"), tuple(d.get("group_features") or ()))


def parse_plan(text: str, seed: int | None = None) -> CVPlan:
    """``kfold:K`` or ``grouped:f1,f2``."""
    kind, sep, rest = (text or "").partition(":")
    kind = kind.strip()
    if not sep or not rest.strip():
        raise DataError(f"bad plan {text!r}; expected kfold:K or grouped:f1,f2")
    if kind == KFOLD:
        try:
            k = int(rest)
        except ValueError:
            raise DataError(f"bad plan {text!r}: K must be an integer") from None
        return CVPlan(KFOLD, k=k, seed=seed)
    if kind == GROUPED:
        return CVPlan(GROUPED, seed=seed, group_features=tuple(f.strip() for f in rest.split(",") if f.strip()))
    raise DataError(f"bad plan {text!r}; expected kfold:K or grouped:f1,f2")


def kfold_split(n: int, k: int, seed: int) -> SplitIndices:
    """Seeded random partition into k folds whose sizes differ by at most one."""
    if not isinstance(k, int) or k < 2 or k > n:
        raise DataError(f"k must satisfy 2 <= k <= n (n={n}), got {k}")
    perm = np.random.default_rng(seed).permutation(n)
    folds = tuple(np.sort(part) for part in np.array_split(perm, k))
    return SplitIndices(folds, seed).validate(n)


@dataclass(frozen=True)
class GroupedSplit:
    split: SplitIndices
    labels: tuple  # per fold: tuple of GroupKey held out together


def grouped_split(ds: Dataset, group_features, cap: int | None = None, seed: int | None = None) -> GroupedSplit:
    """One fold per unique combination of ``group_features``.

    Beyond ``cap`` combinations, whole groups are dealt round-robin (after a
    seeded shuffle) into ``cap`` folds; no group ever straddles two folds.
    """
    keys, codes = group_codes(ds, group_features)
    if len(keys) < 2:
        raise DataError(
            f"grouped CV needs >= 2 unique combinations of {','.join(group_features)}, found {len(keys)}"
        )
    cap = get_group_cap() if cap is None else cap
    if len(keys) <= cap:
        folds = tuple(np.flatnonzero(codes == g) for g in range(len(keys)))
        labels = tuple((key,) for key in keys)
    else:
        order = np.random.default_rng(0 if seed is None else seed).permutation(len(keys))
        assignment = np.empty(len(keys), dtype=np.int64)
        assignment[order] = np.arange(len(keys)) % cap
        fold_of_row = assignment[codes]
        folds = tuple(np.flatnonzero(fold_of_row == f) for f in range(cap))
        labels = tuple(tuple(keys[g] for g in range(len(keys)) if assignment[g] == f) for f in range(cap))
        logger.info(f"Grouped CV: {len(keys)} combinations merged into {cap} folds")
    return GroupedSplit(SplitIndices(folds, None).validate(ds.n), labels)


def make_split(ds: Dataset, plan: CVPlan) -> tuple:
    """(SplitIndices, per-fold labels) for any plan."""
    if plan.kind == KFOLD:
        split = kfold_split(ds.n, plan.k, 0 if plan.seed is None else plan.seed)
        return split, tuple(f"fold{i}" for i in range(len(split.folds)))
    ds.require(plan.group_features)
    grouped = grouped_split(ds, plan.group_features, seed=plan.seed)
    labels = tuple("|".join(k.label for k in keys) for keys in grouped.labels)
    return grouped.split, labels


# ---------------------------------------------------------------------------
# Results
# ---------------------------------------------------------------------------
def _metrics(y, yhat) -> dict:
    return {"rmse": rmse(y, yhat), "median_abs_error": median_abs_error(y, yhat), "r2": safe_r_squared(y, yhat)}


@dataclass
class FoldResult:
    fold: int
    label: str
    n: int
    rmse: float
    median_abs_error: float
    r2: float | None

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class CVResult:
    model: dict
    plan: dict
    folds: list
    predictions: np.ndarray
    y: np.ndarray
    pooled: dict = field(default_factory=dict)

    def __post_init__(self):
        self.predictions = np.asarray(self.predictions, dtype=np.float64)
        self.y = np.asarray(self.y, dtype=np.float64)
        if not self.pooled:
            self.pooled = _metrics(self.y, self.predictions)

    @property
    def abs_errors(self) -> np.ndarray:
        return np.abs(self.y - self.predictions)

    def to_dict(self) -> dict:
        return {
            "model": self.model,
            "plan": self.plan,
            "folds": [f.to_dict() for f in self.folds],
            "pooled": dict(self.pooled),
            "predictions": [{"row": i, "y": float(y), "yhat": float(p)}
                            for i, (y, p) in enumerate(zip(self.y, self.predictions))],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CVResult":
        preds = sorted(d["predictions"], key=lambda r: r["row"])
        return cls(d["model"], d["plan"], [FoldResult(**f) for f in d["folds"]],
                   [r["yhat"] for r in preds], [r["y"] for r in preds], dict(d["pooled"]))


def cross_validate(spec: ModelSpec, ds: Dataset, plan: CVPlan, nested_space: dict | None = None,
                   tune_folds: int = 3, n_jobs: int | None = None) -> CVResult:
    """Refit ``spec`` from scratch on every training complement.

    With ``nested_space`` the spec is re-tuned inside each training fold.
    """
    spec.validate(ds)
    split, labels = make_split(ds, plan)
    owner = split.fold_of(ds.n)

    def run_fold(f: int):
        test_idx = split.folds[f]
        train = ds.take(np.flatnonzero(owner != f))
        test = ds.take(test_idx)
        try:
            fold_spec = spec
            if nested_space:
                from readiness_models import tune
                fold_spec = tune(spec, train, nested_space, folds=tune_folds,
                                 seed=0 if plan.seed is None else plan.seed, n_jobs=1).best
            yhat = predict(fit_model(fold_spec, train), test)
        except ConvergenceError as e:
            raise ConvergenceError(f"fold {f} ({labels[f]}): {e}", e.violation, e.iterations) from e
        except ReadinessError as e:
            raise type(e)(f"fold {f} ({labels[f]}): {e}") from e
        m = _metrics(test.response, yhat)
        return test_idx, yhat, FoldResult(f, labels[f], int(test_idx.size), m["rmse"], m["median_abs_error"], m["r2"])

    with timed() as t:
        outcomes = parallel_map(run_fold, range(len(split.folds)), n_jobs=n_jobs)
    predictions = np.empty(ds.n)
    for test_idx, yhat, _ in outcomes:
        predictions[test_idx] = yhat
    result = CVResult(spec.to_dict(), plan.to_dict(), [o[2] for o in outcomes], predictions, ds.response)
    logger.info(f"CV {spec.label} {plan.label}: pooled RMSE {result.pooled['rmse']:.6g} over {len(outcomes)} folds")
    audit_event("cv", f"{spec.label} {plan.label}", duration_ms=t.ms, pooled_rmse=result.pooled["rmse"])
    return result


# ---------------------------------------------------------------------------
# Contrast
# ---------------------------------------------------------------------------
def degradation_ratio(adapted: float, traditional: float) -> float | None:
    """adapted / traditional; 1.0 when both are zero, None when only traditional is."""
    if traditional == 0.0:
        return 1.0 if adapted == 0.0 else None
    return adapted / traditional


@dataclass
class GroupErrors:
    key: GroupKey
    count: int
    traditional: list
    adapted: list

    def to_dict(self) -> dict:
        return {"key": self.key.to_dict(), "label": self.key.label, "count": self.count,
                "traditional_abs_errors": self.traditional, "adapted_abs_errors": self.adapted}

    @classmethod
    def from_dict(cls, d: dict) -> "GroupErrors":
        return cls(GroupKey.from_dict(d["key"]), d["count"], d["traditional_abs_errors"], d["adapted_abs_errors"])


@dataclass
class ContrastReport:
    model: str
    traditional: CVResult
    adapted: CVResult
    rmse_ratio: float | None
    median_abs_error_ratio: float | None
    groups: list
    tuned_params: dict | None = None

    def to_dict(self) -> dict:
        return {
            "model": self.model,
            "traditional": self.traditional.to_dict(),
            "adapted": self.adapted.to_dict(),
            "rmse_ratio": self.rmse_ratio,
            "median_abs_error_ratio": self.median_abs_error_ratio,
            "groups": [g.to_dict() for g in self.groups],
            "tuned_params": self.tuned_params,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ContrastReport":
        return cls(d["model"], CVResult.from_dict(d["traditional"]), CVResult.from_dict(d["adapted"]),
                   d["rmse_ratio"], d["median_abs_error_ratio"],
                   [GroupErrors.from_dict(g) for g in d["groups"]], d.get("tuned_params"))

    def summary_row(self) -> dict:
        return {
            "model": self.model,
            "traditional_rmse": self.traditional.pooled["rmse"],
            "adapted_rmse": self.adapted.pooled["rmse"],
            "traditional_mae": self.traditional.pooled["median_abs_error"],
            "adapted_mae": self.adapted.pooled["median_abs_error"],
            "rmse_ratio": self.rmse_ratio,
        }


def cv_contrast(spec: ModelSpec, ds: Dataset, group_features, k: int, seed: int,
                tune_space: dict | None = None, nested: bool = False, search: str = "grid",
                n_draws: int = 10, tune_folds: int = 3, n_jobs: int | None = None) -> ContrastReport:
    """Traditional k-fold vs adapted grouped CV for one model.

    With ``tune_space`` the model is tuned once on the full dataset before both
    CVs, or inside every training fold when ``nested`` is set.
    """
    group_features = tuple(group_features)
    ds.require(group_features)
    tuned_params = None
    if tune_space and not nested:
        from readiness_models import tune
        spec = tune(spec, ds, tune_space, search=search, n_draws=n_draws, folds=tune_folds,
                    seed=seed, n_jobs=n_jobs).best
        tuned_params = dict(spec.params)
    nested_space = tune_space if nested else None
    traditional = cross_validate(spec, ds, CVPlan(KFOLD, k=k, seed=seed), nested_space, tune_folds, n_jobs)
    adapted = cross_validate(spec, ds, CVPlan(GROUPED, seed=seed, group_features=group_features),
                             nested_space, tune_folds, n_jobs)
    keys, codes = group_codes(ds, group_features)
    trad_err, adapt_err = traditional.abs_errors, adapted.abs_errors
    groups = [
        GroupErrors(key, int(np.sum(codes == g)), trad_err[codes == g].tolist(), adapt_err[codes == g].tolist())
        for g, key in enumerate(keys)
    ]
    report = ContrastReport(
        spec.label, traditional, adapted,
        degradation_ratio(adapted.pooled["rmse"], traditional.pooled["rmse"]),
        degradation_ratio(adapted.pooled["median_abs_error"], traditional.pooled["median_abs_error"]),
        groups, tuned_params,
    )
    logger.info(
        f"Contrast {spec.label}: RMSE {traditional.pooled['rmse']:.6g} -> {adapted.pooled['rmse']:.6g}"
        f" (ratio {report.rmse_ratio})"
    )
    return report


def format_contrast_table(reports) -> str:
    """Plain-text table of traditional/adapted pooled metrics, one row per model."""
    header = f"{'model':<12} {'trad RMSE':>12} {'adapt RMSE':>12} {'trad MAE':>12} {'adapt MAE':>12} {'ratio':>8}"
    lines = [header, "-" * len(header)]
    for r in reports:
        row = r.summary_row()
        ratio = "n/a" if row["rmse_ratio"] is None else f"{row['rmse_ratio']:.2f}"
        lines.append(
            f"{row['model']:<12} {row['traditional_rmse']:>12.6g} {row['adapted_rmse']:>12.6g} "
            f"{row['traditional_mae']:>12.6g} {row['adapted_mae']:>12.6g} {ratio:>8}"
        )
    return "\n".join(lines)
