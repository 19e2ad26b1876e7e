#!/usr/bin/env python3
"""Readiness Audits — overfit gap, variable omission and underspecification.

Each audit returns a report dataclass with ``to_dict()``; every report embeds
the thresholds it was judged against so a stored report can be re-judged.
"""

import itertools
import logging
from dataclasses import dataclass, field

from scipy.special import comb

from readiness_config import AuditThresholds, get_subset_cap
from readiness_core import Dataset, rmse, safe_r_squared, train_test_indices
from readiness_explain import background_sample, explanation_consistency, permutation_importance, shapley_summary
from readiness_formula import additive_formula
from readiness_models import ModelSpec, fit_model, predict
from readiness_shared import DataError, audit_event, parallel_map, timed
from readiness_validation import ContrastReport

logger = logging.getLogger("readiness.audits")

AUDIT_FAMILIES = ("rf", "svr", "lm", "tree")


def family_spec(family: str, ds: Dataset, features, params: dict | None = None, seed: int = 0) -> ModelSpec:
    """Model over an explicit feature list; lm becomes an additive formula."""
    features = tuple(features)
    params = dict(params or {})
    if family == "lm":
        return ModelSpec("lm", formula=additive_formula(ds.response_name, features))
    if family in ("rf", "tree"):
        params.setdefault("seed", seed)
    if family not in AUDIT_FAMILIES:
        raise DataError(f"audit family must be one of {', '.join(AUDIT_FAMILIES)}, got {family!r}")
    return ModelSpec(family, features=features, params=params)


@dataclass
class VariantResult:
    name: str
    features: list
    train_rmse: float
    test_rmse: float
    train_r2: float | None
    test_r2: float | None
    test_y: list = field(repr=False, default_factory=list)
    test_pred: list = field(repr=False, default_factory=list)

    @property
    def r2_gap(self) -> float:
        return self.train_r2 - self.test_r2

    def to_dict(self) -> dict:
        return dict(self.__dict__, r2_gap=self.r2_gap)


def _evaluate(name: str, spec: ModelSpec, train: Dataset, test: Dataset) -> tuple:
    model = fit_model(spec, train)
    yhat_train = predict(model, train)
    yhat_test = predict(model, test)
    train_r2 = safe_r_squared(train.response, yhat_train)
    test_r2 = safe_r_squared(test.response, yhat_test)
    if train_r2 is None or test_r2 is None:
        raise DataError(f"variant {name}: R^2 undefined on a constant-response split")
    result = VariantResult(
        name, list(spec.used_features), rmse(train.response, yhat_train), rmse(test.response, yhat_test),
        train_r2, test_r2, test.response.tolist(), yhat_test.tolist(),
    )
    return model, result


def _pct(new: float, old: float) -> float | None:
    return None if old == 0 else 100.0 * (new - old) / abs(old)


# ---------------------------------------------------------------------------
# Omission
# ---------------------------------------------------------------------------
@dataclass
class OmissionAuditReport:
    family: str
    omitted: str
    split_fraction: float
    seed: int
    top_k: int
    variants: list
    deltas: dict
    overfit_signature: bool
    compensation_failed: bool
    thresholds: dict

    def variant(self, name: str) -> VariantResult:
        return next(v for v in self.variants if v.name == name)

    def to_dict(self) -> dict:
        return {
            "family": self.family, "omitted": self.omitted, "split_fraction": self.split_fraction,
            "seed": self.seed, "top_k": self.top_k, "variants": [v.to_dict() for v in self.variants],
            "deltas": self.deltas,
            "flags": {"overfit_signature": self.overfit_signature, "compensation_failed": self.compensation_failed},
            "thresholds": self.thresholds,
        }


def omission_audit(ds: Dataset, physics_features, omit: str, family: str = "rf", split_fraction: float = 0.7,
                   k: int | None = None, seed: int = 0, params: dict | None = None,
                   thresholds: AuditThresholds | None = None, features=None, n_repeats: int = 5) -> OmissionAuditReport:
    """Fit A (physics only), B (all but ``omit``) and C (top-k of B) on one shared split."""
    thresholds = thresholds or AuditThresholds()
    physics_features = list(physics_features)
    all_features = list(features or ds.feature_names)
    ds.require(physics_features + all_features)
    if omit not in physics_features:
        raise DataError(f"omitted feature {omit} is not among the physics features {physics_features}")
    k = thresholds.omission_top_k if k is None else k
    b_features = [f for f in all_features if f != omit]
    if k < 1 or k > len(b_features):
        raise DataError(f"top-k must lie in 1..{len(b_features)} (variant B's feature count), got {k}")

    train_idx, test_idx = train_test_indices(ds.n, split_fraction, seed)
    train, test = ds.take(train_idx), ds.take(test_idx)
    with timed() as t:
        _, var_a = _evaluate("A", family_spec(family, ds, physics_features, params, seed), train, test)
        model_b, var_b = _evaluate("B", family_spec(family, ds, b_features, params, seed), train, test)
        importance = permutation_importance(model_b, train, "rmse", n_repeats, seed, features=b_features)
        c_features = [f for f in b_features if f in importance.top(k)]
        _, var_c = _evaluate("C", family_spec(family, ds, c_features, params, seed), train, test)

    deltas = {
        name: {"test_r2_pct": _pct(v.test_r2, var_a.test_r2), "test_rmse_pct": _pct(v.test_rmse, var_a.test_rmse)}
        for name, v in (("B", var_b), ("C", var_c))
    }
    deltas["C_vs_B_rmse_improvement"] = (var_b.test_rmse - var_c.test_rmse) / var_b.test_rmse \
        if var_b.test_rmse > 0 else 0.0
    overfit = var_b.r2_gap - var_a.r2_gap > thresholds.r2_gap_margin
    compensation_failed = deltas["C_vs_B_rmse_improvement"] < thresholds.compensation_threshold
    report = OmissionAuditReport(family, omit, split_fraction, seed, k, [var_a, var_b, var_c], deltas,
                                 bool(overfit), bool(compensation_failed), thresholds.to_dict())
    logger.info(
        f"Omission audit ({family}, omit {omit}): R2 gap A={var_a.r2_gap:.3f} B={var_b.r2_gap:.3f}; "
        f"C features {c_features}; overfit_signature={report.overfit_signature} "
        f"compensation_failed={report.compensation_failed}"
    )
    audit_event("omission_audit", f"{family} omit {omit}", duration_ms=t.ms,
                overfit_signature=report.overfit_signature, compensation_failed=report.compensation_failed)
    return report


# ---------------------------------------------------------------------------
# Underspecification
# ---------------------------------------------------------------------------
@dataclass
class SubsetResult:
    index: int
    features: list
    train_rmse: float
    test_rmse: float
    train_r2: float
    test_r2: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class UnderspecReport:
    family: str
    anchors: list
    candidates: list
    subset_size: int
    epsilon: float
    seed: int
    subsets: list
    classes: list
    summaries: list
    consistency: list
    underspecified: bool
    thresholds: dict

    @property
    def top_class(self) -> list:
        return self.classes[0] if self.classes else []

    def to_dict(self) -> dict:
        return {
            "family": self.family, "anchors": self.anchors, "candidates": self.candidates,
            "subset_size": self.subset_size, "epsilon": self.epsilon, "seed": self.seed,
            "subsets": [s.to_dict() for s in self.subsets], "classes": self.classes,
            "summaries": [s.to_dict() for s in self.summaries],
            "consistency": [c.to_dict() for c in self.consistency],
            "flags": {"underspecified": self.underspecified}, "thresholds": self.thresholds,
        }


def near_equivalence_classes(test_r2, epsilon: float) -> list:
    """Greedy classes: repeatedly take the best remaining subset and everything within epsilon below it."""
    order = sorted(range(len(test_r2)), key=lambda i: (-test_r2[i], i))
    remaining = list(order)
    classes = []
    while remaining:
        head = remaining[0]
        members = [i for i in remaining if test_r2[head] - test_r2[i] <= epsilon]
        classes.append(sorted(members))
        remaining = [i for i in remaining if i not in members]
    return classes


def underspec_search(ds: Dataset, anchors, candidates, m: int, epsilon: float | None = None, family: str = "rf",
                     split_fraction: float = 0.7, seed: int = 0, params: dict | None = None,
                     thresholds: AuditThresholds | None = None, cap: int | None = None, explain: bool = True,
                     max_explained: int = 5, shapley_mode: str = "exact", background_size: int | None = None,
                     n_jobs: int | None = None) -> UnderspecReport:
    """Fit every anchors + (m - |anchors|)-candidate subset on one split and cluster by test R^2."""
    thresholds = thresholds or AuditThresholds()
    epsilon = thresholds.underspec_epsilon if epsilon is None else epsilon
    anchors, candidates = list(anchors), list(candidates)
    ds.require(anchors + candidates)
    if not anchors:
        raise DataError("underspec search needs at least one anchor feature")
    overlap = sorted(set(anchors) & set(candidates))
    if overlap:
        raise DataError(f"candidate pool overlaps anchors: {', '.join(overlap)}")
    if m < len(anchors) or m - len(anchors) > len(candidates):
        raise DataError(f"subset size {m} must lie in {len(anchors)}..{len(anchors) + len(candidates)}")
    cap = get_subset_cap() if cap is None else cap
    count = int(comb(len(candidates), m - len(anchors), exact=True))
    if count > cap:
        raise DataError(
            f"{count} subsets exceed the enumeration cap {cap}; shrink the candidate pool or raise READINESS_SUBSET_CAP"
        )
    subsets = [anchors + list(extra) for extra in itertools.combinations(candidates, m - len(anchors))]
    train_idx, test_idx = train_test_indices(ds.n, split_fraction, seed)
    train, test = ds.take(train_idx), ds.take(test_idx)

    def run(i: int):
        model, v = _evaluate(f"subset{i}", family_spec(family, ds, subsets[i], params, seed), train, test)
        return model, SubsetResult(i, subsets[i], v.train_rmse, v.test_rmse, v.train_r2, v.test_r2)

    with timed() as t:
        fitted = parallel_map(run, range(len(subsets)), n_jobs=n_jobs)
    results = [r for _, r in fitted]
    classes = near_equivalence_classes([r.test_r2 for r in results], epsilon)

    summaries, consistency = [], []
    if explain:
        background = background_sample(train, background_size, seed)
        pool = anchors + candidates
        for i in classes[0][:max_explained]:
            summaries.append(shapley_summary(fitted[i][0], test, background, mode=shapley_mode, seed=seed,
                                             features=pool, label=",".join(subsets[i]), n_jobs=n_jobs))
        for a, b in itertools.combinations(summaries, 2):
            consistency.append(explanation_consistency(a, b))

    report = UnderspecReport(family, anchors, candidates, m, epsilon, seed, results, classes, summaries,
                             consistency, len(classes[0]) >= 2, thresholds.to_dict())
    logger.info(
        f"Underspec search ({family}): {len(results)} subsets, top class {len(classes[0])} within eps={epsilon}, "
        f"underspecified={report.underspecified}"
    )
    audit_event("underspec_search", f"{family} m={m}", duration_ms=t.ms, subsets=len(results),
                top_class=len(classes[0]), underspecified=report.underspecified)
    return report


# ---------------------------------------------------------------------------
# Overfit gap
# ---------------------------------------------------------------------------
FRAGILE = "fragile"
STABLE = "stable"
INTERMEDIATE = "intermediate"


@dataclass
class OverfitReport:
    models: list
    winner_traditional: str
    winner_adapted: str
    thresholds: dict

    @property
    def ranking_flipped(self) -> bool:
        return self.winner_traditional != self.winner_adapted

    def to_dict(self) -> dict:
        return {
            "models": self.models, "winner_traditional": self.winner_traditional,
            "winner_adapted": self.winner_adapted, "ranking_flipped": self.ranking_flipped,
            "thresholds": self.thresholds,
        }


def classify_ratio(ratio: float | None, thresholds: AuditThresholds) -> str:
    """fragile above the fragile ratio, stable at or below the stable ratio; undefined ratios are fragile."""
    if ratio is None or ratio > thresholds.fragile_ratio:
        return FRAGILE
    if ratio <= thresholds.stable_ratio:
        return STABLE
    return INTERMEDIATE


def overfit_gap(contrasts, thresholds: AuditThresholds | None = None) -> OverfitReport:
    """Judge one or more ContrastReports (objects or their dicts) by their stored ratios."""
    thresholds = thresholds or AuditThresholds()
    if isinstance(contrasts, (ContrastReport, dict)):
        contrasts = [contrasts]
    rows = [c.to_dict() if isinstance(c, ContrastReport) else c for c in contrasts]
    if not rows:
        raise DataError("overfit_gap needs at least one contrast report")
    models = []
    for row in rows:
        try:
            ratio = row["rmse_ratio"]
            trad = row["traditional"]["pooled"]["rmse"]
            adapted = row["adapted"]["pooled"]["rmse"]
            name = row["model"]
        except (KeyError, TypeError) as e:
            raise DataError(f"malformed contrast report: missing {e}") from None
        verdict = classify_ratio(ratio, thresholds)
        models.append({
            "model": name, "traditional_rmse": trad, "adapted_rmse": adapted, "rmse_ratio": ratio,
            "verdict": verdict, "generalization_fragile": verdict == FRAGILE, "stable": verdict == STABLE,
        })
    winner_trad = min(models, key=lambda r: r["traditional_rmse"])["model"]
    winner_adapted = min(models, key=lambda r: r["adapted_rmse"])["model"]
    return OverfitReport(models, winner_trad, winner_adapted, thresholds.to_dict())


# ---------------------------------------------------------------------------
# Deployment gate
# ---------------------------------------------------------------------------
@dataclass
class GateVerdict:
    passed: bool
    reasons: list
    checked: list

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def deployment_gate(reports, thresholds: AuditThresholds | None = None) -> GateVerdict:
    """Combine (kind, payload dict) audit results into one pass/fail verdict."""
    thresholds = thresholds or AuditThresholds()
    reasons, checked = [], []
    for kind, payload in reports:
        checked.append(kind)
        if kind == "contrast":
            kind, payload = "overfit", overfit_gap(payload, thresholds).to_dict()
        if kind == "overfit":
            for row in payload["models"]:
                if row["verdict"] == FRAGILE:
                    reasons.append(f"{row['model']}: generalization fragile (adapted/traditional RMSE ratio "
                                   f"{row['rmse_ratio']})")
        elif kind == "omission":
            flags = payload["flags"]
            if flags["overfit_signature"]:
                reasons.append(f"omitting {payload['omitted']} leaves an overfit signature")
            if flags["compensation_failed"]:
                reasons.append(f"top-k refit cannot compensate for omitting {payload['omitted']}")
        elif kind == "underspec":
            if payload["flags"]["underspecified"]:
                reasons.append(f"underspecified: {len(payload['classes'][0])} near-equivalent feature subsets "
                               f"within epsilon {payload['epsilon']}")
        else:
            raise DataError(f"deployment gate cannot judge report kind {kind!r}")
    return GateVerdict(not reasons, reasons, checked)
