"""Model spec, fitted-model contract and the fit/predict entry points."""

import logging
from dataclasses import dataclass, field, fields

import numpy as np

from readiness_core import Dataset
from readiness_formula import Formula, format_formula, parse_formula
from readiness_shared import DataError, ModelError

logger = logging.getLogger("readiness.models")

FAMILIES = ("lm", "tree", "rf", "svr", "const")


def params_from_dict(cls, data: dict | None, family: str):
    """Build a params dataclass, rejecting keys it does not declare."""
    data = dict(data or {})
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise DataError(f"{family}: unknown parameter(s) {', '.join(unknown)}; accepted: {', '.join(sorted(known))}")
    return cls(**data)


@dataclass(frozen=True)
class ModelSpec:
    """Uniform handle on one model configuration: family + formula/features + params."""

    family: str
    formula: Formula | None = None
    features: tuple = ()
    params: dict = field(default_factory=dict)
    name: str = ""

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise DataError(f"unknown model family {self.family!r}; expected one of {', '.join(FAMILIES)}")
        object.__setattr__(self, "features", tuple(self.features))
        object.__setattr__(self, "params", dict(self.params or {}))
        if self.family == "lm":
            if self.formula is None:
                raise DataError("lm models need a formula")
            if self.features:
                raise DataError("lm models take a formula, not a feature list")
        elif self.family in ("tree", "rf", "svr"):
            if self.formula is not None:
                raise DataError(f"{self.family} models take a feature list, not a formula")
            if not self.features:
                raise DataError(f"{self.family} models need a nonempty feature list")

    @property
    def label(self) -> str:
        return self.name or self.family

    @property
    def used_features(self) -> list:
        if self.formula is not None:
            return self.formula.variables
        return list(self.features)

    def validate(self, ds: Dataset) -> "ModelSpec":
        ds.require(self.used_features)
        if ds.response_name in self.used_features:
            raise DataError(f"response {ds.response_name} cannot be a model feature")
        return self

    def with_params(self, **updates) -> "ModelSpec":
        merged = dict(self.params)
        merged.update(updates)
        return ModelSpec(self.family, self.formula, self.features, merged, self.name)

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "name": self.name,
            "formula": format_formula(self.formula) if self.formula is not None else None,
            "features": list(self.features),
            "params": dict(self.params),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelSpec":
        formula = parse_formula(d["formula"]) if d.get("formula") else None
        return cls(d["family"], formula, tuple(d.get("features") or ()), d.get("params") or {}, d.get("name", ""))


class FittedModel:
    """Immutable after fit; predict() is safe for concurrent callers."""

    family = ""

    @property
    def features(self) -> list:
        raise NotImplementedError

    def predict(self, ds: Dataset) -> np.ndarray:
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError


# ---------------------------------------------------------------------------
# Constant baseline
# ---------------------------------------------------------------------------
class ConstantModel(FittedModel):
    """Predicts one value everywhere; used as the plan-independent baseline."""

    family = "const"

    def __init__(self, value: float):
        self.value = float(value)

    @property
    def features(self) -> list:
        return []

    def predict(self, ds: Dataset) -> np.ndarray:
        return np.full(ds.n, self.value)

    def to_dict(self) -> dict:
        return {"family": self.family, "value": self.value}

    @classmethod
    def from_dict(cls, d: dict) -> "ConstantModel":
        return cls(d["value"])


def fit_constant(ds: Dataset, params: dict | None = None) -> ConstantModel:
    params = dict(params or {})
    unknown = sorted(set(params) - {"value"})
    if unknown:
        raise DataError(f"const: unknown parameter(s) {', '.join(unknown)}; accepted: value")
    value = params.get("value")
    return ConstantModel(float(np.mean(ds.response)) if value is None else value)


# ---------------------------------------------------------------------------
# Dispatch
# ---------------------------------------------------------------------------
def fit_model(spec: ModelSpec, ds: Dataset) -> FittedModel:
    """Fit ``spec`` on ``ds`` from scratch."""
    from readiness_formula import design_matrix
    from readiness_models._forest import fit_forest
    from readiness_models._linear import fit_ols
    from readiness_models._svr import fit_svr
    from readiness_models._tree import fit_tree

    spec.validate(ds)
    if spec.family == "lm":
        if spec.params:
            raise DataError(f"lm: unknown parameter(s) {', '.join(sorted(spec.params))}")
        return fit_ols(design_matrix(spec.formula, ds))
    if spec.family == "tree":
        return fit_tree(ds, spec.features, spec.params)
    if spec.family == "rf":
        return fit_forest(ds, spec.features, spec.params)
    if spec.family == "svr":
        return fit_svr(ds, spec.features, spec.params)
    return fit_constant(ds, spec.params)


def predict(model: FittedModel, ds: Dataset) -> np.ndarray:
    """Predictions on the original response scale."""
    yhat = model.predict(ds)
    if not np.all(np.isfinite(yhat)):
        raise ModelError(f"{model.family} produced non-finite predictions")
    return yhat
