"""Preset model configurations.

lm-full uses every untransformed feature as a main effect; lm-select fits the
log response on two key features and their interaction; rf uses the default
mtry while rf-tuned considers every feature at every split.
"""

from readiness_core import Dataset
from readiness_formula import LOG, Formula, additive_formula
from readiness_models._base import ModelSpec
from readiness_shared import DataError

PRESETS = ("lm-full", "lm-select", "rf", "rf-tuned", "tree", "svr", "const")
CONTRAST_ROSTER = ("rf", "rf-tuned", "lm-full", "lm-select")


def preset_spec(name: str, ds: Dataset, key_features=None, features=None, params: dict | None = None) -> ModelSpec:
    """Build the named preset over ``ds``; ``features`` defaults to every schema feature."""
    features = tuple(features or ds.feature_names)
    ds.require(features)
    params = dict(params or {})
    if name == "lm-full":
        return ModelSpec("lm", formula=additive_formula(ds.response_name, features), name=name)
    if name == "lm-select":
        keys = tuple(key_features or ())
        if len(keys) != 2:
            raise DataError("lm-select needs exactly two key features")
        ds.require(keys)
        formula = Formula(ds.response_name, LOG, keys, (keys,), True)
        return ModelSpec("lm", formula=formula, name=name)
    if name == "rf":
        return ModelSpec("rf", features=features, params=params, name=name)
    if name == "rf-tuned":
        return ModelSpec("rf", features=features, params={**params, "mtry": "all"}, name=name)
    if name in ("tree", "svr", "const"):
        return ModelSpec(name, features=() if name == "const" else features, params=params, name=name)
    raise DataError(f"unknown preset {name!r}; expected one of {', '.join(PRESETS)}")


def roster_specs(ds: Dataset, key_features, features=None, params: dict | None = None) -> list:
    """The four-model contrast roster: rf, rf-tuned, lm-full, lm-select."""
    forest_params = dict(params or {})
    return [
        preset_spec(name, ds, key_features, features, forest_params if name.startswith("rf") else None)
        for name in CONTRAST_ROSTER
    ]
