"""Readiness model families — uniform fit/predict over OLS, CART, forests, SVR.

Public API:
    from readiness_models import ModelSpec, fit_model, predict, tune
"""

from readiness_models._base import (  # noqa: F401
    FAMILIES,
    ConstantModel,
    FittedModel,
    ModelSpec,
    fit_constant,
    fit_model,
    predict,
)
from readiness_models._forest import ForestParams, RandomForest, fit_forest  # noqa: F401
from readiness_models._linear import LinearModel, fit_ols  # noqa: F401
from readiness_models._roster import CONTRAST_ROSTER, PRESETS, preset_spec, roster_specs  # noqa: F401
from readiness_models._serialize import load_model, model_from_dict, model_to_dict, save_model  # noqa: F401
from readiness_models._svr import KernelSVR, SVRParams, fit_svr  # noqa: F401
from readiness_models._tree import RegressionTree, TreeParams, fit_tree  # noqa: F401
from readiness_models._tune import DEFAULT_SPACES, TuneResult, tune  # noqa: F401


def impurity_importance(model: FittedModel) -> dict:
    """Normalized SSE-reduction importance per raw feature (trees and forests only)."""
    if not hasattr(model, "impurity_importance"):
        from readiness_shared import ModelError
        raise ModelError(f"impurity importance is defined for tree and rf models, not {model.family}")
    return model.impurity_importance()


__all__ = [
    "FAMILIES", "ModelSpec", "FittedModel", "ConstantModel", "fit_constant", "fit_model", "predict",
    "LinearModel", "fit_ols", "TreeParams", "RegressionTree", "fit_tree",
    "ForestParams", "RandomForest", "fit_forest", "SVRParams", "KernelSVR", "fit_svr",
    "DEFAULT_SPACES", "TuneResult", "tune", "PRESETS", "CONTRAST_ROSTER", "preset_spec", "roster_specs",
    "save_model", "load_model", "model_to_dict", "model_from_dict", "impurity_importance",
]
