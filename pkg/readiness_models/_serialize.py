"""Versioned JSON documents for fitted models."""

import json
from pathlib import Path

from readiness_config import MODEL_VERSION
from readiness_models._base import ConstantModel, FittedModel
from readiness_models._forest import RandomForest
from readiness_models._linear import LinearModel
from readiness_models._svr import KernelSVR
from readiness_models._tree import RegressionTree
from readiness_shared import DataError

_CLASSES = {cls.family: cls for cls in (LinearModel, RegressionTree, RandomForest, KernelSVR, ConstantModel)}


def model_to_dict(model: FittedModel) -> dict:
    return {"version": MODEL_VERSION, "model": model.to_dict()}


def model_from_dict(doc: dict) -> FittedModel:
    if doc.get("version") != MODEL_VERSION:
        raise DataError(f"unsupported model document version {doc.get('version')!r}; expected {MODEL_VERSION}")
    body = doc.get("model") or {}
    cls = _CLASSES.get(body.get("family"))
    if cls is None:
        raise DataError(f"unknown model family {body.get('family')!r} in model document")
    return cls.from_dict(body)


def save_model(model: FittedModel, path):
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(json.dumps(model_to_dict(model), sort_keys=True) + "\n", encoding="utf-8")


def load_model(path) -> FittedModel:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise DataError(f"cannot read model {path}: {type(e).__name__}: {e}") from e
    return model_from_dict(doc)
