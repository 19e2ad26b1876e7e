"""Grid and random hyperparameter search scored by k-fold CV."""

import itertools
import math
from dataclasses import dataclass

import numpy as np

from readiness_core import Dataset
from readiness_models._base import ModelSpec, logger
from readiness_shared import DataError, ModelError, ReadinessError, audit_event, parallel_map, timed

GRID = "grid"
RANDOM = "random"

DEFAULT_SPACES = {
    "rf": {"n_trees": [50, 100, 200], "max_depth": [None, 8, 16], "min_leaf": [1, 5]},
    "tree": {"max_depth": [2, 4, 8, None], "min_leaf": [1, 5, 10]},
    "svr": {"C": [1.0, 10.0, 100.0], "gamma": [0.01, 0.1, 1.0], "epsilon": [0.01, 0.1]},
}


@dataclass
class TuneResult:
    best: ModelSpec
    best_score: float
    trace: list

    def to_dict(self) -> dict:
        return {"best": self.best.to_dict(), "best_score": self.best_score, "trace": self.trace}


def _candidates(space: dict, search: str, n_draws: int, seed: int) -> list:
    if not space or any(len(v) == 0 for v in space.values()):
        raise DataError("empty search space")
    names = list(space)
    if search == GRID:
        return [dict(zip(names, combo)) for combo in itertools.product(*(space[k] for k in names))]
    if search != RANDOM:
        raise DataError(f"unknown search {search!r}; expected grid or random")
    if n_draws < 1:
        raise DataError("empty search space: random search needs n_draws >= 1")
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n_draws):
        cand = {k: space[k][int(rng.integers(len(space[k])))] for k in names}
        if cand not in out:
            out.append(cand)
    return out


def _complexity(params: dict) -> tuple:
    """Simpler first: fewer trees, shallower depth, smaller C."""
    depth = params.get("max_depth")
    return (params.get("n_trees", 0), math.inf if depth is None else depth, params.get("C", 0.0))


def tune(spec: ModelSpec, ds: Dataset, space: dict | None = None, search: str = GRID,
         n_draws: int = 10, folds: int = 3, seed: int = 0, n_jobs: int | None = None) -> TuneResult:
    """Pick the params minimizing mean out-of-fold RMSE over ``folds``-fold CV.

    Candidate failures are recorded in the trace; ties go to the simpler model,
    then to the first candidate seen.
    """
    from readiness_validation import CVPlan, KFOLD, cross_validate

    if space is None:
        space = DEFAULT_SPACES.get(spec.family)
        if space is None:
            raise DataError(f"no default search space for family {spec.family}")
    if folds < 2:
        raise DataError(f"tuning needs folds >= 2, got {folds}")
    candidates = _candidates(space, search, n_draws, seed)
    plan = CVPlan(KFOLD, k=folds, seed=seed)

    def score(cand: dict) -> dict:
        entry = {"params": cand}
        try:
            result = cross_validate(spec.with_params(**cand), ds, plan, n_jobs=1)
            entry["score"] = float(np.mean([f.rmse for f in result.folds]))
        except ReadinessError as e:
            entry["error"] = f"{type(e).__name__}: {e}"
        return entry

    with timed() as t:
        trace = parallel_map(score, candidates, n_jobs=n_jobs)
    ok = [(e["score"], _complexity({**spec.params, **e["params"]}), i)
          for i, e in enumerate(trace) if "score" in e]
    if not ok:
        raise ModelError(f"all {len(trace)} tuning candidates failed; first error: {trace[0]['error']}")
    best_score, _, best_i = min(ok)
    best = spec.with_params(**trace[best_i]["params"])
    logger.info(f"Tuned {spec.label} ({search}, {len(trace)} candidates): {trace[best_i]['params']} "
                f"mean CV RMSE {best_score:.6g}")
    audit_event("tune", spec.label, duration_ms=t.ms, candidates=len(trace), failed=len(trace) - len(ok))
    return TuneResult(best, best_score, trace)
