"""Random forests: bagged CART trees with per-split feature subsampling.

Tree i draws its bootstrap sample and its split candidates from the stream
derived from (seed, i), so the fitted forest does not depend on how trees are
scheduled across workers.
"""

from dataclasses import asdict, dataclass

import numpy as np

from readiness_core import Dataset
from readiness_formula import FeatureEncoder
from readiness_models._base import FittedModel, logger, params_from_dict
from readiness_models._tree import TreeArrays, TreeParams, check_fit_inputs, column_importance, grow_tree
from readiness_shared import DataError, derive_rng, parallel_map


@dataclass(frozen=True)
class ForestParams:
    n_trees: int = 100
    mtry: int | str | None = None
    max_depth: int | None = None
    min_leaf: int = 5
    bootstrap: bool = True
    seed: int = 0

    def __post_init__(self):
        if not isinstance(self.n_trees, int) or self.n_trees < 1:
            raise DataError(f"n_trees must be an integer >= 1, got {self.n_trees!r}")
        self.tree_params()

    def tree_params(self) -> TreeParams:
        return TreeParams(max_depth=self.max_depth, min_leaf=self.min_leaf, mtry=self.mtry, seed=self.seed)

    def resolve_mtry(self, p: int) -> int:
        """Default is max(1, p // 3) over the encoded columns."""
        return self.tree_params().resolve_mtry(p, default=max(1, p // 3))


class RandomForest(FittedModel):
    family = "rf"

    def __init__(self, encoder: FeatureEncoder, params: ForestParams, trees: list, mtry: int):
        self.encoder = encoder
        self.params = params
        self.trees = tuple(trees)
        self.mtry = mtry

    @property
    def features(self) -> list:
        return list(self.encoder.features)

    def predict(self, ds: Dataset) -> np.ndarray:
        X = self.encoder.encode(ds)
        return np.mean(np.stack([tree.predict(X) for tree in self.trees]), axis=0)

    def impurity_importance(self) -> dict:
        return column_importance(self.trees, self.encoder)

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "encoder": self.encoder.to_dict(),
            "params": asdict(self.params),
            "mtry": self.mtry,
            "trees": [t.to_dict() for t in self.trees],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RandomForest":
        return cls(FeatureEncoder.from_dict(d["encoder"]), ForestParams(**d["params"]),
                   [TreeArrays.from_dict(t) for t in d["trees"]], int(d["mtry"]))


def fit_forest(ds: Dataset, features, params=None, n_jobs: int | None = None) -> RandomForest:
    if not isinstance(params, ForestParams):
        params = params_from_dict(ForestParams, params, "rf")
    check_fit_inputs(ds, features, params.min_leaf)
    encoder = FeatureEncoder(features).fit(ds)
    X = encoder.encode(ds)
    y = ds.response
    n = ds.n
    mtry = params.resolve_mtry(X.shape[1])
    tree_params = params.tree_params()

    def grow(i: int) -> TreeArrays:
        rng = derive_rng(params.seed, i)
        if params.bootstrap:
            rows = rng.integers(0, n, size=n)
            return grow_tree(X[rows], y[rows], tree_params, mtry, rng)
        return grow_tree(X, y, tree_params, mtry, rng)

    trees = parallel_map(grow, range(params.n_trees), n_jobs=n_jobs)
    logger.debug(f"Forest: {params.n_trees} trees, mtry={mtry}/{X.shape[1]}, min_leaf={params.min_leaf}")
    return RandomForest(encoder, params, trees, mtry)
