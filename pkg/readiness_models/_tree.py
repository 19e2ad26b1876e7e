"""CART regression trees grown on flat node arrays.

Split search per candidate column sorts the node's rows once and scores every
cut between distinct neighbours with centered cumulative sums: for centered
responses the SSE reduction of a cut with left sum s is s^2 * n / (n_l * n_r).
Rows with ``x <= threshold`` go left.
"""

from dataclasses import asdict, dataclass

import numpy as np

from readiness_core import Dataset
from readiness_formula import FeatureEncoder
from readiness_models._base import FittedModel, params_from_dict
from readiness_shared import DataError, derive_rng

LEAF = -1


@dataclass(frozen=True)
class TreeParams:
    max_depth: int | None = None
    min_leaf: int = 1
    mtry: int | str | None = None
    seed: int = 0

    def __post_init__(self):
        if self.max_depth is not None and (not isinstance(self.max_depth, int) or self.max_depth < 0):
            raise DataError(f"max_depth must be an integer >= 0 or null, got {self.max_depth!r}")
        if not isinstance(self.min_leaf, int) or self.min_leaf < 1:
            raise DataError(f"min_leaf must be an integer >= 1, got {self.min_leaf!r}")
        if self.mtry not in (None, "all") and (not isinstance(self.mtry, int) or self.mtry < 1):
            raise DataError(f"mtry must be an integer >= 1, 'all' or null, got {self.mtry!r}")

    def resolve_mtry(self, p: int, default: int | None = None) -> int:
        if self.mtry == "all":
            return p
        if self.mtry is None:
            return p if default is None else default
        return min(self.mtry, p)


@dataclass(frozen=True)
class TreeArrays:
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    n_samples: np.ndarray
    gain: np.ndarray

    @property
    def n_nodes(self) -> int:
        return int(self.feature.size)

    def depth(self) -> int:
        depth = np.zeros(self.n_nodes, dtype=np.int64)
        for node in range(self.n_nodes):
            if self.feature[node] != LEAF:
                depth[self.left[node]] = depth[node] + 1
                depth[self.right[node]] = depth[node] + 1
        return int(depth.max())

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf index reached by every row of ``X``."""
        node = np.zeros(X.shape[0], dtype=np.int64)
        active = self.feature[node] != LEAF
        while np.any(active):
            rows = np.flatnonzero(active)
            cur = node[rows]
            go_left = X[rows, self.feature[cur]] <= self.threshold[cur]
            node[rows] = np.where(go_left, self.left[cur], self.right[cur])
            active[rows] = self.feature[node[rows]] != LEAF
        return node

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.value[self.apply(X)]

    def to_dict(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": [float(t) for t in self.threshold],
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": [float(v) for v in self.value],
            "n_samples": self.n_samples.tolist(),
            "gain": [float(g) for g in self.gain],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TreeArrays":
        return cls(
            np.asarray(d["feature"], dtype=np.int64),
            np.asarray(d["threshold"], dtype=np.float64),
            np.asarray(d["left"], dtype=np.int64),
            np.asarray(d["right"], dtype=np.int64),
            np.asarray(d["value"], dtype=np.float64),
            np.asarray(d["n_samples"], dtype=np.int64),
            np.asarray(d["gain"], dtype=np.float64),
        )


def _best_cut(x: np.ndarray, y: np.ndarray, min_leaf: int):
    """(gain, threshold) of the best cut on one column, or None."""
    n = x.size
    order = np.argsort(x, kind="stable")
    xs = x[order]
    yc = y[order] - y.mean()
    s_left = np.cumsum(yc)[:-1]
    n_left = np.arange(1, n)
    valid = (xs[:-1] < xs[1:]) & (n_left >= min_leaf) & (n - n_left >= min_leaf)
    if not np.any(valid):
        return None
    gain = np.where(valid, s_left ** 2 * n / (n_left * (n - n_left)), -np.inf)
    i = int(np.argmax(gain))
    if not gain[i] > 0.0:
        return None
    threshold = 0.5 * (xs[i] + xs[i + 1])
    if threshold >= xs[i + 1]:
        threshold = xs[i]
    return float(gain[i]), float(threshold)


def grow_tree(X: np.ndarray, y: np.ndarray, params: TreeParams, mtry: int,
              rng: np.random.Generator) -> TreeArrays:
    """Greedy depth-first CART over an explicit stack."""
    n, p = X.shape
    feature, threshold, left, right, value, n_samples, gain = [], [], [], [], [], [], []

    def new_node(idx):
        feature.append(LEAF)
        threshold.append(0.0)
        left.append(LEAF)
        right.append(LEAF)
        value.append(float(np.mean(y[idx])))
        n_samples.append(int(idx.size))
        gain.append(0.0)
        return len(feature) - 1

    root = new_node(np.arange(n))
    stack = [(root, np.arange(n), 0)]
    while stack:
        node, idx, depth = stack.pop()
        if params.max_depth is not None and depth >= params.max_depth:
            continue
        if idx.size < 2 * params.min_leaf:
            continue
        y_node = y[idx]
        if np.ptp(y_node) == 0.0:
            continue
        if mtry >= p:
            candidates = range(p)
        else:
            candidates = np.sort(rng.choice(p, size=mtry, replace=False))
        best = None
        for j in candidates:
            cut = _best_cut(X[idx, j], y_node, params.min_leaf)
            if cut is not None and (best is None or cut[0] > best[0]):
                best = (cut[0], cut[1], int(j))
        if best is None:
            continue
        g, thr, j = best
        goes_left = X[idx, j] <= thr
        left_idx, right_idx = idx[goes_left], idx[~goes_left]
        feature[node] = j
        threshold[node] = thr
        gain[node] = g
        left[node] = new_node(left_idx)
        right[node] = new_node(right_idx)
        # right pushed first so the left subtree is expanded first
        stack.append((right[node], right_idx, depth + 1))
        stack.append((left[node], left_idx, depth + 1))
    return TreeArrays(
        np.asarray(feature, dtype=np.int64), np.asarray(threshold, dtype=np.float64),
        np.asarray(left, dtype=np.int64), np.asarray(right, dtype=np.int64),
        np.asarray(value, dtype=np.float64), np.asarray(n_samples, dtype=np.int64),
        np.asarray(gain, dtype=np.float64),
    )


def column_importance(trees, encoder: FeatureEncoder) -> dict:
    """Summed SSE reduction per raw feature, normalized to sum 1."""
    per_col = np.zeros(len(encoder.columns))
    for tree in trees:
        split = tree.feature != LEAF
        np.add.at(per_col, tree.feature[split], tree.gain[split])
    out = {name: 0.0 for name in encoder.features}
    for j, src in enumerate(encoder.source):
        out[src] += float(per_col[j])
    total = sum(out.values())
    return {k: (v / total if total > 0 else 0.0) for k, v in out.items()}


class RegressionTree(FittedModel):
    family = "tree"

    def __init__(self, encoder: FeatureEncoder, params: TreeParams, tree: TreeArrays):
        self.encoder = encoder
        self.params = params
        self.tree = tree

    @property
    def features(self) -> list:
        return list(self.encoder.features)

    def predict(self, ds: Dataset) -> np.ndarray:
        return self.tree.predict(self.encoder.encode(ds))

    def impurity_importance(self) -> dict:
        return column_importance([self.tree], self.encoder)

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "encoder": self.encoder.to_dict(),
            "params": asdict(self.params),
            "tree": self.tree.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RegressionTree":
        return cls(FeatureEncoder.from_dict(d["encoder"]), TreeParams(**d["params"]),
                   TreeArrays.from_dict(d["tree"]))


def check_fit_inputs(ds: Dataset, features, min_leaf: int):
    if not list(features):
        raise DataError("feature list is empty")
    if min_leaf > ds.n:
        raise DataError(f"min_leaf {min_leaf} exceeds the {ds.n} training rows")


def fit_tree(ds: Dataset, features, params=None) -> RegressionTree:
    """Single CART tree; ``params`` is a TreeParams or a dict of its fields."""
    if not isinstance(params, TreeParams):
        params = params_from_dict(TreeParams, params, "tree")
    check_fit_inputs(ds, features, params.min_leaf)
    encoder = FeatureEncoder(features).fit(ds)
    X = encoder.encode(ds)
    mtry = params.resolve_mtry(X.shape[1])
    tree = grow_tree(X, ds.response, params, mtry, derive_rng(params.seed, 0))
    return RegressionTree(encoder, params, tree)
