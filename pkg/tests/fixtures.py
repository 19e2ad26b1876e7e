"""Small deterministic datasets shared by the test modules."""

import sys
from pathlib import Path

import numpy as np

ROOT = Path(__file__).resolve().parent.parent
if str(ROOT) not in sys.path:
    sys.path.insert(0, str(ROOT))

from readiness_core import CATEGORICAL, NUMERIC, RESPONSE, Dataset, FeatureSchema  # noqa: E402


def numeric_schema(features, response="y") -> list:
    return [FeatureSchema(f, NUMERIC) for f in features] + [FeatureSchema(response, NUMERIC, RESPONSE)]


def linear_dataset(n=60, seed=0, noise=0.0) -> Dataset:
    """y = 1 + 2 a - 3 b (+ noise); c is pure nuisance."""
    rng = np.random.default_rng(seed)
    a = rng.uniform(0, 1, n)
    b = rng.uniform(0, 1, n)
    c = rng.uniform(0, 1, n)
    y = 1.0 + 2.0 * a - 3.0 * b + noise * rng.standard_normal(n)
    return Dataset(numeric_schema(["a", "b", "c"]), {"a": a, "b": b, "c": c, "y": y}, "linear")


def step_dataset(n=40) -> Dataset:
    """y jumps from 0 to 10 at x = 0.5; z carries no signal."""
    x = np.linspace(0.0, 1.0, n)
    z = np.tile([0.0, 1.0], n // 2)
    y = np.where(x < 0.5, 0.0, 10.0)
    return Dataset(numeric_schema(["x", "z"]), {"x": x, "z": z, "y": y}, "step")


def grouped_dataset(per_group=8, seed=0) -> Dataset:
    """Two crossed grouping factors (g in 3 levels, h categorical in 2) and a numeric x."""
    rng = np.random.default_rng(seed)
    g, h, x, y = [], [], [], []
    for gv in (1.0, 2.0, 3.0):
        for hv in ("lo", "hi"):
            for _ in range(per_group):
                xv = float(rng.uniform(0, 1))
                g.append(gv)
                h.append(hv)
                x.append(xv)
                y.append(gv * 2.0 + (1.5 if hv == "hi" else 0.0) + xv + 0.05 * float(rng.standard_normal()))
    schema = [FeatureSchema("g", NUMERIC), FeatureSchema("h", CATEGORICAL), FeatureSchema("x", NUMERIC),
              FeatureSchema("y", NUMERIC, RESPONSE)]
    return Dataset(schema, {"g": g, "h": h, "x": x, "y": y}, "grouped")
