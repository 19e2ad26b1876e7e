#!/usr/bin/env python3
"""Synthetic grid and wall generators."""

import json
import tempfile
import unittest
from pathlib import Path

import numpy as np

from fixtures import ROOT  # noqa: F401
from readiness_core import CATEGORICAL, unique_combinations
from readiness_models import fit_model, preset_spec
from readiness_shared import DataError
from readiness_synthgen import (
    WALL_NUISANCE,
    GridGenSpec,
    WallGenSpec,
    gen_grid_dataset,
    gen_wall_dataset,
    load_grid_spec,
    load_wall_spec,
)


class GridTests(unittest.TestCase):
    def test_default_counts_per_combination(self):
        ds = gen_grid_dataset(GridGenSpec(seed=1))
        self.assertEqual(ds.n, 9 * 390)
        combos = unique_combinations(ds, ["t", "Lsl"])
        self.assertEqual(len(combos), 9)
        self.assertTrue(all(count == 390 for _, count in combos))
        self.assertEqual(ds.response_name, "Vcr")
        self.assertEqual(len(ds.feature_names), 14)

    def test_explicit_count_matrix(self):
        ds = gen_grid_dataset(GridGenSpec(counts=[[1, 2, 3], [4, 5, 6], [7, 8, 9]]))
        self.assertEqual(ds.n, 45)
        counts = dict((k.values, c) for k, c in unique_combinations(ds, ["t", "Lsl"]))
        self.assertEqual(counts[(2.0, 60.0)], 9)
        self.assertEqual(counts[(1.0, 40.0)], 2)

    def test_noiseless_law_is_recovered(self):
        spec = GridGenSpec(counts=5, noise_sd=0.0)
        ds = gen_grid_dataset(spec)
        model = fit_model(preset_spec("lm-select", ds, key_features=["t", "Lsl"]), ds)
        np.testing.assert_allclose(model.coefficients, spec.coefficients, atol=1e-8)

    def test_seeded(self):
        a = gen_grid_dataset(GridGenSpec(counts=3, seed=4))
        b = gen_grid_dataset(GridGenSpec(counts=3, seed=4))
        c = gen_grid_dataset(GridGenSpec(counts=3, seed=5))
        np.testing.assert_array_equal(a.response, b.response)
        self.assertFalse(np.array_equal(a.response, c.response))

    def test_boundary_levels_add_categorical(self):
        ds = gen_grid_dataset(GridGenSpec(counts=4, boundary_levels=("fixed", "pinned")))
        self.assertEqual(ds.kind("bc"), CATEGORICAL)
        self.assertLessEqual(set(ds.column("bc").tolist()), {"fixed", "pinned"})

    def test_invalid_specs(self):
        with self.assertRaisesRegex(DataError, "count >= 1"):
            GridGenSpec(counts=[[1, 1, 1], [1, 0, 1], [1, 1, 1]])
        with self.assertRaisesRegex(DataError, "distinct"):
            GridGenSpec(t_levels=(1.0, 1.0))
        with self.assertRaisesRegex(DataError, "unknown key"):
            GridGenSpec.from_dict({"levels": [1]})

    def test_default_spec_file_matches_defaults(self):
        self.assertEqual(load_grid_spec().to_dict(), GridGenSpec().to_dict())

    def test_spec_file_round_trip(self):
        spec = GridGenSpec(counts=2, seed=9)
        with tempfile.TemporaryDirectory() as td:
            path = Path(td) / "g.json"
            path.write_text(json.dumps(spec.to_dict()), encoding="utf-8")
            self.assertEqual(load_grid_spec(path), spec)


class WallTests(unittest.TestCase):
    def test_shape_and_floor(self):
        ds = gen_wall_dataset(WallGenSpec(seed=2))
        self.assertEqual(ds.n, 164)
        self.assertEqual(len(ds.feature_names), 11)
        self.assertTrue(np.all(ds.response >= 0.1))

    def test_configured_correlation_is_reached(self):
        ds = gen_wall_dataset(WallGenSpec.uniform_correlation(0.7, "nu", n=4000, seed=3))
        nu = ds.column("nu")
        for name in WALL_NUISANCE:
            r = np.corrcoef(ds.column(name), nu)[0, 1]
            self.assertAlmostEqual(r, 0.7, delta=0.05, msg=name)

    def test_uncorrelated_by_default(self):
        ds = gen_wall_dataset(WallGenSpec(n=4000, seed=3))
        r = np.corrcoef(ds.column("s_db"), ds.column("nu"))[0, 1]
        self.assertLess(abs(r), 0.06)

    def test_non_psd_rejected(self):
        with self.assertRaisesRegex(DataError, "positive semidefinite"):
            WallGenSpec(correlation={"s_db": {"nu": 0.8, "lambda_b": 0.8}})

    def test_physics_cannot_be_correlation_target(self):
        with self.assertRaisesRegex(DataError, "not a nuisance"):
            WallGenSpec(correlation={"nu": {"lambda_b": 0.5}})

    def test_default_spec_file_loads(self):
        spec = load_wall_spec()
        self.assertEqual(spec.n, 164)
        self.assertGreater(spec.correlation["rho_t_w"]["nu"], 0.5)


if __name__ == "__main__":
    unittest.main()
