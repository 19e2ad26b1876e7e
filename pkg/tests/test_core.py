#!/usr/bin/env python3
"""Dataset, CSV ingestion, splitting, metrics and grouping."""

import json
import tempfile
import unittest
from pathlib import Path

import numpy as np

from fixtures import grouped_dataset, linear_dataset, numeric_schema
from readiness_core import (
    CATEGORICAL,
    NUMERIC,
    RESPONSE,
    Dataset,
    FeatureSchema,
    GroupKey,
    SplitIndices,
    bin_features,
    group_codes,
    load_csv,
    load_schema,
    median_abs_error,
    r_squared,
    rmse,
    safe_r_squared,
    save_schema,
    schema_sidecar_path,
    train_test_indices,
    unique_combinations,
    write_csv,
)
from readiness_shared import DataError


class SchemaTests(unittest.TestCase):
    def test_exactly_one_response_required(self):
        schema = [FeatureSchema("a", NUMERIC), FeatureSchema("b", NUMERIC)]
        with self.assertRaises(DataError):
            Dataset(schema, {"a": [1.0], "b": [2.0]})

    def test_duplicate_names_rejected(self):
        schema = [FeatureSchema("a", NUMERIC), FeatureSchema("a", NUMERIC, RESPONSE)]
        with self.assertRaisesRegex(DataError, "duplicate"):
            Dataset(schema, {"a": [1.0]})

    def test_categorical_response_rejected(self):
        schema = [FeatureSchema("a", NUMERIC), FeatureSchema("y", CATEGORICAL, RESPONSE)]
        with self.assertRaisesRegex(DataError, "numeric"):
            Dataset(schema, {"a": [1.0], "y": ["x"]})

    def test_save_and_load_schema(self):
        schema = numeric_schema(["a", "b"])
        with tempfile.TemporaryDirectory() as td:
            path = Path(td) / "d.schema.json"
            save_schema(schema, path)
            self.assertIn("columns", json.loads(path.read_text(encoding="utf-8")))
            self.assertEqual(list(load_schema(path)), schema)

    def test_load_schema_accepts_bare_list(self):
        with tempfile.TemporaryDirectory() as td:
            path = Path(td) / "s.json"
            path.write_text(json.dumps([{"name": "x", "kind": "numeric", "role": "feature"},
                                        {"name": "y", "kind": "numeric", "role": "response"}]), encoding="utf-8")
            self.assertEqual([c.name for c in load_schema(path)], ["x", "y"])

    def test_sidecar_path(self):
        self.assertEqual(schema_sidecar_path("/tmp/data/wall.csv"), Path("/tmp/data/wall.schema.json"))


class DatasetTests(unittest.TestCase):
    def test_columns_are_read_only(self):
        ds = linear_dataset(n=5)
        with self.assertRaises(ValueError):
            ds.column("a")[0] = 99.0

    def test_nonfinite_rejected(self):
        with self.assertRaisesRegex(DataError, "non-finite"):
            Dataset(numeric_schema(["a"]), {"a": [1.0, float("nan")], "y": [1.0, 2.0]})

    def test_select_keeps_response_and_schema_order(self):
        ds = linear_dataset(n=5).select(["c", "a"])
        self.assertEqual(ds.names, ["a", "c", "y"])
        self.assertEqual(ds.response_name, "y")

    def test_unknown_feature_named(self):
        with self.assertRaisesRegex(DataError, "nope"):
            linear_dataset(n=5).select(["nope"])

    def test_take_and_replace_column(self):
        ds = linear_dataset(n=6)
        sub = ds.take([4, 1])
        self.assertEqual(sub.n, 2)
        self.assertEqual(sub.column("a")[0], ds.column("a")[4])
        swapped = ds.replace_column("a", np.zeros(6))
        self.assertTrue(np.all(swapped.column("a") == 0.0))
        self.assertFalse(np.all(ds.column("a") == 0.0))

    def test_levels_sorted(self):
        self.assertEqual(grouped_dataset(per_group=1).levels("h"), ["hi", "lo"])


class CsvTests(unittest.TestCase):
    def _write(self, td, text):
        path = Path(td) / "d.csv"
        path.write_text(text, encoding="utf-8")
        return path

    def test_write_then_load_is_exact(self):
        ds = grouped_dataset(per_group=2)
        with tempfile.TemporaryDirectory() as td:
            path = Path(td) / "g.csv"
            write_csv(ds, path)
            back = load_csv(path, ds.schema)
            for name in ("g", "x", "y"):
                np.testing.assert_array_equal(back.column(name), ds.column(name))
            self.assertEqual(back.column("h").tolist(), ds.column("h").tolist())

    def test_non_numeric_names_row_and_column(self):
        with tempfile.TemporaryDirectory() as td:
            path = self._write(td, "a,y\n1,2\nabc,3\n")
            with self.assertRaisesRegex(DataError, r"row 3, column a"):
                load_csv(path, numeric_schema(["a"]))

    def test_numeric_grammar_is_strict(self):
        with tempfile.TemporaryDirectory() as td:
            for cell in ("1_000", "nan", "inf", "-Infinity", "\u0663", "0x10", "1e"):
                path = self._write(td, f"a,y\n1,2\n{cell},3\n")
                with self.assertRaisesRegex(DataError, r"non-numeric value .* at row 3, column a"):
                    load_csv(path, numeric_schema(["a"]))
            path = self._write(td, "a,y\n-1.5e3,.5\n+2.,7E-2\n")
            ds = load_csv(path, numeric_schema(["a"]))
            np.testing.assert_array_equal(ds.column("a"), [-1500.0, 2.0])
            np.testing.assert_array_equal(ds.column("y"), [0.5, 0.07])

    def test_empty_cell_rejected(self):
        with tempfile.TemporaryDirectory() as td:
            path = self._write(td, "a,y\n1,\n")
            with self.assertRaisesRegex(DataError, r"empty cell at row 2, column y"):
                load_csv(path, numeric_schema(["a"]))

    def test_header_mismatch(self):
        with tempfile.TemporaryDirectory() as td:
            path = self._write(td, "a,b,y\n1,2,3\n")
            with self.assertRaisesRegex(DataError, "undeclared column"):
                load_csv(path, numeric_schema(["a"]))

    def test_ragged_row(self):
        with tempfile.TemporaryDirectory() as td:
            path = self._write(td, "a,y\n1,2,3\n")
            with self.assertRaisesRegex(DataError, "row 2 has 3 cells"):
                load_csv(path, numeric_schema(["a"]))

    def test_header_only_file(self):
        with tempfile.TemporaryDirectory() as td:
            path = self._write(td, "a,y\n")
            with self.assertRaisesRegex(DataError, "no data rows"):
                load_csv(path, numeric_schema(["a"]))


class SplitTests(unittest.TestCase):
    def test_train_size_rounds_half_up(self):
        train, test = train_test_indices(5, 0.7, seed=1)
        self.assertEqual(len(train), 4)
        self.assertEqual(sorted(np.concatenate([train, test]).tolist()), list(range(5)))
        train, test = train_test_indices(164, 0.7, seed=1)
        self.assertEqual((len(train), len(test)), (115, 49))
        train, test = train_test_indices(2, 0.5, seed=1)
        self.assertEqual((len(train), len(test)), (1, 1))

    def test_same_seed_same_split(self):
        a = train_test_indices(50, 0.7, seed=3)
        b = train_test_indices(50, 0.7, seed=3)
        np.testing.assert_array_equal(a[0], b[0])

    def test_degenerate_fraction(self):
        with self.assertRaises(DataError):
            train_test_indices(10, 1.0, seed=0)
        with self.assertRaisesRegex(DataError, "degenerate"):
            train_test_indices(2, 0.9, seed=0)

    def test_split_partition_laws(self):
        good = SplitIndices((np.array([0, 2]), np.array([1, 3])))
        good.validate(4)
        np.testing.assert_array_equal(good.fold_of(4), [0, 1, 0, 1])
        with self.assertRaisesRegex(DataError, "partition"):
            SplitIndices((np.array([0, 1]), np.array([1, 2, 3]))).validate(4)
        with self.assertRaisesRegex(DataError, "at least 2"):
            SplitIndices((np.arange(4),)).validate(4)


class MetricTests(unittest.TestCase):
    def test_values(self):
        y = [1.0, 2.0, 3.0, 4.0]
        yhat = [1.0, 2.0, 3.0, 6.0]
        self.assertAlmostEqual(rmse(y, yhat), 1.0)
        self.assertAlmostEqual(median_abs_error(y, yhat), 0.0)
        self.assertAlmostEqual(r_squared(y, yhat), 1.0 - 4.0 / 5.0)
        self.assertAlmostEqual(rmse([0.0, 0.0], [3.0, 4.0]), np.sqrt(12.5))

    def test_r2_undefined_cases(self):
        with self.assertRaises(DataError):
            r_squared([2.0, 2.0], [1.0, 3.0])
        self.assertIsNone(safe_r_squared([2.0], [2.0]))

    def test_length_mismatch(self):
        with self.assertRaisesRegex(DataError, "length mismatch"):
            rmse([1.0], [1.0, 2.0])

    def test_r2_invariant_under_affine_rescale(self):
        rng = np.random.default_rng(4)
        y = rng.normal(size=30)
        yhat = y + 0.3 * rng.normal(size=30)
        base = r_squared(y, yhat)
        for scale, shift in ((2.5, -7.0), (0.01, 100.0), (1000.0, 0.0)):
            self.assertAlmostEqual(r_squared(scale * y + shift, scale * yhat + shift), base, places=9)
        self.assertAlmostEqual(r_squared(y, np.full_like(y, y.mean())), 0.0)


class GroupingTests(unittest.TestCase):
    def test_codes_and_counts(self):
        ds = grouped_dataset(per_group=3)
        keys, codes = group_codes(ds, ["g", "h"])
        self.assertEqual(len(keys), 6)
        self.assertEqual(keys[0].label, "g=1,h=hi")
        self.assertEqual(keys[0], GroupKey(("g", "h"), (1.0, "hi")))
        self.assertEqual(codes.shape, (ds.n,))
        self.assertEqual([c for _, c in unique_combinations(ds, ["g", "h"])], [3] * 6)

    def test_combinations_ignore_row_order(self):
        ds = grouped_dataset(per_group=3)
        rng = np.random.default_rng(11)
        for _ in range(5):
            shuffled = ds.take(rng.permutation(ds.n))
            self.assertEqual(unique_combinations(shuffled, ["g", "h"]), unique_combinations(ds, ["g", "h"]))

    def test_quantile_bins_for_grouping(self):
        ds = linear_dataset(n=30)
        binned, names = bin_features(ds, ["a", "b"], 3)
        self.assertEqual(names, ["a_bin", "b_bin"])
        self.assertEqual(binned.kind("a_bin"), CATEGORICAL)
        self.assertEqual([c for _, c in unique_combinations(binned, ["a_bin"])], [10, 10, 10])
        low = binned.column("a")[binned.column("a_bin") == "q1"]
        high = binned.column("a")[binned.column("a_bin") == "q3"]
        self.assertLess(low.max(), high.min())
        np.testing.assert_array_equal(binned.column("a"), ds.column("a"))
        grouped = grouped_dataset(per_group=2)
        self.assertEqual(bin_features(grouped, ["h", "x"], 12)[1], ["h", "x_bin"])
        self.assertEqual(set(bin_features(grouped, ["x"], 12)[0].column("x_bin").tolist()),
                         {f"q{i:02d}" for i in range(1, 13)})
        with self.assertRaises(DataError):
            bin_features(ds, ["a"], 1)

    def test_group_key_round_trip(self):
        key = GroupKey(("t", "Lsl"), (1.5, 20.0))
        self.assertEqual(GroupKey.from_dict(key.to_dict()), key)
        self.assertEqual(key.label, "t=1.5,Lsl=20")


if __name__ == "__main__":
    unittest.main()
