#!/usr/bin/env python3
"""Report documents and end-to-end CLI runs on small synthetic data."""

import contextlib
import io
import json
import tempfile
import unittest
from pathlib import Path

from fixtures import ROOT  # noqa: F401
from readiness_cli import EXIT_ERROR, EXIT_OK, EXIT_USAGE, run
from readiness_report import ReportDocument, read_report
from readiness_shared import DataError


def _quiet(argv) -> int:
    with contextlib.redirect_stdout(io.StringIO()):
        return run(argv)


class ReportDocumentTests(unittest.TestCase):
    def test_canonical_serialization(self):
        doc = ReportDocument("gate", {"passed": True, "reasons": [], "checked": ["overfit"]}, {"argv": ["gate"]})
        text = doc.to_json()
        self.assertEqual(ReportDocument.from_json(text).to_json(), text)

    def test_nan_rejected(self):
        with self.assertRaisesRegex(DataError, "strict JSON"):
            ReportDocument("cv", {"pooled": {"r2": float("nan")}}).to_json()

    def test_version_and_kind_checked(self):
        with self.assertRaisesRegex(DataError, "unsupported report version"):
            ReportDocument.from_dict({"version": "x", "kind": "cv", "payload": {}, "command": {}, "created_at": "t"})
        with self.assertRaisesRegex(DataError, "unknown report kind"):
            ReportDocument("bogus", {})


class CliTests(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls._td = tempfile.TemporaryDirectory()
        cls.work = Path(cls._td.name)
        (cls.work / "wall_spec.json").write_text(json.dumps({"n": 80}), encoding="utf-8")
        (cls.work / "grid_spec.json").write_text(json.dumps({"counts": 4}), encoding="utf-8")
        cls.wall = cls.work / "wall.csv"
        cls.grid = cls.work / "grid.csv"
        assert _quiet(["synth", "wall", "--spec", str(cls.work / "wall_spec.json"), "--seed", "3",
                       "--out", str(cls.wall), "--report", str(cls.work / "synth.json")]) == EXIT_OK
        assert _quiet(["synth", "grid", "--spec", str(cls.work / "grid_spec.json"), "--seed", "3",
                       "--out", str(cls.grid)]) == EXIT_OK

    @classmethod
    def tearDownClass(cls):
        cls._td.cleanup()

    def test_synth_writes_data_schema_and_report(self):
        self.assertTrue(self.wall.exists())
        self.assertTrue((self.work / "wall.schema.json").exists())
        doc = read_report(self.work / "synth.json")
        self.assertEqual(doc.kind, "synth")
        self.assertEqual(doc.payload["n"], 80)
        self.assertEqual(doc.command["seed"], 3)
        self.assertIn("config", doc.command)

    def test_usage_errors_exit_one(self):
        self.assertEqual(_quiet(["synth", "wall", "--out", str(self.work / "x.csv")]), EXIT_USAGE)
        self.assertEqual(_quiet(["frobnicate"]), EXIT_USAGE)
        self.assertEqual(_quiet(["cv", "--data", str(self.wall), "--model", "rf", "--formula", "drift ~ nu",
                                 "--plan", "kfold:3", "--seed", "1"]), EXIT_USAGE)
        self.assertEqual(_quiet(["plot", "--report", str(self.work / "synth.json"), "--kind", "pred-scatter",
                                 "--out", str(self.work / "bad.svg")]), EXIT_USAGE)

    def test_data_errors_exit_two(self):
        self.assertEqual(_quiet(["cv", "--data", str(self.work / "missing.csv"), "--model", "lm",
                                 "--plan", "kfold:3", "--seed", "1"]), EXIT_ERROR)
        self.assertEqual(_quiet(["cv", "--data", str(self.wall), "--model", "lm", "--formula", "drift ~ bogus",
                                 "--plan", "kfold:3", "--seed", "1"]), EXIT_ERROR)

    def test_cv_and_scatter(self):
        report = self.work / "cv.json"
        svg = self.work / "cv.svg"
        self.assertEqual(_quiet(["cv", "--data", str(self.wall), "--model", "lm", "--formula", "drift ~ lambda_b + nu",
                                 "--plan", "kfold:4", "--seed", "2", "--report", str(report)]), EXIT_OK)
        doc = read_report(report)
        self.assertEqual(len(doc.payload["folds"]), 4)
        self.assertEqual(_quiet(["plot", "--report", str(report), "--kind", "pred-scatter", "--out", str(svg)]),
                         EXIT_OK)
        self.assertIn("<svg", svg.read_text(encoding="utf-8"))

    def test_contrast_roster_overfit_and_gate(self):
        roster = self.work / "roster.json"
        overfit = self.work / "overfit.json"
        gate = self.work / "gate.json"
        self.assertEqual(_quiet(["contrast", "--data", str(self.grid), "--roster", "--groups", "t,Lsl",
                                 "--features", "t,Lsl,D,B", "--k", "4", "--seed", "1", "--n-trees", "5",
                                 "--report", str(roster)]), EXIT_OK)
        doc = read_report(roster)
        self.assertEqual([c["model"] for c in doc.payload["contrasts"]], ["rf", "rf-tuned", "lm-full", "lm-select"])
        self.assertEqual(_quiet(["audit", "overfit", "--contrast-report", str(roster), "--report", str(overfit)]),
                         EXIT_OK)
        self.assertEqual(read_report(overfit).kind, "overfit")
        self.assertIn(_quiet(["gate", "--reports", str(overfit), "--strict", "--report", str(gate)]), (EXIT_OK, 3))
        self.assertIn("passed", read_report(gate).payload)

    def test_contrast_boxplot(self):
        report = self.work / "contrast.json"
        svg = self.work / "box.svg"
        self.assertEqual(_quiet(["contrast", "--data", str(self.grid), "--preset", "lm-select",
                                 "--key-features", "t,Lsl", "--groups", "t,Lsl", "--k", "4", "--seed", "1",
                                 "--report", str(report)]), EXIT_OK)
        self.assertEqual(_quiet(["plot", "--report", str(report), "--kind", "group-boxplot", "--out", str(svg)]),
                         EXIT_OK)
        self.assertTrue(svg.read_text(encoding="utf-8").lstrip().startswith("<?xml"))

    def test_wall_contrast_on_binned_physics(self):
        report = self.work / "contrast_wall.json"
        self.assertEqual(_quiet(["contrast", "--data", str(self.wall), "--model", "tree", "--param", "max_depth=3",
                                 "--groups", "lambda_b,nu", "--bins", "2", "--k", "4", "--seed", "1",
                                 "--report", str(report)]), EXIT_OK)
        payload = read_report(report).payload
        self.assertEqual([g["label"] for g in payload["groups"]],
                         ["lambda_b_bin=q1,nu_bin=q1", "lambda_b_bin=q1,nu_bin=q2",
                          "lambda_b_bin=q2,nu_bin=q1", "lambda_b_bin=q2,nu_bin=q2"])
        self.assertEqual(sum(g["count"] for g in payload["groups"]), 80)
        self.assertEqual(_quiet(["contrast", "--data", str(self.wall), "--model", "tree", "--groups", "nu",
                                 "--bins", "1", "--k", "4", "--seed", "1"]), EXIT_ERROR)

    def test_omission_and_underspec(self):
        om = self.work / "omission.json"
        us = self.work / "underspec.json"
        self.assertEqual(_quiet(["audit", "omission", "--data", str(self.wall), "--physics", "lambda_b,nu",
                                 "--omit", "nu", "--model", "lm", "--top-k", "3", "--seed", "4",
                                 "--report", str(om)]), EXIT_OK)
        self.assertEqual([v["name"] for v in read_report(om).payload["variants"]], ["A", "B", "C"])
        self.assertEqual(_quiet(["audit", "underspec", "--data", str(self.wall), "--anchors", "lambda_b",
                                 "--candidates", "nu,s_db,axial", "--subset-size", "2", "--model", "lm",
                                 "--seed", "4", "--report", str(us)]), EXIT_OK)
        payload = read_report(us).payload
        self.assertEqual(len(payload["subsets"]), 3)
        self.assertIn("thresholds", read_report(us).command)

    def test_explain_with_saved_model(self):
        model = self.work / "lm.json"
        shap = self.work / "shap.json"
        imp = self.work / "imp.json"
        self.assertEqual(_quiet(["explain", "--data", str(self.wall), "--model", "lm", "--features", "lambda_b,nu",
                                 "--save-model", str(model), "--max-rows", "6", "--seed", "0",
                                 "--report", str(shap)]), EXIT_OK)
        summary = read_report(shap).payload["summary"]
        self.assertEqual(len(summary["phi"]), 6)
        self.assertEqual(_quiet(["explain", "--data", str(self.wall), "--model-file", str(model),
                                 "--method", "permutation", "--n-repeats", "2", "--seed", "0",
                                 "--report", str(imp)]), EXIT_OK)
        self.assertEqual(read_report(imp).kind, "importance")
        self.assertEqual(_quiet(["plot", "--report", str(shap), "--kind", "shap-beeswarm",
                                 "--out", str(self.work / "bee.svg")]), EXIT_OK)

    def test_tune(self):
        report = self.work / "tune.json"
        space = self.work / "space.json"
        space.write_text(json.dumps({"max_depth": [1, 3]}), encoding="utf-8")
        self.assertEqual(_quiet(["tune", "--data", str(self.wall), "--model", "tree", "--features", "lambda_b,nu",
                                 "--space", str(space), "--seed", "0", "--report", str(report)]), EXIT_OK)
        self.assertEqual(len(read_report(report).payload["trace"]), 2)


if __name__ == "__main__":
    unittest.main()
