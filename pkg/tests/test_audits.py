#!/usr/bin/env python3
"""Omission audit, underspecification search, overfit gap and the deployment gate."""

import unittest

from fixtures import ROOT  # noqa: F401
from readiness_audits import (
    FRAGILE,
    INTERMEDIATE,
    STABLE,
    classify_ratio,
    deployment_gate,
    family_spec,
    near_equivalence_classes,
    omission_audit,
    overfit_gap,
    underspec_search,
)
from readiness_config import AuditThresholds
from readiness_shared import DataError
from readiness_synthgen import WallGenSpec, gen_wall_dataset

FAST_RF = {"n_trees": 15}


def _contrast(model, trad, adapted, ratio):
    return {"model": model, "rmse_ratio": ratio,
            "traditional": {"pooled": {"rmse": trad}}, "adapted": {"pooled": {"rmse": adapted}}}


class OmissionTests(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.ds = gen_wall_dataset(WallGenSpec.uniform_correlation(0.7, "nu", seed=11))

    def test_three_variants_on_one_split(self):
        report = omission_audit(self.ds, ["lambda_b", "nu"], "nu", "rf", 0.7, k=3, seed=1, params=FAST_RF)
        a, b, c = (report.variant(name) for name in "ABC")
        self.assertEqual(a.features, ["lambda_b", "nu"])
        self.assertNotIn("nu", b.features)
        self.assertEqual(len(b.features), 10)
        self.assertEqual(len(c.features), 3)
        self.assertTrue(set(c.features) <= set(b.features))
        self.assertEqual(len(a.test_y), len(b.test_y))
        self.assertEqual(a.test_y, c.test_y)

    def test_flags_follow_thresholds(self):
        thresholds = AuditThresholds()
        report = omission_audit(self.ds, ["lambda_b", "nu"], "nu", "lm", 0.7, k=2, seed=0, thresholds=thresholds)
        a, b = report.variant("A"), report.variant("B")
        self.assertEqual(report.overfit_signature, b.r2_gap - a.r2_gap > thresholds.r2_gap_margin)
        improvement = report.deltas["C_vs_B_rmse_improvement"]
        self.assertEqual(report.compensation_failed, improvement < thresholds.compensation_threshold)
        flags = report.to_dict()["flags"]
        self.assertEqual(set(flags), {"overfit_signature", "compensation_failed"})

    def test_equal_gaps_do_not_exceed_a_zero_margin(self):
        report = omission_audit(self.ds, ["lambda_b", "nu"], "nu", "tree", 0.7, k=2, seed=0,
                                params={"max_depth": 0}, thresholds=AuditThresholds(r2_gap_margin=0.0))
        self.assertEqual(report.variant("B").r2_gap, report.variant("A").r2_gap)
        self.assertFalse(report.overfit_signature)

    def test_physics_only_beats_omission_without_proxies(self):
        ds = gen_wall_dataset(WallGenSpec(n=400, seed=11))
        report = omission_audit(ds, ["lambda_b", "nu"], "nu", "lm", 0.7, k=2, seed=0)
        self.assertGreater(report.variant("A").test_r2, report.variant("B").test_r2)

    def test_bad_arguments(self):
        with self.assertRaisesRegex(DataError, "not among the physics"):
            omission_audit(self.ds, ["lambda_b"], "nu", "lm", seed=0)
        with self.assertRaisesRegex(DataError, "top-k"):
            omission_audit(self.ds, ["lambda_b", "nu"], "nu", "lm", k=11, seed=0)
        with self.assertRaisesRegex(DataError, "audit family"):
            family_spec("gbm", self.ds, ["nu"])


class UnderspecTests(unittest.TestCase):
    def test_equivalence_classes(self):
        self.assertEqual(near_equivalence_classes([0.9, 0.5, 0.88, 0.49], 0.05), [[0, 2], [1, 3]])
        self.assertEqual(near_equivalence_classes([0.5, 0.5], 0.0), [[0, 1]])

    def test_correlated_proxies_are_interchangeable(self):
        ds = gen_wall_dataset(WallGenSpec.uniform_correlation(0.7, "nu", n=600, seed=5))
        report = underspec_search(ds, ["lambda_b"], ["s_db", "rho_t_w", "ash_ratio", "axial"], 2,
                                  epsilon=0.1, family="lm", seed=2)
        self.assertEqual(len(report.subsets), 4)
        self.assertTrue(report.underspecified)
        self.assertEqual(sorted(i for cls in report.classes for i in cls), [0, 1, 2, 3])
        self.assertEqual(len(report.summaries), len(report.top_class))
        k = len(report.summaries)
        self.assertEqual(len(report.consistency), k * (k - 1) // 2)
        pool = ["lambda_b", "s_db", "rho_t_w", "ash_ratio", "axial"]
        self.assertEqual(report.summaries[0].features, pool)

    def test_true_feature_stands_alone(self):
        ds = gen_wall_dataset(WallGenSpec(n=600, seed=5))
        report = underspec_search(ds, ["lambda_b"], ["nu", "s_db", "rho_t_w"], 2, epsilon=0.02,
                                  family="lm", seed=2, explain=False)
        self.assertFalse(report.underspecified)
        self.assertEqual(report.subsets[report.top_class[0]].features, ["lambda_b", "nu"])
        self.assertEqual(report.summaries, [])

    def test_enumeration_cap(self):
        ds = gen_wall_dataset(WallGenSpec(n=50, seed=0))
        with self.assertRaisesRegex(DataError, "enumeration cap"):
            underspec_search(ds, ["lambda_b"], ["s_db", "rho_t_w", "ash_ratio"], 2, family="lm", cap=2)

    def test_anchor_candidate_overlap(self):
        ds = gen_wall_dataset(WallGenSpec(n=50, seed=0))
        with self.assertRaisesRegex(DataError, "overlaps"):
            underspec_search(ds, ["lambda_b"], ["lambda_b", "nu"], 2, family="lm")


class OverfitGapTests(unittest.TestCase):
    def test_classification_boundaries(self):
        t = AuditThresholds()
        self.assertEqual(classify_ratio(2.5, t), FRAGILE)
        self.assertEqual(classify_ratio(2.0, t), INTERMEDIATE)
        self.assertEqual(classify_ratio(1.5, t), STABLE)
        self.assertEqual(classify_ratio(None, t), FRAGILE)

    def test_ranking_flip(self):
        report = overfit_gap([_contrast("rf", 1.0, 3.0, 3.0), _contrast("lm-select", 1.2, 1.4, 1.4 / 1.2)])
        self.assertEqual(report.winner_traditional, "rf")
        self.assertEqual(report.winner_adapted, "lm-select")
        self.assertTrue(report.ranking_flipped)
        verdicts = {m["model"]: m["verdict"] for m in report.models}
        self.assertEqual(verdicts, {"rf": FRAGILE, "lm-select": STABLE})

    def test_malformed_contrast(self):
        with self.assertRaisesRegex(DataError, "malformed"):
            overfit_gap([{"model": "rf"}])

    def test_threshold_validation(self):
        with self.assertRaises(ValueError):
            AuditThresholds(stable_ratio=3.0, fragile_ratio=2.0)


class GateTests(unittest.TestCase):
    def test_stable_models_pass(self):
        verdict = deployment_gate([("contrast", _contrast("lm", 1.0, 1.1, 1.1))])
        self.assertTrue(verdict.passed)
        self.assertEqual(verdict.checked, ["contrast"])

    def test_failures_collect_reasons(self):
        omission = {"omitted": "nu", "flags": {"overfit_signature": True, "compensation_failed": True}}
        underspec = {"epsilon": 0.05, "classes": [[0, 1, 2]], "flags": {"underspecified": True}}
        overfit = overfit_gap([_contrast("rf", 1.0, 3.0, 3.0)]).to_dict()
        verdict = deployment_gate([("omission", omission), ("underspec", underspec), ("overfit", overfit)])
        self.assertFalse(verdict.passed)
        self.assertEqual(len(verdict.reasons), 4)

    def test_unknown_kind(self):
        with self.assertRaises(DataError):
            deployment_gate([("tune", {})])


if __name__ == "__main__":
    unittest.main()
