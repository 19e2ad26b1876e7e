#!/usr/bin/env python3
"""Validate readiness report JSON files against the report document contract."""

import argparse
import json
import sys
from pathlib import Path


ROOT = Path(__file__).resolve().parent.parent
SCHEMA = ROOT / "schemas" / "report.schema.json"

_PAYLOAD_KEYS = {
    "synth": ("generator", "spec", "n", "out", "schema"),
    "cv": ("model", "plan", "folds", "pooled", "predictions"),
    "contrast": ("model", "traditional", "adapted", "rmse_ratio", "median_abs_error_ratio", "groups"),
    "contrast-roster": ("contrasts", "overfit"),
    "omission": ("family", "omitted", "variants", "deltas", "flags", "thresholds"),
    "underspec": ("family", "anchors", "candidates", "subsets", "classes", "flags", "thresholds"),
    "overfit": ("models", "winner_traditional", "winner_adapted", "ranking_flipped"),
    "importance": ("metric", "baseline", "features"),
    "shapley": ("summary",),
    "tune": ("best", "best_score", "trace"),
    "gate": ("passed", "reasons", "checked"),
}


def load_contract(schema_path: Path = SCHEMA) -> tuple[str, set[str], list[str]]:
    with schema_path.open("r", encoding="utf-8") as f:
        schema = json.load(f)
    props = schema["properties"]
    return props["version"]["const"], set(props["kind"]["enum"]), list(schema["required"])


def _reject_constant(token: str):
    raise ValueError(f"non-finite number {token}")


def collect_report_issues(path: Path, schema_path: Path = SCHEMA) -> list[str]:
    version, kinds, required = load_contract(schema_path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"), parse_constant=_reject_constant)
    except (OSError, ValueError) as e:
        return [f"{path}: unreadable report ({type(e).__name__}: {e})"]
    if not isinstance(doc, dict):
        return [f"{path}: top level must be an object"]
    issues = [f"{path}: missing key {key!r}" for key in required if key not in doc]
    if issues:
        return issues
    if doc["version"] != version:
        issues.append(f"{path}: version {doc['version']!r} != {version!r}")
    kind = doc["kind"]
    if kind not in kinds:
        issues.append(f"{path}: unknown kind {kind!r}")
        return issues
    if not isinstance(doc["command"], dict):
        issues.append(f"{path}: command must be an object")
    payload = doc["payload"]
    if not isinstance(payload, dict):
        issues.append(f"{path}: payload must be an object")
        return issues
    for key in _PAYLOAD_KEYS.get(kind, ()):
        if key not in payload:
            issues.append(f"{path}: {kind} payload missing {key!r}")
    return issues


def main() -> int:
    parser = argparse.ArgumentParser(description="Validate readiness report JSON files")
    parser.add_argument("reports", nargs="+", help="report files to check")
    args = parser.parse_args()
    issues = []
    for name in args.reports:
        issues.extend(collect_report_issues(Path(name)))
    if issues:
        print("[validate_report] FAIL", file=sys.stderr)
        for issue in issues:
            print(f"- {issue}", file=sys.stderr)
        return 1
    print(f"[validate_report] OK ({len(args.reports)} report(s))")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
