#!/usr/bin/env python3
"""Readiness CLI — synthesize data, validate models, run audits, render plots.

Usage:
    python3 readiness_cli.py synth wall --seed 7 --out wall.csv
    python3 readiness_cli.py contrast --data grid.csv --model rf --groups t,Lsl --k 10 --seed 1 --report out.json
    python3 readiness_cli.py audit omission --data wall.csv --physics lambda_b,nu --omit nu --seed 3 --report om.json
    python3 readiness_cli.py plot --report out.json --kind group-boxplot --out out.svg

Exit codes: 0 success, 1 usage error, 2 data or model error.
"""

import argparse
import json
import logging
import sys

from readiness_config import config_echo, load_thresholds
from readiness_core import bin_features, load_csv, load_schema, save_schema, schema_sidecar_path, write_csv
from readiness_formula import additive_formula, parse_formula
from readiness_models import (
    FAMILIES,
    PRESETS,
    ModelSpec,
    fit_model,
    load_model,
    preset_spec,
    roster_specs,
    save_model,
    tune,
)
from readiness_report import ReportDocument, read_report, write_report
from readiness_shared import ReadinessError, UsageError, audit_event, new_run_id, setup_logging, timed

logger = logging.getLogger("readiness")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_ERROR = 2


class _Parser(argparse.ArgumentParser):
    """argparse that raises UsageError instead of exiting."""

    def error(self, message):
        raise UsageError(message)


def _csv_list(text: str) -> list:
    return [item.strip() for item in text.split(",") if item.strip()] if text else []


def _param_value(raw: str):
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw


# ---------------------------------------------------------------------------
# Shared argument groups
# ---------------------------------------------------------------------------
def _add_data(p):
    p.add_argument("--data", required=True, help="CSV data file")
    p.add_argument("--schema", help="schema sidecar (default: <data>.schema.json)")


def _add_model(p):
    p.add_argument("--model", choices=FAMILIES, help="model family")
    p.add_argument("--preset", choices=PRESETS, help="preset model configuration")
    p.add_argument("--formula", help="model formula (lm only), e.g. 'log(Vcr) ~ t + Lsl + t:Lsl'")
    p.add_argument("--features", help="comma-separated feature list (default: every schema feature)")
    p.add_argument("--key-features", help="two key features for the lm-select preset")
    p.add_argument("--param", action="append", default=[], metavar="KEY=VALUE",
                   help="model parameter (JSON value), repeatable")
    p.add_argument("--mtry", help="candidate features per split (integer or 'all')")
    p.add_argument("--n-trees", type=int, help="forest size")


def _add_report(p):
    p.add_argument("--report", help="write the JSON report here")


def _add_thresholds(p):
    p.add_argument("--thresholds", help="JSON overlay for the audit thresholds")


def _build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="readiness", description="Deployment-readiness audits for tabular regression models")
    parser.add_argument("--log-level", help="override READINESS_LOG_LEVEL")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic dataset")
    p.add_argument("generator", choices=("grid", "wall"))
    p.add_argument("--spec", help="generator spec JSON (default: specs/<generator>_default.json)")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True, help="CSV output path (schema sidecar written alongside)")
    _add_report(p)

    p = sub.add_parser("cv", help="cross-validate one model")
    _add_data(p)
    _add_model(p)
    p.add_argument("--plan", required=True, help="kfold:K or grouped:f1,f2")
    p.add_argument("--seed", type=int, required=True)
    _add_report(p)

    p = sub.add_parser("contrast", help="traditional vs adapted CV")
    _add_data(p)
    _add_model(p)
    p.add_argument("--roster", action="store_true", help="run the rf / rf-tuned / lm-full / lm-select roster")
    p.add_argument("--groups", required=True, help="grouping features, e.g. t,Lsl")
    p.add_argument("--bins", type=int, help="group on N equal-count bins of each numeric grouping feature")
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--tune", choices=("grid", "random"), help="tune hyperparameters before CV")
    p.add_argument("--n-draws", type=int, default=10)
    p.add_argument("--nested", action="store_true", help="re-tune inside every training fold")
    _add_report(p)

    p = sub.add_parser("audit", help="run a deployment audit")
    audit = p.add_subparsers(dest="audit", required=True)
    a = audit.add_parser("omission", help="variable-omission audit")
    _add_data(a)
    _add_model(a)
    a.add_argument("--physics", required=True, help="physics-only feature set (variant A)")
    a.add_argument("--omit", required=True, help="physically important feature left out of B and C")
    a.add_argument("--split", type=float, default=0.7, help="train fraction")
    a.add_argument("--top-k", type=int, help="variant C size (default from thresholds)")
    a.add_argument("--seed", type=int, required=True)
    _add_thresholds(a)
    _add_report(a)
    a = audit.add_parser("underspec", help="underspecification search")
    _add_data(a)
    _add_model(a)
    a.add_argument("--anchors", required=True)
    a.add_argument("--candidates", default="")
    a.add_argument("--subset-size", type=int, required=True)
    a.add_argument("--epsilon", type=float, help="near-equivalence tolerance on test R2")
    a.add_argument("--split", type=float, default=0.7)
    a.add_argument("--seed", type=int, required=True)
    a.add_argument("--no-explain", action="store_true", help="skip Shapley summaries for the top class")
    a.add_argument("--shapley-mode", choices=("exact", "sampled"), default="exact")
    _add_thresholds(a)
    _add_report(a)
    a = audit.add_parser("overfit", help="overfit-gap verdicts from contrast reports")
    a.add_argument("--contrast-report", nargs="+", required=True)
    _add_thresholds(a)
    _add_report(a)

    p = sub.add_parser("explain", help="permutation importance or Shapley summary")
    _add_data(p)
    _add_model(p)
    p.add_argument("--model-file", help="load a saved model instead of fitting one")
    p.add_argument("--save-model", help="save the fitted model here")
    p.add_argument("--method", choices=("permutation", "shapley"), default="shapley")
    p.add_argument("--metric", choices=("rmse", "r2"), default="rmse")
    p.add_argument("--n-repeats", type=int, default=5)
    p.add_argument("--mode", choices=("exact", "sampled"), default="exact")
    p.add_argument("--n-samples", type=int, default=256)
    p.add_argument("--background-size", type=int)
    p.add_argument("--max-rows", type=int, help="explain only the first N rows")
    p.add_argument("--seed", type=int, required=True)
    _add_report(p)

    p = sub.add_parser("tune", help="hyperparameter search")
    _add_data(p)
    _add_model(p)
    p.add_argument("--search", choices=("grid", "random"), default="grid")
    p.add_argument("--space", help="search space JSON {param: [values]} (default per family)")
    p.add_argument("--n-draws", type=int, default=10)
    p.add_argument("--folds", type=int, default=3)
    p.add_argument("--seed", type=int, required=True)
    _add_report(p)

    p = sub.add_parser("plot", help="render an SVG from a report")
    p.add_argument("--report", required=True, help="input report JSON")
    p.add_argument("--kind", required=True, help="group-boxplot | pred-scatter | shap-beeswarm")
    p.add_argument("--out", required=True, help="SVG output path")

    p = sub.add_parser("gate", help="combine audit reports into a deployment verdict")
    p.add_argument("--reports", nargs="+", required=True)
    p.add_argument("--strict", action="store_true", help="exit 3 when the gate fails")
    _add_thresholds(p)
    _add_report(p)
    return parser


# ---------------------------------------------------------------------------
# Helpers
# ---------------------------------------------------------------------------
def _load_dataset(args):
    schema_path = args.schema or schema_sidecar_path(args.data)
    return load_csv(args.data, load_schema(schema_path))


def _model_params(args, family: str) -> dict:
    params = {}
    for item in args.param:
        key, sep, raw = item.partition("=")
        if not sep or not key:
            raise UsageError(f"--param expects KEY=VALUE, got {item!r}")
        params[key.strip()] = _param_value(raw.strip())
    if args.mtry is not None:
        params["mtry"] = "all" if args.mtry == "all" else _param_value(args.mtry)
    if args.n_trees is not None:
        params["n_trees"] = args.n_trees
    if family in ("rf", "tree") and "seed" not in params and getattr(args, "seed", None) is not None:
        params["seed"] = args.seed
    return params


def _model_spec(args, ds, default_family: str | None = None) -> ModelSpec:
    features = _csv_list(args.features) or None
    if args.preset:
        if args.model or args.formula:
            raise UsageError("--preset conflicts with --model/--formula")
        family = "lm" if args.preset.startswith("lm-") else args.preset.split("-")[0]
        return preset_spec(args.preset, ds, _csv_list(args.key_features), features, _model_params(args, family))
    family = args.model or default_family
    if family is None:
        raise UsageError("one of --model or --preset is required")
    if args.formula and family != "lm":
        raise UsageError("--formula applies to --model lm only")
    if family == "lm":
        if args.formula and features:
            raise UsageError("--formula conflicts with --features")
        formula = parse_formula(args.formula) if args.formula else \
            additive_formula(ds.response_name, features or ds.feature_names)
        return ModelSpec("lm", formula=formula)
    params = _model_params(args, family)
    if family == "const":
        return ModelSpec("const", params=params)
    return ModelSpec(family, features=tuple(features or ds.feature_names), params=params)


def _thresholds(args):
    return load_thresholds(args.thresholds) if getattr(args, "thresholds", None) else load_thresholds()


def _echo(args, argv, **extra) -> dict:
    echo = {"argv": list(argv), "config": config_echo(), "seed": getattr(args, "seed", None)}
    echo.update(extra)
    return echo


def _emit(args, argv, kind: str, payload: dict, **extra):
    doc = ReportDocument(kind, payload, _echo(args, argv, **extra))
    if getattr(args, "report", None):
        write_report(doc, args.report)
    return doc


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------
def _cmd_synth(args, argv) -> int:
    from readiness_synthgen import gen_grid_dataset, gen_wall_dataset, load_grid_spec, load_wall_spec

    if args.generator == "grid":
        spec = load_grid_spec(args.spec).with_seed(args.seed)
        ds = gen_grid_dataset(spec)
    else:
        spec = load_wall_spec(args.spec).with_seed(args.seed)
        ds = gen_wall_dataset(spec)
    write_csv(ds, args.out)
    sidecar = schema_sidecar_path(args.out)
    save_schema(ds.schema, sidecar)
    print(f"{args.generator}: {ds.n} rows -> {args.out} (schema {sidecar})")
    _emit(args, argv, "synth", {"generator": args.generator, "spec": spec.to_dict(), "n": ds.n,
                                "out": str(args.out), "schema": str(sidecar)})
    return EXIT_OK


def _cmd_cv(args, argv) -> int:
    from readiness_validation import cross_validate, parse_plan

    ds = _load_dataset(args)
    spec = _model_spec(args, ds)
    result = cross_validate(spec, ds, parse_plan(args.plan, seed=args.seed))
    pooled = result.pooled
    print(f"{spec.label} {args.plan}: RMSE {pooled['rmse']:.6g}  median|e| {pooled['median_abs_error']:.6g}  "
          f"R2 {pooled['r2']}")
    _emit(args, argv, "cv", result.to_dict())
    return EXIT_OK


def _cmd_contrast(args, argv) -> int:
    from readiness_audits import overfit_gap
    from readiness_models import DEFAULT_SPACES
    from readiness_validation import cv_contrast, format_contrast_table

    ds = _load_dataset(args)
    groups = _csv_list(args.groups)
    if args.roster:
        if args.model or args.preset or args.formula:
            raise UsageError("--roster conflicts with --model/--preset/--formula")
        key = _csv_list(args.key_features) or groups
        specs = roster_specs(ds, key, _csv_list(args.features) or None, _model_params(args, "rf"))
    else:
        specs = [_model_spec(args, ds)]
    if args.bins is not None:
        ds, groups = bin_features(ds, groups, args.bins)
    reports = []
    for spec in specs:
        space = DEFAULT_SPACES.get(spec.family) if args.tune else None
        reports.append(cv_contrast(spec, ds, groups, args.k, args.seed, tune_space=space, nested=args.nested,
                                   search=args.tune or "grid", n_draws=args.n_draws))
    print(format_contrast_table(reports))
    if args.roster:
        overfit = overfit_gap(reports)
        print(f"winner traditional: {overfit.winner_traditional}  winner adapted: {overfit.winner_adapted}")
        _emit(args, argv, "contrast-roster", {"contrasts": [r.to_dict() for r in reports],
                                              "overfit": overfit.to_dict()})
    else:
        _emit(args, argv, "contrast", reports[0].to_dict())
    return EXIT_OK


def _audit_family(args) -> tuple:
    if args.preset or args.formula:
        raise UsageError("audits take --model (rf, svr, lm, tree), not --preset/--formula")
    family = args.model or "rf"
    return family, _model_params(args, family)


def _cmd_audit(args, argv) -> int:
    from readiness_audits import omission_audit, overfit_gap, underspec_search

    thresholds = _thresholds(args)
    if args.audit == "overfit":
        contrasts = []
        for path in args.contrast_report:
            doc = read_report(path)
            if doc.kind == "contrast":
                contrasts.append(doc.payload)
            elif doc.kind == "contrast-roster":
                contrasts.extend(doc.payload["contrasts"])
            else:
                raise UsageError(f"{path} is a {doc.kind} report, expected contrast")
        report = overfit_gap(contrasts, thresholds)
        for row in report.models:
            print(f"{row['model']:<12} ratio {row['rmse_ratio']}  -> {row['verdict']}")
        _emit(args, argv, "overfit", report.to_dict(), thresholds=thresholds.to_dict())
        return EXIT_OK

    ds = _load_dataset(args)
    family, params = _audit_family(args)
    if args.audit == "omission":
        report = omission_audit(ds, _csv_list(args.physics), args.omit, family, args.split, args.top_k,
                                args.seed, params, thresholds, _csv_list(args.features) or None)
        for v in report.variants:
            print(f"{v.name}: train R2 {v.train_r2:.3f} test R2 {v.test_r2:.3f} test RMSE {v.test_rmse:.4g}")
        print(f"overfit_signature={report.overfit_signature} compensation_failed={report.compensation_failed}")
        _emit(args, argv, "omission", report.to_dict(), thresholds=thresholds.to_dict())
    else:
        report = underspec_search(ds, _csv_list(args.anchors), _csv_list(args.candidates), args.subset_size,
                                  args.epsilon, family, args.split, args.seed, params, thresholds,
                                  explain=not args.no_explain, shapley_mode=args.shapley_mode)
        for i in report.top_class:
            s = report.subsets[i]
            print(f"{','.join(s.features)}: train R2 {s.train_r2:.3f} test R2 {s.test_r2:.3f}")
        print(f"underspecified={report.underspecified}")
        _emit(args, argv, "underspec", report.to_dict(), thresholds=thresholds.to_dict())
    return EXIT_OK


def _cmd_explain(args, argv) -> int:
    from readiness_explain import background_sample, permutation_importance, shapley_summary

    ds = _load_dataset(args)
    if args.model_file:
        if args.model or args.preset or args.formula:
            raise UsageError("--model-file conflicts with --model/--preset/--formula")
        model = load_model(args.model_file)
    else:
        model = fit_model(_model_spec(args, ds), ds)
    if args.save_model:
        save_model(model, args.save_model)
    rows = ds if args.max_rows is None else ds.take(range(min(args.max_rows, ds.n)))
    if args.method == "permutation":
        report = permutation_importance(model, rows, args.metric, args.n_repeats, args.seed)
        for f in report.features:
            print(f"{f.name:<12} {f.importance:+.6g}")
        _emit(args, argv, "importance", report.to_dict())
        return EXIT_OK
    background = background_sample(ds, args.background_size, args.seed)
    summary = shapley_summary(model, rows, background, args.mode, args.n_samples, args.seed, label=model.family)
    for name in summary.ranking():
        j = summary.features.index(name)
        print(f"{name:<12} mean|phi| {summary.mean_abs[j]:.6g}  trend {summary.trend[j]:+d}")
    _emit(args, argv, "shapley", {"summary": summary.to_dict(), "model": model.family})
    return EXIT_OK


def _cmd_tune(args, argv) -> int:
    ds = _load_dataset(args)
    spec = _model_spec(args, ds)
    space = None
    if args.space:
        try:
            with open(args.space, "r", encoding="utf-8") as f:
                space = json.load(f)
        except (OSError, json.JSONDecodeError) as e:
            raise UsageError(f"cannot read search space {args.space}: {e}") from e
    result = tune(spec, ds, space, args.search, args.n_draws, args.folds, args.seed)
    print(f"best {result.best.params} (mean CV RMSE {result.best_score:.6g})")
    _emit(args, argv, "tune", result.to_dict())
    return EXIT_OK


def _cmd_plot(args, argv) -> int:
    from readiness_plots import render_svg

    render_svg(read_report(args.report), args.kind, args.out)
    print(f"{args.kind} -> {args.out}")
    return EXIT_OK


_GATE_KINDS = {"contrast": "contrast", "overfit": "overfit", "omission": "omission", "underspec": "underspec"}


def _cmd_gate(args, argv) -> int:
    from readiness_audits import deployment_gate

    items = []
    for path in args.reports:
        doc = read_report(path)
        if doc.kind == "contrast-roster":
            items.append(("overfit", doc.payload["overfit"]))
        elif doc.kind in _GATE_KINDS:
            items.append((_GATE_KINDS[doc.kind], doc.payload))
        else:
            raise UsageError(f"{path}: the gate cannot judge a {doc.kind} report")
    thresholds = _thresholds(args)
    verdict = deployment_gate(items, thresholds)
    print("PASS" if verdict.passed else "FAIL")
    for reason in verdict.reasons:
        print(f"  - {reason}")
    _emit(args, argv, "gate", verdict.to_dict(), thresholds=thresholds.to_dict())
    return EXIT_OK if verdict.passed or not args.strict else 3


_COMMANDS = {
    "synth": _cmd_synth, "cv": _cmd_cv, "contrast": _cmd_contrast, "audit": _cmd_audit,
    "explain": _cmd_explain, "tune": _cmd_tune, "plot": _cmd_plot, "gate": _cmd_gate,
}


def run(argv=None) -> int:
    """Parse ``argv`` and dispatch; returns the process exit code."""
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = _build_parser().parse_args(argv)
    except UsageError as e:
        setup_logging()
        logger.error(f"usage: {e}")
        return EXIT_USAGE
    setup_logging(args.log_level.upper() if args.log_level else None)
    run_id = new_run_id()
    command = args.command + (f" {args.audit}" if args.command == "audit" else "")
    logger.debug(f"run {run_id}: {command}")
    with timed() as t:
        try:
            code = _COMMANDS[args.command](args, argv)
        except UsageError as e:
            logger.error(f"usage: {e}")
            code = EXIT_USAGE
        except (ReadinessError, ValueError, OSError) as e:
            logger.error(f"{type(e).__name__}: {e}", exc_info=logger.isEnabledFor(logging.DEBUG))
            code = EXIT_ERROR
    audit_event("cli", command, success=code == EXIT_OK, duration_ms=t.ms, exit_code=code)
    return code


def main() -> int:
    return run()


if __name__ == "__main__":
    raise SystemExit(main())
