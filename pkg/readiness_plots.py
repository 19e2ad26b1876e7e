#!/usr/bin/env python3
"""Readiness Plots — standalone SVG figures rendered from report documents.

    group-boxplot  contrast report: traditional vs adapted |error| per group
    pred-scatter   omission report (panels A, B, C) or cv report: predicted vs actual
    shap-beeswarm  shapley report, or the two best underspec summaries side by side:
                   phi per feature, colored by feature value
"""

import logging
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from matplotlib.patches import Patch  # noqa: E402

from readiness_report import ReportDocument  # noqa: E402
from readiness_shared import UsageError  # noqa: E402

logger = logging.getLogger("readiness.plots")

PLOT_KINDS = {
    "group-boxplot": ("contrast",),
    "pred-scatter": ("omission", "cv"),
    "shap-beeswarm": ("shapley", "underspec"),
}

TRADITIONAL_COLOR = "#4c72b0"
ADAPTED_COLOR = "#dd8452"

_PARAMS = {
    "font.size": 9,
    "font.family": "sans-serif",
    "axes.grid": True,
    "grid.alpha": 0.3,
    "svg.fonttype": "none",
    "svg.hashsalt": "readiness",
    "savefig.bbox": "tight",
}


def _boxplot(doc: ReportDocument):
    groups = doc.payload["groups"]
    if not groups:
        raise UsageError("contrast report has no groups to plot")
    fig, ax = plt.subplots(figsize=(max(6.0, 0.9 * len(groups)), 4.0))
    positions = np.arange(len(groups)) * 3.0
    for offset, key, color in ((-0.55, "traditional_abs_errors", TRADITIONAL_COLOR),
                               (0.55, "adapted_abs_errors", ADAPTED_COLOR)):
        parts = ax.boxplot([g[key] for g in groups], positions=positions + offset, widths=0.9,
                           patch_artist=True, showfliers=True)
        for box in parts["boxes"]:
            box.set_facecolor(color)
            box.set_alpha(0.8)
    ax.set_xticks(positions)
    ax.set_xticklabels([f"{g['label']}\n(n={g['count']})" for g in groups], rotation=45, ha="right")
    ax.set_xlabel("group combination")
    ax.set_ylabel("absolute error")
    ax.set_title(f"{doc.payload['model']}: absolute errors, traditional vs adapted CV")
    ax.legend(handles=[Patch(color=TRADITIONAL_COLOR, label="traditional"),
                       Patch(color=ADAPTED_COLOR, label="adapted")], loc="upper left")
    return fig


def _scatter_panel(ax, y, yhat, title: str):
    y = np.asarray(y, dtype=np.float64)
    yhat = np.asarray(yhat, dtype=np.float64)
    lo = float(min(y.min(), yhat.min()))
    hi = float(max(y.max(), yhat.max()))
    ax.scatter(y, yhat, s=12, alpha=0.7, color=TRADITIONAL_COLOR, label="test rows")
    ax.plot([lo, hi], [lo, hi], color="black", linewidth=1, linestyle="--", label="y = x")
    ax.set_xlabel("actual")
    ax.set_ylabel("predicted")
    ax.set_title(title)
    ax.legend(loc="upper left")


def _pred_scatter(doc: ReportDocument):
    if doc.kind == "cv":
        preds = doc.payload["predictions"]
        fig, ax = plt.subplots(figsize=(4.5, 4.5))
        _scatter_panel(ax, [r["y"] for r in preds], [r["yhat"] for r in preds],
                       f"out-of-fold predictions ({doc.payload['plan']['kind']})")
        return fig
    variants = doc.payload["variants"]
    fig, axes = plt.subplots(1, len(variants), figsize=(4.0 * len(variants), 4.0))
    for ax, v in zip(np.atleast_1d(axes), variants):
        r2 = v["test_r2"]
        _scatter_panel(ax, v["test_y"], v["test_pred"],
                       f"{v['name']}: {len(v['features'])} features, test R2 {r2:.2f}")
    fig.suptitle(f"{doc.payload['family']} omitting {doc.payload['omitted']}")
    return fig


def _beeswarm_panel(ax, summary: dict):
    features = summary["features"]
    phi = np.asarray(summary["phi"], dtype=np.float64).reshape(-1, len(features))
    values = np.asarray(summary["values"], dtype=np.float64).reshape(-1, len(features))
    order = sorted(range(len(features)), key=lambda j: summary["mean_abs_phi"][features[j]])
    jitter = np.random.default_rng(0).uniform(-0.3, 0.3, size=phi.shape[0])
    points = None
    for row, j in enumerate(order):
        col = values[:, j]
        span = np.ptp(col)
        scaled = (col - col.min()) / span if span > 0 else np.full(col.shape, 0.5)
        points = ax.scatter(phi[:, j], row + jitter, c=scaled, cmap="coolwarm", vmin=0, vmax=1, s=10)
    ax.axvline(0.0, color="grey", linewidth=0.8)
    ax.set_yticks(range(len(order)))
    ax.set_yticklabels([features[j] for j in order])
    ax.set_xlabel("Shapley value (impact on prediction)")
    ax.set_title(f"Shapley summary: {summary['label']}")
    return points


def _beeswarm(doc: ReportDocument):
    if doc.kind == "underspec":
        # the two best near-equivalent subsets, side by side
        summaries = doc.payload["summaries"][:2]
        if not summaries:
            raise UsageError("underspec report carries no Shapley summaries")
    else:
        summaries = [doc.payload["summary"]]
    height = 0.45 * max(len(s["features"]) for s in summaries) + 1.5
    fig, axes = plt.subplots(1, len(summaries), figsize=(6.0 * len(summaries), height))
    axes = list(np.atleast_1d(axes))
    points = [_beeswarm_panel(ax, s) for ax, s in zip(axes, summaries)]
    mappable = next((p for p in points if p is not None), None)
    if mappable is not None:
        bar = fig.colorbar(mappable, ax=axes)
        bar.set_label("feature value (low to high)")
    return fig


_RENDERERS = {"group-boxplot": _boxplot, "pred-scatter": _pred_scatter, "shap-beeswarm": _beeswarm}


def render_svg(doc: ReportDocument, kind: str, out_path) -> Path:
    """Render ``doc`` as a ``kind`` plot into a standalone SVG file."""
    if kind not in PLOT_KINDS:
        raise UsageError(f"unknown plot kind {kind!r}; expected one of {', '.join(PLOT_KINDS)}")
    if doc.kind not in PLOT_KINDS[kind]:
        raise UsageError(f"{kind} cannot be drawn from a {doc.kind} report (needs {' or '.join(PLOT_KINDS[kind])})")
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    with plt.rc_context(_PARAMS):
        fig = _RENDERERS[kind](doc)
        try:
            fig.savefig(out_path, format="svg", metadata={"Date": None})
        finally:
            plt.close(fig)
    logger.info(f"Plot {kind} written to {out_path}")
    return out_path
