#!/usr/bin/env python3
"""Readiness Runtime Config — single source of truth for paths, caps and thresholds.

All runtime code uses the get_*() getters instead of frozen module-level
constants, so a changed environment is picked up on the next call.
Audit thresholds are a dataclass that can be overlaid from a JSON file and
are echoed into every report.
"""

import json
import logging
import os
from dataclasses import asdict, dataclass, fields
from pathlib import Path

logger = logging.getLogger("readiness")

# ---------------------------------------------------------------------------
# Path Constants
# ---------------------------------------------------------------------------
READINESS_ROOT = os.getenv("READINESS_ROOT", os.path.dirname(os.path.abspath(__file__)))

SCHEMAS_DIR = Path(READINESS_ROOT) / "schemas"
SPECS_DIR = Path(READINESS_ROOT) / "specs"
REPORT_SCHEMA_PATH = SCHEMAS_DIR / "report.schema.json"
GRID_SPEC_PATH = SPECS_DIR / "grid_default.json"
WALL_SPEC_PATH = SPECS_DIR / "wall_default.json"

REPORT_VERSION = "readiness.report/1"
MODEL_VERSION = "readiness.model/1"


def _env_int(key: str, default: int, minimum: int = 1) -> int:
    raw = os.getenv(key, "").strip()
    if not raw:
        return default
    try:
        value = int(raw)
    except ValueError:
        logger.warning(f"Ignoring non-integer {key}={raw!r}, using {default}")
        return default
    if value < minimum:
        logger.warning(f"Ignoring {key}={value} (< {minimum}), using {default}")
        return default
    return value


# ---------------------------------------------------------------------------
# Runtime getters — always fresh from os.environ
# ---------------------------------------------------------------------------
def get_log_level() -> str:
    """Logging level name for setup_logging()."""
    return os.getenv("READINESS_LOG_LEVEL", "INFO").upper()


def get_n_jobs() -> int:
    """Parallelism degree for joblib fan-out (trees, folds, candidates)."""
    return _env_int("READINESS_N_JOBS", 1)


def get_audit_log_path() -> Path | None:
    """JSONL audit event sink; None disables audit events."""
    raw = os.getenv("READINESS_AUDIT_LOG", "").strip()
    return Path(raw) if raw else None


def get_group_cap() -> int:
    """Maximum number of grouped-CV folds before groups are merged."""
    return _env_int("READINESS_GROUP_CAP", 50, minimum=2)


def get_subset_cap() -> int:
    """Maximum number of subsets underspec_search may enumerate."""
    return _env_int("READINESS_SUBSET_CAP", 5000)


def get_exact_shapley_max_p() -> int:
    """Largest feature count for exact (2^p coalition) Shapley values."""
    return _env_int("READINESS_EXACT_SHAPLEY_MAX_P", 15)


def get_background_size() -> int:
    """Default Shapley background sample size."""
    return _env_int("READINESS_BACKGROUND_SIZE", 64)


# ---------------------------------------------------------------------------
# Audit thresholds
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class AuditThresholds:
    fragile_ratio: float = 2.0
    stable_ratio: float = 1.5
    r2_gap_margin: float = 0.10
    compensation_threshold: float = 0.05
    omission_top_k: int = 5
    underspec_epsilon: float = 0.05

    def __post_init__(self):
        if self.stable_ratio > self.fragile_ratio:
            raise ValueError(
                f"stable_ratio ({self.stable_ratio}) must not exceed fragile_ratio ({self.fragile_ratio})"
            )
        if self.omission_top_k < 1:
            raise ValueError(f"omission_top_k must be >= 1, got {self.omission_top_k}")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "AuditThresholds":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ValueError(f"unknown threshold keys: {', '.join(unknown)}")
        return cls(**data)


def load_thresholds(path: str | os.PathLike | None = None) -> AuditThresholds:
    """Defaults overlaid with a JSON file (if given)."""
    if path is None:
        return AuditThresholds()
    with open(path, "r", encoding="utf-8") as f:
        overlay = json.load(f)
    merged = AuditThresholds().to_dict()
    merged.update(overlay)
    thresholds = AuditThresholds.from_dict(merged)
    logger.info(f"Audit thresholds loaded from {path}: {thresholds.to_dict()}")
    return thresholds


def config_echo() -> dict:
    """Snapshot of the environment-driven settings for report embedding."""
    return {
        "n_jobs": get_n_jobs(),
        "group_cap": get_group_cap(),
        "subset_cap": get_subset_cap(),
        "exact_shapley_max_p": get_exact_shapley_max_p(),
        "background_size": get_background_size(),
    }
