#!/usr/bin/env python3
"""Readiness Shared Utilities — common helpers used across all modules.

Contains:
  - Error hierarchy (DataError / ModelError / UsageError)
  - Logging setup and the structured JSONL audit event sink
  - Seeded RNG streams derived from (seed, unit index)
  - parallel_map: order-preserving joblib fan-out
"""

import fcntl
import json
import logging
import secrets
import time
from pathlib import Path

import numpy as np
from joblib import Parallel, delayed

from readiness_config import get_audit_log_path, get_log_level, get_n_jobs

logger = logging.getLogger("readiness")

STORE_DETAIL_LEN = 1000


# ---------------------------------------------------------------------------
# Errors
# ---------------------------------------------------------------------------
class ReadinessError(Exception):
    """Base class for every error raised on purpose by this package."""


class DataError(ReadinessError, ValueError):
    """Bad input data, schema, split, plan or generator spec."""


class ModelError(ReadinessError, RuntimeError):
    """Fitting or prediction failed."""


class SingularDesignError(ModelError):
    """Design matrix is not of full column rank."""


class ConvergenceError(ModelError):
    """Iterative solver stopped before reaching its tolerance."""

    def __init__(self, message: str, violation: float, iterations: int):
        super().__init__(message)
        self.violation = violation
        self.iterations = iterations


class UsageError(ReadinessError):
    """Command-line misuse: unknown or conflicting flags, wrong plot kind."""


# ---------------------------------------------------------------------------
# Logging
# ---------------------------------------------------------------------------
def setup_logging(level: str | None = None) -> logging.Logger:
    """Attach the console handler once; level from READINESS_LOG_LEVEL."""
    if not logger.handlers:
        handler = logging.StreamHandler()
        handler.setFormatter(logging.Formatter(
            "[%(asctime)s] %(levelname)s %(message)s", datefmt="%H:%M:%S"
        ))
        logger.addHandler(handler)
    logger.setLevel(level or get_log_level())
    return logger


_current_run_id: str = ""


def new_run_id() -> str:
    """Generate a new 16-char hex run ID and make it current."""
    global _current_run_id
    _current_run_id = secrets.token_hex(8)
    return _current_run_id


def _jsonl_append(filepath, obj: dict):
    """Atomically append a JSON line with file locking."""
    Path(filepath).parent.mkdir(parents=True, exist_ok=True)
    with open(filepath, "a", encoding="utf-8") as f:
        fcntl.flock(f, fcntl.LOCK_EX)
        try:
            f.write(json.dumps(obj, ensure_ascii=False, sort_keys=True) + "\n")
            f.flush()
        finally:
            fcntl.flock(f, fcntl.LOCK_UN)


def audit_event(event: str, detail: str = "", success: bool = True,
                duration_ms: int = 0, **extra):
    """Write a structured audit entry to READINESS_AUDIT_LOG (if configured).

    Never raises: a broken sink must not break an audit run.
    """
    path = get_audit_log_path()
    if path is None:
        return
    try:
        entry = {
            "ts_ms": int(time.time() * 1000),
            "event": event,
            "detail": detail[:STORE_DETAIL_LEN],
            "success": success,
            "duration_ms": duration_ms,
        }
        if _current_run_id:
            entry["run_id"] = _current_run_id
        entry.update(extra)
        _jsonl_append(path, entry)
    except Exception as e:
        logger.debug(f"audit_event failed: {type(e).__name__}: {e}")


class timed:
    """Context manager measuring wall time in ms (``.ms`` after exit)."""

    def __enter__(self):
        self._t0 = time.perf_counter()
        self.ms = 0
        return self

    def __exit__(self, *exc):
        self.ms = int((time.perf_counter() - self._t0) * 1000)
        return False


# ---------------------------------------------------------------------------
# RNG streams
# ---------------------------------------------------------------------------
def derive_rng(seed: int, *stream: int) -> np.random.Generator:
    """Independent generator for the work unit identified by ``stream``.

    The same (seed, stream) pair always yields the same generator, whichever
    process or thread evaluates the unit.
    """
    return np.random.default_rng(np.random.SeedSequence([int(seed), *map(int, stream)]))


def derive_seed(seed: int, *stream: int) -> int:
    """Integer seed for the work unit identified by ``stream``."""
    return int(np.random.SeedSequence([int(seed), *map(int, stream)]).generate_state(1)[0])


# ---------------------------------------------------------------------------
# Parallel fan-out
# ---------------------------------------------------------------------------
def parallel_map(func, items, n_jobs: int | None = None) -> list:
    """Apply ``func`` to every item; results come back in input order."""
    items = list(items)
    jobs = get_n_jobs() if n_jobs is None else n_jobs
    if jobs == 1 or len(items) <= 1:
        return [func(item) for item in items]
    return Parallel(n_jobs=jobs, prefer="threads")(delayed(func)(item) for item in items)
