#!/usr/bin/env python3
"""Readiness Report — versioned JSON report documents.

Serialization is canonical (sorted keys, fixed indent, no NaN), so
serialize -> deserialize -> serialize is byte-identical.
"""

import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

from readiness_config import REPORT_VERSION
from readiness_shared import DataError

logger = logging.getLogger("readiness.report")

REPORT_KINDS = (
    "synth", "cv", "contrast", "contrast-roster", "omission", "underspec", "overfit",
    "importance", "shapley", "tune", "gate",
)


@dataclass
class ReportDocument:
    kind: str
    payload: dict
    command: dict = field(default_factory=dict)
    created_at: str = ""
    version: str = REPORT_VERSION

    def __post_init__(self):
        if not self.version:
            raise DataError("report version tag is mandatory")
        if self.kind not in REPORT_KINDS:
            raise DataError(f"unknown report kind {self.kind!r}")
        if not self.created_at:
            self.created_at = time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())

    def to_dict(self) -> dict:
        return {"version": self.version, "kind": self.kind, "created_at": self.created_at,
                "command": self.command, "payload": self.payload}

    def to_json(self) -> str:
        try:
            return json.dumps(self.to_dict(), sort_keys=True, indent=2, ensure_ascii=False, allow_nan=False) + "\n"
        except ValueError as e:
            raise DataError(f"report payload is not strict JSON: {e}") from e

    @classmethod
    def from_dict(cls, d: dict) -> "ReportDocument":
        if d.get("version") != REPORT_VERSION:
            raise DataError(f"unsupported report version {d.get('version')!r}; expected {REPORT_VERSION}")
        missing = [k for k in ("kind", "payload", "command", "created_at") if k not in d]
        if missing:
            raise DataError(f"report is missing key(s): {', '.join(missing)}")
        return cls(d["kind"], d["payload"], d["command"], d["created_at"], d["version"])

    @classmethod
    def from_json(cls, text: str) -> "ReportDocument":
        try:
            return cls.from_dict(json.loads(text))
        except json.JSONDecodeError as e:
            raise DataError(f"report is not valid JSON: {e}") from e


def write_report(doc: ReportDocument, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(doc.to_json(), encoding="utf-8")
    logger.info(f"Report ({doc.kind}) written to {path}")


def read_report(path) -> ReportDocument:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise DataError(f"cannot read report {path}: {e}") from e
    return ReportDocument.from_json(text)
