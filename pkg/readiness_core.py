#!/usr/bin/env python3
"""Readiness Core — dataset representation, ingestion, splitting, metrics, grouping.

A Dataset is an immutable column store: numeric columns are float64 arrays,
categorical columns are object arrays of string labels, and every array is
flagged read-only so a Dataset can be shared across threads without copies.
"""

import csv
import json
import logging
import math
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from readiness_shared import DataError

logger = logging.getLogger("readiness.core")

NUMERIC = "numeric"
CATEGORICAL = "categorical"
FEATURE = "feature"
RESPONSE = "response"

_KINDS = (NUMERIC, CATEGORICAL)
_ROLES = (FEATURE, RESPONSE)


# ---------------------------------------------------------------------------
# Schema
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class FeatureSchema:
    name: str
    kind: str = NUMERIC
    role: str = FEATURE
    units: str = ""

    def __post_init__(self):
        if not isinstance(self.name, str) or not self.name.isidentifier():
            raise DataError(f"schema column name must be a nonempty identifier, got {self.name!r}")
        if self.kind not in _KINDS:
            raise DataError(f"column {self.name}: kind must be one of {_KINDS}, got {self.kind!r}")
        if self.role not in _ROLES:
            raise DataError(f"column {self.name}: role must be one of {_ROLES}, got {self.role!r}")

    def to_dict(self) -> dict:
        return {"name": self.name, "kind": self.kind, "role": self.role, "units": self.units}

    @classmethod
    def from_dict(cls, d: dict) -> "FeatureSchema":
        unknown = set(d) - {"name", "kind", "role", "units"}
        if unknown:
            raise DataError(f"schema entry {d.get('name', '?')!r} has unknown keys: {sorted(unknown)}")
        return cls(name=d.get("name", ""), kind=d.get("kind", NUMERIC),
                   role=d.get("role", FEATURE), units=d.get("units", "") or "")


def validate_schema(schema) -> tuple:
    """Check the column-list invariants; returns the schema as a tuple."""
    schema = tuple(schema)
    names = [c.name for c in schema]
    dupes = sorted({n for n in names if names.count(n) > 1})
    if dupes:
        raise DataError(f"duplicate schema column names: {', '.join(dupes)}")
    responses = [c for c in schema if c.role == RESPONSE]
    if len(responses) != 1:
        raise DataError(f"schema needs exactly one response column, found {len(responses)}")
    if responses[0].kind != NUMERIC:
        raise DataError(f"response column {responses[0].name} must be numeric")
    return schema


def load_schema(path) -> tuple:
    """Read the JSON sidecar: a list of {name, kind, role, units} or {"columns": [...]}."""
    try:
        with open(path, "r", encoding="utf-8") as f:
            raw = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise DataError(f"cannot read schema {path}: {type(e).__name__}: {e}") from e
    entries = raw.get("columns") if isinstance(raw, dict) else raw
    if not isinstance(entries, list):
        raise DataError(f"schema {path}: expected a list of columns")
    return validate_schema(FeatureSchema.from_dict(e) for e in entries)


def save_schema(schema, path):
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    doc = {"columns": [c.to_dict() for c in schema]}
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def schema_sidecar_path(csv_path) -> Path:
    """Conventional sidecar location: data.csv -> data.schema.json."""
    p = Path(csv_path)
    return p.with_name(p.stem + ".schema.json")


# ---------------------------------------------------------------------------
# Dataset
# ---------------------------------------------------------------------------
def _frozen(values, kind: str) -> np.ndarray:
    if kind == NUMERIC:
        arr = np.array(values, dtype=np.float64)
    else:
        arr = np.array([str(v) for v in values], dtype=object)
    arr.setflags(write=False)
    return arr


class Dataset:
    """Immutable column-typed table with exactly one numeric response."""

    __slots__ = ("_schema", "_columns", "_n", "provenance")

    def __init__(self, schema, columns: dict, provenance: str = ""):
        schema = validate_schema(schema)
        missing = [c.name for c in schema if c.name not in columns]
        if missing:
            raise DataError(f"dataset is missing columns: {', '.join(missing)}")
        cols = {c.name: _frozen(columns[c.name], c.kind) for c in schema}
        lengths = {len(v) for v in cols.values()}
        if len(lengths) != 1:
            raise DataError(f"columns have unequal lengths: {sorted(lengths)}")
        n = lengths.pop()
        if n < 1:
            raise DataError("dataset needs at least one row")
        for c in schema:
            if c.kind == NUMERIC and not np.all(np.isfinite(cols[c.name])):
                raise DataError(f"column {c.name} contains missing or non-finite values")
        self._schema = schema
        self._columns = cols
        self._n = n
        self.provenance = provenance

    @classmethod
    def from_rows(cls, schema, rows, provenance: str = "") -> "Dataset":
        schema = tuple(schema)
        rows = list(rows)
        cols = {c.name: [r[i] for r in rows] for i, c in enumerate(schema)}
        return cls(schema, cols, provenance)

    # --- shape / schema ---
    @property
    def n(self) -> int:
        return self._n

    def __len__(self) -> int:
        return self._n

    @property
    def schema(self) -> tuple:
        return self._schema

    @property
    def names(self) -> list:
        return [c.name for c in self._schema]

    @property
    def feature_names(self) -> list:
        return [c.name for c in self._schema if c.role == FEATURE]

    @property
    def response_name(self) -> str:
        return next(c.name for c in self._schema if c.role == RESPONSE)

    def kind(self, name: str) -> str:
        return self.spec(name).kind

    def spec(self, name: str) -> FeatureSchema:
        for c in self._schema:
            if c.name == name:
                return c
        raise DataError(f"unknown column {name!r}; known: {', '.join(self.names)}")

    def require(self, names):
        """Raise DataError unless every name is a schema column."""
        unknown = [n for n in names if n not in self._columns]
        if unknown:
            raise DataError(f"unknown feature(s): {', '.join(unknown)}")

    # --- data access ---
    def column(self, name: str) -> np.ndarray:
        self.require([name])
        return self._columns[name]

    @property
    def response(self) -> np.ndarray:
        return self._columns[self.response_name]

    def levels(self, name: str) -> list:
        """Sorted distinct labels of a categorical column."""
        if self.kind(name) != CATEGORICAL:
            raise DataError(f"column {name} is not categorical")
        return sorted(set(self._columns[name].tolist()))

    def row(self, i: int) -> dict:
        return {name: self._columns[name][i] for name in self.names}

    # --- derived datasets ---
    def take(self, indices) -> "Dataset":
        idx = np.asarray(indices, dtype=np.int64)
        return Dataset(self._schema, {k: v[idx] for k, v in self._columns.items()}, self.provenance)

    def replace_column(self, name: str, values) -> "Dataset":
        self.spec(name)
        if len(values) != self._n:
            raise DataError(f"replacement for {name} has {len(values)} rows, expected {self._n}")
        cols = dict(self._columns)
        cols[name] = values
        return Dataset(self._schema, cols, self.provenance)

    def select(self, features) -> "Dataset":
        """Keep the listed features (schema order) plus the response."""
        features = list(features)
        self.require(features)
        keep = [c for c in self._schema if c.name in features or c.role == RESPONSE]
        return Dataset(keep, {c.name: self._columns[c.name] for c in keep}, self.provenance)

    def __repr__(self):
        return f"Dataset(n={self._n}, columns={self.names}, provenance={self.provenance!r})"


# ---------------------------------------------------------------------------
# CSV ingestion / emission
# ---------------------------------------------------------------------------
# Plain decimal or scientific notation; rejects nan, inf, underscores and non-ASCII digits.
_NUMBER = re.compile(r"[+-]?(?:[0-9]+(?:\.[0-9]*)?|\.[0-9]+)(?:[eE][+-]?[0-9]+)?")


def load_csv(path, schema) -> Dataset:
    """Parse a header-first CSV per ``schema``; errors name row and column.

    Rows are numbered by file line (the header is line 1).
    """
    schema = validate_schema(schema)
    path = Path(path)
    if not path.exists():
        raise DataError(f"data file not found: {path}")
    with open(path, "r", encoding="utf-8", newline="") as f:
        reader = csv.reader(f)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path}: empty file, expected a header line")
        declared = [c.name for c in schema]
        missing = [n for n in declared if n not in header]
        extra = [h for h in header if h not in declared]
        if missing or extra:
            parts = []
            if missing:
                parts.append(f"missing declared column(s) {', '.join(missing)}")
            if extra:
                parts.append(f"undeclared column(s) {', '.join(extra)}")
            raise DataError(f"{path}: header/schema mismatch: {'; '.join(parts)}")
        position = {name: header.index(name) for name in declared}
        cols = {name: [] for name in declared}
        for line_no, record in enumerate(reader, start=2):
            if not record or all(not cell.strip() for cell in record):
                continue
            if len(record) != len(header):
                raise DataError(f"{path}: row {line_no} has {len(record)} cells, expected {len(header)}")
            for c in schema:
                cell = record[position[c.name]].strip()
                if cell == "":
                    raise DataError(f"{path}: empty cell at row {line_no}, column {c.name}")
                if c.kind == NUMERIC:
                    if not _NUMBER.fullmatch(cell):
                        raise DataError(
                            f"{path}: non-numeric value {cell!r} at row {line_no}, column {c.name}"
                        )
                    value = float(cell)
                    if not math.isfinite(value):
                        raise DataError(f"{path}: non-finite value {cell!r} at row {line_no}, column {c.name}")
                    cols[c.name].append(value)
                else:
                    cols[c.name].append(cell)
    if not cols[declared[0]]:
        raise DataError(f"{path}: no data rows")
    ds = Dataset(schema, cols, provenance=str(path))
    logger.debug(f"Loaded {ds.n} rows from {path}")
    return ds


def write_csv(ds: Dataset, path):
    """Write ``ds`` in schema column order; floats use repr() so re-reads are exact."""
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    names = ds.names
    kinds = [ds.kind(n) for n in names]
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(names)
        columns = [ds.column(n) for n in names]
        for i in range(ds.n):
            writer.writerow(
                repr(float(col[i])) if kind == NUMERIC else col[i]
                for col, kind in zip(columns, kinds)
            )


# ---------------------------------------------------------------------------
# Splitting
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class SplitIndices:
    folds: tuple
    seed: int | None = None

    def validate(self, n: int) -> "SplitIndices":
        """Partition laws: >= 2 nonempty, pairwise disjoint folds covering 0..n-1."""
        if len(self.folds) < 2:
            raise DataError(f"a split needs at least 2 folds, got {len(self.folds)}")
        seen = np.zeros(n, dtype=np.int64)
        for k, fold in enumerate(self.folds):
            if len(fold) == 0:
                raise DataError(f"fold {k} is empty")
            if np.any((fold < 0) | (fold >= n)):
                raise DataError(f"fold {k} has row indices outside 0..{n - 1}")
            np.add.at(seen, fold, 1)
        if np.any(seen != 1):
            raise DataError("folds are not a partition of the rows (overlap or gap)")
        return self

    def fold_of(self, n: int) -> np.ndarray:
        """Row index -> fold index."""
        owner = np.full(n, -1, dtype=np.int64)
        for k, fold in enumerate(self.folds):
            owner[fold] = k
        return owner


def train_test_indices(n: int, train_fraction: float, seed: int) -> tuple:
    """Row indices (each ascending) of a seeded train/test partition.

    Train size is round(fraction * n) with halves going to train.
    """
    if not 0.0 < train_fraction < 1.0:
        raise DataError(f"train_fraction must lie in (0, 1), got {train_fraction}")
    n_train = int(math.floor(train_fraction * n + 0.5))
    if n_train < 1 or n_train > n - 1:
        raise DataError(f"degenerate split: {n_train} train rows out of {n} at fraction {train_fraction}")
    perm = np.random.default_rng(seed).permutation(n)
    return np.sort(perm[:n_train]), np.sort(perm[n_train:])


def train_test_split(ds: Dataset, train_fraction: float, seed: int) -> tuple:
    train_idx, test_idx = train_test_indices(ds.n, train_fraction, seed)
    return ds.take(train_idx), ds.take(test_idx)


# ---------------------------------------------------------------------------
# Metrics
# ---------------------------------------------------------------------------
def _pair(y, yhat, min_len: int = 1) -> tuple:
    y = np.asarray(y, dtype=np.float64).ravel()
    yhat = np.asarray(yhat, dtype=np.float64).ravel()
    if y.shape != yhat.shape:
        raise DataError(f"length mismatch: y has {y.size} values, yhat has {yhat.size}")
    if y.size < min_len:
        raise DataError(f"need at least {min_len} value(s), got {y.size}")
    return y, yhat


def rmse(y, yhat) -> float:
    y, yhat = _pair(y, yhat)
    return float(np.sqrt(np.mean((y - yhat) ** 2)))


def median_abs_error(y, yhat) -> float:
    y, yhat = _pair(y, yhat)
    return float(np.median(np.abs(y - yhat)))


def r_squared(y, yhat) -> float:
    y, yhat = _pair(y, yhat, min_len=2)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    if ss_tot == 0.0:
        raise DataError("R^2 undefined: response has zero variance")
    return 1.0 - float(np.sum((y - yhat) ** 2)) / ss_tot


def safe_r_squared(y, yhat) -> float | None:
    """r_squared, or None where it is undefined (n < 2 or constant y)."""
    try:
        return r_squared(y, yhat)
    except DataError:
        return None


# ---------------------------------------------------------------------------
# Grouping
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class GroupKey:
    features: tuple
    values: tuple

    def __post_init__(self):
        if not self.features:
            raise DataError("GroupKey needs at least one defining feature")

    @property
    def label(self) -> str:
        return ",".join(f"{f}={_fmt(v)}" for f, v in zip(self.features, self.values))

    def to_dict(self) -> dict:
        return {"features": list(self.features), "values": list(self.values)}

    @classmethod
    def from_dict(cls, d: dict) -> "GroupKey":
        return cls(tuple(d["features"]), tuple(d["values"]))


def _fmt(v) -> str:
    if isinstance(v, float) and v.is_integer():
        return str(int(v)) if abs(v) < 1e15 else repr(v)
    return str(v)


def group_codes(ds: Dataset, features) -> tuple:
    """(keys, codes): keys sorted lexicographically by value tuple, codes[i] = key index of row i."""
    features = list(features)
    if not features:
        raise DataError("grouping needs at least one feature")
    ds.require(features)
    per_col = [np.unique(ds.column(f), return_inverse=True) for f in features]
    stacked = np.column_stack([inv.ravel() for _, inv in per_col])
    combos, codes = np.unique(stacked, axis=0, return_inverse=True)
    keys = []
    for combo in combos:
        values = []
        for (uniq, _), pos in zip(per_col, combo):
            v = uniq[pos]
            values.append(float(v) if isinstance(v, (float, np.floating)) else str(v))
        keys.append(GroupKey(tuple(features), tuple(values)))
    return keys, codes.ravel()


def unique_combinations(ds: Dataset, features) -> list:
    """One (GroupKey, count) per distinct value tuple, lexicographic order."""
    keys, codes = group_codes(ds, features)
    counts = np.bincount(codes, minlength=len(keys))
    return [(k, int(c)) for k, c in zip(keys, counts)]


def bin_features(ds: Dataset, features, n_bins: int) -> tuple:
    """(dataset, grouping names) with numeric ``features`` cut into equal-count bins.

    Each numeric feature gains a categorical ``<name>_bin`` column labelled
    q1..qN (zero-padded so labels sort in bin order); categorical features are
    grouped on as they are. The new columns are features of the returned
    dataset, so model feature lists must be fixed before binning.
    """
    features = list(features)
    ds.require(features)
    if not isinstance(n_bins, int) or n_bins < 2:
        raise DataError(f"n_bins must be an integer >= 2, got {n_bins!r}")
    width = len(str(n_bins))
    schema = list(ds.schema)
    cols = {name: ds.column(name) for name in ds.names}
    names = []
    for name in features:
        if ds.kind(name) == CATEGORICAL:
            names.append(name)
            continue
        binned = f"{name}_bin"
        if binned in cols:
            raise DataError(f"cannot bin {name}: column {binned} already exists")
        values = ds.column(name)
        edges = np.quantile(values, np.linspace(0.0, 1.0, n_bins + 1)[1:-1])
        codes = np.searchsorted(edges, values, side="right")
        cols[binned] = [f"q{c + 1:0{width}d}" for c in codes]
        schema.append(FeatureSchema(binned, CATEGORICAL))
        names.append(binned)
        logger.debug(f"Binned {name} into {len(np.unique(codes))} quantile bins")
    return Dataset(schema, cols, ds.provenance), names
