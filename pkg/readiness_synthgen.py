#!/usr/bin/env python3
"""Readiness Synthgen — seeded synthetic datasets with a known ground-truth law.

grid: a full factorial over (t, Lsl) with a log-linear response and
      uniform nuisance columns; every (t, Lsl) combination is a natural
      held-out group for adapted CV.
wall: a drift-capacity law driven by two physics features; the other nine
      wall features are nuisance columns linearly mixed with the
      standardized physics features to a configured correlation.
"""

import json
import logging
import math
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from readiness_config import GRID_SPEC_PATH, WALL_SPEC_PATH
from readiness_core import CATEGORICAL, NUMERIC, RESPONSE, Dataset, FeatureSchema
from readiness_shared import DataError

logger = logging.getLogger("readiness.synthgen")

GRID_NUISANCE = (
    ("D", 100.0, 300.0, "mm"), ("B", 30.0, 90.0, "mm"), ("B1", 10.0, 30.0, "mm"),
    ("Wsl", 5.0, 20.0, "mm"), ("Ssl", 50.0, 200.0, "mm"), ("Bsl", 5.0, 15.0, "mm"),
    ("N", 1.0, 5.0, ""), ("n", 1.0, 4.0, ""), ("fy", 230.0, 450.0, "MPa"),
    ("r", 1.0, 5.0, "mm"), ("ah", 0.5, 3.0, ""), ("hst", 1.0, 3.0, ""),
)

WALL_PHYSICS = ("lambda_b", "nu")
WALL_RANGES = {
    "lambda_b": (10.0, 60.0), "nu": (2.0, 10.0), "s_db": (3.0, 10.0), "ash_ratio": (0.3, 1.5),
    "axial": (0.0, 0.35), "hx_b": (0.3, 1.0), "rho_l_be": (0.01, 0.06), "rho_t_w": (0.002, 0.012),
    "c_lw": (0.05, 0.45), "lbe_lw": (0.05, 0.3), "fu_fy": (1.15, 1.6),
}
WALL_NUISANCE = tuple(name for name in WALL_RANGES if name not in WALL_PHYSICS)


def _check_keys(cls, data: dict, what: str):
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise DataError(f"{what}: unknown key(s) {', '.join(unknown)}")


def _read_json(path) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as f:
            return json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise DataError(f"cannot read generator spec {path}: {type(e).__name__}: {e}") from e


# ---------------------------------------------------------------------------
# Grid generator
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class GridGenSpec:
    t_levels: tuple = (1.0, 1.5, 2.0)
    lsl_levels: tuple = (20.0, 40.0, 60.0)
    counts: int | tuple = 390
    coefficients: tuple = (9.0, 0.9, -0.012, 0.002)
    noise_sd: float = 0.05
    nuisance: tuple = tuple({"name": n, "low": lo, "high": hi, "units": u} for n, lo, hi, u in GRID_NUISANCE)
    boundary_levels: tuple = ()
    seed: int = 0

    def __post_init__(self):
        for name in ("t_levels", "lsl_levels", "coefficients", "nuisance", "boundary_levels"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        if not isinstance(self.counts, int):
            object.__setattr__(self, "counts", tuple(tuple(row) for row in self.counts))
        for label, levels in (("t_levels", self.t_levels), ("lsl_levels", self.lsl_levels)):
            if not levels or len(set(levels)) != len(levels):
                raise DataError(f"{label} must be a nonempty list of distinct values")
        if len(self.coefficients) != 4:
            raise DataError("coefficients must be (b0, b1, b2, b3)")
        if self.noise_sd < 0:
            raise DataError(f"noise_sd must be >= 0, got {self.noise_sd}")
        matrix = self.count_matrix()
        if np.any(matrix < 1):
            raise DataError("every (t, Lsl) combination needs a count >= 1")
        names = [n["name"] for n in self.nuisance]
        if len(set(names)) != len(names) or {"t", "Lsl", "Vcr", "bc"} & set(names):
            raise DataError(f"nuisance names must be unique and distinct from t, Lsl, bc, Vcr: {names}")
        for n in self.nuisance:
            if not n["low"] < n["high"]:
                raise DataError(f"nuisance {n['name']}: low must be < high")

    def count_matrix(self) -> np.ndarray:
        shape = (len(self.t_levels), len(self.lsl_levels))
        if isinstance(self.counts, int):
            return np.full(shape, self.counts, dtype=np.int64)
        matrix = np.asarray(self.counts, dtype=np.int64)
        if matrix.shape != shape:
            raise DataError(f"counts matrix must have shape {shape}, got {matrix.shape}")
        return matrix

    def with_seed(self, seed: int) -> "GridGenSpec":
        return GridGenSpec(**{**self.to_dict(), "seed": seed})

    def to_dict(self) -> dict:
        d = asdict(self)
        d["counts"] = self.counts if isinstance(self.counts, int) else [list(r) for r in self.counts]
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in d.items()}

    @classmethod
    def from_dict(cls, d: dict) -> "GridGenSpec":
        _check_keys(cls, d, "grid spec")
        return cls(**d)


def load_grid_spec(path=None) -> GridGenSpec:
    return GridGenSpec.from_dict(_read_json(path or GRID_SPEC_PATH))


def grid_schema(spec: GridGenSpec) -> list:
    schema = [FeatureSchema("t", NUMERIC, units="mm"), FeatureSchema("Lsl", NUMERIC, units="mm")]
    schema += [FeatureSchema(n["name"], NUMERIC, units=n.get("units", "")) for n in spec.nuisance]
    if spec.boundary_levels:
        schema.append(FeatureSchema("bc", CATEGORICAL))
    schema.append(FeatureSchema("Vcr", NUMERIC, RESPONSE, units="N"))
    return schema


def gen_grid_dataset(spec: GridGenSpec | None = None) -> Dataset:
    """Exact per-combination counts; response = exp(b0 + b1 t + b2 Lsl + b3 t Lsl + noise)."""
    spec = spec or GridGenSpec()
    rng = np.random.default_rng(spec.seed)
    counts = spec.count_matrix()
    t = np.concatenate([np.full(counts[i, j], tv) for i, tv in enumerate(spec.t_levels)
                        for j, _ in enumerate(spec.lsl_levels)]).astype(np.float64)
    lsl = np.concatenate([np.full(counts[i, j], lv) for i, _ in enumerate(spec.t_levels)
                          for j, lv in enumerate(spec.lsl_levels)]).astype(np.float64)
    n = t.size
    cols = {"t": t, "Lsl": lsl}
    for nz in spec.nuisance:
        cols[nz["name"]] = rng.uniform(nz["low"], nz["high"], size=n)
    b0, b1, b2, b3 = spec.coefficients
    noise = rng.normal(0.0, spec.noise_sd, size=n) if spec.noise_sd > 0 else np.zeros(n)
    cols["Vcr"] = np.exp(b0 + b1 * t + b2 * lsl + b3 * t * lsl + noise)
    if spec.boundary_levels:
        cols["bc"] = np.asarray(spec.boundary_levels, dtype=object)[rng.integers(len(spec.boundary_levels), size=n)]
    ds = Dataset(grid_schema(spec), cols, provenance=f"synth:grid seed={spec.seed}")
    logger.info(f"Generated grid dataset: {n} rows, {counts.size} combinations, seed={spec.seed}")
    return ds


# ---------------------------------------------------------------------------
# Wall generator
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class WallGenSpec:
    n: int = 164
    alpha: float = 50.0
    noise_sd: float = 0.25
    drift_floor: float = 0.1
    ranges: dict = field(default_factory=lambda: {k: list(v) for k, v in WALL_RANGES.items()})
    correlation: dict = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        if not isinstance(self.n, int) or self.n < 2:
            raise DataError(f"n must be an integer >= 2, got {self.n!r}")
        if not self.alpha > 0:
            raise DataError(f"alpha must be positive, got {self.alpha}")
        if self.noise_sd < 0:
            raise DataError(f"noise_sd must be >= 0, got {self.noise_sd}")
        merged = {k: list(v) for k, v in WALL_RANGES.items()}
        unknown = sorted(set(self.ranges) - set(WALL_RANGES))
        if unknown:
            raise DataError(f"wall spec: unknown range feature(s) {', '.join(unknown)}")
        merged.update({k: list(v) for k, v in self.ranges.items()})
        for name, (lo, hi) in merged.items():
            if not lo < hi:
                raise DataError(f"range for {name}: low must be < high")
        object.__setattr__(self, "ranges", merged)
        for nuisance, weights in self.correlation.items():
            if nuisance not in WALL_NUISANCE:
                raise DataError(f"correlation target {nuisance!r} is not a nuisance wall feature")
            bad = sorted(set(weights) - set(WALL_PHYSICS))
            if bad:
                raise DataError(f"correlation for {nuisance} mixes non-physics feature(s) {', '.join(bad)}")
            norm = sum(w * w for w in weights.values())
            if norm > 1.0 + 1e-12:
                raise DataError(
                    f"correlation matrix is not positive semidefinite: weights for {nuisance} have squared norm {norm:.3f} > 1"
                )

    @classmethod
    def uniform_correlation(cls, value: float, physics: str = "nu", **kw) -> "WallGenSpec":
        """Every nuisance feature correlated ``value`` with one physics feature."""
        return cls(correlation={name: {physics: value} for name in WALL_NUISANCE}, **kw)

    def with_seed(self, seed: int) -> "WallGenSpec":
        return WallGenSpec(**{**self.to_dict(), "seed": seed})

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "WallGenSpec":
        _check_keys(cls, d, "wall spec")
        return cls(**d)


def load_wall_spec(path=None) -> WallGenSpec:
    return WallGenSpec.from_dict(_read_json(path or WALL_SPEC_PATH))


def wall_schema() -> list:
    units = {"lambda_b": "", "nu": "sqrt(MPa)", "axial": "", "rho_l_be": "", "rho_t_w": ""}
    schema = [FeatureSchema(name, NUMERIC, units=units.get(name, "")) for name in WALL_RANGES]
    schema.append(FeatureSchema("drift", NUMERIC, RESPONSE, units="%"))
    return schema


def _moments(lo: float, hi: float) -> tuple:
    """Mean and sd of U(lo, hi)."""
    return 0.5 * (lo + hi), (hi - lo) / math.sqrt(12.0)


def gen_wall_dataset(spec: WallGenSpec | None = None) -> Dataset:
    """drift = 3.85 - lambda_b / alpha - nu / 10 + noise, clamped at ``drift_floor``."""
    spec = spec or WallGenSpec()
    rng = np.random.default_rng(spec.seed)
    n = spec.n
    cols = {}
    standardized = {}
    for name in WALL_PHYSICS:
        lo, hi = spec.ranges[name]
        cols[name] = rng.uniform(lo, hi, size=n)
        mean, sd = _moments(lo, hi)
        standardized[name] = (cols[name] - mean) / sd
    for name in WALL_NUISANCE:
        lo, hi = spec.ranges[name]
        weights = spec.correlation.get(name, {})
        if weights:
            mixed = sum(w * standardized[p] for p, w in weights.items())
            residual = math.sqrt(max(0.0, 1.0 - sum(w * w for w in weights.values())))
            mean, sd = _moments(lo, hi)
            cols[name] = mean + sd * (mixed + residual * rng.standard_normal(n))
        else:
            cols[name] = rng.uniform(lo, hi, size=n)
    noise = rng.normal(0.0, spec.noise_sd, size=n) if spec.noise_sd > 0 else np.zeros(n)
    drift = 3.85 - cols["lambda_b"] / spec.alpha - cols["nu"] / 10.0 + noise
    cols["drift"] = np.maximum(drift, spec.drift_floor)
    ds = Dataset(wall_schema(), cols, provenance=f"synth:wall seed={spec.seed}")
    logger.info(f"Generated wall dataset: {n} rows, {len(spec.correlation)} correlated nuisance features, "
                f"seed={spec.seed}")
    return ds
