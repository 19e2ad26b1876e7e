"""Ordinary least squares by column-pivoted QR."""

import numpy as np
from scipy.linalg import qr, solve_triangular

from readiness_core import Dataset, rmse, safe_r_squared
from readiness_formula import LOG, DesignMatrix, design_matrix, parse_formula, format_formula
from readiness_models._base import FittedModel, logger
from readiness_shared import ModelError, SingularDesignError


class LinearModel(FittedModel):
    family = "lm"

    def __init__(self, formula, column_names, coefficients, levels=None,
                 train_rmse=None, train_r2=None):
        self.formula = formula
        self.column_names = tuple(column_names)
        self.coefficients = np.asarray(coefficients, dtype=np.float64)
        self.coefficients.setflags(write=False)
        self.levels = {k: list(v) for k, v in (levels or {}).items()}
        self.train_rmse = train_rmse
        self.train_r2 = train_r2
        if self.coefficients.shape != (len(self.column_names),):
            raise ModelError(
                f"coefficient count {self.coefficients.size} != design column count {len(self.column_names)}"
            )

    @property
    def features(self) -> list:
        return self.formula.variables

    def linear_predictor(self, ds: Dataset) -> np.ndarray:
        dm = design_matrix(self.formula, ds, levels=self.levels, with_response=False)
        if dm.column_names != self.column_names:
            raise ModelError(f"design columns changed since fit: {dm.column_names} vs {self.column_names}")
        return dm.values @ self.coefficients

    def predict(self, ds: Dataset) -> np.ndarray:
        eta = self.linear_predictor(ds)
        return np.exp(eta) if self.formula.transform == LOG else eta

    def coefficient_table(self) -> dict:
        return {name: float(b) for name, b in zip(self.column_names, self.coefficients)}

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "formula": format_formula(self.formula),
            "column_names": list(self.column_names),
            "coefficients": [float(b) for b in self.coefficients],
            "levels": self.levels,
            "train_rmse": self.train_rmse,
            "train_r2": self.train_r2,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LinearModel":
        return cls(parse_formula(d["formula"]), d["column_names"], d["coefficients"],
                   d.get("levels"), d.get("train_rmse"), d.get("train_r2"))


def _solve(X: np.ndarray, y: np.ndarray, column_names) -> np.ndarray:
    n, p = X.shape
    if n < p:
        raise SingularDesignError(f"design has {p} columns but only {n} rows")
    Q, R, perm = qr(X, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    tol = max(n, p) * np.finfo(np.float64).eps * (diag[0] if diag.size else 0.0)
    rank = int(np.sum(diag > tol)) if diag.size and diag[0] > 0 else 0
    if rank < p:
        dependent = [column_names[j] for j in perm[rank:]]
        raise SingularDesignError(
            f"design matrix is rank deficient (rank {rank} < {p}); dependent column(s): {', '.join(dependent)}"
        )
    beta = np.empty(p)
    beta[perm] = solve_triangular(R, Q.T @ y)
    return beta


def fit_ols(dm: DesignMatrix) -> LinearModel:
    """Least-squares coefficients aligned to ``dm.column_names``; no pseudo-inverse fallback."""
    if dm.response is None:
        raise ModelError("design matrix carries no response")
    beta = _solve(dm.values, dm.response, dm.column_names)
    fitted = dm.values @ beta
    model = LinearModel(dm.formula, dm.column_names, beta, dm.levels,
                        train_rmse=rmse(dm.response, fitted),
                        train_r2=safe_r_squared(dm.response, fitted))
    logger.debug(f"OLS {format_formula(dm.formula)}: {dict(zip(dm.column_names, np.round(beta, 6)))}")
    return model
