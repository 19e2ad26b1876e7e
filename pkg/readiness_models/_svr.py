"""Epsilon-insensitive kernel SVR solved by sequential pairwise dual updates.

The dual is written over 2l variables: a[i] (sign +1) and a[i + l] (sign -1)
for every training row i, with linear term eps - y_i and eps + y_i. Each step
picks the maximal violating pair, solves the two-variable subproblem in closed
form and clips it back into the box [0, C]. The solver stops once the pair's
violation m - M falls to ``tol``.
"""

from dataclasses import asdict, dataclass

import numpy as np

from readiness_core import Dataset
from readiness_formula import FeatureEncoder
from readiness_models._base import FittedModel, logger, params_from_dict
from readiness_shared import ConvergenceError, DataError

TAU = 1e-12


@dataclass(frozen=True)
class SVRParams:
    C: float = 1.0
    gamma: float | None = None
    epsilon: float = 0.1
    tol: float = 1e-3
    max_iter: int | None = None

    def __post_init__(self):
        if not self.C > 0:
            raise DataError(f"C must be positive, got {self.C!r}")
        if self.gamma is not None and not self.gamma > 0:
            raise DataError(f"gamma must be positive, got {self.gamma!r}")
        if not self.epsilon >= 0:
            raise DataError(f"epsilon must be >= 0, got {self.epsilon!r}")
        if not self.tol > 0:
            raise DataError(f"tol must be positive, got {self.tol!r}")
        if self.max_iter is not None and self.max_iter < 1:
            raise DataError(f"max_iter must be >= 1, got {self.max_iter!r}")


def rbf_kernel(A: np.ndarray, B: np.ndarray, gamma: float) -> np.ndarray:
    sq = (A ** 2).sum(axis=1)[:, None] + (B ** 2).sum(axis=1)[None, :] - 2.0 * A @ B.T
    return np.exp(-gamma * np.maximum(sq, 0.0))


@dataclass(frozen=True)
class DualSolution:
    coef: np.ndarray
    bias: float
    violation: float
    iterations: int


def _bias(a, y_t, G, C) -> float:
    """Mean of y*G over free variables, else the midpoint of the feasible interval."""
    yG = y_t * G
    upper = a >= C
    lower = a <= 0
    free = ~(upper | lower)
    if np.any(free):
        return -float(np.mean(yG[free]))
    ub_mask = (upper & (y_t < 0)) | (lower & (y_t > 0))
    lb_mask = (upper & (y_t > 0)) | (lower & (y_t < 0))
    ub = float(np.min(yG[ub_mask])) if np.any(ub_mask) else np.inf
    lb = float(np.max(yG[lb_mask])) if np.any(lb_mask) else -np.inf
    return -0.5 * (ub + lb)


def solve_dual(K: np.ndarray, y: np.ndarray, C: float, epsilon: float, tol: float,
               max_iter: int) -> DualSolution:
    l = y.size
    y_t = np.concatenate([np.ones(l), -np.ones(l)])
    a = np.zeros(2 * l)
    G = np.concatenate([epsilon - y, epsilon + y])
    QD = np.concatenate([np.diag(K), np.diag(K)])

    def q_column(t: int) -> np.ndarray:
        k = K[:, t % l]
        return y_t * y_t[t] * np.concatenate([k, k])

    violation = np.inf
    it = 0
    while True:
        minus_yG = -y_t * G
        up = ((y_t > 0) & (a < C)) | ((y_t < 0) & (a > 0))
        low = ((y_t > 0) & (a > 0)) | ((y_t < 0) & (a < C))
        if not np.any(up) or not np.any(low):
            violation = 0.0
            break
        i = int(np.flatnonzero(up)[np.argmax(minus_yG[up])])
        j = int(np.flatnonzero(low)[np.argmin(minus_yG[low])])
        violation = float(minus_yG[i] - minus_yG[j])
        if violation <= tol:
            break
        if it >= max_iter:
            raise ConvergenceError(
                f"SVR dual did not converge in {max_iter} iterations (KKT violation {violation:.3g} > tol {tol})",
                violation, it,
            )
        it += 1

        Q_i = q_column(i)
        Q_j = q_column(j)
        old_i, old_j = a[i], a[j]
        if y_t[i] != y_t[j]:
            quad = max(QD[i] + QD[j] + 2.0 * Q_i[j], TAU)
            delta = (-G[i] - G[j]) / quad
            diff = a[i] - a[j]
            a[i] += delta
            a[j] += delta
            if diff > 0:
                if a[j] < 0:
                    a[j] = 0.0
                    a[i] = diff
            elif a[i] < 0:
                a[i] = 0.0
                a[j] = -diff
            if diff > 0:
                if a[i] > C:
                    a[i] = C
                    a[j] = C - diff
            elif a[j] > C:
                a[j] = C
                a[i] = C + diff
        else:
            quad = max(QD[i] + QD[j] - 2.0 * Q_i[j], TAU)
            delta = (G[i] - G[j]) / quad
            total = a[i] + a[j]
            a[i] -= delta
            a[j] += delta
            if total > C:
                if a[i] > C:
                    a[i] = C
                    a[j] = total - C
            elif a[j] < 0:
                a[j] = 0.0
                a[i] = total
            if total > C:
                if a[j] > C:
                    a[j] = C
                    a[i] = total - C
            elif a[i] < 0:
                a[i] = 0.0
                a[j] = total
        G += Q_i * (a[i] - old_i) + Q_j * (a[j] - old_j)

    return DualSolution(a[:l] - a[l:], _bias(a, y_t, G, C), violation, it)


class KernelSVR(FittedModel):
    family = "svr"

    def __init__(self, encoder: FeatureEncoder, params: SVRParams, gamma: float,
                 mean: np.ndarray, scale: np.ndarray, support: np.ndarray,
                 coef: np.ndarray, bias: float, violation: float, iterations: int):
        self.encoder = encoder
        self.params = params
        self.gamma = float(gamma)
        self.mean = np.asarray(mean, dtype=np.float64)
        self.scale = np.asarray(scale, dtype=np.float64)
        self.support = np.asarray(support, dtype=np.float64).reshape(-1, self.mean.size)
        self.coef = np.asarray(coef, dtype=np.float64)
        self.bias = float(bias)
        self.violation = float(violation)
        self.iterations = int(iterations)

    @property
    def features(self) -> list:
        return list(self.encoder.features)

    def predict(self, ds: Dataset) -> np.ndarray:
        Z = (self.encoder.encode(ds) - self.mean) / self.scale
        if self.coef.size == 0:
            return np.full(ds.n, self.bias)
        return self.coef @ rbf_kernel(self.support, Z, self.gamma) + self.bias

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "encoder": self.encoder.to_dict(),
            "params": asdict(self.params),
            "gamma": self.gamma,
            "mean": self.mean.tolist(),
            "scale": self.scale.tolist(),
            "support": self.support.tolist(),
            "coef": self.coef.tolist(),
            "bias": self.bias,
            "violation": self.violation,
            "iterations": self.iterations,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "KernelSVR":
        return cls(FeatureEncoder.from_dict(d["encoder"]), SVRParams(**d["params"]), d["gamma"],
                   d["mean"], d["scale"], d["support"], d["coef"], d["bias"],
                   d["violation"], d["iterations"])


def fit_svr(ds: Dataset, features, params=None) -> KernelSVR:
    """RBF SVR on internally standardized features.

    ``gamma`` defaults to 1 / (encoded column count).
    """
    if not isinstance(params, SVRParams):
        params = params_from_dict(SVRParams, params, "svr")
    if ds.n < 2:
        raise DataError(f"SVR needs at least 2 training rows, got {ds.n}")
    encoder = FeatureEncoder(features).fit(ds)
    X = encoder.encode(ds)
    mean = X.mean(axis=0)
    scale = X.std(axis=0)
    scale[scale == 0] = 1.0
    Z = (X - mean) / scale
    gamma = params.gamma if params.gamma is not None else 1.0 / max(1, X.shape[1])
    max_iter = params.max_iter if params.max_iter is not None else 100_000 * ds.n
    sol = solve_dual(rbf_kernel(Z, Z, gamma), ds.response, params.C, params.epsilon, params.tol, max_iter)
    keep = sol.coef != 0.0
    logger.debug(
        f"SVR: {int(keep.sum())}/{ds.n} support vectors, {sol.iterations} iterations, "
        f"KKT violation {sol.violation:.3g}"
    )
    return KernelSVR(encoder, params, gamma, mean, scale, Z[keep], sol.coef[keep], sol.bias,
                     sol.violation, sol.iterations)
