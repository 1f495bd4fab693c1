"""Lasso solver: cyclic coordinate descent with a maintained residual.

Minimizes (1/2n) ||y - X b||^2 + lam * ||b||_1.  The iterate is declared
converged when a full sweep moves no coordinate by more than `tol` and
the subgradient residual is within 10 * tol; hitting max_iter first
reports converged=False rather than raising.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
import scipy.sparse as sp

from .ensemble import SparseMeasurementMatrix
from .errors import DataError, ParameterError

MatrixLike = Union[SparseMeasurementMatrix, sp.spmatrix, np.ndarray]


@dataclass(frozen=True)
class LassoConfig:
    lam: float
    tol: float = 1e-8
    max_iter: int = 10000
    zero_tol: float = 1e-8

    def __post_init__(self) -> None:
        if not self.lam > 0:
            raise ParameterError(f"lam must be positive, got {self.lam!r}")
        if not self.tol > 0:
            raise ParameterError(f"tol must be positive, got {self.tol!r}")
        if self.max_iter < 1:
            raise ParameterError(f"max_iter must be at least 1, got {self.max_iter!r}")
        if not self.zero_tol >= 0:
            raise ParameterError(f"zero_tol must be non-negative, got {self.zero_tol!r}")


@dataclass
class LassoSolution:
    beta_hat: np.ndarray
    objective: float
    kkt_residual: float
    iterations: int
    converged: bool
    objective_history: np.ndarray
    config: LassoConfig


def soft_threshold(x, lam: float):
    return np.sign(x) * np.maximum(np.abs(x) - lam, 0.0)


def _as_csc(X: MatrixLike) -> sp.csc_matrix:
    if isinstance(X, SparseMeasurementMatrix):
        return X.to_csr().tocsc()
    if sp.issparse(X):
        return X.tocsc()
    return sp.csc_matrix(np.asarray(X, dtype=np.float64))


def _require_finite(name: str, values: np.ndarray) -> None:
    if not np.all(np.isfinite(values)):
        raise DataError(f"{name} contains non-finite values")


def objective_value(X: MatrixLike, y: np.ndarray, beta: np.ndarray, lam: float) -> float:
    Xc = _as_csc(X)
    r = y - Xc @ beta
    n = Xc.shape[0]
    return float(0.5 / n * (r @ r) + lam * np.abs(beta).sum())


def kkt_residual(X: MatrixLike, y: np.ndarray, lam: float, beta: np.ndarray, zero_tol: float = 1e-8) -> float:
    """Worst-coordinate violation of the stationarity conditions.

    With g = (1/n) X^T (X beta - y), an exact minimizer has
    g_i = -lam * sign(beta_i) on the active set and |g_i| <= lam off it.
    Entries within zero_tol of zero count as inactive.
    """
    Xc = _as_csc(X)
    y = np.asarray(y, dtype=np.float64)
    beta = np.asarray(beta, dtype=np.float64)
    _require_finite("X", Xc.data)
    _require_finite("y", y)
    _require_finite("beta", beta)
    n = Xc.shape[0]
    g = Xc.T @ (Xc @ beta - y) / n
    active = np.abs(beta) > zero_tol
    viol = np.where(active, np.abs(g + lam * np.sign(beta)), np.maximum(np.abs(g) - lam, 0.0))
    return float(viol.max()) if viol.size else 0.0


def signed_support(beta: np.ndarray, zero_tol: float = 1e-8) -> np.ndarray:
    """Entrywise sign in {-1, 0, +1}, zeroing anything within zero_tol."""
    beta = np.asarray(beta)
    out = np.sign(beta).astype(np.int8)
    out[np.abs(beta) <= zero_tol] = 0
    return out


def solve(
    X: MatrixLike,
    y: np.ndarray,
    config: LassoConfig,
    beta0: Optional[np.ndarray] = None,
) -> LassoSolution:
    Xc = _as_csc(X)
    n, p = Xc.shape
    y = np.asarray(y, dtype=np.float64)
    if y.shape != (n,):
        raise ParameterError(f"y must have length n={n}")
    _require_finite("X", Xc.data)
    _require_finite("y", y)

    indptr, indices, data = Xc.indptr, Xc.indices, Xc.data
    col_scale = np.zeros(p)
    for j in range(p):
        seg = data[indptr[j] : indptr[j + 1]]
        col_scale[j] = seg @ seg / n

    if beta0 is None:
        beta = np.zeros(p)
    else:
        beta = np.array(beta0, dtype=np.float64)
        if beta.shape != (p,):
            raise ParameterError(f"beta0 must have length p={p}")
        _require_finite("beta0", beta)
        beta[col_scale == 0.0] = 0.0
    r = y - Xc @ beta

    lam, tol = config.lam, config.tol
    history = []
    converged = False
    it = 0
    for it in range(1, config.max_iter + 1):
        delta_max = 0.0
        for j in range(p):
            cj = col_scale[j]
            if cj == 0.0:
                continue
            lo, hi = indptr[j], indptr[j + 1]
            idx = indices[lo:hi]
            vals = data[lo:hi]
            bj = beta[j]
            rho = vals @ r[idx] / n + cj * bj
            bj_new = soft_threshold(rho, lam) / cj
            if bj_new != bj:
                r[idx] -= vals * (bj_new - bj)
                beta[j] = bj_new
                delta_max = max(delta_max, abs(bj_new - bj))
        history.append(0.5 / n * (r @ r) + lam * np.abs(beta).sum())
        if delta_max <= tol:
            if kkt_residual(Xc, y, lam, beta, config.zero_tol) <= 10.0 * tol:
                converged = True
                break

    return LassoSolution(
        beta_hat=beta,
        objective=history[-1],
        kkt_residual=kkt_residual(Xc, y, lam, beta, config.zero_tol),
        iterations=it,
        converged=converged,
        objective_history=np.asarray(history),
        config=config,
    )
