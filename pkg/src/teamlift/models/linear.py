"""L1- and L2-penalized linear regression, written against explicit objectives.

Lasso minimizes
    (1 / 2n) * ||y - b0 - X b||^2 + lam * ||b||_1
by cyclic coordinate descent with an active-set strategy and an unpenalized
intercept. Convergence is certified: the fitted model stores the largest
violation of the stationarity conditions, so callers can assert optimality
instead of trusting an iteration cap.

Ridge minimizes
    (1 / 2n) * ||y - b0 - X b||^2 + (lam / 2) * ||b||^2
and is solved directly on centered data.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["LinearModel", "lambda_max", "fit_lasso", "fit_ridge", "kkt_residual"]


@dataclass
class LinearModel:
    penalty: str  # lasso | ridge
    lam: float
    intercept: float
    coef: np.ndarray
    n_iter: int = 0
    kkt_residual: float = 0.0
    converged: bool = True

    def predict(self, X: np.ndarray) -> np.ndarray:
        return X @ self.coef + self.intercept

    def n_selected(self) -> int:
        return int(np.count_nonzero(self.coef))


def lambda_max(X: np.ndarray, y: np.ndarray) -> float:
    """Smallest penalty at which the lasso solution is all-zero."""
    n = X.shape[0]
    return float(np.max(np.abs(X.T @ (y - y.mean())))) / n


def _soft(z: float, t: float) -> float:
    if z > t:
        return z - t
    if z < -t:
        return z + t
    return 0.0


def kkt_residual(X: np.ndarray, y: np.ndarray, model: "LinearModel") -> float:
    """Largest stationarity violation of a lasso solution.

    For zero coefficients the subgradient condition is |g_j| <= lam; for
    active ones g_j = lam * sign(b_j), where g = X'(y - b0 - Xb) / n.
    """
    n = X.shape[0]
    r = y - model.predict(X)
    g = X.T @ r / n
    lam = model.lam
    viol = np.where(
        model.coef == 0.0,
        np.maximum(0.0, np.abs(g) - lam),
        np.abs(g - lam * np.sign(model.coef)),
    )
    # The intercept is unpenalized, so the mean residual must vanish too.
    return float(max(viol.max(initial=0.0), abs(r.mean())))


def fit_lasso(
    X: np.ndarray,
    y: np.ndarray,
    lam: float,
    tol: float = 1e-8,
    max_iter: int = 100_000,
    warm_start: LinearModel | None = None,
) -> LinearModel:
    """Coordinate-descent lasso with an optimality certificate.

    Iterates full sweeps to discover the active set, then cheap sweeps over
    active coordinates, until the KKT residual drops below ``tol``. A warm
    start (e.g. the previous model on a penalty path) only changes the
    starting point, never the solution.
    """
    if lam < 0:
        raise ValueError("lam must be non-negative")
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n, p = X.shape
    x_mean = X.mean(axis=0)
    y_mean = y.mean()
    Xc = np.asfortranarray(X - x_mean)  # column-major: sweeps touch one column at a time
    yc = y - y_mean
    a = np.einsum("ij,ij->j", Xc, Xc) / n  # per-coordinate curvature

    beta = np.zeros(p)
    if warm_start is not None and warm_start.coef.shape == (p,):
        beta = warm_start.coef.copy()
    r = yc - Xc @ beta

    def sweep(indices: np.ndarray) -> None:
        nonlocal r
        for j in indices:
            if a[j] == 0.0:
                continue
            b_old = beta[j]
            rho = Xc[:, j] @ r / n + a[j] * b_old
            b_new = _soft(rho, lam) / a[j]
            if b_new != b_old:
                r += Xc[:, j] * (b_old - b_new)
                beta[j] = b_new

    all_idx = np.arange(p)
    n_iter = 0
    kkt = np.inf
    while n_iter < max_iter:
        sweep(all_idx)
        n_iter += 1
        active = np.flatnonzero(beta)
        for _ in range(200):
            if active.size == 0 or n_iter >= max_iter:
                break
            before = beta[active].copy()
            sweep(active)
            n_iter += 1
            if np.max(np.abs(beta[active] - before), initial=0.0) < 0.1 * tol:
                break
        g = Xc.T @ r / n
        viol = np.where(
            beta == 0.0, np.maximum(0.0, np.abs(g) - lam), np.abs(g - lam * np.sign(beta))
        )
        kkt = float(viol.max(initial=0.0))
        if kkt <= tol:
            break

    intercept = float(y_mean - x_mean @ beta)
    model = LinearModel(
        penalty="lasso",
        lam=lam,
        intercept=intercept,
        coef=beta,
        n_iter=n_iter,
        converged=kkt <= tol,
    )
    model.kkt_residual = kkt_residual(X, y, model)
    return model


def fit_ridge(X: np.ndarray, y: np.ndarray, lam: float) -> LinearModel:
    """Closed-form ridge on centered data; lam=0 recovers least squares."""
    if lam < 0:
        raise ValueError("lam must be non-negative")
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n, p = X.shape
    x_mean = X.mean(axis=0)
    y_mean = y.mean()
    Xc = X - x_mean
    yc = y - y_mean
    A = Xc.T @ Xc / n + lam * np.eye(p)
    b = Xc.T @ yc / n
    if lam == 0.0:
        coef, *_ = np.linalg.lstsq(A, b, rcond=None)
    else:
        coef = np.linalg.solve(A, b)
    intercept = float(y_mean - x_mean @ coef)
    return LinearModel(penalty="ridge", lam=lam, intercept=intercept, coef=coef)
