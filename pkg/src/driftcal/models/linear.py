"""Ordinary least squares on flattened windows, with a small ridge term
for numerical stability."""

from __future__ import annotations

import numpy as np

from ..labeling import Standardizer
from .base import ForecastModel, stack_windows


class SingularSystemError(np.linalg.LinAlgError):
    """Normal equations are singular; retry with ridge > 0."""


def _solve_normal_equations(X: np.ndarray, y: np.ndarray, ridge: float) -> np.ndarray:
    """Solve (A^T A + R) beta = A^T y for A = [X | 1] via Cholesky.

    The ridge penalty is applied to the feature coefficients only, never to
    the intercept.
    """
    n, p = X.shape
    A = np.hstack([X, np.ones((n, 1))])
    G = A.T @ A
    if ridge > 0:
        G[np.arange(p), np.arange(p)] += ridge
    b = A.T @ y
    try:
        L = np.linalg.cholesky(G)
    except np.linalg.LinAlgError:
        raise SingularSystemError(
            "normal equations are singular or indefinite; pass ridge > 0"
        ) from None
    z = np.linalg.solve(L, b)
    return np.linalg.solve(L.T, z)


def fit_linear(
    windows,
    ridge: float = 1e-6,
    standardizer: Standardizer | None = None,
) -> ForecastModel:
    """Fit regularized least squares with intercept on flattened windows."""
    if ridge < 0:
        raise ValueError(f"ridge must be >= 0, got {ridge}")
    X3, y = stack_windows(windows)
    n, w, d = X3.shape
    X = X3.reshape(n, w * d)
    beta = _solve_normal_equations(X, y, ridge)
    return ForecastModel(
        kind="linear",
        params={"coef": beta[:-1].copy(), "intercept": beta[-1:].copy()},
        window=w,
        n_channels=d,
        standardizer=standardizer,
        meta={"ridge": ridge},
    )


def linear_raw_batch(model: ForecastModel, X: np.ndarray) -> np.ndarray:
    """Raw (unclipped) predictions for standardized windows (B, w, d)."""
    flat = X.reshape(X.shape[0], -1)
    return flat @ model.params["coef"] + model.params["intercept"][0]
