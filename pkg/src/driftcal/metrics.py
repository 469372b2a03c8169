"""Regression metrics for model comparison."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class RegressionReport:
    mae: float
    rmse: float
    r2: float | None  # None when the labels have zero variance
    n: int


def regression_metrics(y, yhat) -> RegressionReport:
    """MAE, RMSE, and R^2 against the label mean.

    R^2 is undefined (None) when the labels are constant; MAE/RMSE are
    still reported.
    """
    y = np.asarray(y, dtype=np.float64)
    yhat = np.asarray(yhat, dtype=np.float64)
    if y.ndim != 1 or y.shape != yhat.shape:
        raise ValueError(f"series must be equal-length 1-d, got {y.shape} and {yhat.shape}")
    if y.size == 0:
        raise ValueError("cannot compute metrics on empty series")
    err = y - yhat
    mae = float(np.mean(np.abs(err)))
    rmse = float(np.sqrt(np.mean(err**2)))
    ss_res = float(np.sum(err**2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = None if ss_tot <= 0.0 else 1.0 - ss_res / ss_tot
    return RegressionReport(mae=mae, rmse=rmse, r2=r2, n=int(y.size))
