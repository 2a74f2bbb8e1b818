"""ADF and KPSS stationarity tests with fixed 5% critical values.

Both use the lag order floor(12 * (n/100)^(1/4)). ADF regresses the first
difference on a constant, the lagged level, and lagged differences; the test
statistic is the t-ratio of the lagged-level coefficient against -2.86. KPSS
(level form) compares the rescaled cumulative-residual statistic against
0.463 with a Bartlett long-run variance.
"""

from __future__ import annotations

import numpy as np

ADF_CRIT_5PCT = -2.86
KPSS_CRIT_5PCT = 0.463


def lag_order(n: int) -> int:
    return int(12.0 * (n / 100.0) ** 0.25)


def adf_statistic(y: np.ndarray, lags: int | None = None) -> float:
    y = np.asarray(y, dtype=float)
    n = y.size
    k = lag_order(n) if lags is None else lags
    dy = np.diff(y)
    if dy.size - k < k + 5:
        k = max(0, dy.size // 4)
    rows = range(k, dy.size)
    T = len(rows)
    ncols = 2 + k
    X = np.empty((T, ncols))
    X[:, 0] = 1.0
    X[:, 1] = y[k:-1]
    for i in range(1, k + 1):
        X[:, 1 + i] = dy[k - i:dy.size - i]
    target = dy[k:]
    beta, *_ = np.linalg.lstsq(X, target, rcond=None)
    resid = target - X @ beta
    dof = T - ncols
    sigma2 = float(resid @ resid) / dof
    xtx_inv = np.linalg.inv(X.T @ X)
    se = np.sqrt(sigma2 * xtx_inv[1, 1])
    return float(beta[1] / se)


def adf_rejects_unit_root(y: np.ndarray, lags: int | None = None) -> bool:
    return adf_statistic(y, lags) < ADF_CRIT_5PCT


def kpss_statistic(y: np.ndarray, lags: int | None = None) -> float:
    y = np.asarray(y, dtype=float)
    n = y.size
    L = lag_order(n) if lags is None else lags
    e = y - y.mean()
    s = np.cumsum(e)
    eta = float(s @ s) / (n * n)
    gamma0 = float(e @ e) / n
    lrv = gamma0
    for l in range(1, min(L, n - 1) + 1):
        gamma = float(e[l:] @ e[:-l]) / n
        lrv += 2.0 * (1.0 - l / (L + 1.0)) * gamma
    if lrv <= 0:
        return np.inf
    return eta / lrv


def kpss_accepts_stationarity(y: np.ndarray, lags: int | None = None) -> bool:
    return kpss_statistic(y, lags) < KPSS_CRIT_5PCT


def choose_differencing(y: np.ndarray, max_d: int = 4) -> int:
    """d = max of the smallest differencing counts at which ADF rejects a unit
    root and KPSS accepts stationarity, each capped at max_d."""
    y = np.asarray(y, dtype=float)
    d_adf = max_d
    w = y
    for d in range(max_d + 1):
        if w.size > 12 and adf_rejects_unit_root(w):
            d_adf = d
            break
        w = np.diff(w)
    d_kpss = max_d
    w = y
    for d in range(max_d + 1):
        if w.size > 12 and kpss_accepts_stationarity(w):
            d_kpss = d
            break
        w = np.diff(w)
    return max(d_adf, d_kpss)
