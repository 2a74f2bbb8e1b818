"""Univariate ARIMA by conditional sum of squares.

Differencing order comes from the ADF/KPSS pair (larger wins, capped at 4);
(p, q) are chosen by exhaustive AIC search over [0,4]^2. The CSS residual
recursion runs with zero initial conditions and the objective sums squares
from t = 4 (the max AR order), so every candidate shares the identical
effective sample and AICs are comparable. A mean term is included only for
d = 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize
from scipy.signal import lfilter

from .stattests import choose_differencing

MAX_P = 4
MAX_Q = 4
MAX_D = 4
CONDITION_START = MAX_P
MIN_OBSERVATIONS = 50
_BIG = 1e100


@dataclass(frozen=True)
class ArimaModel:
    p: int
    d: int
    q: int
    mean: float
    ar: np.ndarray
    ma: np.ndarray
    sigma2: float
    aic: float

    @property
    def order(self) -> tuple[int, int, int]:
        return (self.p, self.d, self.q)


def css_residuals(w: np.ndarray, mean: float, ar: np.ndarray, ma: np.ndarray) -> np.ndarray:
    """One-step residuals of the ARMA recursion with zero pre-sample values."""
    b = np.concatenate(([1.0], -np.asarray(ar, dtype=float)))
    a = np.concatenate(([1.0], np.asarray(ma, dtype=float)))
    return lfilter(b, a, np.asarray(w, dtype=float) - mean)


def _css(params: np.ndarray, w: np.ndarray, p: int, q: int, with_mean: bool) -> float:
    mean = params[0] if with_mean else 0.0
    off = 1 if with_mean else 0
    ar = params[off:off + p]
    ma = params[off + p:off + p + q]
    if np.any(np.abs(ma) > 10) or np.any(np.abs(ar) > 10):
        return _BIG
    e = css_residuals(w, mean, ar, ma)
    ss = float(e[CONDITION_START:] @ e[CONDITION_START:])
    if not math.isfinite(ss):
        return _BIG
    return ss


def _exact_ar_params(w: np.ndarray, p: int, with_mean: bool) -> np.ndarray | None:
    """For q = 0 the CSS objective over t >= CONDITION_START is an ordinary
    least-squares problem in the AR coefficients, so solve it exactly."""
    t0 = CONDITION_START
    rows = np.arange(t0, w.size)
    cols = [w[rows - i] for i in range(1, p + 1)]
    if with_mean:
        cols.insert(0, np.ones(rows.size))
    X = np.column_stack(cols) if cols else np.empty((rows.size, 0))
    beta, *_ = np.linalg.lstsq(X, w[rows], rcond=None)
    if with_mean:
        c, phi = beta[0], beta[1:]
        denom = 1.0 - phi.sum()
        if abs(denom) < 1e-8:
            return None
        return np.concatenate(([c / denom], phi))
    return beta


def _hannan_rissanen_start(w: np.ndarray, p: int, q: int, with_mean: bool) -> np.ndarray:
    """Initial (mean, ar, ma) from a long-AR residual regression."""
    n = w.size
    L = min(max(2 * (p + q), 6), max(n // 5, 1))
    wc = w - w.mean()
    rows = np.arange(L, n)
    X = np.column_stack([wc[rows - i] for i in range(1, L + 1)])
    beta, *_ = np.linalg.lstsq(X, wc[rows], rcond=None)
    resid = np.zeros(n)
    resid[rows] = wc[rows] - X @ beta
    start = L + q
    rows2 = np.arange(start, n)
    cols = [wc[rows2 - i] for i in range(1, p + 1)] + [resid[rows2 - j] for j in range(1, q + 1)]
    X2 = np.column_stack(cols)
    beta2, *_ = np.linalg.lstsq(X2, wc[rows2], rcond=None)
    out = []
    if with_mean:
        out.append(w.mean())
    out.extend(beta2[:p])
    out.extend(beta2[p:p + q])
    return np.clip(np.asarray(out, dtype=float), -5.0, 5.0)


def fit_css(w: np.ndarray, p: int, q: int, with_mean: bool) -> ArimaModel | None:
    """CSS minimization: exact OLS for pure-AR candidates, otherwise
    Nelder-Mead from Hannan-Rissanen starting values."""
    w = np.asarray(w, dtype=float)
    n_eff = w.size - CONDITION_START
    if n_eff < p + q + 5:
        return None
    n_params = (1 if with_mean else 0) + p + q
    x0 = np.empty(0)
    if n_params == 0:
        ss = _css(x0, w, p, q, with_mean)
    elif q == 0:
        x0 = _exact_ar_params(w, p, with_mean)
        if x0 is None:
            return None
        ss = _css(x0, w, p, q, with_mean)
    else:
        x0 = _hannan_rissanen_start(w, p, q, with_mean)
        res = minimize(_css, x0, args=(w, p, q, with_mean), method="Nelder-Mead",
                       options={"maxiter": 150 * max(1, n_params), "xatol": 1e-5, "fatol": 1e-10})
        x0 = res.x
        ss = float(res.fun)
    if not math.isfinite(ss) or ss >= _BIG or ss <= 0:
        return None
    mean = float(x0[0]) if with_mean else 0.0
    off = 1 if with_mean else 0
    ar = np.array(x0[off:off + p], dtype=float)
    ma = np.array(x0[off + p:off + p + q], dtype=float)
    sigma2 = ss / n_eff
    k = n_params + 1  # + residual variance
    aic = n_eff * (math.log(2.0 * math.pi * sigma2) + 1.0) + 2.0 * k
    return ArimaModel(p=p, d=0, q=q, mean=mean, ar=ar, ma=ma, sigma2=sigma2, aic=aic)


def select_arima_order(y: np.ndarray, max_p: int = MAX_P, max_q: int = MAX_Q, max_d: int = MAX_D) -> tuple[int, int, int]:
    """(p, d, q) with d from the stationarity tests and (p, q) by lowest AIC."""
    y = np.asarray(y, dtype=float)
    if y.size < MIN_OBSERVATIONS:
        raise ValueError(f"need at least {MIN_OBSERVATIONS} observations, got {y.size}")
    d = choose_differencing(y, max_d)
    w = np.diff(y, n=d) if d > 0 else y
    best: tuple[float, int, int] | None = None
    for p in range(max_p + 1):
        for q in range(max_q + 1):
            model = fit_css(w, p, q, with_mean=(d == 0))
            if model is None:
                continue
            key = (model.aic, p, q)
            if best is None or key < best:
                best = key
    if best is None:
        return (0, d, 0)
    return (best[1], d, best[2])


def fit_arima(y: np.ndarray, order: tuple[int, int, int]) -> ArimaModel:
    p, d, q = order
    y = np.asarray(y, dtype=float)
    w = np.diff(y, n=d) if d > 0 else y
    model = fit_css(w, p, q, with_mean=(d == 0))
    if model is None:
        model = fit_css(w, 0, 0, with_mean=(d == 0))
    if model is None:
        raise ValueError("CSS fit failed for every candidate")
    return ArimaModel(p=p, d=d, q=q, mean=model.mean, ar=model.ar, ma=model.ma,
                      sigma2=model.sigma2, aic=model.aic)


def forecast_next(model: ArimaModel, history: np.ndarray) -> float:
    """One-step forecast given the full history up to the current week,
    with parameters held fixed between refits."""
    y = np.asarray(history, dtype=float)
    w = np.diff(y, n=model.d) if model.d > 0 else y
    e = css_residuals(w, model.mean, model.ar, model.ma)
    wc = w - model.mean
    ar_part = sum(model.ar[i] * wc[-(i + 1)] for i in range(model.p)) if model.p else 0.0
    ma_part = sum(model.ma[j] * e[-(j + 1)] for j in range(model.q)) if model.q else 0.0
    w_next = model.mean + ar_part + ma_part
    level = w_next
    work = y
    for _ in range(model.d):
        level += work[-1]
        work = np.diff(work)
    return float(level)
