"""Zero-intercept nonnegative least-squares stacking over base-model predictions.

The meta-learner is an active-set NNLS fit (no constant term, weights >= 0)
refreshed on a trailing window of (base prediction, realized return) pairs.
Per-stock stacking defaults to one pooled fit across stocks per window; the
index-level variant stacks per-week medians of each base model's cross-stock
predictions.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from datetime import date, timedelta

import numpy as np
import pandas as pd

logger = logging.getLogger(__name__)

KKT_TOL = 1e-8


@dataclass(frozen=True)
class EnsembleFit:
    model_ids: tuple[str, ...]
    weights: np.ndarray
    window: tuple[date, date]

    def __post_init__(self):
        if (self.weights < 0).any():
            raise ValueError("weights must be nonnegative")
        if len(self.weights) != len(self.model_ids):
            raise ValueError("one weight per model required")


def fit_nnls(P: np.ndarray, y: np.ndarray, tol: float = KKT_TOL, max_iter: int | None = None) -> np.ndarray:
    """Lawson-Hanson active-set solve of min ||y - P w||^2 s.t. w >= 0.

    Terminates at the KKT point: w >= 0, gradient P'(Pw - y) >= -tol on every
    coordinate, and w_i * grad_i = 0 up to tol.
    """
    P = np.asarray(P, dtype=float)
    y = np.asarray(y, dtype=float)
    if P.ndim != 2 or y.ndim != 1 or P.shape[0] != y.size:
        raise ValueError(f"shape mismatch: P {P.shape}, y {y.shape}")
    if P.shape[0] < 1 or P.shape[1] < 1:
        raise ValueError("P needs at least one row and one column")
    if not (np.isfinite(P).all() and np.isfinite(y).all()):
        raise ValueError("non-finite inputs")
    m, n = P.shape
    if max_iter is None:
        max_iter = 30 * (n + 2)
    x = np.zeros(n)
    passive = np.zeros(n, dtype=bool)
    iters = 0
    while True:
        w = P.T @ (y - P @ x)
        w_masked = np.where(passive, -np.inf, w)
        j = int(np.argmax(w_masked))
        if not np.isfinite(w_masked[j]) or w_masked[j] <= tol:
            break
        passive[j] = True
        while True:
            iters += 1
            if iters > max_iter:
                return np.maximum(x, 0.0)
            s = np.zeros(n)
            sol, *_ = np.linalg.lstsq(P[:, passive], y, rcond=None)
            s[passive] = sol
            if s[passive].min() > 0:
                x = s
                break
            neg = passive & (s <= 0)
            denom = x[neg] - s[neg]
            ratios = np.where(denom > 0, x[neg] / np.where(denom > 0, denom, 1.0), 0.0)
            alpha = ratios.min()
            x = x + alpha * (s - x)
            passive &= x > 1e-14
            x[~passive] = 0.0
    return np.maximum(x, 0.0)


def ensemble_predict(fit: EnsembleFit, base_values: np.ndarray) -> float:
    """Dot product of the fitted weights with one week's base predictions."""
    base = np.asarray(base_values, dtype=float)
    if base.shape != fit.weights.shape:
        raise ValueError("base prediction vector does not match the fitted models")
    return float(fit.weights @ base)


def pivot_predictions(pred_df: pd.DataFrame, model_ids: list[str]) -> pd.DataFrame:
    """(ticker, week_end) rows with one column per base model's prediction."""
    sub = pred_df[pred_df["model_id"].isin(model_ids)]
    wide = sub.pivot_table(index=["ticker", "week_end"], columns="model_id", values="value", aggfunc="first")
    wide = wide.reindex(columns=model_ids)
    return wide.reset_index()


@dataclass
class WindowDiagnostics:
    window: tuple[date, date]
    scope: str
    n_rows: int
    residual_norm: float
    one_hot_residual_norms: dict[str, float]
    weights: dict[str, float]


def _fit_window(P: np.ndarray, y: np.ndarray, model_ids: list[str],
                window: tuple[date, date], scope: str) -> tuple[EnsembleFit, WindowDiagnostics]:
    weights = fit_nnls(P, y)
    resid = float(np.linalg.norm(y - P @ weights))
    one_hot = {}
    for j, mid in enumerate(model_ids):
        e = np.zeros(len(model_ids))
        e[j] = 1.0
        one_hot[mid] = float(np.linalg.norm(y - P @ e))
    fit = EnsembleFit(model_ids=tuple(model_ids), weights=weights, window=window)
    diag = WindowDiagnostics(
        window=window,
        scope=scope,
        n_rows=len(y),
        residual_norm=resid,
        one_hot_residual_norms=one_hot,
        weights=dict(zip(model_ids, weights)),
    )
    return fit, diag


def rolling_stack(
    wide: pd.DataFrame,
    realized: pd.DataFrame,
    model_ids: list[str],
    fit_dates: list[date],
    end: date,
    window_years: float,
    mode: str = "pooled",
    ensemble_id: str = "ensemble",
) -> tuple[pd.DataFrame, list[WindowDiagnostics], list[dict]]:
    """Walk the fit dates: refit NNLS on the trailing window of complete
    (base predictions, realized) pairs, then predict until the next fit date.

    mode "pooled" fits one weight vector across all tickers per window;
    "per_stock" fits each ticker on its own trailing pairs. Rows missing any
    base prediction are skipped with a log entry. Windows truncate to the
    available history.
    """
    if mode not in ("pooled", "per_stock"):
        raise ValueError(f"unknown stacking mode {mode!r}")
    data = wide.merge(realized, on=["ticker", "week_end"], how="left")
    complete = data.dropna(subset=list(model_ids) + ["realized"])
    out_rows = []
    diagnostics: list[WindowDiagnostics] = []
    skips: list[dict] = []
    window_days = int(round(window_years * 365.25))
    for i, fit_date in enumerate(fit_dates):
        next_date = fit_dates[i + 1] if i + 1 < len(fit_dates) else end
        lo = fit_date - timedelta(days=window_days)
        train = complete[(complete["week_end"] > lo) & (complete["week_end"] <= fit_date)]
        predict_rows = data[(data["week_end"] > fit_date) & (data["week_end"] <= next_date)]
        if train.empty:
            for _, row in predict_rows.iterrows():
                skips.append({"model_id": ensemble_id, "ticker": row["ticker"],
                              "week_end": row["week_end"], "reason": "no training pairs in window"})
            continue
        fits: dict[str, EnsembleFit] = {}
        if mode == "pooled":
            P = train[model_ids].to_numpy(dtype=float)
            y = train["realized"].to_numpy(dtype=float)
            fit, diag = _fit_window(P, y, model_ids, (train["week_end"].min(), fit_date), "pooled")
            diagnostics.append(diag)
            fits["__pooled__"] = fit
        else:
            for ticker, g in train.groupby("ticker", sort=True):
                P = g[model_ids].to_numpy(dtype=float)
                y = g["realized"].to_numpy(dtype=float)
                fit, diag = _fit_window(P, y, model_ids, (g["week_end"].min(), fit_date), ticker)
                diagnostics.append(diag)
                fits[ticker] = fit
        for _, row in predict_rows.iterrows():
            base = row[model_ids].to_numpy(dtype=float)
            if not np.isfinite(base).all():
                skips.append({"model_id": ensemble_id, "ticker": row["ticker"],
                              "week_end": row["week_end"], "reason": "missing base prediction"})
                continue
            fit = fits.get("__pooled__") or fits.get(row["ticker"])
            if fit is None:
                skips.append({"model_id": ensemble_id, "ticker": row["ticker"],
                              "week_end": row["week_end"], "reason": "no fit for ticker in window"})
                continue
            out_rows.append({"ticker": row["ticker"], "week_end": row["week_end"],
                             "model_id": ensemble_id, "value": ensemble_predict(fit, base)})
    preds = pd.DataFrame(out_rows, columns=["ticker", "week_end", "model_id", "value"])
    preds = preds.sort_values(["model_id", "ticker", "week_end"], kind="stable").reset_index(drop=True)
    for s in skips:
        logger.info("skip %s %s %s: %s", s["model_id"], s["ticker"], s["week_end"], s["reason"])
    return preds, diagnostics, skips


def index_features(pred_df: pd.DataFrame, model_ids: list[str]) -> pd.DataFrame:
    """Per model per week, the median prediction across stocks (even counts
    use the midpoint of the central pair)."""
    sub = pred_df[pred_df["model_id"].isin(model_ids)]
    med = sub.groupby(["model_id", "week_end"], sort=True)["value"].median().reset_index()
    wide = med.pivot_table(index="week_end", columns="model_id", values="value", aggfunc="first")
    return wide.reindex(columns=model_ids).reset_index()


def index_realized(realized: pd.DataFrame, index_series: pd.DataFrame | None = None) -> pd.DataFrame:
    """Realized index return per week: a supplied index series, else the
    cross-stock median of realized returns."""
    if index_series is not None:
        out = index_series[["week_end", "realized"]].copy()
    else:
        out = realized.groupby("week_end", sort=True)["realized"].median().reset_index()
    out.insert(0, "ticker", "__INDEX__")
    return out


def weights_frame(diagnostics: list[WindowDiagnostics]) -> pd.DataFrame:
    rows = []
    for d in diagnostics:
        for mid, wgt in d.weights.items():
            rows.append({"window_start": d.window[0], "window_end": d.window[1],
                         "model_id": mid, "weight": wgt, "scope": d.scope})
    return pd.DataFrame(rows, columns=["window_start", "window_end", "model_id", "weight", "scope"])
