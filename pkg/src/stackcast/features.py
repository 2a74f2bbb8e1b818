"""Valuation ratios from quarterly per-share reports and weekly feature assembly.

Each trading day uses the most recent report effective at or before it. PE is
missing whenever trailing earnings are non-positive (filled with 0 only after
the train-window Gaussian transform, like every other missing value); PB/PS
likewise require positive denominators. Weekly rows take the median of each
column's daily values, with missing days excluded.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
import pandas as pd

from .indicators import INDICATOR_COLUMNS, compute_indicators
from .market_data import DailySeries, WeeklySeries, week_end_friday

FUNDAMENTAL_COLUMNS = ["pe", "pb", "ps"]
REPORT_COLUMNS = ["ticker", "effective_date", "eps_ttm", "book_per_share", "revenue_per_share_ttm"]
FEATURE_COLUMNS = (
    ["ticker", "week_end", "return_t"] + INDICATOR_COLUMNS + FUNDAMENTAL_COLUMNS + ["sentiment"]
)


def load_reports_csv(path: str | Path) -> pd.DataFrame:
    f = pd.read_csv(path)
    if list(f.columns) != REPORT_COLUMNS:
        raise ValueError(f"{path}: expected header {','.join(REPORT_COLUMNS)}")
    f["effective_date"] = pd.to_datetime(f["effective_date"])
    return f.sort_values(["ticker", "effective_date"]).reset_index(drop=True)


def compute_fundamentals(series: DailySeries, reports: pd.DataFrame) -> pd.DataFrame:
    """PE/PB/PS per day via an as-of join against the ticker's report history."""
    rep = reports[reports["ticker"] == series.ticker] if "ticker" in reports.columns else reports
    rep = rep.sort_values("effective_date")
    f = series.frame
    out = pd.DataFrame({"date": f["date"]})
    n = len(f)
    pe = np.full(n, np.nan)
    pb = np.full(n, np.nan)
    ps = np.full(n, np.nan)
    if not rep.empty:
        eff = rep["effective_date"].to_numpy()
        idx = np.searchsorted(eff, f["date"].to_numpy(), side="right") - 1
        have = idx >= 0
        close = f["close"].to_numpy(dtype=float)
        eps = rep["eps_ttm"].to_numpy(dtype=float)[np.clip(idx, 0, None)]
        book = rep["book_per_share"].to_numpy(dtype=float)[np.clip(idx, 0, None)]
        rev = rep["revenue_per_share_ttm"].to_numpy(dtype=float)[np.clip(idx, 0, None)]
        pe = np.where(have & (eps > 0), close / eps, np.nan)
        pb = np.where(have & (book > 0), close / book, np.nan)
        ps = np.where(have & (rev > 0), close / rev, np.nan)
    out["pe"], out["pb"], out["ps"] = pe, pb, ps
    return out


def _weekly_median(daily: pd.DataFrame, value_cols: list[str]) -> pd.DataFrame:
    d = daily.copy()
    d["week_end"] = d["date"].map(week_end_friday)
    grouped = d.groupby("week_end", sort=True)[value_cols].median()
    return grouped.reset_index()


def weekly_features(
    indicators: pd.DataFrame,
    fundamentals: pd.DataFrame,
    sentiment_weekly: pd.DataFrame | None,
    weekly: WeeklySeries,
) -> pd.DataFrame:
    """One row per realized week: return at t, weekly medians, sentiment by Friday week."""
    base = weekly.frame[["week_end", "ret"]].rename(columns={"ret": "return_t"})
    ind = _weekly_median(indicators, INDICATOR_COLUMNS)
    fund = _weekly_median(fundamentals, FUNDAMENTAL_COLUMNS)
    out = base.merge(ind, on="week_end", how="left").merge(fund, on="week_end", how="left")
    if sentiment_weekly is not None and not sentiment_weekly.empty:
        sw = sentiment_weekly
        if "ticker" in sw.columns:
            sw = sw[sw["ticker"] == weekly.ticker][["week_end", "sentiment"]]
        out = out.merge(sw, on="week_end", how="left")
    else:
        out["sentiment"] = np.nan
    out.insert(0, "ticker", weekly.ticker)
    return out[FEATURE_COLUMNS]


def build_ticker_features(
    series: DailySeries,
    weekly: WeeklySeries,
    reports: pd.DataFrame,
    sentiment_weekly: pd.DataFrame | None,
) -> pd.DataFrame:
    ind = compute_indicators(series)
    fund = compute_fundamentals(series, reports)
    return weekly_features(ind, fund, sentiment_weekly, weekly)


def load_sentiment_csv(path: str | Path) -> pd.DataFrame:
    f = pd.read_csv(path)
    if list(f.columns) != ["ticker", "week_end", "sentiment"]:
        raise ValueError(f"{path}: expected header ticker,week_end,sentiment")
    f["week_end"] = pd.to_datetime(f["week_end"])
    return f


def write_features_csv(features: pd.DataFrame, path: str | Path) -> None:
    features.to_csv(path, index=False, columns=FEATURE_COLUMNS, date_format="%Y-%m-%d")


def load_features_csv(path: str | Path) -> pd.DataFrame:
    f = pd.read_csv(path)
    if list(f.columns) != FEATURE_COLUMNS:
        raise ValueError(f"{path}: expected header {','.join(FEATURE_COLUMNS)}")
    f["week_end"] = pd.to_datetime(f["week_end"])
    return f
