"""Dual-source daily bar ingestion: reconciliation, gap repair, weekly log returns.

Pipeline per ticker: load base and alt CSVs, align both to the union of their
trading dates, repair gaps (half-gap recursion), cross-check adjusted closes
at the 2% gate, aggregate to Friday-ended weekly average log prices, and
apply the minimum-history filter.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from datetime import date, timedelta
from pathlib import Path

import numpy as np
import pandas as pd

BAR_COLUMNS = ["date", "open", "high", "low", "close", "adj_close", "volume", "dividend", "split"]
PRICE_FIELDS = ["open", "high", "low", "close", "adj_close"]
COMPARE_FIELDS = ["open", "high", "low", "close", "adj_close", "volume"]

SECTORS = (
    "Energy",
    "Materials",
    "Industrials",
    "Consumer Discretionary",
    "Consumer Staples",
    "Health Care",
    "Financials",
    "Information Technology",
    "Communication Services",
    "Utilities",
    "Real Estate",
)

MAX_MISSING_RUN = 10
ADJ_CLOSE_TOLERANCE = 0.02
DEFAULT_VIOLATION_LIMIT = 0.05
DAYS_PER_YEAR = 365.25


class StockRejected(ValueError):
    """A series failed a data-cleaning gate (gap run, history span, mismatch rate)."""


@dataclass(frozen=True)
class DailySeries:
    """Date-sorted daily bars for one ticker."""

    ticker: str
    sector: str
    frame: pd.DataFrame

    def __post_init__(self):
        f = self.frame
        if list(f.columns) != BAR_COLUMNS:
            raise ValueError(f"bar frame columns must be {BAR_COLUMNS}, got {list(f.columns)}")
        dates = f["date"].to_numpy()
        if len(dates) > 1 and not (dates[1:] > dates[:-1]).all():
            raise ValueError(f"{self.ticker}: dates must be strictly increasing")


@dataclass(frozen=True)
class WeeklySeries:
    """Friday-ended weeks: average log adjusted close and its first difference."""

    ticker: str
    frame: pd.DataFrame  # columns: week_end, avg_log_adj_close, ret (ret[0] is NaN)


@dataclass
class ReconciliationReport:
    ticker: str
    fraction_within_1pct: dict[str, float]
    q99_error: dict[str, float]
    rows_dropped: int
    matched_rows: int
    stock_rejected: bool
    dividend_date_match: float
    dividend_exact_match: float
    dividend_within_1pct: float
    split_date_match: float
    split_exact_match: float
    split_within_1pct: float


def validate_bars(frame: pd.DataFrame, ticker: str = "?") -> None:
    """Raise if any complete row violates the bar invariants."""
    f = frame
    complete = f[PRICE_FIELDS].notna().all(axis=1)
    rows = f[complete]
    if (rows["adj_close"] <= 0).any():
        raise ValueError(f"{ticker}: adj_close must be positive")
    body_low = rows[["open", "close"]].min(axis=1)
    body_high = rows[["open", "close"]].max(axis=1)
    bad = (rows["low"] > body_low) | (rows["high"] < body_high)
    if bad.any():
        d = rows.loc[bad, "date"].iloc[0]
        raise ValueError(f"{ticker}: OHLC ordering violated on {d}")
    if (f["volume"].dropna() < 0).any():
        raise ValueError(f"{ticker}: negative volume")
    if (f["split"].dropna() <= 0).any():
        raise ValueError(f"{ticker}: split ratio must be positive")


def load_bars_csv(path: str | Path, ticker: str, sector: str = "") -> DailySeries:
    """Read one bar CSV (empty field = missing; dividend/split default 0/1)."""
    f = pd.read_csv(path)
    if list(f.columns) != BAR_COLUMNS:
        raise ValueError(f"{path}: expected header {','.join(BAR_COLUMNS)}")
    f["date"] = pd.to_datetime(f["date"])
    f = f.sort_values("date").drop_duplicates("date").reset_index(drop=True)
    f["dividend"] = f["dividend"].fillna(0.0)
    f["split"] = f["split"].fillna(1.0)
    validate_bars(f, ticker)
    return DailySeries(ticker=ticker, sector=sector, frame=f)


def write_bars_csv(series: DailySeries, path: str | Path) -> None:
    series.frame.to_csv(path, index=False, date_format="%Y-%m-%d")


def load_sector_map(path: str | Path) -> dict[str, str]:
    f = pd.read_csv(path)
    if list(f.columns) != ["ticker", "sector"]:
        raise ValueError(f"{path}: expected header ticker,sector")
    bad = set(f["sector"]) - set(SECTORS)
    if bad:
        raise ValueError(f"{path}: unknown sectors {sorted(bad)}")
    return dict(zip(f["ticker"], f["sector"]))


def fill_missing(values) -> np.ndarray:
    """Fill missing values by half-gap recursion, carrying the last value forward at the tail.

    Interior missing a[i] becomes (a[i-1] + a[j]) / 2 where a[j] is the next
    originally-present value and a[i-1] is already filled; trailing missing
    copies a[i-1]. Runs longer than MAX_MISSING_RUN reject the stock.
    """
    arr = np.array([np.nan if v is None else float(v) for v in values], dtype=float)
    n = arr.size
    if n == 0:
        return arr
    missing = np.isnan(arr)
    if missing[0]:
        raise ValueError("first element missing")
    run = 0
    for m in missing:
        run = run + 1 if m else 0
        if run > MAX_MISSING_RUN:
            raise StockRejected(f"more than {MAX_MISSING_RUN} consecutive missing values")
    out = arr.copy()
    i = 0
    while i < n:
        if not np.isnan(out[i]):
            i += 1
            continue
        j = i
        while j < n and np.isnan(arr[j]):
            j += 1
        if j >= n:  # trailing run
            for k in range(i, n):
                out[k] = out[k - 1]
            break
        for k in range(i, j):
            out[k] = (out[k - 1] + arr[j]) / 2.0
        i = j
    return out


def repair_series(series: DailySeries, grid: list[date]) -> DailySeries:
    """Reindex to the trading-date grid (clipped to the series' own span) and fill gaps.

    Price fields and volume are filled by fill_missing; dividend defaults to 0
    and split to 1 on inserted days. High/low on filled rows are widened to
    keep the OHLC ordering invariant.
    """
    f = series.frame
    first, last = f["date"].iloc[0], f["date"].iloc[-1]
    dates = [d for d in grid if first <= d <= last]
    merged = pd.DataFrame({"date": dates}).merge(f, on="date", how="left")
    inserted = merged["adj_close"].isna().to_numpy()
    for col in PRICE_FIELDS + ["volume"]:
        merged[col] = fill_missing(merged[col].to_numpy())
    merged["dividend"] = merged["dividend"].fillna(0.0)
    merged["split"] = merged["split"].fillna(1.0)
    if inserted.any():
        idx = merged.index[inserted]
        body = merged.loc[idx, ["open", "close"]]
        merged.loc[idx, "high"] = np.maximum(merged.loc[idx, "high"], body.max(axis=1))
        merged.loc[idx, "low"] = np.minimum(merged.loc[idx, "low"], body.min(axis=1))
    return DailySeries(ticker=series.ticker, sector=series.sector, frame=merged)


def _fraction_within(base: np.ndarray, alt: np.ndarray, tol: float) -> float:
    equal = base == alt
    with np.errstate(divide="ignore", invalid="ignore"):
        rel = np.abs(base - alt) / np.abs(alt)
    ok = equal | (np.isfinite(rel) & (rel <= tol))
    return float(ok.mean()) if base.size else 1.0


def _rel_errors(base: np.ndarray, alt: np.ndarray) -> np.ndarray:
    out = np.zeros(base.size)
    nz = alt != 0
    out[nz] = np.abs(base[nz] - alt[nz]) / np.abs(alt[nz])
    out[~nz & (base != 0)] = np.inf
    return out


def _event_match(base: pd.DataFrame, alt: pd.DataFrame, col: str, neutral: float):
    b = base.loc[base[col] != neutral, ["date", col]]
    a = alt.loc[alt[col] != neutral, ["date", col]]
    union = set(b["date"]) | set(a["date"])
    if not union:
        return 1.0, 1.0, 1.0
    both = b.merge(a, on="date", suffixes=("_b", "_a"))
    date_match = len(both) / len(union)
    if len(both) == 0:
        return date_match, 1.0, 1.0
    bb, aa = both[f"{col}_b"].to_numpy(), both[f"{col}_a"].to_numpy()
    exact = float((bb == aa).mean())
    within = _fraction_within(bb, aa, 0.01)
    return date_match, exact, within


def reconcile(
    base: DailySeries,
    alt: DailySeries,
    tolerance: float = ADJ_CLOSE_TOLERANCE,
    violation_limit: float = DEFAULT_VIOLATION_LIMIT,
) -> tuple[DailySeries, ReconciliationReport]:
    """Drop base rows whose adjusted close disagrees with alt by more than the tolerance.

    Only date-matched rows are compared; base-only dates are kept untouched.
    Dividend/split agreement is reported, never corrected. Kept rows are the
    base rows verbatim.
    """
    if base.ticker != alt.ticker:
        raise ValueError(f"ticker mismatch: {base.ticker} vs {alt.ticker}")
    bf, af = base.frame, alt.frame
    common = bf.merge(af, on="date", suffixes=("_b", "_a"))
    if common.empty:
        raise ValueError("no common dates")

    rel_adj = np.abs(common["adj_close_b"] - common["adj_close_a"]) / common["adj_close_a"]
    bad_dates = set(common.loc[rel_adj > tolerance, "date"])
    kept = bf[~bf["date"].isin(bad_dates)].reset_index(drop=True)

    fractions = {
        col: _fraction_within(common[f"{col}_b"].to_numpy(), common[f"{col}_a"].to_numpy(), 0.01)
        for col in COMPARE_FIELDS
    }
    q99 = {
        col: float(np.quantile(_rel_errors(common[f"{col}_b"].to_numpy(), common[f"{col}_a"].to_numpy()), 0.99))
        for col in COMPARE_FIELDS
    }
    div_date, div_exact, div_within = _event_match(bf, af, "dividend", 0.0)
    spl_date, spl_exact, spl_within = _event_match(bf, af, "split", 1.0)
    rejected = len(bad_dates) / len(common) > violation_limit
    report = ReconciliationReport(
        ticker=base.ticker,
        fraction_within_1pct=fractions,
        q99_error=q99,
        rows_dropped=len(bad_dates),
        matched_rows=len(common),
        stock_rejected=rejected,
        dividend_date_match=div_date,
        dividend_exact_match=div_exact,
        dividend_within_1pct=div_within,
        split_date_match=spl_date,
        split_exact_match=spl_exact,
        split_within_1pct=spl_within,
    )
    out = DailySeries(ticker=base.ticker, sector=base.sector, frame=kept)
    return out, report


def write_reconciliation_report(report: ReconciliationReport, path: str | Path) -> None:
    lines = [f"ticker = {report.ticker}"]
    for col in COMPARE_FIELDS:
        lines.append(f"within_1pct.{col} = {report.fraction_within_1pct[col]:.6f}")
    for col in COMPARE_FIELDS:
        lines.append(f"q99_error.{col} = {report.q99_error[col]:.6f}")
    lines += [
        f"rows_dropped = {report.rows_dropped}",
        f"matched_rows = {report.matched_rows}",
        f"stock_rejected = {str(report.stock_rejected).lower()}",
        f"dividend.date_match = {report.dividend_date_match:.6f}",
        f"dividend.exact_match = {report.dividend_exact_match:.6f}",
        f"dividend.within_1pct = {report.dividend_within_1pct:.6f}",
        f"split.date_match = {report.split_date_match:.6f}",
        f"split.exact_match = {report.split_exact_match:.6f}",
        f"split.within_1pct = {report.split_within_1pct:.6f}",
    ]
    Path(path).write_text("\n".join(lines) + "\n")


def week_end_friday(d: date) -> date:
    """The Friday ending the week containing d (Sat/Sun roll to the next Friday)."""
    return d + timedelta(days=(4 - d.weekday()) % 7)


def weekly_aggregate(series: DailySeries) -> WeeklySeries:
    """Average log adjusted close per Friday-ended week; return = week-over-week difference.

    Weeks with no trading days are simply absent; the return bridges across them.
    """
    f = series.frame
    if f.empty:
        raise ValueError(f"{series.ticker}: insufficient history")
    week_end = f["date"].map(week_end_friday)
    log_adj = np.log(f["adj_close"].to_numpy())
    g = pd.DataFrame({"week_end": week_end, "log_adj": log_adj}).groupby("week_end", sort=True)
    weekly = g["log_adj"].mean().reset_index()
    weekly.columns = ["week_end", "avg_log_adj_close"]
    if len(weekly) < 2:
        raise ValueError(f"{series.ticker}: insufficient history")
    ret = weekly["avg_log_adj_close"].diff()
    weekly["ret"] = ret
    return WeeklySeries(ticker=series.ticker, frame=weekly)


def filter_history(weekly: WeeklySeries, min_years: float = 5.0) -> bool:
    """Keep iff the first-to-last week span reaches min_years (inclusive, 365.25-day years)."""
    f = weekly.frame
    span_days = (f["week_end"].iloc[-1] - f["week_end"].iloc[0]).days
    return span_days >= min_years * DAYS_PER_YEAR


def ingest_ticker(
    base: DailySeries,
    alt: DailySeries,
    grid: list[date],
    min_years: float = 5.0,
    violation_limit: float = DEFAULT_VIOLATION_LIMIT,
) -> tuple[DailySeries, WeeklySeries, ReconciliationReport]:
    """Full per-ticker cleaning chain: repair both sources, reconcile, weekly-aggregate, history-filter."""
    base_r = repair_series(base, grid)
    alt_r = repair_series(alt, grid)
    merged, report = reconcile(base_r, alt_r, violation_limit=violation_limit)
    if report.stock_rejected:
        raise StockRejected(
            f"{base.ticker}: {report.rows_dropped}/{report.matched_rows} rows beyond the "
            f"{ADJ_CLOSE_TOLERANCE:.0%} adjusted-close tolerance"
        )
    weekly = weekly_aggregate(merged)
    if not filter_history(weekly, min_years):
        raise StockRejected(f"{base.ticker}: history span below {min_years} years")
    return merged, weekly, report
