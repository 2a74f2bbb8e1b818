"""Weekly per-ticker sentiment: the median score over each Friday-ended week.

Weeks without articles are simply absent; the consumer treats them as missing
(zero after its train-window transform).
"""

from __future__ import annotations

from datetime import date, timedelta
from pathlib import Path

import pandas as pd

WEEKLY_COLUMNS = ["ticker", "week_end", "sentiment"]


def week_end_friday(d: date) -> date:
    return d + timedelta(days=(4 - d.weekday()) % 7)


def weekly_sentiment(records: pd.DataFrame) -> pd.DataFrame:
    """Median score per (ticker, Friday week) from a record table with
    ticker, publish_date, and score columns."""
    if records.empty:
        return pd.DataFrame(columns=WEEKLY_COLUMNS)
    f = records.copy()
    stamps = pd.to_datetime(f["publish_date"], utc=True, format="ISO8601")
    f["week_end"] = [week_end_friday(ts.date()) for ts in stamps]
    grouped = f.groupby(["ticker", "week_end"], sort=True)["score"].median().reset_index()
    grouped.columns = WEEKLY_COLUMNS
    return grouped


def write_weekly_csv(weekly: pd.DataFrame, path: str | Path) -> None:
    weekly.to_csv(path, index=False, date_format="%Y-%m-%d")
