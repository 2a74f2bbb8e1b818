import math

import numpy as np
import pandas as pd
import pytest

from stackcast.market_data import BAR_COLUMNS


def make_bars(n_days: int, seed: int, start: str = "2005-01-03", scale: float = 50.0) -> pd.DataFrame:
    """Valid random bar frame: positive prices, OHLC ordering, integer volume."""
    rng = np.random.default_rng(seed)
    dates = pd.bdate_range(start, periods=n_days)
    log_close = math.log(scale) + np.cumsum(rng.normal(scale=0.02, size=n_days))
    close = np.exp(log_close)
    open_ = close * np.exp(rng.normal(scale=0.01, size=n_days))
    spread = np.abs(rng.normal(scale=0.008, size=n_days))
    high = np.maximum(open_, close) * np.exp(spread)
    low = np.minimum(open_, close) * np.exp(-spread)
    volume = rng.integers(10_000, 1_000_000, size=n_days).astype(float)
    frame = pd.DataFrame({
        "date": dates,
        "open": open_,
        "high": high,
        "low": low,
        "close": close,
        "adj_close": close,
        "volume": volume,
        "dividend": 0.0,
        "split": 1.0,
    })
    return frame[BAR_COLUMNS]


@pytest.fixture
def bars_40():
    return make_bars(40, seed=20240)


def make_feature_table(n_tickers: int, n_weeks: int, seed: int, start: str = "2000-01-07",
                       signal_scale: float = 0.3, noise_sd: float = 0.2) -> pd.DataFrame:
    """Weekly feature rows with a planted sentiment signal: next week's return
    is signal_scale * tanh(sentiment) + noise."""
    from stackcast.features import FEATURE_COLUMNS

    rng = np.random.default_rng(seed)
    weeks = pd.date_range(start, periods=n_weeks, freq="7D")
    frames = []
    for i in range(n_tickers):
        ticker = f"T{i:02d}"
        sent = np.empty(n_weeks)
        sent[0] = rng.normal()
        for t in range(1, n_weeks):
            sent[t] = 0.7 * sent[t - 1] + np.sqrt(1 - 0.49) * rng.normal()
        ret = np.full(n_weeks, np.nan)
        ret[1:] = signal_scale * np.tanh(sent[:-1]) + noise_sd * rng.normal(size=n_weeks - 1)
        frame = pd.DataFrame({
            "ticker": ticker,
            "week_end": weeks,
            "return_t": ret,
            "cci": rng.normal(scale=80, size=n_weeks),
            "macdh": rng.normal(scale=0.5, size=n_weeks),
            "rsi": rng.uniform(20, 80, size=n_weeks),
            "kdj_k": rng.uniform(10, 90, size=n_weeks),
            "wr": rng.uniform(-90, -10, size=n_weeks),
            "atr_pct": rng.uniform(0.5, 5.0, size=n_weeks),
            "cmf": rng.uniform(-0.5, 0.5, size=n_weeks),
            "pe": rng.uniform(8, 30, size=n_weeks),
            "pb": rng.uniform(1, 5, size=n_weeks),
            "ps": rng.uniform(0.5, 6, size=n_weeks),
            "sentiment": sent,
        })
        frames.append(frame[FEATURE_COLUMNS])
    return pd.concat(frames, ignore_index=True)


def sector_map_for(table) -> dict:
    from stackcast.market_data import SECTORS
    tickers = sorted(table["ticker"].unique())
    return {t: SECTORS[i % 3] for i, t in enumerate(tickers)}
