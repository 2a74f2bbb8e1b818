"""Daily technical indicators: CCI(20), MACD histogram(12,26,9), RSI(14),
stochastic K(14,3), Williams %R(14), ATR%(14), CMF(20).

All price-based inputs are split/dividend-adjusted (open/high/low scaled by
adj_close/close); volume stays raw. Degenerate windows fall back to neutral
values: CCI 0 on zero mean deviation, K 50 and WR -50 when high == low over
the window, money-flow multiplier 0 when a day's high == low. EMAs seed with
the first value; Wilder averages seed with a plain mean over the first window.
Warm-up rows are NaN.
"""

from __future__ import annotations

import numpy as np
import pandas as pd
from numpy.lib.stride_tricks import sliding_window_view

from .market_data import DailySeries

INDICATOR_COLUMNS = ["cci", "macdh", "rsi", "kdj_k", "wr", "atr_pct", "cmf"]
MIN_BARS = 26 + 9  # slow EMA span + signal span, the longest warm-up


def adjusted_ohlc(frame: pd.DataFrame) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Open/high/low scaled by adj_close/close so adjustments cause no artificial jumps."""
    factor = (frame["adj_close"] / frame["close"]).to_numpy()
    o = frame["open"].to_numpy() * factor
    h = frame["high"].to_numpy() * factor
    l = frame["low"].to_numpy() * factor
    c = frame["adj_close"].to_numpy(dtype=float)
    return o, h, l, c


def ema(x: np.ndarray, span: int) -> np.ndarray:
    """Exponential moving average, alpha = 2/(span+1), seeded with x[0]."""
    alpha = 2.0 / (span + 1.0)
    out = np.empty_like(x, dtype=float)
    out[0] = x[0]
    for t in range(1, x.size):
        out[t] = alpha * x[t] + (1.0 - alpha) * out[t - 1]
    return out


def wilder_average(x: np.ndarray, period: int) -> np.ndarray:
    """Wilder recursion a[t] = a[t-1] + (x[t] - a[t-1])/period, seeded with the first-window mean.

    Output index t holds the average over data up to x[t]; entries before
    period-1 are NaN.
    """
    n = x.size
    out = np.full(n, np.nan)
    if n < period:
        return out
    out[period - 1] = x[:period].mean()
    for t in range(period, n):
        out[t] = out[t - 1] + (x[t] - out[t - 1]) / period
    return out


def _rolling(x: np.ndarray, window: int) -> np.ndarray:
    """(n-window+1, window) view of trailing windows."""
    return sliding_window_view(x, window)


def cci(h: np.ndarray, l: np.ndarray, c: np.ndarray, period: int = 20) -> np.ndarray:
    tp = (h + l + c) / 3.0
    out = np.full(c.size, np.nan)
    if c.size < period:
        return out
    win = _rolling(tp, period)
    sma = win.mean(axis=1)
    md = np.abs(win - sma[:, None]).mean(axis=1)
    num = tp[period - 1:] - sma
    vals = np.where(md > 0, num / (0.015 * np.where(md > 0, md, 1.0)), 0.0)
    out[period - 1:] = vals
    return out


def macd_histogram(c: np.ndarray, fast: int = 12, slow: int = 26, signal: int = 9) -> np.ndarray:
    macd = ema(c, fast) - ema(c, slow)
    hist = macd - ema(macd, signal)
    out = np.full(c.size, np.nan)
    start = (slow - 1) + (signal - 1)
    if c.size > start:
        out[start:] = hist[start:]
    return out


def rsi(c: np.ndarray, period: int = 14) -> np.ndarray:
    out = np.full(c.size, np.nan)
    delta = np.diff(c)
    gains = np.maximum(delta, 0.0)
    losses = np.maximum(-delta, 0.0)
    avg_gain = wilder_average(gains, period)
    avg_loss = wilder_average(losses, period)
    for t in range(period - 1, delta.size):
        g, s = avg_gain[t], avg_loss[t]
        if s == 0.0:
            out[t + 1] = 50.0 if g == 0.0 else 100.0
        else:
            out[t + 1] = 100.0 - 100.0 / (1.0 + g / s)
    return out


def stochastic_k(h: np.ndarray, l: np.ndarray, c: np.ndarray, period: int = 14, smooth: int = 3) -> np.ndarray:
    n = c.size
    out = np.full(n, np.nan)
    if n < period + smooth - 1:
        return out
    hh = _rolling(h, period).max(axis=1)
    ll = _rolling(l, period).min(axis=1)
    rng = hh - ll
    rsv = np.where(rng > 0, 100.0 * (c[period - 1:] - ll) / np.where(rng > 0, rng, 1.0), 50.0)
    k = _rolling(rsv, smooth).mean(axis=1)
    out[period + smooth - 2:] = k
    return out


def williams_r(h: np.ndarray, l: np.ndarray, c: np.ndarray, period: int = 14) -> np.ndarray:
    n = c.size
    out = np.full(n, np.nan)
    if n < period:
        return out
    hh = _rolling(h, period).max(axis=1)
    ll = _rolling(l, period).min(axis=1)
    rng = hh - ll
    out[period - 1:] = np.where(rng > 0, -100.0 * (hh - c[period - 1:]) / np.where(rng > 0, rng, 1.0), -50.0)
    return out


def atr_percent(h: np.ndarray, l: np.ndarray, c: np.ndarray, period: int = 14) -> np.ndarray:
    n = c.size
    tr = np.empty(n)
    tr[0] = h[0] - l[0]
    if n > 1:
        prev = c[:-1]
        tr[1:] = np.maximum(h[1:] - l[1:], np.maximum(np.abs(h[1:] - prev), np.abs(l[1:] - prev)))
    atr = wilder_average(tr, period)
    return 100.0 * atr / c


def chaikin_money_flow(h: np.ndarray, l: np.ndarray, c: np.ndarray, v: np.ndarray, period: int = 20) -> np.ndarray:
    n = c.size
    out = np.full(n, np.nan)
    if n < period:
        return out
    rng = h - l
    mfm = np.where(rng > 0, ((c - l) - (h - c)) / np.where(rng > 0, rng, 1.0), 0.0)
    mfv = mfm * v
    num = _rolling(mfv, period).sum(axis=1)
    den = _rolling(v.astype(float), period).sum(axis=1)
    out[period - 1:] = np.where(den > 0, num / np.where(den > 0, den, 1.0), 0.0)
    return out


def compute_indicators(series: DailySeries) -> pd.DataFrame:
    """All seven indicators for one repaired series; warm-up rows NaN."""
    f = series.frame
    if len(f) < MIN_BARS:
        raise ValueError(f"{series.ticker}: need at least {MIN_BARS} bars, got {len(f)}")
    _, h, l, c = adjusted_ohlc(f)
    v = f["volume"].to_numpy(dtype=float)
    return pd.DataFrame(
        {
            "date": f["date"],
            "cci": cci(h, l, c),
            "macdh": macd_histogram(c),
            "rsi": rsi(c),
            "kdj_k": stochastic_k(h, l, c),
            "wr": williams_r(h, l, c),
            "atr_pct": atr_percent(h, l, c),
            "cmf": chaikin_money_flow(h, l, c, v),
        }
    )
