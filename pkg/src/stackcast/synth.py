"""Deterministic synthetic universe for end-to-end runs and acceptance tests.

Each stock carries a latent AR(1) signal injected into its weekly sentiment
feature; next-week returns are 0.3 * tanh(signal) + Gaussian noise. Daily
bars realize the weekly average-log-price path exactly (intra-week jitter is
demeaned in log space), so the cleaned pipeline reproduces the injected
returns. Two bar sources are emitted with sub-1% disagreement, plus a few
dropped days per source and occasional >2% adjusted-close errors to exercise
the repair and reconciliation paths.
"""

from __future__ import annotations

import json
import string
from dataclasses import asdict, dataclass
from datetime import date, timedelta
from pathlib import Path

import numpy as np
import pandas as pd

from .market_data import BAR_COLUMNS, SECTORS, week_end_friday

SIGNAL_SCALE = 0.3


@dataclass(frozen=True)
class SynthConfig:
    n_stocks: int = 50
    years: int = 8
    start_year: int = 2000
    seed: int = 7
    signal_phi: float = 0.7
    noise_sd: float = 0.2
    n_sectors: int = 5
    daily_jitter: float = 0.01
    alt_noise: float = 0.003
    bad_row_rate: float = 0.001
    drop_day_rate: float = 0.002


def _tickers(n: int) -> list[str]:
    letters = string.ascii_uppercase
    out = []
    i = 0
    while len(out) < n:
        a, b = divmod(i, 26)
        out.append(f"S{letters[a]}{letters[b]}")
        i += 1
    return out


def _fridays(start_year: int, years: int) -> list[date]:
    first = week_end_friday(date(start_year, 1, 1))
    last = date(start_year + years - 1, 12, 31)
    out = []
    d = first
    while d <= last:
        out.append(d)
        d += timedelta(days=7)
    return out


def _weekdays_of(friday: date) -> list[date]:
    return [friday - timedelta(days=k) for k in (4, 3, 2, 1, 0)]


def generate(config: SynthConfig, out_dir: str | Path) -> dict:
    """Write the full input tree: base/ and alt/ bar CSVs, sectors.csv,
    names.csv, reports.csv, sentiment.csv, and a synth manifest."""
    out = Path(out_dir)
    (out / "base").mkdir(parents=True, exist_ok=True)
    (out / "alt").mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(config.seed)
    tickers = _tickers(config.n_stocks)
    fridays = _fridays(config.start_year, config.years)
    n_weeks = len(fridays)

    sectors = [SECTORS[i % config.n_sectors] for i in range(config.n_stocks)]
    pd.DataFrame({"ticker": tickers, "sector": sectors}).to_csv(out / "sectors.csv", index=False)
    pd.DataFrame({"ticker": tickers, "name": [f"{t} Holdings Inc" for t in tickers]}).to_csv(
        out / "names.csv", index=False)

    sentiment_rows = []
    report_rows = []
    for si, ticker in enumerate(tickers):
        srng = np.random.default_rng(config.seed + 1000 + si)
        # latent AR(1) signal, unit marginal variance
        eps = srng.normal(size=n_weeks)
        signal = np.empty(n_weeks)
        signal[0] = eps[0]
        innov = np.sqrt(1.0 - config.signal_phi ** 2)
        for t in range(1, n_weeks):
            signal[t] = config.signal_phi * signal[t - 1] + innov * eps[t]
        rets = np.zeros(n_weeks)
        rets[1:] = SIGNAL_SCALE * np.tanh(signal[:-1]) + config.noise_sd * srng.normal(size=n_weeks - 1)
        log_price = np.log(20.0 + 80.0 * srng.random()) + np.cumsum(rets)

        day_rows = []
        for w, friday in enumerate(fridays):
            days = _weekdays_of(friday)
            jitter = srng.normal(scale=config.daily_jitter, size=len(days))
            jitter -= jitter.mean()
            for d, j in zip(days, jitter):
                adj_close = float(np.exp(log_price[w] + j))
                spread = abs(srng.normal(scale=0.004))
                open_ = adj_close * float(np.exp(srng.normal(scale=0.003)))
                high = max(open_, adj_close) * float(np.exp(spread))
                low = min(open_, adj_close) * float(np.exp(-spread))
                volume = float(srng.integers(200_000, 5_000_000))
                day_rows.append((d, open_, high, low, adj_close, adj_close, volume, 0.0, 1.0))
        base = pd.DataFrame(day_rows, columns=["date", "open", "high", "low", "close", "adj_close",
                                               "volume", "dividend", "split"])
        base["date"] = pd.to_datetime(base["date"])
        base = base[BAR_COLUMNS]

        alt = base.copy()
        for col in ("open", "high", "low", "close", "adj_close"):
            alt[col] = alt[col] * (1.0 + srng.uniform(-config.alt_noise, config.alt_noise, len(alt)))
        alt["volume"] = np.round(alt["volume"] * (1.0 + srng.uniform(-0.02, 0.02, len(alt))))
        # a few alt rows disagree beyond the 2% gate -> reconcile drops them from base
        bad = srng.random(len(alt)) < config.bad_row_rate
        alt.loc[bad, "adj_close"] = alt.loc[bad, "adj_close"] * 1.05
        # keep OHLC ordering in the alt copy
        body_high = alt[["open", "close"]].max(axis=1)
        body_low = alt[["open", "close"]].min(axis=1)
        alt["high"] = np.maximum(alt["high"], body_high)
        alt["low"] = np.minimum(alt["low"], body_low)

        keep_base = srng.random(len(base)) >= config.drop_day_rate
        keep_alt = srng.random(len(alt)) >= config.drop_day_rate
        keep_base[0] = keep_alt[0] = True
        base[keep_base].to_csv(out / "base" / f"{ticker}.csv", index=False, date_format="%Y-%m-%d")
        alt[keep_alt].to_csv(out / "alt" / f"{ticker}.csv", index=False, date_format="%Y-%m-%d")

        for w, friday in enumerate(fridays):
            sentiment_rows.append((ticker, friday, float(signal[w])))

        eps_level = 2.0 + 3.0 * srng.random()
        book = 10.0 + 20.0 * srng.random()
        revenue = 30.0 + 40.0 * srng.random()
        q = date(config.start_year, 1, 1)
        while q <= fridays[-1]:
            eps_level *= float(np.exp(srng.normal(scale=0.05)))
            book *= float(np.exp(srng.normal(scale=0.02)))
            revenue *= float(np.exp(srng.normal(scale=0.03)))
            eps_out = eps_level if srng.random() > 0.03 else -abs(eps_level)  # rare loss quarters
            report_rows.append((ticker, q, eps_out, book, revenue))
            month = q.month + 3
            if month > 12:
                q = date(q.year + 1, month - 12, 1)
            else:
                q = date(q.year, month, 1)

    pd.DataFrame(sentiment_rows, columns=["ticker", "week_end", "sentiment"]).to_csv(
        out / "sentiment.csv", index=False, date_format="%Y-%m-%d")
    pd.DataFrame(report_rows, columns=["ticker", "effective_date", "eps_ttm", "book_per_share",
                                       "revenue_per_share_ttm"]).to_csv(
        out / "reports.csv", index=False, date_format="%Y-%m-%d")

    manifest = {"config": asdict(config), "tickers": tickers,
                "start": str(fridays[0]), "end": str(fridays[-1]), "weeks": n_weeks}
    (out / "synth.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest
