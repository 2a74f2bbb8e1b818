import numpy as np
import pandas as pd
import pytest

from stackcast import indicators as ind
from stackcast.market_data import DailySeries

from conftest import make_bars
from indicator_oracle import oracle_indicators

COLUMNS = ind.INDICATOR_COLUMNS

# computed once with the loop oracle on make_bars(40, seed=20240), rows 34..39
FROZEN_40DAY = {
    "cci": [90.16540473631129, 32.029486605764006, 125.80295667399984, 148.7500664884446, 131.31944088159253, 105.20392279827934],
    "macdh": [0.3955685158895059, 0.3463312521146731, 0.421068105339077, 0.486496796860714, 0.49728979471724477, 0.4878038735230501],
    "rsi": [51.936589742208916, 47.171655205649586, 54.78479062589871, 56.76717656972085, 56.01326751409872, 56.38468512415133],
    "kdj_k": [67.73156862254514, 67.64787945574234, 76.08299903632627, 77.32953658342778, 82.11864318611563, 77.94939912946575],
    "wr": [-22.348961734185785, -38.2499410358261, -11.152100121009273, -18.609349092881313, -23.882621227762517, -23.659832290958935],
    "atr_pct": [3.242977243681516, 3.256482188844616, 3.2189643840277946, 3.285638542408769, 3.249950978032402, 3.2714046109091046],
    "cmf": [0.10695128393774826, 0.100653744195022, 0.10491505550289755, 0.06896482889880745, 0.012154722088932712, 0.003967415714750782],
}


def series_of(frame):
    return DailySeries(ticker="T", sector="Energy", frame=frame)


def oracle_frame(frame):
    return oracle_indicators(frame["high"], frame["low"], frame["adj_close"], frame["volume"])


def test_fixture_matches_loop_oracle(bars_40):
    out = ind.compute_indicators(series_of(bars_40))
    oracle = oracle_frame(bars_40)
    for col in COLUMNS:
        got = out[col].to_numpy()
        exp = np.array(oracle[col])
        np.testing.assert_allclose(got[34:], exp[34:], atol=1e-9, rtol=0)
        assert np.isnan(got[:13]).all()


def test_fixture_matches_frozen_values(bars_40):
    out = ind.compute_indicators(series_of(bars_40))
    for col, expected in FROZEN_40DAY.items():
        np.testing.assert_allclose(out[col].to_numpy()[34:], expected, atol=1e-9, rtol=0)


def test_random_windows_match_oracle():
    for seed in range(25):
        bars = make_bars(60, seed=900 + seed)
        out = ind.compute_indicators(series_of(bars))
        oracle = oracle_frame(bars)
        for col in COLUMNS:
            got = out[col].to_numpy()
            exp = np.array(oracle[col])
            valid = ~np.isnan(exp)
            np.testing.assert_allclose(got[valid], exp[valid], atol=1e-9, rtol=0, err_msg=col)


def test_strictly_increasing_closes_give_rsi_100():
    n = 40
    close = np.linspace(50, 80, n)
    frame = make_bars(n, seed=1)
    for col in ("open", "high", "low", "close", "adj_close"):
        frame[col] = close
    out = ind.compute_indicators(series_of(frame))
    rsi = out["rsi"].dropna()
    assert (rsi == 100.0).all()


def test_constant_price_neutral_values():
    n = 40
    frame = make_bars(n, seed=2)
    for col in ("open", "high", "low", "close", "adj_close"):
        frame[col] = 100.0
    out = ind.compute_indicators(series_of(frame))
    last = out.iloc[-1]
    assert last["cci"] == 0.0
    assert last["macdh"] == 0.0
    assert last["atr_pct"] == 0.0
    assert last["wr"] == -50.0
    assert last["kdj_k"] == 50.0
    assert last["cmf"] == 0.0
    assert last["rsi"] == 50.0  # both Wilder averages are zero


def test_range_invariants_on_random_windows():
    rng = np.random.default_rng(77)
    for _ in range(300):
        bars = make_bars(45, seed=int(rng.integers(1 << 30)))
        out = ind.compute_indicators(series_of(bars))
        assert out["rsi"].dropna().between(0, 100).all()
        assert out["wr"].dropna().between(-100, 0).all()
        assert out["cmf"].dropna().between(-1, 1).all()
        assert (out["atr_pct"].dropna() >= 0).all()
        assert out["kdj_k"].dropna().between(0, 100).all()


def test_too_short_series_raises():
    with pytest.raises(ValueError, match="at least"):
        ind.compute_indicators(series_of(make_bars(30, seed=3)))


def test_shift_equivariance_on_deep_suffix():
    # 400-day base so the EMA/Wilder seed difference decays below 1e-6 by the tail
    base = make_bars(400, seed=41, start="2004-01-05")
    prefix = make_bars(100, seed=42, start="2003-08-11")
    extended = pd.concat([prefix, base], ignore_index=True)
    extended["date"] = pd.bdate_range("2003-08-11", periods=len(extended))
    base = base.copy()
    base["date"] = pd.bdate_range("2003-08-11", periods=len(extended))[100:]
    out_base = ind.compute_indicators(series_of(base))
    out_ext = ind.compute_indicators(series_of(extended)).iloc[100:].reset_index(drop=True)
    tail = slice(-50, None)
    for col in ("cci", "wr", "kdj_k", "cmf"):
        np.testing.assert_array_equal(out_base[col].to_numpy()[tail], out_ext[col].to_numpy()[tail])
    for col in ("rsi", "atr_pct", "macdh"):
        np.testing.assert_allclose(out_base[col].to_numpy()[tail], out_ext[col].to_numpy()[tail],
                                   atol=1e-6, rtol=1e-6)


def test_price_scaling_leaves_ratios_and_scales_macdh():
    bars = make_bars(60, seed=55)
    scaled = bars.copy()
    k = 3.7
    for col in ("open", "high", "low", "close", "adj_close"):
        scaled[col] = scaled[col] * k
    out = ind.compute_indicators(series_of(bars))
    out_k = ind.compute_indicators(series_of(scaled))
    for col in ("cci", "rsi", "kdj_k", "wr", "atr_pct", "cmf"):
        np.testing.assert_allclose(out_k[col].to_numpy()[34:], out[col].to_numpy()[34:], rtol=1e-9)
    np.testing.assert_allclose(out_k["macdh"].to_numpy()[34:], k * out["macdh"].to_numpy()[34:], rtol=1e-9)


def test_adjusted_ohlc_uses_adjustment_factor():
    bars = make_bars(40, seed=9)
    halved = bars.copy()
    halved["adj_close"] = halved["adj_close"] / 2.0  # e.g. a 2:1 split adjustment
    o, h, l, c = ind.adjusted_ohlc(halved)
    np.testing.assert_allclose(h, halved["high"] / 2.0)
    np.testing.assert_allclose(c, halved["adj_close"])
