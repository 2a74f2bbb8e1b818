"""Acceptance suite: every criterion at its stated tolerance, one printed
pass/fail line each. The desk-scale checks run the full synthetic pipeline
(50 stocks, 8 years, fixed seeds) once per session and share the run.
"""

import json
import time
from datetime import date

import numpy as np
import pandas as pd
import pytest
from scipy.signal import lfilter

from stackcast import cli
from stackcast import ensemble as ens
from stackcast import market_data as md
from stackcast import metrics as met
from stackcast import preprocess as pp
from stackcast import text_linking as tl
from stackcast import backtest as bt
from stackcast import indicators as ind
from stackcast.models import ModelSpec, arima, ffnn, lstm, neural

from conftest import make_bars, make_feature_table, sector_map_for
from indicator_oracle import oracle_indicators
from test_metrics import loop_oracle
from test_text_linking import naive_lcs
from test_ensemble import grid_search_objective, random_problem
from test_models_neural import gradient_check


def criterion(name: str, started: float) -> None:
    print(f"[PASS] {name} ({time.time() - started:.1f}s)")


# --------------------------------------------------------------- criterion 1


def test_metric_oracle_exact():
    t0 = time.time()
    rng = np.random.default_rng(42)
    checked_up_branch = checked_down_branch = 0
    for _ in range(1000):
        n = int(rng.integers(1, 50))
        kind = rng.integers(3)
        if kind == 1:
            realized = np.abs(rng.normal(scale=0.03, size=n))
            checked_down_branch += 1  # no down periods -> DDA degenerate branch
        elif kind == 2:
            realized = -np.abs(rng.normal(scale=0.03, size=n)) - 1e-12
            checked_up_branch += 1  # no up periods -> UDA degenerate branch
        else:
            realized = rng.normal(scale=0.03, size=n)
        predicted = rng.normal(scale=0.03, size=n)
        rec = met.compute_metrics(realized, predicted)
        da, uda, dda, rmse, mse, mae = loop_oracle(realized, predicted)
        assert (rec.da, rec.uda, rec.dda, rec.rmse, rec.mse, rec.mae) == (da, uda, dda, rmse, mse, mae)
    assert checked_up_branch > 100 and checked_down_branch > 100
    assert time.time() - t0 < 1.0
    criterion("metric oracle: exact match on 1000 seeded pairs incl. degenerate branches", t0)


# --------------------------------------------------------------- criterion 2


def test_gap_fill_traces():
    t0 = time.time()
    assert list(md.fill_missing([0, None, None, 4])) == [0.0, 2.0, 3.0, 4.0]
    assert list(md.fill_missing([1.0, None, None])) == [1.0, 1.0, 1.0]
    with pytest.raises(md.StockRejected):
        md.fill_missing([1.0] + [None] * 11 + [2.0])
    assert time.time() - t0 < 1.0
    criterion("half-gap fill traces: interior, trailing, 11-gap rejection", t0)


# --------------------------------------------------------------- criterion 3


def test_lcs_oracle_exact():
    t0 = time.time()
    rng = np.random.default_rng(7)
    alphabet = "abcdefg "
    for _ in range(1000):
        la, lb = rng.integers(0, 21, size=2)
        a = "".join(rng.choice(list(alphabet), size=la))
        b = "".join(rng.choice(list(alphabet), size=lb))
        assert tl.lcs_length(a, b) == naive_lcs(a, b)
        if a or b:
            expected = 0.0 if not a or not b else 2.0 * naive_lcs(a, b) / (len(a) + len(b))
            assert tl.lcs_similarity(a, b) == expected
    assert time.time() - t0 < 5.0
    criterion("LCS: exact match with DP oracle on 1000 random pairs", t0)


# --------------------------------------------------------------- criterion 4


def test_nnls_kkt_grid_and_perfect_column():
    t0 = time.time()
    rng = np.random.default_rng(11)
    for _ in range(200):
        cols = int(rng.integers(3, 7))
        P, y = random_problem(rng, cols)
        w = ens.fit_nnls(P, y)
        grad = P.T @ (P @ w - y)
        assert (w >= 0).all()
        assert grad.min() >= -1e-8
        assert np.abs(w * grad).max() <= 1e-8
    rng = np.random.default_rng(12)
    for _ in range(25):
        P, y = random_problem(rng, 3)
        w = ens.fit_nnls(P, y)
        obj = float(np.sum((y - P @ w) ** 2))
        grid_obj, _ = grid_search_objective(P, y)
        assert abs(obj - grid_obj) <= 1e-6
    y = np.random.default_rng(13).normal(size=40)
    assert abs(ens.fit_nnls(y[:, None], y)[0] - 1.0) <= 1e-10
    assert time.time() - t0 < 30.0
    criterion("NNLS: KKT <= 1e-8 on 200 problems, grid oracle within 1e-6, perfect column", t0)


# --------------------------------------------------------------- criterion 5


def test_gradient_checks():
    t0 = time.time()
    rng = np.random.default_rng(42)
    X = rng.normal(size=(32, 12))
    y = rng.normal(size=32) * 2 + 1
    params = ffnn.init_params(12, 48, rng)
    err = gradient_check(lambda p, a, b: ffnn.loss_and_grad(p, a, b, None, dropout=0.0),
                         params, (X, y))
    assert err < 1e-4, f"ffnn rel error {err}"
    Xs = rng.normal(size=(16, 3, 12))
    ys = rng.normal(size=(16, 3)) * 2 + 1
    for n_layers in (1, 2):
        lp = lstm.init_params(12, 32, n_layers, rng)
        err = gradient_check(lambda p, a, b: lstm.loss_and_grad(p, a, b, None, n_layers, dropout=0.0),
                             lp, (Xs, ys))
        assert err < 1e-4, f"lstm{n_layers} rel error {err}"
    assert time.time() - t0 < 60.0
    criterion("gradient checks: FFNN-48 and 3-step LSTM-32 vs central differences < 1e-4", t0)


# --------------------------------------------------------------- criterion 6


def test_no_lookahead_bitwise_five_cuts():
    t0 = time.time()
    table = make_feature_table(12, 190, seed=5)
    sectors = sector_map_for(table)
    specs = (
        ModelSpec("linear", "linear_all", scope="all_stock", lookback="rolling_10y"),
        ModelSpec("ffnn", "ffnn_y", scope="all_stock", update="yearly", max_epochs=6, patience=6),
    )
    manifest = bt.RunManifest(universe=tuple(sorted(table["ticker"].unique())),
                              start=date(2000, 1, 1), end=date(2003, 12, 31),
                              specs=specs, seed=3)
    panel = bt.prepare_panel(table, sectors)
    base = bt.run_walk_forward(manifest, panel)
    weeks = sorted(panel["week_end"].unique())
    rng = np.random.default_rng(0)
    cuts = rng.choice(np.arange(110, len(weeks) - 5), size=5, replace=False)
    for cut_idx in cuts:
        cutoff = weeks[int(cut_idx)]
        mutated = table.copy()
        after = mutated["week_end"] > cutoff
        mutated.loc[after, ["sentiment", "rsi", "cci", "return_t"]] = 123.0
        out = bt.run_walk_forward(manifest, bt.prepare_panel(mutated, sectors))
        left = base.predictions[base.predictions["week_end"] <= cutoff].reset_index(drop=True)
        right = out.predictions[out.predictions["week_end"] <= cutoff].reset_index(drop=True)
        pd.testing.assert_frame_equal(left, right, check_exact=True)
        assert len(left) > 0
    assert time.time() - t0 < 300.0
    criterion("no-lookahead: predictions <= t bitwise unchanged at 5 random cuts", t0)


# --------------------------------------------------------------- criterion 7


def test_indicator_ranges_and_fixture():
    t0 = time.time()
    rng = np.random.default_rng(99)
    n_windows, width = 10_000, 45
    rets = rng.normal(scale=0.03, size=(n_windows, width))
    close = 40.0 * np.exp(np.cumsum(rets, axis=1))
    open_ = close * np.exp(rng.normal(scale=0.01, size=close.shape))
    spread = np.abs(rng.normal(scale=0.01, size=close.shape))
    high = np.maximum(open_, close) * np.exp(spread)
    low = np.minimum(open_, close) * np.exp(-spread)
    volume = rng.integers(1, 1_000_000, size=close.shape).astype(float)
    for i in range(n_windows):
        h, l, c, v = high[i], low[i], close[i], volume[i]
        r = ind.rsi(c)
        assert np.all((r[~np.isnan(r)] >= 0) & (r[~np.isnan(r)] <= 100))
        w = ind.williams_r(h, l, c)
        assert np.all((w[~np.isnan(w)] >= -100) & (w[~np.isnan(w)] <= 0))
        m = ind.chaikin_money_flow(h, l, c, v)
        assert np.all((m[~np.isnan(m)] >= -1) & (m[~np.isnan(m)] <= 1))
    bars = make_bars(40, seed=20240)
    out = ind.compute_indicators(md.DailySeries(ticker="T", sector="Energy", frame=bars))
    oracle = oracle_indicators(bars["high"], bars["low"], bars["adj_close"], bars["volume"])
    for col in ind.INDICATOR_COLUMNS:
        got = out[col].to_numpy()[34:]
        exp = np.array(oracle[col])[34:]
        np.testing.assert_allclose(got, exp, atol=1e-9, rtol=0)
    assert time.time() - t0 < 30.0
    criterion("indicators: range invariants on 10000 windows, fixture vs oracle at 1e-9", t0)


# --------------------------------------------------------------- criterion 8


def test_yeo_johnson_criteria():
    t0 = time.time()
    rng = np.random.default_rng(21)
    for dist in (rng.lognormal(size=800), rng.normal(2, 3, size=800), -rng.gamma(2.0, size=800)):
        t = pp.fit_transform(dist)
        z = pp.apply(dist, t, is_test=False)
        assert abs(z.mean()) < 1e-8
        assert abs(z.var() - 1.0) < 1e-6
    for lam in rng.uniform(-5, 5, size=50):
        x = np.sort(rng.choice(np.round(rng.normal(scale=20, size=400), 6), size=100, replace=False))
        z = pp.yeo_johnson(x, lam)
        assert np.all(np.diff(z) > 0)
    t = pp.ColumnTransform(lambda_=1.0, mean=0.0, sd=1.0)
    assert pp.apply([7.2], t, is_test=True)[0] == 4.5
    assert pp.apply([-123.0], t, is_test=True)[0] == -4.5
    assert time.time() - t0 < 10.0
    criterion("Yeo-Johnson: train standardization, monotonicity, 4.5 test cap", t0)


# --------------------------------------------------------------- criterion 9


def test_arima_order_selection_rates():
    t0 = time.time()
    wn_hits = 0
    for seed in range(50):
        _, d, _ = arima.select_arima_order(np.random.default_rng(seed).normal(size=500))
        wn_hits += d == 0
    ar_hits = 0
    for seed in range(50):
        eps = np.random.default_rng(seed).normal(size=550)
        y = lfilter([1.0], [1.0, -0.5], eps)[50:]
        p, d, _ = arima.select_arima_order(y)
        ar_hits += (p >= 1 and d == 0)
    assert wn_hits >= 45, f"white noise d=0 in {wn_hits}/50"
    assert ar_hits >= 40, f"AR(1) p>=1,d=0 in {ar_hits}/50"
    assert time.time() - t0 < 120.0
    criterion(f"ARIMA order selection: white noise {wn_hits}/50 (>=45), AR(1) {ar_hits}/50 (>=40)", t0)


# ------------------------------------------------- criteria 10 and 11 (shared run)


@pytest.fixture(scope="session")
def synthetic_run(tmp_path_factory):
    """The 50-stock, 8-year seeded panel through the full default pipeline."""
    root = tmp_path_factory.mktemp("acceptance")
    data, run = root / "data", root / "run"
    t0 = time.time()
    assert cli.main(["synth", "--out", str(data), "--stocks", "50", "--years", "8", "--seed", "7"]) == 0
    cfg = {"seed": 7, "data_dir": str(data), "run_dir": str(run),
           "start": "2000-01-01", "end": "2007-12-31", "specs": "default"}
    cfg_path = root / "cfg.json"
    cfg_path.write_text(json.dumps(cfg))
    for cmd in ("ingest", "features", "backtest", "ensemble", "report"):
        assert cli.main([cmd, "--config", str(cfg_path)]) == 0, cmd
    return {"run": run, "elapsed": time.time() - t0}


def test_desk_scale_ensemble_ordering(synthetic_run):
    t0 = time.time()
    run = synthetic_run["run"]
    metrics = pd.read_csv(run / "metrics.csv")
    pooled = metrics[(metrics["scope"] == "all_stocks") & (metrics["period"] == "full")]
    da = dict(zip(pooled["model_id"], pooled["da"]))
    ensemble_da = da["ensemble"]

    preds = pd.read_csv(run / "ensemble_predictions.csv", parse_dates=["week_end"])
    realized = pd.read_csv(run / "realized.csv", parse_dates=["week_end"])
    manifest = json.loads((run / "manifest.json").read_text())
    joined = preds.merge(realized, on=["ticker", "week_end"])
    joined = joined[joined["week_end"] >= pd.Timestamp(manifest["eval_start"])]
    always_up_da = float((joined["realized"] >= 0).mean())

    individual = {m: v for m, v in da.items() if m != "ensemble"}
    best_individual = max(individual.values())
    assert ensemble_da >= always_up_da + 0.03, (
        f"ensemble {ensemble_da:.4f} vs always-up {always_up_da:.4f}")
    assert ensemble_da >= best_individual - 0.005, (
        f"ensemble {ensemble_da:.4f} vs best individual {best_individual:.4f}")
    assert synthetic_run["elapsed"] < 600.0, f"pipeline took {synthetic_run['elapsed']:.0f}s"
    criterion(
        f"desk-scale ordering: ensemble DA {ensemble_da:.4f} vs always-up {always_up_da:.4f} "
        f"(+{(ensemble_da - always_up_da) * 100:.1f}pt) and best individual {best_individual:.4f}; "
        f"pipeline {synthetic_run['elapsed']:.0f}s < 600s", t0)


def test_nnls_in_sample_dominance(synthetic_run):
    t0 = time.time()
    diags = json.loads((synthetic_run["run"] / "ensemble_diagnostics.json").read_text())
    assert diags, "no fitted ensemble windows"
    for d in diags:
        for model_id, one_hot in d["one_hot_residual_norms"].items():
            assert d["residual_norm"] <= one_hot, (
                f"window {d['window_start']}: ensemble residual {d['residual_norm']} "
                f"> one-hot {model_id} {one_hot}")
    criterion(f"NNLS in-sample dominance on all {len(diags)} fitted windows", t0)
