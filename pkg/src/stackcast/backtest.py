"""Walk-forward protocol engine.

The first two calendar years are warm-up; the initial fit at warmup_end
produces year-3 predictions that bootstrap the ensemble, refits happen at
every yearly (or monthly) boundary from the end of year 3 onward, and the
evaluated period starts in year 4. Rolling lookbacks truncate to available
history. Every prediction for target week w uses only rows whose target is
realized by the fit boundary (< w) and features dated w-1 or earlier, so
mutating data after w leaves predictions through w bitwise unchanged.

All week columns are pandas Timestamps; a missing next week is NaT, which
every window comparison excludes by construction.
"""

from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass
from datetime import date, timedelta

import numpy as np
import pandas as pd

from . import preprocess
from .features import FEATURE_COLUMNS
from .models import ENSEMBLE_BASE_IDS, INDEX_BASE_IDS, SEQUENCE_LENGTH, ModelSpec
from .models import arima as arima_mod
from .models import ffnn as ffnn_mod
from .models import forest as forest_mod
from .models import linear as linear_mod
from .models import lstm as lstm_mod

logger = logging.getLogger(__name__)

PREDICTION_COLUMNS = ["ticker", "week_end", "model_id", "value"]
SKIP_COLUMNS = ["model_id", "ticker", "week_end", "reason"]
ROLLING_YEARS = 10.0


@dataclass(frozen=True)
class Schedule:
    warmup_end: date
    update_boundaries: tuple[date, ...]
    eval_start: date
    lookback: str

    def __post_init__(self):
        dates = (self.warmup_end,) + self.update_boundaries
        for a, b in zip(dates, dates[1:]):
            if b <= a:
                raise ValueError("boundaries must be strictly increasing")

    @property
    def fit_dates(self) -> tuple[date, ...]:
        return (self.warmup_end,) + self.update_boundaries


def _month_end(year: int, month: int) -> date:
    if month == 12:
        return date(year, 12, 31)
    return date(year, month + 1, 1) - timedelta(days=1)


def build_schedule(start: date, end: date, spec: ModelSpec) -> Schedule:
    """Warm-up fit at the end of calendar year 2, refit boundaries from the
    end of year 3 through the last period with weeks left to predict."""
    y0 = start.year
    if end.year < y0 + 2 or end <= start:
        raise ValueError(f"range {start}..{end} too short: need the warm-up plus one prediction year")
    warmup_end = date(y0 + 1, 12, 31)
    if spec.update == "yearly":
        boundaries = [date(y, 12, 31) for y in range(y0 + 2, end.year)]
    else:
        boundaries = []
        y, m = y0 + 2, 1
        while True:
            b = _month_end(y, m)
            if b >= end:
                break
            boundaries.append(b)
            y, m = (y + 1, 1) if m == 12 else (y, m + 1)
    return Schedule(
        warmup_end=warmup_end,
        update_boundaries=tuple(boundaries),
        eval_start=date(y0 + 3, 1, 1),
        lookback=spec.lookback,
    )


@dataclass(frozen=True)
class RunManifest:
    universe: tuple[str, ...]
    start: date
    end: date
    specs: tuple[ModelSpec, ...]
    seed: int
    ensemble_base: tuple[str, ...] = tuple(ENSEMBLE_BASE_IDS)
    index_base: tuple[str, ...] = tuple(INDEX_BASE_IDS)
    ensemble_mode: str = "pooled"
    ensemble_window_years: float = 2.0
    index_window_years: float = 1.0
    index_ticker: str | None = None


@dataclass
class RunResult:
    predictions: pd.DataFrame
    skips: pd.DataFrame
    realized: pd.DataFrame
    eval_start: date
    transforms: list


def prepare_panel(features_df: pd.DataFrame, sector_map: dict[str, str]) -> pd.DataFrame:
    """Attach sectors and the (target, target_week) pair: the next realized
    week's return, which is what every model predicts."""
    missing = [c for c in FEATURE_COLUMNS if c not in features_df.columns]
    if missing:
        raise KeyError(f"feature table missing columns: {missing}")
    panel = features_df.sort_values(["ticker", "week_end"], kind="stable").reset_index(drop=True)
    panel["week_end"] = pd.to_datetime(panel["week_end"])
    panel["sector"] = panel["ticker"].map(sector_map)
    if panel["sector"].isna().any():
        unknown = sorted(panel.loc[panel["sector"].isna(), "ticker"].unique())
        raise KeyError(f"tickers missing from sector map: {unknown}")
    panel["target"] = panel.groupby("ticker")["return_t"].shift(-1)
    panel["target_week"] = panel.groupby("ticker")["week_end"].shift(-1)
    return panel


def _derive_seed(*parts) -> int:
    key = "|".join(str(p) for p in parts)
    return int.from_bytes(hashlib.sha256(key.encode()).digest()[:4], "big")


def _rolling_floor(fit_ts: pd.Timestamp) -> pd.Timestamp:
    return fit_ts - pd.Timedelta(days=int(round(ROLLING_YEARS * 365.25)))


def _train_mask(target_week: pd.Series, fit_ts: pd.Timestamp, lookback: str) -> pd.Series:
    mask = target_week <= fit_ts
    if lookback == "rolling_10y":
        mask &= target_week > _rolling_floor(fit_ts)
    return mask


def _fit_feature_transforms(train: pd.DataFrame, columns: tuple[str, ...],
                            recorder: list | None = None, context: tuple = ()):
    """One transform per column; degenerate columns (constant or too few
    present values) fall back to all-missing, logged."""
    transforms = {}
    for col in columns:
        try:
            transforms[col] = preprocess.fit_transform(train[col].to_numpy(dtype=float))
        except ValueError as exc:
            transforms[col] = None
            logger.info("transform fallback for %s: %s", col, exc)
        if recorder is not None:
            t = transforms[col]
            model_id, fit_date, scope = context
            recorder.append({
                "model_id": model_id, "fit_date": str(fit_date), "scope": scope, "column": col,
                "lambda": None if t is None else t.lambda_,
                "mean": None if t is None else t.mean,
                "sd": None if t is None else t.sd,
            })
    return transforms


def _apply_transforms(rows: pd.DataFrame, transforms, columns: tuple[str, ...], is_test) -> np.ndarray:
    out = np.zeros((len(rows), len(columns)))
    for j, col in enumerate(columns):
        t = transforms[col]
        if t is None:
            continue
        values = rows[col].to_numpy(dtype=float)
        if np.isscalar(is_test):
            out[:, j] = preprocess.apply(values, t, is_test=bool(is_test))
        else:
            out[:, j] = np.where(
                np.asarray(is_test),
                preprocess.apply(values, t, is_test=True),
                preprocess.apply(values, t, is_test=False),
            )
    return out


def _scope_keys(panel: pd.DataFrame, scope: str) -> list[str]:
    if scope == "all_stock":
        return ["all"]
    col = "sector" if scope == "per_sector" else "ticker"
    return sorted(panel[col].unique())


def _scope_filter(rows: pd.DataFrame, scope: str, key: str) -> pd.DataFrame:
    if scope == "all_stock":
        return rows
    col = "sector" if scope == "per_sector" else "ticker"
    return rows[rows[col] == key]


def _min_rows(spec: ModelSpec) -> int:
    if spec.family == "random_forest":
        return forest_mod.MIN_ROWS
    if spec.family == "ffnn":
        return ffnn_mod.MIN_ROWS
    return len(spec.feature_set) + 1


def _fit_tabular(spec: ModelSpec, X: np.ndarray, y: np.ndarray, seed: int):
    if spec.family == "linear":
        return linear_mod.fit_linear(X, y)
    if spec.family == "random_forest":
        return forest_mod.fit_random_forest(X, y, n_estimators=spec.n_estimators,
                                            max_depth=spec.max_depth, seed=seed)
    if spec.family == "ffnn":
        return ffnn_mod.fit_ffnn(X, y, learning_rate=spec.learning_rate, batch_size=spec.batch_size,
                                 max_epochs=spec.max_epochs, patience=spec.patience, seed=seed)
    raise ValueError(f"not a tabular family: {spec.family}")


def _fit_windows(schedule: Schedule, end: date):
    fit_dates = [pd.Timestamp(d) for d in schedule.fit_dates]
    horizon = fit_dates[1:] + [pd.Timestamp(end)]
    return list(zip(fit_dates, horizon))


def _run_tabular_spec(spec: ModelSpec, panel: pd.DataFrame, schedule: Schedule,
                      end: date, run_seed: int, recorder: list | None = None, saver=None):
    preds, skips = [], []
    scope_keys = _scope_keys(panel, spec.scope)
    for fit_ts, next_ts in _fit_windows(schedule, end):
        train_all = panel[_train_mask(panel["target_week"], fit_ts, spec.lookback)]
        predict_all = panel[(panel["target_week"] > fit_ts) & (panel["target_week"] <= next_ts)]
        if predict_all.empty:
            continue
        for key in scope_keys:
            pred_rows = _scope_filter(predict_all, spec.scope, key)
            if pred_rows.empty:
                continue
            rows = _scope_filter(train_all, spec.scope, key).dropna(subset=["target"])
            if len(rows) < _min_rows(spec):
                for r in pred_rows.itertuples(index=False):
                    skips.append((spec.model_id, r.ticker, r.target_week,
                                  f"insufficient training rows ({len(rows)}) at {fit_ts.date()}"))
                continue
            transforms = _fit_feature_transforms(rows, spec.feature_set, recorder,
                                                 (spec.model_id, fit_ts.date(), key))
            X = _apply_transforms(rows, transforms, spec.feature_set, is_test=False)
            y = rows["target"].to_numpy(dtype=float)
            seed = _derive_seed(run_seed, spec.model_id, spec.seed, fit_ts.date(), key)
            model = _fit_tabular(spec, X, y, seed)
            if saver is not None:
                saver(spec, fit_ts.date(), key, model, f"{fit_ts.date()}|{key}|{len(rows)}")
            Xp = _apply_transforms(pred_rows, transforms, spec.feature_set, is_test=True)
            values = model.predict(Xp)
            for r, v in zip(pred_rows.itertuples(index=False), values):
                preds.append((r.ticker, r.target_week, spec.model_id, float(v)))
    return preds, skips


def _run_lstm_spec(spec: ModelSpec, panel: pd.DataFrame, schedule: Schedule,
                   end: date, run_seed: int, recorder: list | None = None, saver=None):
    preds, skips = [], []
    finetune = spec.family == "lstm1_finetune"
    n_layers = 1 if finetune else 2
    by_ticker = {t: g.reset_index(drop=True) for t, g in panel.groupby("ticker", sort=True)}
    for fit_ts, next_ts in _fit_windows(schedule, end):
        predictable = panel[(panel["target_week"] > fit_ts) & (panel["target_week"] <= next_ts)]
        if predictable.empty:
            continue
        train_rows = panel[_train_mask(panel["target_week"], fit_ts, spec.lookback)].dropna(subset=["target"])
        if len(train_rows) < ffnn_mod.MIN_ROWS:
            for r in predictable.itertuples(index=False):
                skips.append((spec.model_id, r.ticker, r.target_week,
                              f"insufficient training rows ({len(train_rows)}) at {fit_ts.date()}"))
            continue
        transforms = _fit_feature_transforms(train_rows, spec.feature_set, recorder,
                                             (spec.model_id, fit_ts.date(), "all"))
        seq_X, seq_Y, seq_ticker = [], [], []
        pred_X, pred_meta = [], []
        for ticker in sorted(by_ticker):
            g = by_ticker[ticker]
            in_sample = (g["week_end"] <= fit_ts).to_numpy()
            Xg = _apply_transforms(g, transforms, spec.feature_set, is_test=~in_sample)
            targets = g["target"].to_numpy(dtype=float)
            tweeks = g["target_week"]
            trainable = _train_mask(tweeks, fit_ts, spec.lookback).to_numpy()
            in_horizon = ((tweeks > fit_ts) & (tweeks <= next_ts)).to_numpy()
            for i in range(SEQUENCE_LENGTH - 1, len(g)):
                idx = [i - 2, i - 1, i]
                if trainable[i]:
                    ys = targets[idx]
                    if np.isnan(ys).any():
                        continue
                    seq_X.append(Xg[idx])
                    seq_Y.append(ys)
                    seq_ticker.append(ticker)
                elif in_horizon[i]:
                    pred_X.append(Xg[idx])
                    pred_meta.append((ticker, tweeks.iloc[i]))
        covered = set(pred_meta)
        for r in predictable.itertuples(index=False):
            if (r.ticker, r.target_week) not in covered:
                skips.append((spec.model_id, r.ticker, r.target_week, "sequence shorter than 3"))
        if not pred_meta or not seq_X:
            for t, w in sorted(pred_meta):
                skips.append((spec.model_id, t, w, f"no training sequences at {fit_ts.date()}"))
            continue
        X = np.asarray(seq_X)
        Y = np.asarray(seq_Y)
        seed = _derive_seed(run_seed, spec.model_id, spec.seed, fit_ts.date(), "all")
        model = lstm_mod.fit_lstm(
            X, Y, n_layers=n_layers, learning_rate=spec.learning_rate, batch_size=spec.batch_size,
            max_epochs=spec.max_epochs, patience=spec.patience, seed=seed,
        )
        if saver is not None:
            saver(spec, fit_ts.date(), "all", model, f"{fit_ts.date()}|all|{len(seq_X)}")
        Xp = np.asarray(pred_X)
        if finetune:
            seq_ticker_arr = np.array(seq_ticker)
            meta_tickers = np.array([t for t, _ in pred_meta])
            values = np.empty(len(pred_meta))
            for ticker in sorted(set(meta_tickers)):
                own = seq_ticker_arr == ticker
                sel = meta_tickers == ticker
                if own.sum() >= SEQUENCE_LENGTH:
                    ft_seed = _derive_seed(run_seed, spec.model_id, spec.seed, fit_ts.date(), ticker)
                    tuned = lstm_mod.finetune_head(
                        model, X[own], Y[own], learning_rate=spec.finetune_lr,
                        max_epochs=spec.finetune_epochs, batch_size=spec.batch_size, seed=ft_seed,
                    )
                    if saver is not None:
                        saver(spec, fit_ts.date(), ticker, tuned,
                              f"{fit_ts.date()}|{ticker}|{int(own.sum())}")
                else:
                    tuned = model
                values[sel] = tuned.predict(Xp[sel])
        else:
            values = model.predict(Xp)
        for (ticker, tw), v in zip(pred_meta, values):
            preds.append((ticker, tw, spec.model_id, float(v)))
    return preds, skips


def _run_arima_spec(spec: ModelSpec, panel: pd.DataFrame, schedule: Schedule,
                    end: date, run_seed: int, saver=None):
    preds, skips = [], []
    windows = _fit_windows(schedule, end)
    for ticker, g in panel.groupby("ticker", sort=True):
        g = g.reset_index(drop=True)
        ret = g["return_t"].to_numpy(dtype=float)
        finite = np.isfinite(ret)
        for fit_ts, next_ts in windows:
            targets = g[(g["target_week"] > fit_ts) & (g["target_week"] <= next_ts)]
            if targets.empty:
                continue
            hist_mask = (g["week_end"] <= fit_ts).to_numpy() & finite
            if spec.lookback == "rolling_10y":
                hist_mask &= (g["week_end"] > _rolling_floor(fit_ts)).to_numpy()
            history = ret[hist_mask]
            if history.size < arima_mod.MIN_OBSERVATIONS:
                for r in targets.itertuples(index=False):
                    skips.append((spec.model_id, ticker, r.target_week,
                                  f"only {history.size} observations at {fit_ts.date()}"))
                continue
            order = arima_mod.select_arima_order(history)
            model = arima_mod.fit_arima(history, order)
            if saver is not None:
                saver(spec, fit_ts.date(), ticker, model, f"{fit_ts.date()}|{ticker}|{history.size}")
            for r in targets.itertuples(index=False):
                upto = (g["week_end"] <= r.week_end).to_numpy() & finite
                if spec.lookback == "rolling_10y":
                    upto &= (g["week_end"] > _rolling_floor(fit_ts)).to_numpy()
                value = arima_mod.forecast_next(model, ret[upto])
                preds.append((ticker, r.target_week, spec.model_id, float(value)))
    return preds, skips


def run_walk_forward(manifest: RunManifest, panel: pd.DataFrame, saver=None) -> RunResult:
    """Fit every spec on every window and emit the prediction table, the skip
    log, and the realized-return table keyed by target week. `saver`, when
    given, is called as saver(spec, fit_date, scope_key, model, train_key)
    after every fit so artifacts can be persisted."""
    panel = panel[panel["ticker"].isin(manifest.universe)].reset_index(drop=True)
    all_preds: list[tuple] = []
    all_skips: list[tuple] = []
    recorder: list = []
    eval_start = None
    for spec in manifest.specs:
        schedule = build_schedule(manifest.start, manifest.end, spec)
        eval_start = schedule.eval_start if eval_start is None else min(eval_start, schedule.eval_start)
        if spec.family == "arima":
            preds, skips = _run_arima_spec(spec, panel, schedule, manifest.end, manifest.seed, saver)
        elif spec.family in ("lstm2", "lstm1_finetune"):
            preds, skips = _run_lstm_spec(spec, panel, schedule, manifest.end, manifest.seed,
                                          recorder, saver)
        else:
            preds, skips = _run_tabular_spec(spec, panel, schedule, manifest.end, manifest.seed,
                                             recorder, saver)
        all_preds.extend(preds)
        all_skips.extend(skips)
        logger.info("%s: %d predictions, %d skips", spec.model_id, len(preds), len(skips))
    predictions = pd.DataFrame(all_preds, columns=PREDICTION_COLUMNS)
    predictions = predictions.sort_values(["model_id", "ticker", "week_end"], kind="stable").reset_index(drop=True)
    if len(predictions) and not np.isfinite(predictions["value"]).all():
        bad = predictions[~np.isfinite(predictions["value"])].iloc[0]
        raise ValueError(f"non-finite prediction: {bad['model_id']} {bad['ticker']} {bad['week_end']}")
    skips_df = pd.DataFrame(all_skips, columns=SKIP_COLUMNS)
    skips_df = skips_df.sort_values(SKIP_COLUMNS[:3], kind="stable").reset_index(drop=True)
    realized = panel[["ticker", "week_end", "return_t"]].rename(columns={"return_t": "realized"})
    realized = realized.dropna(subset=["realized"]).reset_index(drop=True)
    return RunResult(predictions=predictions, skips=skips_df, realized=realized,
                     eval_start=eval_start, transforms=recorder)


def ensemble_fit_dates(start: date, end: date) -> list[pd.Timestamp]:
    """Yearly stacking refits from the end of year 3 (consuming the year-3
    bootstrap predictions) through the last year with weeks left."""
    return [pd.Timestamp(date(y, 12, 31)) for y in range(start.year + 2, end.year)]
