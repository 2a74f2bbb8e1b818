"""Evaluation metrics (DA/UDA/DDA, RMSE, MAE), grouped aggregation, threshold
conditionals, and per-group slope diagnostics.

"Up" means a return >= 0. UDA/DDA report 1 when no qualifying periods exist.
Sums accumulate left-to-right so results match a naive loop transcription of
the formulas bit for bit. The reported tables' RMSE column is inconsistent
with its MAE at the source (smaller than MAE), so both MSE and RMSE are
emitted and downstream consumers choose the heading.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import pandas as pd

METRIC_COLUMNS = ["scope", "model_id", "ticker", "period", "n", "da", "uda", "dda", "rmse", "mse", "mae"]


@dataclass(frozen=True)
class MetricsRecord:
    scope: str  # stock | all_stocks | index
    period: str  # a year like "2005", or "full"
    n: int
    da: float
    uda: float
    dda: float
    rmse: float
    mse: float
    mae: float
    model_id: str = ""
    ticker: str = ""

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be >= 1")
        for name in ("da", "uda", "dda"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0):
                raise ValueError(f"{name} out of [0,1]: {v}")


def compute_metrics(realized, predicted, scope: str = "stock", period: str = "full",
                    model_id: str = "", ticker: str = "") -> MetricsRecord:
    r_list = [float(v) for v in np.asarray(realized, dtype=float)]
    p_list = [float(v) for v in np.asarray(predicted, dtype=float)]
    if len(r_list) != len(p_list):
        raise ValueError(f"length mismatch: {len(r_list)} vs {len(p_list)}")
    n = len(r_list)
    if n < 1:
        raise ValueError("empty inputs")
    matches = 0
    up_real = 0
    up_hits = 0
    down_real = 0
    down_hits = 0
    sq = 0.0
    ab = 0.0
    for r, p in zip(r_list, p_list):
        r_up = r >= 0.0
        p_up = p >= 0.0
        if r_up == p_up:
            matches += 1
        if r_up:
            up_real += 1
            if p_up:
                up_hits += 1
        else:
            down_real += 1
            if not p_up:
                down_hits += 1
        err = r - p
        sq += err * err
        ab += abs(err)
    mse = sq / n
    return MetricsRecord(
        scope=scope,
        period=period,
        n=n,
        da=matches / n,
        uda=1.0 if up_real == 0 else up_hits / up_real,
        dda=1.0 if down_real == 0 else down_hits / down_real,
        rmse=math.sqrt(mse),
        mse=mse,
        mae=ab / n,
        model_id=model_id,
        ticker=ticker,
    )


def aggregate(joined: pd.DataFrame) -> list[MetricsRecord]:
    """Records per (model, stock, year), per (model, stock), and pooled per model.

    `joined` needs columns model_id, ticker, week_end, value, realized.
    Empty groups are impossible by construction (groupby only yields
    populated groups).
    """
    f = joined.copy()
    f["year"] = pd.to_datetime(f["week_end"]).dt.year.astype(str)
    records: list[MetricsRecord] = []
    for (model, ticker, year), g in f.groupby(["model_id", "ticker", "year"], sort=True):
        records.append(compute_metrics(g["realized"], g["value"], "stock", year, model, ticker))
    for (model, ticker), g in f.groupby(["model_id", "ticker"], sort=True):
        records.append(compute_metrics(g["realized"], g["value"], "stock", "full", model, ticker))
    for (model, year), g in f.groupby(["model_id", "year"], sort=True):
        records.append(compute_metrics(g["realized"], g["value"], "all_stocks", year, model))
    for model, g in f.groupby("model_id", sort=True):
        records.append(compute_metrics(g["realized"], g["value"], "all_stocks", "full", model))
    return records


def aggregate_index(joined: pd.DataFrame) -> list[MetricsRecord]:
    """Index-scope records (yearly and full) for a single prediction stream."""
    f = joined.copy()
    f["year"] = pd.to_datetime(f["week_end"]).dt.year.astype(str)
    records = []
    for (model, year), g in f.groupby(["model_id", "year"], sort=True):
        records.append(compute_metrics(g["realized"], g["value"], "index", year, model))
    for model, g in f.groupby("model_id", sort=True):
        records.append(compute_metrics(g["realized"], g["value"], "index", "full", model))
    return records


def records_to_frame(records: list[MetricsRecord]) -> pd.DataFrame:
    rows = [
        {
            "scope": r.scope,
            "model_id": r.model_id,
            "ticker": r.ticker,
            "period": r.period,
            "n": r.n,
            "da": r.da,
            "uda": r.uda,
            "dda": r.dda,
            "rmse": r.rmse,
            "mse": r.mse,
            "mae": r.mae,
        }
        for r in records
    ]
    frame = pd.DataFrame(rows, columns=METRIC_COLUMNS)
    return frame.sort_values(["scope", "model_id", "ticker", "period"], kind="stable").reset_index(drop=True)


@dataclass(frozen=True)
class ThresholdReport:
    theta_up: float
    theta_down: float
    n: int
    up_frequency: float
    up_realized_up_rate: float | None
    up_mean_realized: float | None
    down_frequency: float
    down_direction_accuracy: float | None
    down_mean_predicted: float | None


def threshold_report(predicted, realized, theta_up: float = 0.02, theta_down: float = -0.05) -> ThresholdReport:
    """Conditionals around large predicted gains and large realized losses.

    Given a prediction >= theta_up: how often the stock actually went up and
    the mean realized return. Given a realized loss <= theta_down: how often
    the prediction called the direction and the mean predicted value.
    """
    p = np.asarray(predicted, dtype=float)
    r = np.asarray(realized, dtype=float)
    if p.size != r.size:
        raise ValueError("length mismatch")
    n = p.size
    up = p >= theta_up
    down = r <= theta_down
    return ThresholdReport(
        theta_up=theta_up,
        theta_down=theta_down,
        n=n,
        up_frequency=float(up.mean()) if n else 0.0,
        up_realized_up_rate=float((r[up] >= 0).mean()) if up.any() else None,
        up_mean_realized=float(r[up].mean()) if up.any() else None,
        down_frequency=float(down.mean()) if n else 0.0,
        down_direction_accuracy=float((p[down] < 0).mean()) if down.any() else None,
        down_mean_predicted=float(p[down].mean()) if down.any() else None,
    )


def slope_diagnostics(rows: pd.DataFrame, x_col: str, group_col: str,
                      target_col: str = "target") -> tuple[pd.DataFrame, dict]:
    """Per-group simple OLS of next-period return on one column, missing x excluded.

    Groups with fewer than 3 usable points or zero x-variance are skipped.
    Returns the per-group fits plus positive/negative slope counts.
    """
    fits = []
    for key, g in rows.groupby(group_col, sort=True):
        sub = g[[x_col, target_col]].dropna()
        if len(sub) < 3:
            continue
        x = sub[x_col].to_numpy(dtype=float)
        y = sub[target_col].to_numpy(dtype=float)
        vx = x.var()
        if vx == 0.0:
            continue
        slope = float(((x - x.mean()) * (y - y.mean())).mean() / vx)
        intercept = float(y.mean() - slope * x.mean())
        fits.append({"group": key, "slope": slope, "intercept": intercept, "n": len(sub)})
    frame = pd.DataFrame(fits, columns=["group", "slope", "intercept", "n"])
    summary = {
        "groups": len(frame),
        "positive_slopes": int((frame["slope"] > 0).sum()) if len(frame) else 0,
        "negative_slopes": int((frame["slope"] < 0).sum()) if len(frame) else 0,
    }
    return frame, summary
