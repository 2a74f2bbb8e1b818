"""Command-line entry point.

Subcommands: synth, ingest, features, link, backtest, ensemble, report.
Each reads a JSON config (flags override individual fields), validates its
inputs, runs the module chain, and writes into the run directory. Re-running
with unchanged inputs rewrites identical bytes. The STACKCAST_RUN_ROOT
environment variable sets the root that relative run directories resolve
against.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from datetime import date
from pathlib import Path

import numpy as np
import pandas as pd

from . import backtest as bt
from . import ensemble as ens
from . import features as feat
from . import market_data as md
from . import metrics as met
from . import synth as synth_mod
from . import text_linking as tl
from .models import ENSEMBLE_BASE_IDS, INDEX_BASE_IDS, ModelSpec, default_specs

logger = logging.getLogger("stackcast")

SPEC_FIELDS = ("family", "model_id", "scope", "lookback", "update", "seed", "n_estimators",
               "max_depth", "max_epochs", "batch_size", "learning_rate", "patience",
               "finetune_epochs", "finetune_lr")


class ConfigError(ValueError):
    pass


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        return json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc


def _run_dir(cfg: dict, args) -> Path:
    run_dir = getattr(args, "run_dir", None) or cfg.get("run_dir")
    if not run_dir:
        raise ConfigError("missing field: run_dir")
    root = os.environ.get("STACKCAST_RUN_ROOT", "")
    path = Path(root) / run_dir if root and not Path(run_dir).is_absolute() else Path(run_dir)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _data_dir(cfg: dict, args) -> Path:
    data_dir = getattr(args, "data_dir", None) or cfg.get("data_dir")
    if not data_dir:
        raise ConfigError("missing field: data_dir")
    p = Path(data_dir)
    if not p.exists():
        raise ConfigError(f"data_dir does not exist: {p}")
    return p


def _date_field(cfg: dict, args, name: str) -> date:
    raw = getattr(args, name, None) or cfg.get(name)
    if not raw:
        raise ConfigError(f"missing field: {name}")
    try:
        return date.fromisoformat(str(raw))
    except ValueError as exc:
        raise ConfigError(f"field {name} is not an ISO date: {raw}") from exc


def _seed(cfg: dict, args) -> int:
    seed = getattr(args, "seed", None)
    if seed is None:
        seed = cfg.get("seed")
    if seed is None:
        raise ConfigError("missing field: seed")
    return int(seed)


def _universe(cfg: dict, sector_map: dict[str, str]) -> list[str]:
    tickers = sorted(sector_map)
    if cfg.get("universe"):
        requested = list(cfg["universe"])
        unknown = sorted(set(requested) - set(tickers))
        if unknown:
            raise ConfigError(f"universe tickers missing from sector map: {unknown}")
        return requested
    return tickers


def _specs(cfg: dict, seed: int) -> list[ModelSpec]:
    raw = cfg.get("specs", "default")
    if raw == "default" or raw is None:
        return default_specs(seed)
    specs = []
    for entry in raw:
        unknown = set(entry) - set(SPEC_FIELDS)
        if unknown:
            raise ConfigError(f"unknown spec fields: {sorted(unknown)}")
        if "family" not in entry or "model_id" not in entry:
            raise ConfigError("each spec needs family and model_id")
        specs.append(ModelSpec(**entry))
    return specs


def _write_json(path: Path, payload) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True, default=str) + "\n")


def _write_csv(frame: pd.DataFrame, path: Path) -> None:
    frame.to_csv(path, index=False, date_format="%Y-%m-%d")


# ---------------------------------------------------------------- commands


def cmd_synth(args) -> int:
    cfg = _load_config(args.config)
    out = Path(args.out or cfg.get("data_dir") or "")
    if not str(out):
        raise ConfigError("missing field: out (or data_dir)")
    config = synth_mod.SynthConfig(
        n_stocks=args.stocks, years=args.years, seed=args.seed,
    )
    manifest = synth_mod.generate(config, out)
    print(f"synth universe: {len(manifest['tickers'])} stocks, {manifest['weeks']} weeks -> {out}")
    return 0


def cmd_ingest(args) -> int:
    cfg = _load_config(args.config)
    data = _data_dir(cfg, args)
    run = _run_dir(cfg, args)
    min_years = float(cfg.get("min_years", 5.0))
    violation_limit = float(cfg.get("violation_limit", md.DEFAULT_VIOLATION_LIMIT))
    sector_map = md.load_sector_map(data / "sectors.csv")
    universe = _universe(cfg, sector_map)
    clean_dir = run / "clean"
    report_dir = run / "reports"
    clean_dir.mkdir(exist_ok=True)
    report_dir.mkdir(exist_ok=True)
    weekly_frames = []
    rejected = []
    for ticker in universe:
        base_path = data / "base" / f"{ticker}.csv"
        alt_path = data / "alt" / f"{ticker}.csv"
        if not base_path.exists():
            raise ConfigError(f"missing bar file: {base_path}")
        if not alt_path.exists():
            raise ConfigError(f"missing bar file: {alt_path}")
        base = md.load_bars_csv(base_path, ticker, sector_map[ticker])
        alt = md.load_bars_csv(alt_path, ticker, sector_map[ticker])
        grid = sorted(set(base.frame["date"]) | set(alt.frame["date"]))
        try:
            merged, weekly, report = md.ingest_ticker(base, alt, grid, min_years=min_years,
                                                      violation_limit=violation_limit)
        except md.StockRejected as exc:
            rejected.append({"ticker": ticker, "reason": str(exc)})
            logger.warning("rejected %s: %s", ticker, exc)
            continue
        md.write_bars_csv(merged, clean_dir / f"{ticker}.csv")
        md.write_reconciliation_report(report, report_dir / f"{ticker}.txt")
        wf = weekly.frame.copy()
        wf.insert(0, "ticker", ticker)
        weekly_frames.append(wf)
    if not weekly_frames:
        raise ConfigError("every ticker was rejected during ingestion")
    weekly = pd.concat(weekly_frames, ignore_index=True)
    _write_csv(weekly, run / "weekly.csv")
    _write_csv(pd.DataFrame(rejected, columns=["ticker", "reason"]), run / "rejected.csv")
    print(f"ingest: {weekly['ticker'].nunique()} tickers kept, {len(rejected)} rejected")
    return 0


def cmd_features(args) -> int:
    cfg = _load_config(args.config)
    data = _data_dir(cfg, args)
    run = _run_dir(cfg, args)
    clean_dir = run / "clean"
    weekly_path = run / "weekly.csv"
    if not weekly_path.exists():
        raise ConfigError(f"missing weekly file (run ingest first): {weekly_path}")
    sector_map = md.load_sector_map(data / "sectors.csv")
    reports_path = data / "reports.csv"
    reports = feat.load_reports_csv(reports_path) if reports_path.exists() else pd.DataFrame(
        columns=feat.REPORT_COLUMNS)
    sentiment_path = data / "sentiment.csv"
    sentiment = feat.load_sentiment_csv(sentiment_path) if sentiment_path.exists() else None
    weekly_all = pd.read_csv(weekly_path)
    weekly_all["week_end"] = pd.to_datetime(weekly_all["week_end"])
    frames = []
    for ticker, wk in weekly_all.groupby("ticker", sort=True):
        bars_path = clean_dir / f"{ticker}.csv"
        if not bars_path.exists():
            raise ConfigError(f"missing cleaned bars: {bars_path}")
        series = md.load_bars_csv(bars_path, ticker, sector_map.get(ticker, ""))
        weekly = md.WeeklySeries(ticker=ticker, frame=wk.drop(columns="ticker").reset_index(drop=True))
        frames.append(feat.build_ticker_features(series, weekly, reports, sentiment))
    table = pd.concat(frames, ignore_index=True)
    feat.write_features_csv(table, run / "features.csv")
    print(f"features: {len(table)} ticker-weeks -> {run / 'features.csv'}")
    return 0


def cmd_link(args) -> int:
    cfg = _load_config(args.config)
    link_cfg = cfg.get("link", {})
    data = _data_dir(cfg, args)
    run = _run_dir(cfg, args)
    articles_path = Path(link_cfg.get("articles") or data / "articles.jsonl")
    embeddings_path = Path(link_cfg.get("embeddings") or data / "embeddings.txt")
    names_path = Path(link_cfg.get("names") or data / "names.csv")
    for p, field in ((articles_path, "articles"), (embeddings_path, "embeddings"), (names_path, "names")):
        if not p.exists():
            raise ConfigError(f"missing {field} file: {p}")
    top_k = int(link_cfg.get("top_k", 5))
    lcs_threshold = float(link_cfg.get("lcs_threshold", tl.DEFAULT_LCS_THRESHOLD))
    cosine_threshold = float(link_cfg.get("cosine_threshold", tl.DEFAULT_COSINE_THRESHOLD))
    rules = tl.load_rules(link_cfg.get("rules"))
    articles = tl.load_articles_jsonl(articles_path)
    table = tl.EmbeddingTable.load(embeddings_path)
    names = pd.read_csv(names_path)
    if list(names.columns) != ["ticker", "name"]:
        raise ConfigError(f"{names_path}: expected header ticker,name")
    raw_keywords: set[str] = set()
    for art in articles:
        raw_keywords.update(art.organization_keywords())
    normalized_to_raw: dict[str, str] = {}
    for kw in sorted(raw_keywords):
        try:
            norm = tl.normalize_name(kw, rules)
        except ValueError:
            continue
        normalized_to_raw.setdefault(norm, kw)
    all_links = []
    review_rows = []
    for row in names.itertuples(index=False):
        norm_name = tl.normalize_name(row.name, rules)
        candidates = tl.match_candidates(row.ticker, norm_name, set(normalized_to_raw), table, top_k,
                                         lcs_threshold=lcs_threshold, cosine_threshold=cosine_threshold)
        for cand in candidates:
            raw = normalized_to_raw[cand.matched_keyword]
            review_rows.append({"ticker": cand.ticker, "keyword": raw,
                                "normalized": cand.matched_keyword,
                                "lcs_score": cand.lcs_score, "cosine_score": cand.cosine_score,
                                "confirmed": cand.confirmed})
            if cand.confirmed:
                all_links.append(tl.EntityLink(cand.ticker, raw, cand.lcs_score,
                                               cand.cosine_score, True))
    _write_csv(pd.DataFrame(review_rows, columns=["ticker", "keyword", "normalized", "lcs_score",
                                                  "cosine_score", "confirmed"]),
               run / "link_candidates.csv")
    tl.write_links_csv(all_links, run / "links.csv")
    print(f"link: {len(all_links)} confirmed links, {len(review_rows)} candidates for review")
    return 0


def _manifest_from_config(cfg: dict, args, sector_map: dict[str, str]) -> bt.RunManifest:
    seed = _seed(cfg, args)
    ecfg = cfg.get("ensemble", {})
    return bt.RunManifest(
        universe=tuple(_universe(cfg, sector_map)),
        start=_date_field(cfg, args, "start"),
        end=_date_field(cfg, args, "end"),
        specs=tuple(_specs(cfg, seed)),
        seed=seed,
        ensemble_base=tuple(ecfg.get("base", ENSEMBLE_BASE_IDS)),
        index_base=tuple(ecfg.get("index_base", INDEX_BASE_IDS)),
        ensemble_mode=ecfg.get("mode", "pooled"),
        ensemble_window_years=float(ecfg.get("window_years", 2.0)),
        index_window_years=float(ecfg.get("index_window_years", 1.0)),
        index_ticker=ecfg.get("index_ticker"),
    )


def cmd_backtest(args) -> int:
    cfg = _load_config(args.config)
    data = _data_dir(cfg, args)
    run = _run_dir(cfg, args)
    features_path = run / "features.csv"
    if not features_path.exists():
        raise ConfigError(f"missing features file (run features first): {features_path}")
    sector_map = md.load_sector_map(data / "sectors.csv")
    manifest = _manifest_from_config(cfg, args, sector_map)
    table = feat.load_features_csv(features_path)
    panel = bt.prepare_panel(table, sector_map)

    handler = logging.FileHandler(run / "logs.txt", mode="w")
    handler.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
    logging.getLogger("stackcast").addHandler(handler)

    saver = None
    if cfg.get("save_models"):
        from .models import save_model
        from .models.serialize import model_to_arrays
        model_dir = run / "models"
        model_dir.mkdir(exist_ok=True)

        def saver(spec, fit_date, scope_key, model, train_key):
            name = f"{spec.model_id}__{fit_date}__{str(scope_key).replace(' ', '-')}.npz"
            save_model(model_dir / name, spec, train_key, model_to_arrays(model))

    try:
        result = bt.run_walk_forward(manifest, panel, saver)
    finally:
        logging.getLogger("stackcast").removeHandler(handler)
        handler.close()
    _write_csv(result.predictions, run / "predictions.csv")
    _write_csv(result.skips, run / "skips.csv")
    _write_csv(result.realized, run / "realized.csv")
    _write_json(run / "transforms.json", result.transforms)
    _write_json(run / "manifest.json", {
        "universe": list(manifest.universe),
        "start": str(manifest.start),
        "end": str(manifest.end),
        "eval_start": str(result.eval_start),
        "seed": manifest.seed,
        "specs": [vars(s) | {"feature_set": list(s.feature_set)} for s in manifest.specs],
        "ensemble": {
            "base": list(manifest.ensemble_base),
            "index_base": list(manifest.index_base),
            "mode": manifest.ensemble_mode,
            "window_years": manifest.ensemble_window_years,
            "index_window_years": manifest.index_window_years,
            "index_ticker": manifest.index_ticker,
        },
    })
    print(f"backtest: {len(result.predictions)} predictions, {len(result.skips)} skips")
    return 0


def cmd_ensemble(args) -> int:
    cfg = _load_config(args.config)
    data = _data_dir(cfg, args)
    run = _run_dir(cfg, args)
    preds_path = run / "predictions.csv"
    if not preds_path.exists():
        raise ConfigError(f"missing predictions file (run backtest first): {preds_path}")
    sector_map = md.load_sector_map(data / "sectors.csv")
    manifest = _manifest_from_config(cfg, args, sector_map)
    preds = pd.read_csv(preds_path)
    preds["week_end"] = pd.to_datetime(preds["week_end"])
    realized = pd.read_csv(run / "realized.csv")
    realized["week_end"] = pd.to_datetime(realized["week_end"])
    fit_dates = bt.ensemble_fit_dates(manifest.start, manifest.end)
    end_ts = pd.Timestamp(manifest.end)

    wide = ens.pivot_predictions(preds, list(manifest.ensemble_base))
    stock_preds, diags, skips = ens.rolling_stack(
        wide, realized, list(manifest.ensemble_base), fit_dates, end_ts,
        manifest.ensemble_window_years, manifest.ensemble_mode, ensemble_id="ensemble")
    _write_csv(stock_preds, run / "ensemble_predictions.csv")
    _write_csv(ens.weights_frame(diags), run / "ensemble_weights.csv")
    _write_json(run / "ensemble_diagnostics.json", [
        {"window_start": str(d.window[0].date() if hasattr(d.window[0], "date") else d.window[0]),
         "window_end": str(d.window[1].date() if hasattr(d.window[1], "date") else d.window[1]),
         "scope": d.scope, "n_rows": d.n_rows, "residual_norm": d.residual_norm,
         "one_hot_residual_norms": d.one_hot_residual_norms, "weights": d.weights}
        for d in diags])
    _write_csv(pd.DataFrame(skips, columns=["model_id", "ticker", "week_end", "reason"]),
               run / "ensemble_skips.csv")

    index_series = None
    if manifest.index_ticker:
        index_series = realized[realized["ticker"] == manifest.index_ticker]
        if index_series.empty:
            raise ConfigError(f"index_ticker {manifest.index_ticker} has no realized returns")
    idx_realized = ens.index_realized(realized, index_series)
    idx_wide = ens.index_features(preds, list(manifest.index_base))
    idx_wide.insert(0, "ticker", "__INDEX__")
    idx_preds, idx_diags, idx_skips = ens.rolling_stack(
        idx_wide, idx_realized.rename(columns={"realized": "realized"}),
        list(manifest.index_base), fit_dates, end_ts,
        manifest.index_window_years, "pooled", ensemble_id="index_ensemble")
    _write_csv(idx_preds, run / "index_predictions.csv")
    _write_csv(ens.weights_frame(idx_diags), run / "index_weights.csv")
    _write_csv(idx_realized, run / "index_realized.csv")
    print(f"ensemble: {len(stock_preds)} stock predictions, {len(idx_preds)} index predictions")
    return 0


def cmd_report(args) -> int:
    cfg = _load_config(args.config)
    run = _run_dir(cfg, args)
    preds_path = run / "predictions.csv"
    if not preds_path.exists():
        raise ConfigError(f"missing predictions file (run backtest first): {preds_path}")
    manifest = json.loads((run / "manifest.json").read_text())
    eval_start = pd.Timestamp(manifest["eval_start"])
    threshold_cfg = cfg.get("threshold", {})
    theta_up = float(threshold_cfg.get("up", 0.02))
    theta_down = float(threshold_cfg.get("down", -0.05))

    preds = pd.read_csv(preds_path)
    preds["week_end"] = pd.to_datetime(preds["week_end"])
    ens_path = run / "ensemble_predictions.csv"
    if ens_path.exists():
        extra = pd.read_csv(ens_path)
        if len(extra):
            extra["week_end"] = pd.to_datetime(extra["week_end"])
            preds = pd.concat([preds, extra], ignore_index=True)
    realized = pd.read_csv(run / "realized.csv")
    realized["week_end"] = pd.to_datetime(realized["week_end"])

    joined = preds.merge(realized, on=["ticker", "week_end"], how="inner")
    joined = joined[joined["week_end"] >= eval_start]
    records = met.aggregate(joined) if len(joined) else []

    idx_path = run / "index_predictions.csv"
    if idx_path.exists():
        idx_preds = pd.read_csv(idx_path)
        if len(idx_preds):
            idx_preds["week_end"] = pd.to_datetime(idx_preds["week_end"])
            idx_realized = pd.read_csv(run / "index_realized.csv")
            idx_realized["week_end"] = pd.to_datetime(idx_realized["week_end"])
            idx_joined = idx_preds.merge(idx_realized, on=["ticker", "week_end"], how="inner")
            idx_joined = idx_joined[idx_joined["week_end"] >= eval_start]
            if len(idx_joined):
                records.extend(met.aggregate_index(idx_joined))

    frame = met.records_to_frame(records)
    _write_csv(frame, run / "metrics.csv")

    plot_dir = run / "plotdata"
    plot_dir.mkdir(exist_ok=True)
    pooled = frame[(frame["scope"].isin(["all_stocks", "index"])) & (frame["period"] != "full")]
    _write_csv(pooled[["scope", "model_id", "period", "n", "da"]], plot_dir / "da_by_year.csv")
    weights_path = run / "ensemble_weights.csv"
    if weights_path.exists():
        _write_csv(pd.read_csv(weights_path), plot_dir / "weight_paths.csv")

    lines = ["model performance (evaluation period, pooled across stocks)", ""]
    summary = frame[(frame["scope"] == "all_stocks") & (frame["period"] == "full")]
    lines.append(f"{'model':<16}{'n':>8}{'DA':>9}{'UDA':>9}{'DDA':>9}{'RMSE':>10}{'MSE':>11}{'MAE':>10}")
    for r in summary.itertuples(index=False):
        lines.append(f"{r.model_id:<16}{r.n:>8}{r.da:>9.4f}{r.uda:>9.4f}{r.dda:>9.4f}"
                     f"{r.rmse:>10.5f}{r.mse:>11.6f}{r.mae:>10.5f}")
    idx_summary = frame[(frame["scope"] == "index") & (frame["period"] == "full")]
    if len(idx_summary):
        lines.append("")
        lines.append("index ensemble")
        for r in idx_summary.itertuples(index=False):
            lines.append(f"{r.model_id:<16}{r.n:>8}{r.da:>9.4f}{r.uda:>9.4f}{r.dda:>9.4f}"
                         f"{r.rmse:>10.5f}{r.mse:>11.6f}{r.mae:>10.5f}")

    ens_only = joined[joined["model_id"] == "ensemble"]
    if len(ens_only):
        trep = met.threshold_report(ens_only["value"], ens_only["realized"], theta_up, theta_down)
        lines += [
            "",
            f"threshold conditionals (ensemble, theta_up={theta_up:+.2%}, theta_down={theta_down:+.2%})",
            f"  predicted >= theta_up: {trep.up_frequency:.2%} of weeks; realized up-rate "
            f"{'-' if trep.up_realized_up_rate is None else format(trep.up_realized_up_rate, '.2%')}; "
            f"mean realized {'-' if trep.up_mean_realized is None else format(trep.up_mean_realized, '+.2%')}",
            f"  realized <= theta_down: {trep.down_frequency:.2%} of weeks; direction accuracy "
            f"{'-' if trep.down_direction_accuracy is None else format(trep.down_direction_accuracy, '.2%')}; "
            f"mean predicted {'-' if trep.down_mean_predicted is None else format(trep.down_mean_predicted, '+.2%')}",
        ]
        scatter = ens_only[ens_only["value"] >= theta_up][["ticker", "week_end", "value", "realized"]]
        _write_csv(scatter, plot_dir / "threshold_scatter.csv")

    features_path = run / "features.csv"
    if features_path.exists():
        table = feat.load_features_csv(features_path)
        table = table.sort_values(["ticker", "week_end"], kind="stable")
        table["target"] = table.groupby("ticker")["return_t"].shift(-1)
        table["year"] = table["week_end"].dt.year
        sent_fits, sent_summary = met.slope_diagnostics(table, "sentiment", "year")
        _write_csv(sent_fits, plot_dir / "sentiment_slopes_by_year.csv")
        ps_fits, ps_summary = met.slope_diagnostics(table, "ps", "ticker")
        _write_csv(ps_fits, plot_dir / "ps_slopes_by_company.csv")
        lines += [
            "",
            f"sentiment slope by year: {sent_summary['positive_slopes']} positive / "
            f"{sent_summary['negative_slopes']} negative of {sent_summary['groups']}",
            f"price-to-sales slope by company: {ps_summary['positive_slopes']} positive / "
            f"{ps_summary['negative_slopes']} negative of {ps_summary['groups']}",
        ]

    (run / "metrics_summary.txt").write_text("\n".join(lines) + "\n")
    print("\n".join(lines))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="stackcast",
                                     description="walk-forward weekly return forecasting with stacking ensembles")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic input universe")
    p.add_argument("--config")
    p.add_argument("--out", help="output data directory")
    p.add_argument("--stocks", type=int, default=50)
    p.add_argument("--years", type=int, default=8)
    p.add_argument("--seed", type=int, default=7)
    p.set_defaults(func=cmd_synth)

    for name, fn, helptext in (
        ("ingest", cmd_ingest, "clean and reconcile the dual-source daily bars"),
        ("features", cmd_features, "build weekly feature rows"),
        ("link", cmd_link, "match news keywords to tickers"),
        ("backtest", cmd_backtest, "run the walk-forward model zoo"),
        ("ensemble", cmd_ensemble, "fit the stacking ensembles"),
        ("report", cmd_report, "compute metrics, diagnostics, and plot data"),
    ):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--config")
        p.add_argument("--data-dir", dest="data_dir")
        p.add_argument("--run-dir", dest="run_dir")
        if name in ("backtest", "ensemble"):
            p.add_argument("--seed", type=int)
            p.add_argument("--start")
            p.add_argument("--end")
        p.set_defaults(func=fn)
    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, FileNotFoundError, KeyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
