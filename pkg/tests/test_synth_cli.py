import hashlib
import json
from pathlib import Path

import numpy as np
import pandas as pd
import pytest

from stackcast import cli, synth
from stackcast import market_data as md


def tree_digest(root: Path) -> dict:
    out = {}
    for p in sorted(root.rglob("*")):
        if p.is_file():
            out[str(p.relative_to(root))] = hashlib.sha256(p.read_bytes()).hexdigest()
    return out


class TestSynth:
    def test_same_seed_identical_trees(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        cfg = synth.SynthConfig(n_stocks=3, years=3, seed=9)
        synth.generate(cfg, a)
        synth.generate(cfg, b)
        assert tree_digest(a) == tree_digest(b)

    def test_weekly_pipeline_recovers_injected_returns(self, tmp_path):
        cfg = synth.SynthConfig(n_stocks=2, years=3, seed=4, bad_row_rate=0.0, drop_day_rate=0.0)
        synth.generate(cfg, tmp_path)
        ticker = "SAA"
        series = md.load_bars_csv(tmp_path / "base" / f"{ticker}.csv", ticker, "Energy")
        weekly = md.weekly_aggregate(series)
        sent = pd.read_csv(tmp_path / "sentiment.csv", parse_dates=["week_end"])
        sent = sent[sent["ticker"] == ticker].reset_index(drop=True)
        merged = weekly.frame.merge(sent, on="week_end")
        # return at t+1 = 0.3*tanh(signal_t) + noise: regression slope near 0.3
        x = np.tanh(merged["sentiment"].to_numpy()[:-1])
        y = merged["ret"].to_numpy()[1:]
        slope = np.cov(x, y)[0, 1] / np.var(x)
        assert slope == pytest.approx(synth.SIGNAL_SCALE, abs=0.08)

    def test_sector_map_valid(self, tmp_path):
        synth.generate(synth.SynthConfig(n_stocks=4, years=3, seed=5), tmp_path)
        sectors = md.load_sector_map(tmp_path / "sectors.csv")
        assert len(sectors) == 4


@pytest.fixture(scope="module")
def chain_dir(tmp_path_factory):
    """synth -> ingest -> features -> backtest -> ensemble -> report on a tiny universe."""
    root = tmp_path_factory.mktemp("chain")
    data, run = root / "data", root / "run"
    assert cli.main(["synth", "--out", str(data), "--stocks", "4", "--years", "5", "--seed", "3"]) == 0
    cfg = {
        "seed": 11, "data_dir": str(data), "run_dir": str(run), "min_years": 4,
        "start": "2000-01-01", "end": "2004-12-31",
        "specs": [
            {"family": "linear", "model_id": "linear_all", "scope": "all_stock",
             "lookback": "rolling_10y", "update": "yearly"},
            {"family": "random_forest", "model_id": "rf_sector", "scope": "per_sector",
             "lookback": "rolling_10y", "update": "yearly", "n_estimators": 20},
            {"family": "ffnn", "model_id": "ffnn_monthly", "scope": "all_stock",
             "lookback": "rolling_10y", "update": "monthly", "max_epochs": 10},
            {"family": "lstm2", "model_id": "lstm2", "scope": "all_stock", "max_epochs": 6},
            {"family": "lstm1_finetune", "model_id": "lstm1_ft", "scope": "all_stock",
             "max_epochs": 6, "finetune_epochs": 3},
        ],
    }
    cfg_path = root / "cfg.json"
    cfg_path.write_text(json.dumps(cfg))
    for cmd in ("ingest", "features", "backtest", "ensemble", "report"):
        assert cli.main([cmd, "--config", str(cfg_path)]) == 0, cmd
    return root


class TestCliChain:
    def test_all_outputs_present(self, chain_dir):
        run = chain_dir / "run"
        for name in ("weekly.csv", "features.csv", "predictions.csv", "skips.csv", "realized.csv",
                     "manifest.json", "transforms.json", "ensemble_predictions.csv",
                     "ensemble_weights.csv", "ensemble_diagnostics.json", "index_predictions.csv",
                     "metrics.csv", "metrics_summary.txt"):
            assert (run / name).exists(), name

    def test_metrics_cover_all_scopes(self, chain_dir):
        metrics = pd.read_csv(chain_dir / "run" / "metrics.csv")
        assert {"stock", "all_stocks", "index"} <= set(metrics["scope"])
        assert "ensemble" in set(metrics["model_id"])
        assert "index_ensemble" in set(metrics["model_id"])

    def test_rerun_report_is_byte_identical(self, chain_dir):
        run = chain_dir / "run"
        before = (run / "metrics.csv").read_bytes()
        assert cli.main(["report", "--config", str(chain_dir / "cfg.json")]) == 0
        assert (run / "metrics.csv").read_bytes() == before

    def test_ensemble_diagnostics_record_one_hot_norms(self, chain_dir):
        diags = json.loads((chain_dir / "run" / "ensemble_diagnostics.json").read_text())
        assert diags
        for d in diags:
            assert d["residual_norm"] <= min(d["one_hot_residual_norms"].values()) + 1e-12


class TestCliErrors:
    def test_synth_determinism_via_cli(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        assert cli.main(["synth", "--out", str(a), "--stocks", "2", "--years", "3", "--seed", "7"]) == 0
        assert cli.main(["synth", "--out", str(b), "--stocks", "2", "--years", "3", "--seed", "7"]) == 0
        assert tree_digest(a) == tree_digest(b)

    def test_report_without_backtest_names_missing_file(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"run_dir": str(tmp_path / "empty_run")}))
        rc = cli.main(["report", "--config", str(cfg)])
        assert rc == 1
        err = capsys.readouterr().err
        assert "predictions" in err

    def test_unknown_flag_nonzero_exit(self):
        with pytest.raises(SystemExit) as exc:
            cli.main(["backtest", "--no-such-flag"])
        assert exc.value.code != 0

    def test_missing_config_field_named(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"run_dir": str(tmp_path / "r"), "data_dir": str(tmp_path)}))
        rc = cli.main(["backtest", "--config", str(cfg)])
        assert rc == 1
        assert "features.csv" in capsys.readouterr().err

    def test_missing_data_dir_named(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"run_dir": str(tmp_path / "r")}))
        rc = cli.main(["ingest", "--config", str(cfg)])
        assert rc == 1
        assert "data_dir" in capsys.readouterr().err

    def test_bad_universe_ticker_named(self, tmp_path, capsys):
        data = tmp_path / "data"
        synth.generate(synth.SynthConfig(n_stocks=2, years=3, seed=1), data)
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({
            "run_dir": str(tmp_path / "r"), "data_dir": str(data), "seed": 1,
            "start": "2000-01-01", "end": "2002-12-31", "universe": ["NOPE"],
        }))
        rc = cli.main(["ingest", "--config", str(cfg)])
        assert rc == 1
        assert "NOPE" in capsys.readouterr().err

    def test_run_root_env_var(self, tmp_path, monkeypatch):
        monkeypatch.setenv("STACKCAST_RUN_ROOT", str(tmp_path))
        data = tmp_path / "data"
        synth.generate(synth.SynthConfig(n_stocks=2, years=3, seed=2), data)
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"run_dir": "nested/run", "data_dir": str(data), "min_years": 2}))
        assert cli.main(["ingest", "--config", str(cfg)]) == 0
        assert (tmp_path / "nested" / "run" / "weekly.csv").exists()


class TestCliLink:
    def test_link_produces_candidates_and_confirmed_links(self, tmp_path):
        data = tmp_path / "data"
        data.mkdir()
        rng = np.random.default_rng(31)
        lines = []
        for tok in list("abcdefghijklmnopqrstuvwxyz") + ["facebook", "inc", "intel", "apple"]:
            vec = rng.normal(size=128)
            lines.append(tok + " " + " ".join(f"{x:.6f}" for x in vec))
        (data / "embeddings.txt").write_text("\n".join(lines) + "\n")
        articles = [
            {"id": "a1", "publish_date": "2003-01-06T10:00:00+0000",
             "headline": {"main": "h"}, "snippet": "s", "lead_paragraph": "p",
             "keywords": [{"name": "organizations", "value": "FACEBOOK, INC.", "rank": 1},
                          {"name": "organizations", "value": "Intel Corporation", "rank": 2},
                          {"name": "subject", "value": "Markets", "rank": 3}]},
        ]
        (data / "articles.jsonl").write_text("\n".join(json.dumps(a) for a in articles) + "\n")
        pd.DataFrame({"ticker": ["FB", "INTC"],
                      "name": ["Facebook Inc", "Intel Inc"]}).to_csv(data / "names.csv", index=False)
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"data_dir": str(data), "run_dir": str(tmp_path / "run"),
                                   "link": {"top_k": 2}}))
        assert cli.main(["link", "--config", str(cfg)]) == 0
        links = pd.read_csv(tmp_path / "run" / "links.csv")
        confirmed = set(zip(links["ticker"], links["keyword"]))
        assert ("FB", "FACEBOOK, INC.") in confirmed
        assert ("INTC", "Intel Corporation") in confirmed
        candidates = pd.read_csv(tmp_path / "run" / "link_candidates.csv")
        assert {"ticker", "keyword", "normalized", "lcs_score", "cosine_score",
                "confirmed"} <= set(candidates.columns)
        # raw keyword strings are preserved so the scorer can exact-match them
        assert "FACEBOOK, INC." in set(candidates["keyword"])
