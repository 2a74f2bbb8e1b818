import json

import pandas as pd
import pytest

from finsent import cli

from conftest import make_article


def test_score_command_end_to_end(tiny_model_dir, article_file, links_file, tmp_path):
    articles = article_file([make_article(i, ["Acme Inc"]) for i in range(1, 9)])
    links = links_file([("ACME", "Acme Inc", "true")])
    out_records = tmp_path / "records.csv"
    out_weekly = tmp_path / "weekly.csv"
    rc = cli.main(["score", "--articles", str(articles), "--links", str(links),
                   "--model", str(tiny_model_dir), "--out-records", str(out_records),
                   "--out-weekly", str(out_weekly)])
    assert rc == 0
    records = pd.read_csv(out_records)
    assert len(records) == 8
    weekly = pd.read_csv(out_weekly)
    assert list(weekly.columns) == ["ticker", "week_end", "sentiment"]
    assert weekly["sentiment"].between(-1, 1).all()


def test_score_unloadable_model_nonzero_exit(article_file, links_file, tmp_path, capsys):
    articles = article_file([make_article(1, ["Acme Inc"])])
    links = links_file([("ACME", "Acme Inc", "true")])
    bad_model = tmp_path / "model"
    bad_model.mkdir()
    (bad_model / "config.json").write_text(json.dumps({"model_type": "bert"}))
    rc = cli.main(["score", "--articles", str(articles), "--links", str(links),
                   "--model", str(bad_model), "--out-records", str(tmp_path / "r.csv"),
                   "--out-weekly", str(tmp_path / "w.csv")])
    assert rc == 1
    assert "cannot load" in capsys.readouterr().err


def test_score_missing_input_named(tmp_path, capsys):
    rc = cli.main(["score", "--articles", str(tmp_path / "a.jsonl"), "--links",
                   str(tmp_path / "l.csv"), "--model", str(tmp_path / "m"),
                   "--out-records", str(tmp_path / "r.csv"), "--out-weekly", str(tmp_path / "w.csv")])
    assert rc == 1
    assert "articles" in capsys.readouterr().err


def test_weekly_command_from_records(tmp_path):
    records = tmp_path / "records.csv"
    pd.DataFrame({
        "ticker": ["T", "T"],
        "article_id": ["a1", "a2"],
        "publish_date": ["2003-01-06T10:00:00+0000", "2003-01-07T10:00:00+0000"],
        "p_pos": [0.7, 0.2], "p_neg": [0.1, 0.6], "p_neutral": [0.2, 0.2],
        "score": [0.6, -0.4],
    }).to_csv(records, index=False)
    out = tmp_path / "weekly.csv"
    assert cli.main(["weekly", "--records", str(records), "--out", str(out)]) == 0
    weekly = pd.read_csv(out)
    assert weekly["sentiment"].iloc[0] == pytest.approx(0.1)


def test_weekly_missing_columns_rejected(tmp_path, capsys):
    records = tmp_path / "records.csv"
    pd.DataFrame({"ticker": ["T"]}).to_csv(records, index=False)
    rc = cli.main(["weekly", "--records", str(records), "--out", str(tmp_path / "w.csv")])
    assert rc == 1
    assert "columns" in capsys.readouterr().err
