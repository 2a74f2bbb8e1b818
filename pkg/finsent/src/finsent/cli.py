"""finsent command line: score linked articles and aggregate weekly medians."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import pandas as pd

from . import scoring, weekly


def cmd_score(args) -> int:
    for path, name in ((args.articles, "articles"), (args.links, "links"), (args.model, "model")):
        if not Path(path).exists():
            print(f"error: missing {name} path: {path}", file=sys.stderr)
            return 1
    try:
        classifier = scoring.SentimentClassifier.load(args.model)
    except scoring.ModelLoadError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    articles = scoring.load_articles(args.articles)
    links = scoring.load_links(args.links)
    records = scoring.score_articles(articles, links, classifier)
    scoring.write_records_csv(records, args.out_records)
    table = scoring.records_frame(records)
    weekly.write_weekly_csv(weekly.weekly_sentiment(table), args.out_weekly)
    print(f"scored {len(records)} (ticker, article) pairs from {len(articles)} articles")
    return 0


def cmd_weekly(args) -> int:
    if not Path(args.records).exists():
        print(f"error: missing records path: {args.records}", file=sys.stderr)
        return 1
    records = pd.read_csv(args.records)
    missing = {"ticker", "publish_date", "score"} - set(records.columns)
    if missing:
        print(f"error: records file lacks columns: {sorted(missing)}", file=sys.stderr)
        return 1
    weekly.write_weekly_csv(weekly.weekly_sentiment(records), args.out)
    print(f"wrote weekly medians for {records['ticker'].nunique()} tickers")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="finsent",
                                     description="finance-news sentiment scoring")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("score", help="classify linked articles and write record + weekly CSVs")
    p.add_argument("--articles", required=True, help="article JSON-lines file")
    p.add_argument("--links", required=True, help="confirmed links CSV (ticker,keyword,confirmed)")
    p.add_argument("--model", required=True, help="local 3-class sentiment checkpoint directory")
    p.add_argument("--out-records", required=True)
    p.add_argument("--out-weekly", required=True)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("weekly", help="recompute weekly medians from a records CSV")
    p.add_argument("--records", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_weekly)
    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
