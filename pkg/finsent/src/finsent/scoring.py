"""Batch sentiment scoring of linked news articles.

Loads any local 3-class finance-sentiment sequence classifier (positive,
negative, neutral in its id2label), concatenates headline + snippet + lead
paragraph per article, truncates or pads to 128 tokenizer tokens, and emits
score = p_pos - p_neg per linked (ticker, article). Articles with no linked
ticker or no text are skipped with a log entry.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from datetime import datetime
from pathlib import Path

import numpy as np
import pandas as pd

logger = logging.getLogger(__name__)

MAX_TOKENS = 128
RECORD_COLUMNS = ["ticker", "article_id", "publish_date", "p_pos", "p_neg", "p_neutral", "score"]


class ModelLoadError(RuntimeError):
    pass


@dataclass(frozen=True)
class Article:
    id: str
    publish_date: datetime
    text: str
    org_keywords: tuple[str, ...]


@dataclass(frozen=True)
class SentimentRecord:
    ticker: str
    article_id: str
    publish_date: datetime
    p_pos: float
    p_neg: float
    p_neutral: float

    @property
    def score(self) -> float:
        return self.p_pos - self.p_neg

    def __post_init__(self):
        total = self.p_pos + self.p_neg + self.p_neutral
        if min(self.p_pos, self.p_neg, self.p_neutral) < 0 or abs(total - 1.0) > 1e-6:
            raise ValueError(f"invalid probability triple for {self.article_id}: "
                             f"({self.p_pos}, {self.p_neg}, {self.p_neutral})")


def load_articles(path: str | Path) -> list[Article]:
    """JSON-lines articles in the linker's format; headline may be a string or
    an object with a `main` field."""
    articles = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            raw = json.loads(line)
            headline = raw.get("headline", "")
            if isinstance(headline, dict):
                headline = headline.get("main") or ""
            text = " ".join(part for part in (
                headline or "", raw.get("snippet") or "", raw.get("lead_paragraph") or "") if part)
            orgs = tuple(k["value"] for k in raw.get("keywords", [])
                         if k.get("name") == "organizations")
            stamp = str(raw["publish_date"]).replace("+0000", "+00:00")
            articles.append(Article(id=str(raw["id"]),
                                    publish_date=datetime.fromisoformat(stamp),
                                    text=text, org_keywords=orgs))
    return articles


def load_links(path: str | Path) -> dict[str, list[str]]:
    """Confirmed links only: keyword -> sorted tickers."""
    frame = pd.read_csv(path)
    if list(frame.columns) != ["ticker", "keyword", "confirmed"]:
        raise ValueError(f"{path}: expected header ticker,keyword,confirmed")
    confirmed = frame[frame["confirmed"].astype(str).str.lower() == "true"]
    out: dict[str, list[str]] = {}
    for row in confirmed.itertuples(index=False):
        out.setdefault(row.keyword, []).append(row.ticker)
    return {k: sorted(set(v)) for k, v in out.items()}


class SentimentClassifier:
    """A local transformers sequence-classification checkpoint with a
    3-class positive/negative/neutral head."""

    def __init__(self, tokenizer, model, label_order: tuple[int, int, int]):
        self.tokenizer = tokenizer
        self.model = model
        self.label_order = label_order  # indices of (positive, negative, neutral)

    @classmethod
    def load(cls, model_path: str | Path) -> "SentimentClassifier":
        try:
            from transformers import AutoModelForSequenceClassification, AutoTokenizer
            tokenizer = AutoTokenizer.from_pretrained(str(model_path))
            model = AutoModelForSequenceClassification.from_pretrained(str(model_path))
        except Exception as exc:
            raise ModelLoadError(f"cannot load classifier from {model_path}: {exc}") from exc
        id2label = {int(k): str(v).lower() for k, v in model.config.id2label.items()}
        if len(id2label) != 3:
            raise ModelLoadError(f"expected a 3-class head, got labels {id2label}")
        order = []
        for stem in ("pos", "neg", "neu"):
            matches = [i for i, lab in id2label.items() if stem in lab]
            if len(matches) != 1:
                raise ModelLoadError(f"cannot identify '{stem}*' class in labels {id2label}")
            order.append(matches[0])
        model.eval()
        return cls(tokenizer, model, tuple(order))

    def probabilities(self, texts: list[str], batch_size: int = 16) -> np.ndarray:
        """(n, 3) array ordered (positive, negative, neutral)."""
        import torch

        out = []
        with torch.no_grad():
            for start in range(0, len(texts), batch_size):
                batch = texts[start:start + batch_size]
                enc = self.tokenizer(batch, max_length=MAX_TOKENS, truncation=True,
                                     padding="max_length", return_tensors="pt")
                logits = self.model(**enc).logits
                probs = torch.softmax(logits, dim=-1).cpu().numpy()
                out.append(probs[:, list(self.label_order)])
        return np.vstack(out) if out else np.empty((0, 3))


def score_articles(articles: list[Article], links: dict[str, list[str]],
                   classifier: SentimentClassifier) -> list[SentimentRecord]:
    """One record per linked (ticker, article), ordered by (ticker, date, id)."""
    to_score: list[tuple[Article, list[str]]] = []
    for art in articles:
        tickers = sorted({t for kw in art.org_keywords for t in links.get(kw, [])})
        if not tickers:
            logger.info("skip %s: no linked ticker", art.id)
            continue
        if not art.text.strip():
            logger.info("skip %s: empty text", art.id)
            continue
        to_score.append((art, tickers))
    probs = classifier.probabilities([a.text for a, _ in to_score])
    records = []
    for (art, tickers), (p_pos, p_neg, p_neu) in zip(to_score, probs):
        for ticker in tickers:
            records.append(SentimentRecord(ticker=ticker, article_id=art.id,
                                           publish_date=art.publish_date,
                                           p_pos=float(p_pos), p_neg=float(p_neg),
                                           p_neutral=float(p_neu)))
    records.sort(key=lambda r: (r.ticker, r.publish_date, r.article_id))
    return records


def records_frame(records: list[SentimentRecord]) -> pd.DataFrame:
    return pd.DataFrame(
        [{
            "ticker": r.ticker,
            "article_id": r.article_id,
            "publish_date": r.publish_date.strftime("%Y-%m-%dT%H:%M:%S%z"),
            "p_pos": r.p_pos,
            "p_neg": r.p_neg,
            "p_neutral": r.p_neutral,
            "score": r.score,
        } for r in records],
        columns=RECORD_COLUMNS,
    )


def write_records_csv(records: list[SentimentRecord], path: str | Path) -> None:
    records_frame(records).to_csv(path, index=False)
