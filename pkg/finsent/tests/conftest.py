import json
from datetime import datetime, timedelta, timezone

import pytest


WORDS = ["profit", "loss", "growth", "decline", "shares", "market", "company", "quarter",
         "revenue", "forecast", "strong", "weak", "rises", "falls", "deal", "lawsuit"]


@pytest.fixture(scope="session")
def tiny_model_dir(tmp_path_factory):
    """A random 3-class transformer checkpoint built offline: small BERT with a
    wordpiece vocab covering the fixture corpus."""
    import torch
    from transformers import BertConfig, BertForSequenceClassification, BertTokenizer

    root = tmp_path_factory.mktemp("model")
    vocab = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"] + WORDS + list("abcdefghijklmnopqrstuvwxyz")
    vocab_file = root / "vocab.txt"
    vocab_file.write_text("\n".join(vocab) + "\n")
    tokenizer = BertTokenizer(vocab_file=str(vocab_file), do_lower_case=True)
    config = BertConfig(
        vocab_size=len(vocab), hidden_size=32, num_hidden_layers=2, num_attention_heads=2,
        intermediate_size=64, max_position_embeddings=192, num_labels=3,
        id2label={0: "positive", 1: "negative", 2: "neutral"},
        label2id={"positive": 0, "negative": 1, "neutral": 2},
    )
    torch.manual_seed(1234)
    model = BertForSequenceClassification(config)
    model.save_pretrained(root)
    tokenizer.save_pretrained(root)
    return root


def make_article(idx, keywords, text="profit growth strong quarter", when=None):
    when = when or (datetime(2003, 1, 6, 12, 0, tzinfo=timezone.utc) + timedelta(days=idx))
    return {
        "id": f"a{idx:04d}",
        "publish_date": when.strftime("%Y-%m-%dT%H:%M:%S+0000"),
        "headline": {"main": text.split()[0].capitalize() if text else "", "sub": None},
        "snippet": text,
        "lead_paragraph": text,
        "keywords": [{"name": "organizations", "value": kw, "rank": i + 1}
                     for i, kw in enumerate(keywords)],
    }


@pytest.fixture
def article_file(tmp_path):
    def write(rows):
        path = tmp_path / "articles.jsonl"
        path.write_text("\n".join(json.dumps(r) for r in rows) + "\n")
        return path
    return write


@pytest.fixture
def links_file(tmp_path):
    def write(rows):
        path = tmp_path / "links.csv"
        lines = ["ticker,keyword,confirmed"] + [f"{t},{k},{c}" for t, k, c in rows]
        path.write_text("\n".join(lines) + "\n")
        return path
    return write
