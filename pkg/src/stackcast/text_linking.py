"""Link news keywords to tickers by LCS similarity and word-embedding cosine.

Company names and keywords are normalized (lowercase, punctuation stripped,
synonym rewrites like corporation/incorporated/company -> inc, then per-word
first-letter capitalization). Similarity is the insertion/deletion-only edit
similarity 2*LCS/(len(a)+len(b)) plus the cosine of Sqrt-N combined token
embeddings; out-of-dictionary tokens are segmented into in-dictionary pieces
with the fewest splits, ties broken by the lowest piece-length standard
deviation. Candidates are ranked for manual confirmation.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from datetime import datetime
from importlib import resources
from pathlib import Path

import numpy as np
import pandas as pd

EMBED_DIM = 128
DEFAULT_LCS_THRESHOLD = 0.85
DEFAULT_COSINE_THRESHOLD = 0.90


@dataclass(frozen=True)
class Keyword:
    name: str
    value: str
    rank: int


@dataclass(frozen=True)
class NewsArticle:
    id: str
    publish_date: datetime
    headline: str
    snippet: str
    lead_paragraph: str
    keywords: tuple[Keyword, ...]

    def organization_keywords(self) -> list[str]:
        return [k.value for k in self.keywords if k.name == "organizations"]


@dataclass(frozen=True)
class EntityLink:
    ticker: str
    matched_keyword: str
    lcs_score: float
    cosine_score: float
    confirmed: bool


def load_articles_jsonl(path: str | Path) -> list[NewsArticle]:
    articles = []
    with open(path) as fh:
        for line_no, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            raw = json.loads(line)
            headline = raw.get("headline", "")
            if isinstance(headline, dict):
                headline = headline.get("main") or ""
            keywords = []
            for kw in raw.get("keywords", []):
                rank = int(kw["rank"])
                if rank < 1:
                    raise ValueError(f"{path}:{line_no}: keyword rank must be >= 1")
                keywords.append(Keyword(name=kw["name"], value=kw["value"], rank=rank))
            articles.append(
                NewsArticle(
                    id=str(raw["id"]),
                    publish_date=datetime.fromisoformat(str(raw["publish_date"]).replace("+0000", "+00:00")),
                    headline=headline or "",
                    snippet=raw.get("snippet") or "",
                    lead_paragraph=raw.get("lead_paragraph") or "",
                    keywords=tuple(keywords),
                )
            )
    return articles


def load_rules(path: str | Path | None = None) -> list[tuple[str, str]]:
    """Rewrite rules (regex -> replacement); default set ships with the package."""
    if path is None:
        text = resources.files("stackcast.data").joinpath("link_rules.txt").read_text()
    else:
        text = Path(path).read_text()
    rules = []
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        pattern, _, replacement = line.partition("->")
        rules.append((pattern.strip(), replacement.strip()))
    return rules


_PUNCT = re.compile(r"[^0-9a-zA-Z\s]+")
_SPACES = re.compile(r"\s+")


def normalize_name(raw: str, rules: list[tuple[str, str]] | None = None) -> str:
    if rules is None:
        rules = load_rules()
    s = _PUNCT.sub(" ", raw.lower())
    s = _SPACES.sub(" ", s).strip()
    for pattern, replacement in rules:
        s = re.sub(pattern, replacement, s)
    s = _SPACES.sub(" ", s).strip()
    if not s:
        raise ValueError(f"name {raw!r} is empty after cleaning")
    return " ".join(w[:1].upper() + w[1:] for w in s.split(" "))


def lcs_length(a: str, b: str) -> int:
    """Longest common subsequence length, two-row dynamic program over characters."""
    if not a or not b:
        return 0
    prev = [0] * (len(b) + 1)
    for ca in a:
        cur = [0] * (len(b) + 1)
        for j, cb in enumerate(b, 1):
            cur[j] = prev[j - 1] + 1 if ca == cb else max(cur[j - 1], prev[j])
        prev = cur
    return prev[-1]


def lcs_similarity(a: str, b: str) -> float:
    if not a or not b:
        return 0.0
    return 2.0 * lcs_length(a, b) / (len(a) + len(b))


class EmbeddingTable:
    """Token -> 128-dim vectors. All 26 lowercase letters must be present so
    the single-character fallback can always resolve a piece."""

    def __init__(self, vectors: dict[str, np.ndarray]):
        for tok, vec in vectors.items():
            if vec.shape != (EMBED_DIM,):
                raise ValueError(f"token {tok!r}: expected {EMBED_DIM}-dim vector")
        missing = [ch for ch in "abcdefghijklmnopqrstuvwxyz" if ch not in vectors]
        if missing:
            raise ValueError(f"embedding table missing single letters: {missing}")
        self.vectors = vectors

    @classmethod
    def load(cls, path: str | Path) -> "EmbeddingTable":
        vectors = {}
        with open(path) as fh:
            for line in fh:
                parts = line.split()
                if not parts:
                    continue
                vectors[parts[0]] = np.array([float(x) for x in parts[1:]], dtype=float)
        return cls(vectors)

    def resolve(self, token: str) -> np.ndarray | None:
        """Lookup order: original form, capitalized, lowercase."""
        for form in (token, token.capitalize(), token.lower()):
            vec = self.vectors.get(form)
            if vec is not None:
                return vec
        return None

    def segment(self, word: str) -> list[str]:
        """Split an out-of-dictionary word into resolvable pieces with the fewest
        splits; ties broken by the lowest standard deviation of piece lengths.
        If no full segmentation exists (e.g. digits absent from the table),
        unresolvable single characters are dropped and the split is retried."""
        pieces = self._segment_clean(word)
        if pieces:
            return pieces
        reduced = "".join(ch for ch in word if self.resolve(ch) is not None)
        if reduced and reduced != word:
            return self._segment_clean(reduced)
        return []

    def _segment_clean(self, word: str) -> list[str]:
        n = len(word)
        if n == 0:
            return []
        INF = n + 1
        best = [INF] * (n + 1)
        best[0] = 0
        resolvable = {}
        for i in range(n):
            for j in range(i + 1, n + 1):
                piece = word[i:j]
                if self.resolve(piece) is not None:
                    resolvable[(i, j)] = piece
                    if best[i] + 1 < best[j]:
                        best[j] = best[i] + 1
        if best[n] >= INF:
            return []
        target = best[n]
        # enumerate every segmentation achieving the minimal piece count
        candidates: list[list[str]] = []

        def walk(pos: int, used: int, pieces: list[str]) -> None:
            if pos == n:
                candidates.append(list(pieces))
                return
            for j in range(pos + 1, n + 1):
                if (pos, j) in resolvable and best[pos] == used and used + 1 + _min_remaining(j) <= target:
                    pieces.append(word[pos:j])
                    walk(j, used + 1, pieces)
                    pieces.pop()

        suffix_best = [INF] * (n + 1)
        suffix_best[n] = 0
        for i in range(n - 1, -1, -1):
            for j in range(i + 1, n + 1):
                if (i, j) in resolvable and suffix_best[j] + 1 < suffix_best[i]:
                    suffix_best[i] = suffix_best[j] + 1

        def _min_remaining(pos: int) -> int:
            return suffix_best[pos]

        walk(0, 0, [])
        if not candidates:
            return []

        def tiebreak(seg: list[str]):
            lengths = np.array([len(p) for p in seg], dtype=float)
            return (len(seg), float(lengths.std()), seg)

        return min(candidates, key=tiebreak)


def _phrase_tokens(phrase: str) -> list[str]:
    cleaned = _PUNCT.sub(" ", phrase)
    return [t for t in _SPACES.split(cleaned) if t]


def embed_phrase(phrase: str, table: EmbeddingTable) -> np.ndarray:
    """Sqrt-N combination: sum of resolved piece vectors divided by sqrt(piece count)."""
    pieces: list[np.ndarray] = []
    for token in _phrase_tokens(phrase):
        vec = table.resolve(token)
        if vec is not None:
            pieces.append(vec)
            continue
        for piece in table.segment(token):
            pieces.append(table.resolve(piece))
    if not pieces:
        return np.zeros(EMBED_DIM)
    return np.sum(pieces, axis=0) / np.sqrt(len(pieces))


def cosine_similarity(u: np.ndarray, v: np.ndarray) -> float:
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        return 0.0
    return float(np.dot(u, v) / (nu * nv))


def match_candidates(
    ticker: str,
    ticker_name: str,
    keywords: set[str],
    table: EmbeddingTable,
    k: int,
    lcs_threshold: float = DEFAULT_LCS_THRESHOLD,
    cosine_threshold: float = DEFAULT_COSINE_THRESHOLD,
) -> list[EntityLink]:
    """Top-k keyword candidates for one ticker, ranked by max(lcs, cosine).

    The confirmed flag only pre-filters the manual review list; ties rank
    alphabetically for determinism.
    """
    if not keywords:
        return []
    name_vec = embed_phrase(ticker_name, table)
    scored = []
    for kw in sorted(keywords):
        lcs = lcs_similarity(ticker_name, kw)
        cos = cosine_similarity(name_vec, embed_phrase(kw, table))
        scored.append((max(lcs, cos), kw, lcs, cos))
    scored.sort(key=lambda t: (-t[0], t[1]))
    return [
        EntityLink(
            ticker=ticker,
            matched_keyword=kw,
            lcs_score=lcs,
            cosine_score=cos,
            confirmed=lcs >= lcs_threshold or cos >= cosine_threshold,
        )
        for _, kw, lcs, cos in scored[:k]
    ]


def write_links_csv(links: list[EntityLink], path: str | Path) -> None:
    frame = pd.DataFrame(
        {
            "ticker": [l.ticker for l in links],
            "keyword": [l.matched_keyword for l in links],
            "confirmed": [str(l.confirmed).lower() for l in links],
        }
    )
    frame.to_csv(path, index=False)


def load_links_csv(path: str | Path) -> pd.DataFrame:
    f = pd.read_csv(path)
    if list(f.columns) != ["ticker", "keyword", "confirmed"]:
        raise ValueError(f"{path}: expected header ticker,keyword,confirmed")
    f["confirmed"] = f["confirmed"].astype(str).str.lower() == "true"
    return f
