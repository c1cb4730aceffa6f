"""TF-IDF inverted index over knowledge items with cosine scoring.

Weighting: tf = raw count, idf = ln(N/df) + 1, similarity = cosine.
All float accumulation runs in ascending term-id order so the postings
walk is bit-identical to a dense vector computation of the same formula.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

from .kb import CodeKnowledgeBase
from .lexing import subtokens

SPARSE_FILE_NAME = "sparse.idx"
FORMAT_VERSION = 1


@dataclass
class SparseIndex:
    item_ids: list[str]  # position -> knowledge item id
    vocabulary: dict[str, int]  # term -> term id (ids follow sorted term order)
    df: list[int]  # term id -> document frequency
    postings: list[list[tuple[int, int]]]  # term id -> [(item position, tf)]
    idf: list[float]
    item_norms: list[float]

    @property
    def item_count(self) -> int:
        return len(self.item_ids)


def _term_counts(text: str) -> dict[str, int]:
    counts: dict[str, int] = {}
    for token in subtokens(text):
        counts[token] = counts.get(token, 0) + 1
    return counts


def _finalize(
    item_ids: list[str],
    vocabulary: dict[str, int],
    df: list[int],
    postings: list[list[tuple[int, int]]],
) -> SparseIndex:
    n = len(item_ids)
    idf = [math.log(n / d) + 1.0 for d in df]
    # Norms accumulate per item in ascending term-id order, matching the
    # brute-force oracle's iteration order exactly.
    norms_sq = [0.0] * n
    for term_id in range(len(df)):
        w_idf = idf[term_id]
        for pos, tf in postings[term_id]:
            w = tf * w_idf
            norms_sq[pos] += w * w
    return SparseIndex(
        item_ids=item_ids,
        vocabulary=vocabulary,
        df=df,
        postings=postings,
        idf=idf,
        item_norms=[math.sqrt(s) for s in norms_sq],
    )


def build_sparse_index(kb: CodeKnowledgeBase) -> SparseIndex:
    """Index every knowledge item; vocabulary order is deterministic (sorted)."""
    item_ids = [item.id for item in kb.items]
    per_item_counts = [_term_counts(item.text) for item in kb.items]

    terms = sorted({term for counts in per_item_counts for term in counts})
    vocabulary = {term: tid for tid, term in enumerate(terms)}
    df = [0] * len(terms)
    postings: list[list[tuple[int, int]]] = [[] for _ in terms]
    for pos, counts in enumerate(per_item_counts):
        for term, tf in counts.items():
            tid = vocabulary[term]
            df[tid] += 1
            postings[tid].append((pos, tf))
    return _finalize(item_ids, vocabulary, df, postings)


def sparse_retrieve(
    index: SparseIndex, query_text: str, j: int
) -> list[tuple[str, float]]:
    """Top-j items by TF-IDF cosine; zero-score items are excluded.

    Ties break by ascending item id.  Query terms outside the index
    vocabulary contribute nothing (they have no defined idf).
    """
    if j < 1:
        raise ValueError("j must be >= 1")
    query_counts = _term_counts(query_text)
    known = sorted(
        (index.vocabulary[t], tf) for t, tf in query_counts.items() if t in index.vocabulary
    )
    if not known:
        return []

    q_norm_sq = 0.0
    dots = [0.0] * index.item_count
    for tid, q_tf in known:
        qw = q_tf * index.idf[tid]
        q_norm_sq += qw * qw
        for pos, d_tf in index.postings[tid]:
            dots[pos] += qw * (d_tf * index.idf[tid])
    q_norm = math.sqrt(q_norm_sq)

    scored = [
        (index.item_ids[pos], dot / (q_norm * index.item_norms[pos]))
        for pos, dot in enumerate(dots)
        if dot != 0.0
    ]
    scored.sort(key=lambda pair: (-pair[1], pair[0]))
    return scored[:j]


def save_sparse_index(index: SparseIndex, out_dir: str | Path) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    terms = sorted(index.vocabulary, key=index.vocabulary.get)
    payload = {
        "version": FORMAT_VERSION,
        "item_ids": index.item_ids,
        "terms": terms,
        "df": index.df,
        "postings": [[[pos, tf] for pos, tf in plist] for plist in index.postings],
    }
    with open(out / SPARSE_FILE_NAME, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, ensure_ascii=False)
        fh.write("\n")


def load_sparse_index(kb_dir: str | Path) -> SparseIndex:
    with open(Path(kb_dir) / SPARSE_FILE_NAME, encoding="utf-8") as fh:
        payload = json.load(fh)
    if payload["version"] != FORMAT_VERSION:
        raise ValueError(f"unsupported sparse index version {payload['version']}")
    vocabulary = {term: tid for tid, term in enumerate(payload["terms"])}
    postings = [[(pos, tf) for pos, tf in plist] for plist in payload["postings"]]
    return _finalize(payload["item_ids"], vocabulary, payload["df"], postings)
