"""Consistency-filtered training data for distilling the picker.

For every retrieval list and every candidate-set size, three random
subsets are drawn; each subset is voted on five times by the picker and
emitted as a training sample only when one snippet collects at least four
of the five votes.
"""

from __future__ import annotations

import json
import logging
import random
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .errors import InvalidPickReply, PickerUnavailable
from .kb import CodeKnowledgeBase
from .rerank import PickerClient, truncate_snippet
from .retrieve import RetrievalList

DEFAULT_SAMPLE_SIZES = (2, 3, 4, 5, 6, 7)
SUBSETS_PER_SIZE = 3
VOTES_PER_SUBSET = 5
CONSENSUS_THRESHOLD = 4

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Snippet:
    item_id: str
    text: str


@dataclass(frozen=True)
class DistillationSample:
    query_text: str
    snippets: tuple[Snippet, ...]  # window order shown to the picker
    chosen_id: str
    votes: tuple[str, ...]  # the five picked item ids

    def verify(self) -> bool:
        """Re-check the consensus rule from the stored votes."""
        if len(self.votes) != VOTES_PER_SUBSET:
            return False
        if all(s.item_id != self.chosen_id for s in self.snippets):
            return False
        return Counter(self.votes)[self.chosen_id] >= CONSENSUS_THRESHOLD


def resolve_candidates(
    retrieval_list: RetrievalList, kb: CodeKnowledgeBase
) -> list[Snippet]:
    return [
        Snippet(item_id, truncate_snippet(kb.get(item_id).text))
        for item_id in retrieval_list.item_ids()
    ]


def vote_on_subset(
    query_text: str,
    subset: Sequence[Snippet],
    picker: PickerClient,
    rng: random.Random | None = None,
    shuffle_between_votes: bool = False,
) -> DistillationSample | None:
    """Five picks over one candidate window; a sample on >= 4/5 consensus.

    By default every vote sees the same window order; ``shuffle_between_votes``
    exists to measure position bias and is off because reordering is an
    extra degree of freedom the procedure does not call for.
    """
    window = list(subset)
    votes: list[str] = []
    for _ in range(VOTES_PER_SUBSET):
        if shuffle_between_votes:
            if rng is None:
                raise ValueError("shuffling votes requires an rng")
            rng.shuffle(window)
        try:
            idx = picker.pick(query_text, [s.text for s in window])
        except InvalidPickReply:
            idx = 0
        if not isinstance(idx, int) or not 0 <= idx < len(window):
            idx = 0
        votes.append(window[idx].item_id)
    top_id, count = Counter(votes).most_common(1)[0]
    if count < CONSENSUS_THRESHOLD:
        return None
    return DistillationSample(
        query_text=query_text,
        snippets=tuple(subset),
        chosen_id=top_id,
        votes=tuple(votes),
    )


def build_distillation_data(
    queries_with_lists: Iterable[tuple[str, Sequence[Snippet]]],
    picker: PickerClient,
    sample_sizes: Sequence[int] = DEFAULT_SAMPLE_SIZES,
    rng_seed: int = 0,
) -> list[DistillationSample]:
    """Generate samples for every (query, candidate list) pair.

    For each size i, three subsets of i snippets are drawn without
    replacement (subsets may coincide across draws); lists shorter than i
    skip that size.  Identical seed, inputs and picker reproduce identical
    output.  PickerUnavailable aborts with the samples produced so far
    attached to the exception.
    """
    rng = random.Random(rng_seed)
    samples: list[DistillationSample] = []
    for query_text, candidates in queries_with_lists:
        candidates = list(candidates)
        for size in sorted(sample_sizes):
            if size < 1:
                raise ValueError("sample sizes must be >= 1")
            if len(candidates) < size:
                log.info(
                    "skipping size %d for query with %d candidates", size, len(candidates)
                )
                continue
            for _ in range(SUBSETS_PER_SIZE):
                subset = rng.sample(candidates, size)
                try:
                    sample = vote_on_subset(query_text, subset, picker)
                except PickerUnavailable as exc:
                    exc.partial_samples = samples  # type: ignore[attr-defined]
                    raise
                if sample is not None:
                    samples.append(sample)
    return samples


def sample_record(sample: DistillationSample) -> dict:
    return {
        "query": sample.query_text,
        "snippets": [{"id": s.item_id, "text": s.text} for s in sample.snippets],
        "chosen_id": sample.chosen_id,
        "votes": list(sample.votes),
    }


def save_samples(samples: Sequence[DistillationSample], out_path: str | Path) -> None:
    with open(out_path, "w", encoding="utf-8", newline="\n") as fh:
        for sample in samples:
            fh.write(json.dumps(sample_record(sample), ensure_ascii=False))
            fh.write("\n")


def load_query_lists(in_path: str | Path) -> list[tuple[str, list[Snippet]]]:
    """Read line-delimited JSON {query, candidates: [{id, text}]} pairs.

    ``query`` may be the query text itself or an object with a
    ``combined_text`` field (the pipeline's artifact dump shape).
    """
    out: list[tuple[str, list[Snippet]]] = []
    with open(in_path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            rec = json.loads(line)
            query = rec["query"]
            if isinstance(query, dict):
                query = query["combined_text"]
            snippets = [Snippet(c["id"], c["text"]) for c in rec["candidates"]]
            out.append((query, snippets))
    return out
