"""BestFit reranking: a picker chooses the single most helpful snippet per
window, organized as a tournament over one-overlap windows.

Tournament shape: the leaf layer is :func:`make_windows` (adjacent windows
share exactly one item); leaf winners advance into disjoint groups of the
same width until one remains.  A leaf pick skips any member currently
advancing from an adjacent leaf, so every winner is unique and extracting
the champion replays a single root-to-leaf path.  Picker calls are
therefore bounded by :func:`analytic_call_bound`, which the tests assert
is never exceeded.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Protocol, Sequence, TypeVar

from .errors import InvalidPickReply, PickerUnavailable
from .kb import CodeKnowledgeBase
from .retrieve import RetrievalList

DEFAULT_KEEP = 10  # u
DEFAULT_WINDOW = 3  # w
SNIPPET_CHAR_BUDGET = 1200
TRUNCATION_MARKER = "\n# ... truncated ..."

T = TypeVar("T")


class PickerClient(Protocol):
    """Chooses the most helpful snippet in a window.

    ``pick`` returns a 0-based index into ``window``.  An unparsable or
    out-of-window reply may surface as :class:`InvalidPickReply` or as an
    out-of-range integer; either way the engine retries once and then
    falls back to window position 0.
    """

    thread_safe: bool

    def pick(self, query_text: str, window: Sequence[str]) -> int: ...


@dataclass(frozen=True)
class PickEvent:
    window_ids: tuple[str, ...]
    chosen_id: str
    fallback: bool = False


@dataclass
class RerankOutcome:
    ordered_items: list[str]
    picker_calls: int
    trace: list[PickEvent] = field(default_factory=list)
    degraded: bool = False


def make_windows(items: Sequence[T], w: int) -> list[list[T]]:
    """Equal-sized windows where adjacent windows share exactly one item.

    Window k covers positions [k*(w-1), k*(w-1)+w); the last window may be
    shorter but never consists of the shared item alone.
    """
    if w < 2:
        raise ValueError("window size must be >= 2")
    if not items:
        raise ValueError("cannot window an empty list")
    n = len(items)
    if n == 1:
        return [[items[0]]]
    count = math.ceil((n - 1) / (w - 1))
    return [list(items[k * (w - 1) : k * (w - 1) + w]) for k in range(count)]


def analytic_call_bound(n: int, u: int, w: int) -> int:
    """Worst-case picker calls for this tournament shape.

    One call per leaf plus one per internal group builds the tree; each
    of the remaining min(u, n) - 1 extractions replays one leaf and one
    group per internal layer.
    """
    if n <= 1:
        return 0
    leaves = math.ceil((n - 1) / (w - 1))
    layer_counts = []
    size = leaves
    while size > 1:
        size = math.ceil(size / w)
        layer_counts.append(size)
    initial = leaves + sum(layer_counts)
    per_extraction = 1 + len(layer_counts)
    return initial + max(0, min(u, n) - 1) * per_extraction


class _Tournament:
    def __init__(
        self,
        item_ids: Sequence[str],
        texts: Sequence[str],
        query_text: str,
        picker: PickerClient,
        w: int,
    ):
        self.ids = list(item_ids)
        self.texts = list(texts)
        self.query_text = query_text
        self.picker = picker
        self.w = w
        self.picker_calls = 0
        self.trace: list[PickEvent] = []

        positions = list(range(len(self.ids)))
        self.members: list[list[int]] = make_windows(positions, w)
        self.home: dict[int, list[int]] = {}
        for leaf, window in enumerate(self.members):
            for pos in window:
                self.home.setdefault(pos, []).append(leaf)

        self.leaf_winner: list[int | None] = [None] * len(self.members)
        for leaf in range(len(self.members)):
            self.leaf_winner[leaf] = self._pick_leaf(leaf)
        self.layers: list[list[int | None]] = []
        values: list[int | None] = self.leaf_winner
        while len(values) > 1:
            layer = [
                self._pick_group([v for v in values[g : g + self.w] if v is not None])
                for g in range(0, len(values), self.w)
            ]
            self.layers.append(layer)
            values = layer

    def root(self) -> int | None:
        return self.layers[-1][0] if self.layers else self.leaf_winner[0]

    def extract(self) -> int | None:
        return self.root()

    def remove(self, pos: int) -> None:
        """Remove an extracted item and replay its root-to-leaf path."""
        winner_leaf = None
        for leaf in self.home[pos]:
            self.members[leaf].remove(pos)
            if self.leaf_winner[leaf] == pos:
                winner_leaf = leaf
        assert winner_leaf is not None, "extracted item was not a leaf winner"
        self.leaf_winner[winner_leaf] = self._pick_leaf(winner_leaf)

        child_idx = winner_leaf
        child_values: list[int | None] = self.leaf_winner
        for layer in self.layers:
            parent = child_idx // self.w
            group = [
                v
                for v in child_values[parent * self.w : (parent + 1) * self.w]
                if v is not None
            ]
            layer[parent] = self._pick_group(group)
            child_idx = parent
            child_values = layer

    def _pick_leaf(self, leaf: int) -> int | None:
        """Pick within a leaf window, skipping members that are currently
        advancing from an adjacent window (keeps winners unique)."""
        taken = {
            self.leaf_winner[adj]
            for adj in (leaf - 1, leaf + 1)
            if 0 <= adj < len(self.members)
        }
        candidates = [p for p in self.members[leaf] if p not in taken]
        return self._pick_group(candidates)

    def _pick_group(self, candidates: list[int]) -> int | None:
        if not candidates:
            return None
        if len(candidates) == 1:
            return candidates[0]
        return self._call_picker(candidates)

    def _call_picker(self, candidates: list[int]) -> int:
        window_texts = [self.texts[p] for p in candidates]
        window_ids = tuple(self.ids[p] for p in candidates)
        for attempt in range(2):
            self.picker_calls += 1
            try:
                reply = self.picker.pick(self.query_text, window_texts)
            except InvalidPickReply:
                reply = None
            if isinstance(reply, int) and 0 <= reply < len(candidates):
                self.trace.append(PickEvent(window_ids, self.ids[candidates[reply]]))
                return candidates[reply]
        # Two invalid replies: deterministic fallback to window position 0.
        self.trace.append(PickEvent(window_ids, self.ids[candidates[0]], fallback=True))
        return candidates[0]


def heap_rerank(
    item_ids: Sequence[str],
    texts: Sequence[str],
    query_text: str,
    picker: PickerClient,
    u: int = DEFAULT_KEEP,
    w: int = DEFAULT_WINDOW,
) -> RerankOutcome:
    """Extract the top-u items in preference order via the tournament.

    If the picker is unreachable, falls back to the first u items of the
    input order and flags the outcome as degraded.
    """
    if u < 1:
        raise ValueError("u must be >= 1")
    if len(item_ids) != len(texts):
        raise ValueError("item_ids and texts must align")
    if len(set(item_ids)) != len(item_ids):
        raise ValueError("items must be distinct")
    if not item_ids:
        return RerankOutcome(ordered_items=[], picker_calls=0)

    u_eff = min(u, len(item_ids))
    try:
        arena = _Tournament(item_ids, texts, query_text, picker, w)
        ordered: list[int] = []
        while len(ordered) < u_eff:
            champion = arena.extract()
            if champion is None:
                break
            ordered.append(champion)
            if len(ordered) < u_eff:
                arena.remove(champion)
        return RerankOutcome(
            ordered_items=[arena.ids[pos] for pos in ordered],
            picker_calls=arena.picker_calls,
            trace=arena.trace,
        )
    except PickerUnavailable:
        return RerankOutcome(
            ordered_items=list(item_ids[:u_eff]), picker_calls=0, degraded=True
        )


def truncate_snippet(text: str, budget: int = SNIPPET_CHAR_BUDGET) -> str:
    """Respect the picker's context limit: keep the head, drop the tail."""
    if len(text) <= budget:
        return text
    return text[:budget] + TRUNCATION_MARKER


def rerank(
    retrieval_list: RetrievalList,
    kb: CodeKnowledgeBase,
    picker: PickerClient,
    u: int = DEFAULT_KEEP,
    w: int = DEFAULT_WINDOW,
) -> RerankOutcome:
    """Rerank a retrieval list by resolving candidate texts from the KB."""
    if not retrieval_list.candidates:
        return RerankOutcome(ordered_items=[], picker_calls=0)
    ids = retrieval_list.item_ids()
    texts = [truncate_snippet(kb.get(item_id).text) for item_id in ids]
    return heap_rerank(ids, texts, retrieval_list.query.combined_text, picker, u, w)
