"""End-to-end completion: query -> retrieve -> rerank -> prompt -> generate.

Every intermediate artifact (query, retrieval list, rerank outcome, prompt)
is captured per task for auditing, and per-stage wall times are recorded
for the timing report.  With deterministic clients the whole chain is
deterministic.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Protocol, Sequence

from .clients import approx_token_count
from .dataflow import build_dataflow_graph, dataflow_retrieve
from .dense import DenseIndex, EmbedderClient, build_dense_index, dense_retrieve
from .dense import load_dense_index, save_dense_index
from .errors import BudgetImpossible, GraphUnavailable, PipelineStageError
from .kb import CodeKnowledgeBase, build_knowledge_base, load_knowledge_base
from .kb import save_knowledge_base
from .querybuild import ProbeClient, RetrievalQuery, construct_query
from .rerank import PickerClient, RerankOutcome, rerank
from .retrieve import ALL_PATHS, RetrievalList, merge_paths
from .sparse import SparseIndex, build_sparse_index, load_sparse_index
from .sparse import save_sparse_index, sparse_retrieve

DEFAULT_MAX_NEW_TOKENS = 48
DEFAULT_TEMPERATURE = 0.0
DEFAULT_MAX_INPUT_TOKENS = 2048
APPROX_COUNT_MARGIN = 0.9  # shrink the budget 10% when counting is approximate

SNIPPET_HEADER = "# file: {path}"


@dataclass(frozen=True)
class CompletionTask:
    """One completion case: everything before the cursor plus, when
    evaluating, the reference completion."""

    task_id: str
    repo_root: str
    file_path: str
    prefix: str
    cursor_line: int
    ground_truth: str | None = None

    def __post_init__(self) -> None:
        if not self.prefix:
            raise ValueError(f"task {self.task_id}: prefix must be non-empty")


@dataclass(frozen=True)
class GenerationConfig:
    max_new_tokens: int = DEFAULT_MAX_NEW_TOKENS
    temperature: float = DEFAULT_TEMPERATURE
    max_input_tokens: int = DEFAULT_MAX_INPUT_TOKENS

    def __post_init__(self) -> None:
        if self.max_new_tokens < 1 or self.max_input_tokens < 1:
            raise ValueError("token limits must be positive")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")


class GeneratorClient(Protocol):
    """Completion model; deterministic at temperature 0.  ``count_tokens``
    is optional — prompt assembly falls back to an approximate counter
    with a safety margin when it is missing."""

    def generate(self, prompt: str, config: GenerationConfig) -> str: ...


@dataclass
class PipelineClients:
    probe: ProbeClient
    embedder: EmbedderClient
    picker: PickerClient
    generator: GeneratorClient


@dataclass
class RepoIndex:
    """The read-only structures shared by all tasks of one repository."""

    kb: CodeKnowledgeBase
    sparse: SparseIndex
    dense: DenseIndex

    @classmethod
    def build(cls, repo_root: str | Path, embedder: EmbedderClient) -> "RepoIndex":
        kb = build_knowledge_base(repo_root)
        return cls(
            kb=kb,
            sparse=build_sparse_index(kb),
            dense=build_dense_index(kb, embedder),
        )

    def save(self, out_dir: str | Path) -> None:
        save_knowledge_base(self.kb, out_dir)
        save_sparse_index(self.sparse, out_dir)
        save_dense_index(self.dense, out_dir)

    @classmethod
    def load(cls, kb_dir: str | Path) -> "RepoIndex":
        return cls(
            kb=load_knowledge_base(kb_dir),
            sparse=load_sparse_index(kb_dir),
            dense=load_dense_index(kb_dir),
        )


def token_counter(generator: GeneratorClient) -> tuple[Callable[[str], int], bool]:
    """The generator's own tokenizer when exposed, else the approximation.

    Returns (counter, exact).
    """
    count = getattr(generator, "count_tokens", None)
    if callable(count):
        return count, True
    return approx_token_count, False


def assemble_prompt(
    snippets: Sequence[tuple[str, str]],
    prefix: str,
    budget: int,
    generator: GeneratorClient,
    reserve: int = DEFAULT_MAX_NEW_TOKENS,
) -> str:
    """Join snippet blocks and the prefix under the input-token budget.

    Snippets arrive in rerank order (rank 1 first) and appear in that
    order; each block carries its file path as a comment header.  Over
    budget, snippets are dropped lowest-rank first, then prefix lines from
    the top — never from the cursor end.  With no snippets the prompt is
    exactly the prefix.
    """
    count, exact = token_counter(generator)
    effective = budget - reserve
    if not exact:
        effective = math.floor(effective * APPROX_COUNT_MARGIN)
    if effective < 1:
        raise BudgetImpossible(f"budget {budget} leaves no room after the reserve")

    def compose(blocks: Sequence[str], tail: str) -> str:
        if not blocks:
            return tail
        return "\n\n".join(blocks) + "\n\n" + tail

    blocks = [
        SNIPPET_HEADER.format(path=path) + "\n" + text for path, text in snippets
    ]
    kept = list(blocks)
    while kept and count(compose(kept, prefix)) > effective:
        kept.pop()  # lowest rank first

    prompt = compose(kept, prefix)
    if count(prompt) <= effective:
        return prompt

    prefix_lines = prefix.split("\n")
    while len(prefix_lines) > 1 and count(compose(kept, "\n".join(prefix_lines))) > effective:
        prefix_lines.pop(0)
    prompt = compose(kept, "\n".join(prefix_lines))
    if count(prompt) > effective:
        raise BudgetImpossible(
            f"the cursor line alone exceeds the available budget of {effective} tokens"
        )
    return prompt


@dataclass
class CompletionResult:
    generated: str
    query: RetrievalQuery
    retrieval_list: RetrievalList
    rerank_outcome: RerankOutcome
    prompt: str
    timings: dict[str, float] = field(default_factory=dict)


class _Stage:
    """Tags failures with their stage and records wall time."""

    def __init__(self, name: str, timings: dict[str, float]):
        self.name = name
        self.timings = timings

    def __enter__(self):
        self._start = time.perf_counter()
        return self

    def __exit__(self, exc_type, exc, tb):
        self.timings[self.name] = time.perf_counter() - self._start
        if exc is not None and not isinstance(exc, PipelineStageError):
            raise PipelineStageError(self.name, exc) from exc
        return False


def complete(
    task: CompletionTask,
    index: RepoIndex,
    clients: PipelineClients,
    config: GenerationConfig = GenerationConfig(),
    f: int = 3,
    m: int = 8,
    g: int = 1,
    j: int = 15,
    u: int = 10,
    w: int = 3,
    paths: Sequence[str] = ALL_PATHS,
) -> CompletionResult:
    """Run the full chain for one task.

    An empty retrieval list degrades to a zero-shot prompt (the prefix
    alone); all other stage failures propagate tagged with their stage.
    """
    timings: dict[str, float] = {}

    with _Stage("query_construction", timings):
        query = construct_query(task.prefix, None, f=f, m=m, g=g, probe=clients.probe)

    dataflow_hits: list[tuple[str, float]] = []
    with _Stage("dataflow", timings):
        if "dataflow" in paths:
            try:
                graph = build_dataflow_graph(task.prefix)
                dataflow_hits = dataflow_retrieve(graph, index.kb)
            except GraphUnavailable:
                dataflow_hits = []

    sparse_hits: list[tuple[str, float]] = []
    with _Stage("sparse", timings):
        if "sparse" in paths:
            sparse_hits = sparse_retrieve(index.sparse, query.combined_text, j)

    dense_hits: list[tuple[str, float]] = []
    with _Stage("dense", timings):
        if "dense" in paths:
            dense_hits = dense_retrieve(index.dense, query.combined_text, clients.embedder, j)

    retrieval_list = merge_paths(query, dataflow_hits, sparse_hits, dense_hits, j)

    with _Stage("rerank", timings):
        outcome = rerank(retrieval_list, index.kb, clients.picker, u=u, w=w)

    with _Stage("prompt_assembly", timings):
        snippets = [
            (index.kb.get(item_id).file_path, index.kb.get(item_id).text)
            for item_id in outcome.ordered_items
        ]
        prompt = assemble_prompt(
            snippets,
            task.prefix,
            budget=config.max_input_tokens,
            generator=clients.generator,
            reserve=config.max_new_tokens,
        )

    with _Stage("generate", timings):
        generated = clients.generator.generate(prompt, config)

    return CompletionResult(
        generated=generated,
        query=query,
        retrieval_list=retrieval_list,
        rerank_outcome=outcome,
        prompt=prompt,
        timings=timings,
    )


def _score_jsonable(score: float):
    return score if math.isfinite(score) else "inf"


def result_artifacts(result: CompletionResult, effective_config: dict) -> dict:
    """JSON-serializable artifact dump for one completed task."""
    return {
        "config": effective_config,
        "query": {
            "selected_chunks": list(result.query.selected_chunks),
            "target_chunk": result.query.target_chunk,
            "combined_text": result.query.combined_text,
        },
        "retrieval_list": [
            {
                "id": c.item_id,
                "path": c.path.value,
                "path_rank": c.path_rank,
                "path_score": _score_jsonable(c.path_score),
            }
            for c in result.retrieval_list.candidates
        ],
        "rerank_outcome": {
            "ordered_items": list(result.rerank_outcome.ordered_items),
            "picker_calls": result.rerank_outcome.picker_calls,
            "degraded": result.rerank_outcome.degraded,
            "trace": [
                {
                    "window": list(ev.window_ids),
                    "chosen": ev.chosen_id,
                    "fallback": ev.fallback,
                }
                for ev in result.rerank_outcome.trace
            ],
        },
        "prompt": result.prompt,
        "generated": result.generated,
        "timings": result.timings,
    }


def dump_artifacts(
    result: CompletionResult, task: CompletionTask, dump_dir: str | Path, effective_config: dict
) -> Path:
    out = Path(dump_dir)
    out.mkdir(parents=True, exist_ok=True)
    safe_id = "".join(c if c.isalnum() or c in "-_." else "_" for c in task.task_id)
    path = out / f"{safe_id}.json"
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(result_artifacts(result, effective_config), fh, ensure_ascii=False, indent=2)
        fh.write("\n")
    return path
