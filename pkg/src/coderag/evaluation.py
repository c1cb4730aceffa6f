"""Benchmark loading and completion metrics.

Code match: exact match and edit similarity
(1 - Levenshtein(x, y) / max(|x|, |y|), character level).  Identifier
match: exact ordered-sequence match and multiset F1 over the identifier
tokens of generated vs. reference code.

Both strings are normalized once (CRLF -> LF, one trailing newline
stripped) before any metric; internal whitespace stays significant.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

from .kernels import levenshtein as _lev_kernel
from .lexing import iter_identifiers
from .pipeline import CompletionTask


def levenshtein(x: str, y: str) -> int:
    """Unit-cost character edit distance (insert/delete/substitute)."""
    return _lev_kernel(x, y)


def edit_similarity(x: str, y: str) -> float:
    """1 - distance over the longer length; two empty strings score 1.0."""
    longest = max(len(x), len(y))
    if longest == 0:
        return 1.0
    return 1.0 - levenshtein(x, y) / longest


def normalize_completion(text: str) -> str:
    """CRLF -> LF and strip a single trailing newline."""
    text = text.replace("\r\n", "\n")
    if text.endswith("\n"):
        text = text[:-1]
    return text


def exact_match(x: str, y: str) -> int:
    """1 iff the normalized strings are identical (whitespace-significant)."""
    return int(normalize_completion(x) == normalize_completion(y))


def extract_identifiers(code: str) -> list[str]:
    """Identifier tokens in order; keywords, literals and comments excluded."""
    return iter_identifiers(code)


def identifier_scores(gen: str, gt: str) -> tuple[int, float]:
    """(identifier exact match, identifier F1).

    Exact match is order-sensitive sequence equality; F1 uses multiset
    intersection.  Two identifier-free strings match vacuously (1, 1.0).
    """
    gen_ids = extract_identifiers(gen)
    gt_ids = extract_identifiers(gt)
    id_em = int(gen_ids == gt_ids)
    if not gen_ids and not gt_ids:
        return id_em, 1.0
    inter = sum((Counter(gen_ids) & Counter(gt_ids)).values())
    if inter == 0:
        return id_em, 0.0
    precision = inter / len(gen_ids)
    recall = inter / len(gt_ids)
    return id_em, 2 * precision * recall / (precision + recall)


@dataclass(frozen=True)
class TaskScore:
    task_id: str
    em: int
    es: float
    id_em: int
    id_f1: float
    failed: bool = False
    error: str = ""


@dataclass
class MetricsReport:
    em: float
    es: float
    id_em: float
    id_f1: float
    per_task: list[TaskScore] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "em": self.em,
            "es": self.es,
            "id_em": self.id_em,
            "id_f1": self.id_f1,
            "per_task": [
                {
                    "task_id": t.task_id,
                    "em": t.em,
                    "es": t.es,
                    "id_em": t.id_em,
                    "id_f1": t.id_f1,
                    "failed": t.failed,
                    "error": t.error,
                }
                for t in self.per_task
            ],
        }


def score_pair(task_id: str, generated: str, ground_truth: str) -> TaskScore:
    gen = normalize_completion(generated)
    gt = normalize_completion(ground_truth)
    id_em, id_f1 = identifier_scores(gen, gt)
    return TaskScore(
        task_id=task_id,
        em=exact_match(gen, gt),
        es=edit_similarity(gen, gt),
        id_em=id_em,
        id_f1=id_f1,
    )


def evaluate(
    dataset: Sequence[CompletionTask], run: Callable[[CompletionTask], str]
) -> MetricsReport:
    """Score ``run`` over the dataset; aggregates are arithmetic means.

    A task whose runner raises is flagged failed and scores 0 everywhere.
    """
    if not dataset:
        raise ValueError("dataset is empty")
    per_task: list[TaskScore] = []
    for task in dataset:
        if task.ground_truth is None:
            raise ValueError(f"task {task.task_id} has no ground truth")
        try:
            generated = run(task)
        except Exception as exc:
            per_task.append(
                TaskScore(task.task_id, 0, 0.0, 0, 0.0, failed=True, error=str(exc))
            )
            continue
        per_task.append(score_pair(task.task_id, generated, task.ground_truth))
    n = len(per_task)
    return MetricsReport(
        em=sum(t.em for t in per_task) / n,
        es=sum(t.es for t in per_task) / n,
        id_em=sum(t.id_em for t in per_task) / n,
        id_f1=sum(t.id_f1 for t in per_task) / n,
        per_task=per_task,
    )


def format_report(report: MetricsReport) -> str:
    """Percentages to two decimals, one metric per line."""
    lines = [
        f"EM     {100 * report.em:6.2f}",
        f"ES     {100 * report.es:6.2f}",
        f"ID-EM  {100 * report.id_em:6.2f}",
        f"ID-F1  {100 * report.id_f1:6.2f}",
    ]
    failed = sum(1 for t in report.per_task if t.failed)
    if failed:
        lines.append(f"failed tasks: {failed}/{len(report.per_task)}")
    return "\n".join(lines)


def _task_from_fields(
    task_id: str, repo: str, file_path: str, prefix: str, ground_truth: str | None,
    cursor_line: int | None,
) -> CompletionTask:
    if not prefix:
        raise ValueError(f"task {task_id}: prefix is empty")
    if cursor_line is None:
        cursor_line = len(prefix.replace("\r\n", "\n").split("\n"))
    return CompletionTask(
        task_id=task_id,
        repo_root=repo,
        file_path=file_path,
        prefix=prefix,
        cursor_line=cursor_line,
        ground_truth=ground_truth,
    )


def task_from_record(record: dict) -> CompletionTask:
    """Native schema: {task_id, repo, file, prefix, ground_truth, cursor_line}."""
    return _task_from_fields(
        task_id=str(record["task_id"]),
        repo=record["repo"],
        file_path=record.get("file", ""),
        prefix=record["prefix"],
        ground_truth=record.get("ground_truth"),
        cursor_line=record.get("cursor_line"),
    )


def _first_key(record: dict, keys: Iterable[str], default=None):
    for key in keys:
        if key in record:
            return record[key]
    return default


def adapt_cceval_record(record: dict) -> CompletionTask:
    """Map a CrossCodeEval-style release record onto the native schema.

    Mapping: prompt -> prefix, groundtruth -> ground_truth,
    metadata.task_id/repository/file carry the identity fields.  Only the
    left context is used; the right context, if present, is ignored.
    """
    meta = record.get("metadata", {})
    return _task_from_fields(
        task_id=str(_first_key(meta, ("task_id", "id"), _first_key(record, ("task_id",), "?"))),
        repo=_first_key(meta, ("repository", "repo"), record.get("repo", "")),
        file_path=_first_key(meta, ("file", "fpath"), record.get("file", "")),
        prefix=_first_key(record, ("prompt", "prefix", "input")),
        ground_truth=_first_key(record, ("groundtruth", "ground_truth", "gt")),
        cursor_line=record.get("cursor_line"),
    )


def adapt_recceval_record(record: dict) -> CompletionTask:
    """Map a ReccEval-style release record onto the native schema.

    Mapping (best effort across release variants): input/prompt -> prefix,
    gt/groundtruth -> ground_truth, namespace/pkg -> repo.
    """
    return _task_from_fields(
        task_id=str(_first_key(record, ("task_id", "id", "namespace"), "?")),
        repo=_first_key(record, ("repo", "pkg", "project", "namespace"), ""),
        file_path=_first_key(record, ("file", "fpath", "path"), ""),
        prefix=_first_key(record, ("input", "prompt", "prefix")),
        ground_truth=_first_key(record, ("gt", "groundtruth", "ground_truth")),
        cursor_line=record.get("cursor_line"),
    )


ADAPTERS: dict[str, Callable[[dict], CompletionTask]] = {
    "native": task_from_record,
    "cceval": adapt_cceval_record,
    "recceval": adapt_recceval_record,
}


def load_tasks(path: str | Path, adapter: str = "native") -> list[CompletionTask]:
    """Read line-delimited JSON tasks through the named adapter."""
    convert = ADAPTERS[adapter]
    tasks: list[CompletionTask] = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                tasks.append(convert(json.loads(line)))
    return tasks


def save_report(report: MetricsReport, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(report.to_dict(), fh, ensure_ascii=False, indent=2)
        fh.write("\n")
