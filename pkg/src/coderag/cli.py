"""Command-line entry point: index, complete, evaluate, distill, bench-timings.

Exit codes: 0 success, 1 runtime failure, 2 usage or input error.  Every
flag defaults to the tuned value from :class:`coderag.config.RunConfig`;
``--help`` shows them.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from . import config as config_mod
from .config import RunConfig, load_config, make_clients
from .dataflow import build_dataflow_graph, to_dot
from .distill import build_distillation_data, load_query_lists, save_samples
from .errors import CodeRagError, EmptyRepository, PickerUnavailable
from .evaluation import (
    ADAPTERS,
    evaluate,
    format_report,
    load_tasks,
    save_report,
    task_from_record,
)
from .pipeline import CompletionTask, RepoIndex, complete, dump_artifacts
from .retrieve import ALL_PATHS

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2

_STAGE_ROWS = ("query_construction", "sparse", "dense", "dataflow", "rerank")

_OVERRIDE_FIELDS = (
    "f", "m", "g", "j", "u", "w",
    "max_new_tokens", "temperature", "max_input_tokens",
    "probe_endpoint", "embed_endpoint", "pick_endpoint", "generate_endpoint",
    "rerank_template_path", "embed_dim", "seed", "jobs",
)


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    defaults = RunConfig()
    parser.add_argument("--config", metavar="FILE", help="JSON config file")
    group = parser.add_argument_group("pipeline parameters")
    for name in _OVERRIDE_FIELDS:
        default = getattr(defaults, name)
        flag = "--" + name.replace("_", "-")
        kind = type(default)
        group.add_argument(
            flag, dest=name, type=kind, default=None,
            help=f"default: {default!r}",
        )
    group.add_argument(
        "--paths",
        default=None,
        help=f"comma-separated retrieval paths to enable (default: {','.join(ALL_PATHS)})",
    )


def _resolve_config(args: argparse.Namespace) -> RunConfig:
    cfg = load_config(args.config) if getattr(args, "config", None) else RunConfig()
    overrides = {
        name: getattr(args, name)
        for name in _OVERRIDE_FIELDS
        if getattr(args, name, None) is not None
    }
    if getattr(args, "paths", None) is not None:
        overrides["paths"] = tuple(p for p in args.paths.split(",") if p)
    if overrides:
        cfg = dataclasses.replace(cfg, **overrides)
    return cfg


def _load_index(kb_dir: str) -> RepoIndex:
    try:
        return RepoIndex.load(kb_dir)
    except FileNotFoundError as exc:
        raise SystemExit(
            f"error: no index at {kb_dir} ({exc}); run `coderag index <repo> --out {kb_dir}` first"
        ) from exc


def _complete_kwargs(cfg: RunConfig) -> dict:
    return {
        "config": cfg.generation(),
        "f": cfg.f, "m": cfg.m, "g": cfg.g,
        "j": cfg.j, "u": cfg.u, "w": cfg.w,
        "paths": cfg.paths,
    }


def cmd_index(args: argparse.Namespace) -> int:
    cfg = _resolve_config(args)
    clients = make_clients(cfg)
    try:
        index = RepoIndex.build(args.repo, clients.embedder)
    except EmptyRepository as exc:
        print(f"error: no source files: {exc}", file=sys.stderr)
        return EXIT_USAGE
    index.save(args.out)
    counts = index.kb.counts_by_kind()
    for kind, count in counts.items():
        print(f"{kind}: {count}")
    print(f"total: {len(index.kb)} items from {len(index.kb.file_manifest)} files")
    if index.kb.parse_errors:
        print(f"parse errors: {len(index.kb.parse_errors)}", file=sys.stderr)
        for failure in index.kb.parse_errors:
            print(f"  {failure.file_path}: {failure.diagnostic}", file=sys.stderr)
    return EXIT_OK


def _read_task(path: str) -> CompletionTask:
    with open(path, encoding="utf-8") as fh:
        return task_from_record(json.load(fh))


def cmd_complete(args: argparse.Namespace) -> int:
    cfg = _resolve_config(args)
    task = _read_task(args.task)
    index = _load_index(args.kb_dir)
    clients = make_clients(cfg)
    result = complete(task, index, clients, **_complete_kwargs(cfg))
    if args.dataflow_dot:
        Path(args.dataflow_dot).write_text(
            to_dot(build_dataflow_graph(task.prefix)) + "\n", encoding="utf-8"
        )
    if args.dump_dir:
        dump_artifacts(result, task, args.dump_dir, cfg.to_dict())
    print(result.generated)
    return EXIT_OK


def _indexes_for(tasks, kb_dir: str | None, embedder) -> dict[str, RepoIndex]:
    if kb_dir:
        shared = _load_index(kb_dir)
        return {task.repo_root: shared for task in tasks}
    out: dict[str, RepoIndex] = {}
    for task in tasks:
        if task.repo_root not in out:
            out[task.repo_root] = RepoIndex.build(task.repo_root, embedder)
    return out


def _run_tasks(tasks, indexes, clients, cfg: RunConfig) -> dict[str, object]:
    """Generated text (or the raised exception) per task id."""
    kwargs = _complete_kwargs(cfg)

    def one(task: CompletionTask):
        try:
            return complete(task, indexes[task.repo_root], clients, **kwargs)
        except Exception as exc:
            return exc

    jobs = cfg.jobs if config_mod.clients_are_thread_safe(clients) else 1
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(one, tasks))
    else:
        results = [one(task) for task in tasks]
    return {task.task_id: res for task, res in zip(tasks, results)}


def cmd_evaluate(args: argparse.Namespace) -> int:
    cfg = _resolve_config(args)
    tasks = load_tasks(args.dataset, adapter=args.adapter)
    if not tasks:
        print("error: dataset is empty", file=sys.stderr)
        return EXIT_USAGE
    clients = make_clients(cfg)
    indexes = _indexes_for(tasks, args.kb_dir, clients.embedder)
    outcomes = _run_tasks(tasks, indexes, clients, cfg)

    def run(task: CompletionTask) -> str:
        res = outcomes[task.task_id]
        if isinstance(res, Exception):
            raise res
        return res.generated

    report = evaluate(tasks, run)
    print(format_report(report))
    if args.report:
        save_report(report, args.report)
        print(f"report written to {args.report}")
    return EXIT_OK


def cmd_distill(args: argparse.Namespace) -> int:
    cfg = _resolve_config(args)
    clients = make_clients(cfg)
    pairs = load_query_lists(getattr(args, "in"))
    sizes = tuple(int(s) for s in args.sizes.split(",") if s)
    try:
        samples = build_distillation_data(pairs, clients.picker, sizes, rng_seed=cfg.seed)
    except PickerUnavailable as exc:
        partial = getattr(exc, "partial_samples", [])
        save_samples(partial, args.out)
        print(
            f"error: picker unavailable ({exc}); flushed {len(partial)} partial samples to {args.out}",
            file=sys.stderr,
        )
        return EXIT_RUNTIME
    save_samples(samples, args.out)
    print(f"{len(samples)} samples from {len(pairs)} retrieval lists -> {args.out}")
    return EXIT_OK


def cmd_bench_timings(args: argparse.Namespace) -> int:
    cfg = _resolve_config(args)
    tasks = load_tasks(args.dataset, adapter=args.adapter)
    if not tasks:
        print("error: dataset is empty", file=sys.stderr)
        return EXIT_USAGE
    clients = make_clients(cfg)
    indexes = _indexes_for(tasks, args.kb_dir, clients.embedder)
    kwargs = _complete_kwargs(cfg)

    sums = {stage: 0.0 for stage in _STAGE_ROWS}
    counted = 0
    for task in tasks:
        result = complete(task, indexes[task.repo_root], clients, **kwargs)
        counted += 1
        for stage in _STAGE_ROWS:
            sums[stage] += result.timings.get(stage, 0.0)

    print(f"mean seconds per stage over {counted} tasks:")
    for stage in _STAGE_ROWS:
        enabled = stage in ("query_construction", "rerank") or stage in cfg.paths
        value = f"{sums[stage] / counted:.6f}" if enabled else "skipped"
        print(f"  {stage:<20} {value}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="coderag",
        description="Repository-aware code completion engine",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_index = sub.add_parser("index", help="build kb.jsonl, manifest.json, sparse.idx, dense.vec")
    p_index.add_argument("repo", help="repository root to index")
    p_index.add_argument("--out", required=True, help="output directory")
    _add_config_flags(p_index)
    p_index.set_defaults(fn=cmd_index)

    p_complete = sub.add_parser("complete", help="complete one task")
    p_complete.add_argument("--task", required=True, help="task JSON file")
    p_complete.add_argument("--kb-dir", required=True, help="index directory")
    p_complete.add_argument("--dump-dir", help="write per-task stage artifacts here")
    p_complete.add_argument("--dataflow-dot", help="write the def-use graph as DOT")
    _add_config_flags(p_complete)
    p_complete.set_defaults(fn=cmd_complete)

    p_eval = sub.add_parser("evaluate", help="score a dataset")
    p_eval.add_argument("--dataset", required=True, help="line-delimited JSON tasks")
    p_eval.add_argument("--report", help="write the metrics report JSON here")
    p_eval.add_argument("--kb-dir", help="prebuilt index shared by all tasks")
    p_eval.add_argument("--adapter", choices=sorted(ADAPTERS), default="native")
    _add_config_flags(p_eval)
    p_eval.set_defaults(fn=cmd_evaluate)

    p_distill = sub.add_parser("distill", help="emit reranker distillation samples")
    p_distill.add_argument("--in", required=True, help="retrieval lists (JSONL)")
    p_distill.add_argument("--out", required=True, help="output samples (JSONL)")
    p_distill.add_argument(
        "--sizes", default="2,3,4,5,6,7", help="candidate-set sizes (default: 2,3,4,5,6,7)"
    )
    _add_config_flags(p_distill)
    p_distill.set_defaults(fn=cmd_distill)

    p_bench = sub.add_parser("bench-timings", help="mean wall time per stage")
    p_bench.add_argument("--dataset", required=True)
    p_bench.add_argument("--kb-dir")
    p_bench.add_argument("--adapter", choices=sorted(ADAPTERS), default="native")
    _add_config_flags(p_bench)
    p_bench.set_defaults(fn=cmd_bench_timings)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse usage errors and --help
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    try:
        return args.fn(args)
    except SystemExit as exc:
        if isinstance(exc.code, str):
            print(exc.code, file=sys.stderr)
            return EXIT_USAGE
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (json.JSONDecodeError, ValueError, KeyError) as exc:
        print(f"error: bad input: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except CodeRagError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
