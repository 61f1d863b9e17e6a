"""Command-line entry points.

Subcommands:

  ingest            read a conversation JSONL file, build a graph, save it
  query             load a graph and print the injected context for a question
  export            dump a graph as TSV node and edge lines
  bench run         planted-fact benchmark across memory conditions
  bench sweep       threshold, rag, or alpha sweep tables
  bench recall      retrieval-only keyword recall per hop budget

Benchmark outputs embed the resolved configuration and seed and contain no
timestamps, so a rerun with the same arguments is byte-identical.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from typing import Optional, Sequence

import yaml

from .benchmark import (
    CONDITIONS,
    THRESHOLD_PRESETS,
    BenchmarkCase,
    ConditionResult,
    Variant,
    alpha_sweep,
    generate_cases,
    rag_sweep,
    ref_grid,
    retrieval_recall_eval,
    run_condition,
    threshold_sweep,
)
from .config import EngineConfig, build_bundle, deep_merge, load_config
from .core import deserialize_graph, serialize_graph
from .engine import CanvasEngine
from .errors import CanvasError
from .extraction import ConversationTurn
from .retrieval import retrieve

log = logging.getLogger(__name__)


def _parse_overrides(pairs: Optional[Sequence[str]]) -> dict:
    """Turn repeated ``--set a.b.c=value`` flags into a nested dict."""
    merged: dict = {}
    for pair in pairs or ():
        if "=" not in pair:
            raise ValueError(f"--set expects key=value, got {pair!r}")
        dotted, raw = pair.split("=", 1)
        value = yaml.safe_load(raw)
        node: dict = {}
        leaf = node
        keys = [k for k in dotted.split(".") if k]
        if not keys:
            raise ValueError(f"--set has an empty key in {pair!r}")
        for key in keys[:-1]:
            leaf[key] = {}
            leaf = leaf[key]
        leaf[keys[-1]] = value
        merged = deep_merge(merged, node)
    return merged


def _load_engine_config(args) -> EngineConfig:
    overrides = _parse_overrides(getattr(args, "set", None))
    return load_config(getattr(args, "config", None), overrides)


def _read_conversation(path: str) -> list[ConversationTurn]:
    turns = []
    with open(path, "r", encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}:{line_no}: not valid JSON: {exc}") from exc
            if "index" not in record:
                raise ValueError(f"{path}:{line_no}: missing 'index' field")
            turns.append(
                ConversationTurn(
                    index=record["index"],
                    user_text=record.get("user", ""),
                    assistant_text=record.get("assistant", ""),
                    timestamp=record.get("timestamp"),
                )
            )
    return turns


def _write_jsonl(path: str, rows: Sequence[dict]) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for row in rows:
            handle.write(json.dumps(row, sort_keys=True) + "\n")


def _print_table(rows: Sequence[dict], columns: Sequence[str]) -> None:
    if not rows:
        return
    def fmt(value) -> str:
        if isinstance(value, bool):
            return str(value)
        if isinstance(value, float):
            return f"{value:.3f}"
        if value is None:
            return "-"
        return str(value)
    rendered = [[fmt(row.get(col)) for col in columns] for row in rows]
    widths = [max(len(col), *(len(r[i]) for r in rendered)) for i, col in enumerate(columns)]
    print("  ".join(col.ljust(widths[i]) for i, col in enumerate(columns)))
    for r in rendered:
        print("  ".join(r[i].ljust(widths[i]) for i in range(len(columns))))


# ---------------------------------------------------------------------------
# Subcommand implementations
# ---------------------------------------------------------------------------

def cmd_ingest(args) -> int:
    config = _load_engine_config(args)
    bundle = build_bundle(config)
    turns = _read_conversation(args.input)
    engine = CanvasEngine(
        extractor=bundle.extractor,
        embedder=bundle.embedder,
        thresholds=config.thresholds,
        gleaning=config.gleaning,
    )
    report = engine.ingest(turns)
    with open(args.graph, "wb") as handle:
        handle.write(serialize_graph(engine.graph))
    print(
        f"ingested {report.turns_ingested} turns "
        f"({report.turns_skipped} failed), "
        f"{report.objects_added} objects, "
        f"{report.edges_added} edges, "
        f"{report.duplicates} duplicates, "
        f"{report.dropped_quotes} ungrounded quotes dropped"
    )
    return 0


def cmd_query(args) -> int:
    config = _load_engine_config(args)
    if args.preset:
        config = EngineConfig(
            gleaning=config.gleaning,
            thresholds=config.thresholds,
            retrieval=type(config.retrieval).preset(args.preset),
            backends=config.backends,
            bench=config.bench,
        )
    bundle = build_bundle(config)
    with open(args.graph, "rb") as handle:
        graph = deserialize_graph(handle.read())
    block = retrieve(graph, args.question, bundle.embedder, config.retrieval, bundle.reranker)
    if args.answer:
        print(bundle.answerer.answer(args.question, block))
    else:
        print(block, end="")
    return 0


def cmd_export(args) -> int:
    with open(args.graph, "rb") as handle:
        graph = deserialize_graph(handle.read())
    lines = []
    for obj in sorted(graph.objects.values(), key=lambda o: (o.turn, o.id)):
        lines.append(
            "\t".join([
                "node", obj.id, obj.kind.value, str(obj.turn),
                f"{obj.confidence:.6f}", obj.content, obj.quote,
            ])
        )
    for edge in sorted(graph.edges, key=lambda e: (e.src, e.dst, e.kind.value)):
        lines.append(
            "\t".join([
                "edge", edge.src, edge.dst, edge.kind.value,
                f"{edge.weight:.6f}", edge.origin.value,
            ])
        )
    text = "\n".join(lines) + ("\n" if lines else "")
    if args.output:
        with open(args.output, "w", encoding="utf-8") as handle:
            handle.write(text)
    else:
        print(text, end="")
    return 0


def _result_row(result: ConditionResult) -> dict:
    return {
        "kind": "result",
        "condition": result.condition,
        "variant": result.variant.value,
        "seed": result.seed,
        "aggregates": result.aggregates.to_dict(),
        "records": [
            {
                "question": r.question,
                "label": r.label,
                "fuzzy": r.fuzzy,
                "exact": r.exact,
                "keyword_coverage": r.keyword_coverage,
                "answered": r.answered,
            }
            for r in result.records
        ],
    }


def cmd_bench_run(args) -> int:
    config = _load_engine_config(args)
    bundle = build_bundle(config)
    variant = Variant(args.variant)
    conditions = args.conditions.split(",") if args.conditions else list(CONDITIONS)
    for condition in conditions:
        if condition not in CONDITIONS:
            raise ValueError(f"unknown condition {condition!r}")
    count = args.cases if args.cases is not None else config.bench.cases
    cases = generate_cases(
        count,
        variant,
        base_seed=args.seed,
        tagged=not args.untagged,
        n_turns=config.bench.n_turns,
        compression_turn=config.bench.compression_turn,
        facts_per_case=config.bench.facts_per_case,
        stories_per_case=config.bench.stories_per_case,
    )

    tasks = [(case, condition) for condition in conditions for case in cases]
    if args.jobs > 1:
        with ThreadPoolExecutor(max_workers=args.jobs) as pool:
            results = list(
                pool.map(lambda t: run_condition(t[0], t[1], bundle, config), tasks)
            )
    else:
        results = [run_condition(case, condition, bundle, config) for case, condition in tasks]

    summary_rows = []
    for condition in conditions:
        pooled = []
        for result in results:
            if result.condition == condition:
                pooled.extend(result.records)
        from .benchmark import aggregate_records

        summary_rows.append({"condition": condition, **aggregate_records(pooled).to_dict()})
    _print_table(
        summary_rows,
        ["condition", "questions", "recall_rate", "exact_rate",
         "keyword_coverage", "pass_rate", "causal_coverage", "impact_coverage"],
    )

    if args.output:
        header = {
            "kind": "bench-run",
            "base_seed": args.seed,
            "cases": count,
            "variant": variant.value,
            "tagged": not args.untagged,
            "conditions": conditions,
            "config": config.to_dict(),
        }
        _write_jsonl(args.output, [header] + [_result_row(r) for r in results])
        print(f"wrote {args.output}")
    return 0


def cmd_bench_sweep(args) -> int:
    config = _load_engine_config(args)
    bundle = build_bundle(config)
    variant = Variant(args.variant)
    count = args.cases if args.cases is not None else config.bench.cases
    cases = generate_cases(count, variant, base_seed=args.seed, tagged=not args.untagged)

    if args.kind == "threshold":
        grid = ref_grid() if args.grid else list(THRESHOLD_PRESETS)
        rows = threshold_sweep(cases, bundle, config, grid)
        columns = ["config", "theta_ref", "theta_causal"]
    elif args.kind == "rag":
        rows = rag_sweep(cases, bundle, config)
        columns = ["config", "chunk_size", "top_k", "overlap"]
    else:
        rows = alpha_sweep(cases, bundle, config)
        columns = ["config", "alpha"]
    columns += ["questions", "recall_rate", "exact_rate", "keyword_coverage", "pass_rate"]
    _print_table(rows, columns)

    if args.output:
        header = {
            "kind": f"bench-sweep-{args.kind}",
            "base_seed": args.seed,
            "cases": count,
            "variant": variant.value,
            "config": config.to_dict(),
        }
        _write_jsonl(args.output, [header] + [{"kind": "row", **row} for row in rows])
        print(f"wrote {args.output}")
    return 0


def cmd_bench_recall(args) -> int:
    config = _load_engine_config(args)
    bundle = build_bundle(config)
    variant = Variant(args.variant)
    count = args.cases if args.cases is not None else config.bench.cases
    cases = generate_cases(count, variant, base_seed=args.seed, tagged=not args.untagged)
    hops_list = [int(h) for h in args.hops.split(",")]
    rows = retrieval_recall_eval(cases, bundle, config, hops_list)
    _print_table(rows, ["hops", "questions", "recall"])
    if args.output:
        header = {
            "kind": "bench-recall",
            "base_seed": args.seed,
            "cases": count,
            "variant": variant.value,
            "config": config.to_dict(),
        }
        _write_jsonl(args.output, [header] + [{"kind": "row", **row} for row in rows])
        print(f"wrote {args.output}")
    return 0


# ---------------------------------------------------------------------------
# Parser wiring
# ---------------------------------------------------------------------------

def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="YAML configuration file")
    parser.add_argument(
        "--set", action="append", metavar="KEY=VALUE",
        help="override a configuration key, dotted path (repeatable)",
    )


def _add_bench_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--cases", type=int, default=None, help="number of generated cases")
    parser.add_argument("--seed", type=int, default=0, help="base seed for case generation")
    parser.add_argument(
        "--variant", choices=[v.value for v in Variant], default=Variant.STANDARD.value,
    )
    parser.add_argument(
        "--untagged", action="store_true",
        help="plant facts as natural sentences instead of tagged markers",
    )
    parser.add_argument("--output", help="write results as JSONL")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="canvasmem",
        description="Typed conversation memory: extraction, graph, retrieval, benchmark.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p_ingest = sub.add_parser("ingest", help="build a graph from a conversation JSONL file")
    p_ingest.add_argument("--input", required=True, help="conversation JSONL path")
    p_ingest.add_argument("--graph", required=True, help="graph JSON output path")
    _add_config_flags(p_ingest)
    p_ingest.set_defaults(func=cmd_ingest)

    p_query = sub.add_parser("query", help="print the injected context for a question")
    p_query.add_argument("question")
    p_query.add_argument("--graph", required=True, help="graph JSON path")
    p_query.add_argument("--answer", action="store_true", help="run the answer backend too")
    p_query.add_argument("--preset", choices=["standard", "locomo"], default=None)
    _add_config_flags(p_query)
    p_query.set_defaults(func=cmd_query)

    p_export = sub.add_parser("export", help="dump a graph as TSV node and edge lines")
    p_export.add_argument("--graph", required=True, help="graph JSON path")
    p_export.add_argument("--output", help="TSV output path, stdout when omitted")
    p_export.set_defaults(func=cmd_export)

    p_bench = sub.add_parser("bench", help="planted-fact benchmark")
    bench_sub = p_bench.add_subparsers(dest="bench_command", required=True)

    p_run = bench_sub.add_parser("run", help="evaluate memory conditions")
    p_run.add_argument(
        "--conditions", default=None,
        help=f"comma-separated subset of {','.join(CONDITIONS)}",
    )
    p_run.add_argument("--jobs", type=int, default=1, help="thread pool size")
    _add_bench_flags(p_run)
    _add_config_flags(p_run)
    p_run.set_defaults(func=cmd_bench_run)

    p_sweep = bench_sub.add_parser("sweep", help="threshold, rag, or alpha sweeps")
    p_sweep.add_argument("--kind", choices=["threshold", "rag", "alpha"], required=True)
    p_sweep.add_argument(
        "--grid", action="store_true",
        help="threshold sweep only: use the bare reference grid instead of presets",
    )
    _add_bench_flags(p_sweep)
    _add_config_flags(p_sweep)
    p_sweep.set_defaults(func=cmd_bench_sweep)

    p_recall = bench_sub.add_parser("recall", help="retrieval-only keyword recall per hop budget")
    p_recall.add_argument("--hops", default="0,1", help="comma-separated hop budgets")
    _add_bench_flags(p_recall)
    _add_config_flags(p_recall)
    p_recall.set_defaults(func=cmd_bench_recall)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except (CanvasError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
