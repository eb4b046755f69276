"""Command-line entry points.

Subcommands: ``index build``/``index query`` manage the offensive-corpus
vector index, ``gate check`` screens a text, ``eval replay``/``eval
alpha``/``eval aggregate`` drive the offline evaluation tooling, and
``serve`` starts the HTTP session service.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .detox import DetoxConfig, GateScope, gate
from .evalkit import (
    ConversationKind,
    ReplayConfig,
    aggregate,
    alpha_by_dimension,
    format_table,
    krippendorff_alpha,
    load_ratings,
    replay_corpus,
    replay_results_to_jsonl,
    table_to_delimited,
)
from .gateway import DEFAULT_EMBEDDING_DIM, GenerationParams, MockGateway
from .safety_index import (
    CorpusColumns,
    build_index,
    ingest_corpus,
    load_index,
    nearest,
    save_index,
)
from .service.config import (
    ServiceConfig,
    build_gateway,
    build_manager,
    load_config,
    resolve_index,
    resolve_rules,
    resolve_template,
)

logger = logging.getLogger(__name__)


def _load_service_config(args) -> ServiceConfig:
    if getattr(args, "config", None):
        return load_config(args.config)
    return ServiceConfig()


def _gateway_from_args(args):
    if getattr(args, "config", None):
        return build_gateway(load_config(args.config))
    return MockGateway(dim=args.dim)


def _cmd_index_build(args) -> int:
    columns = CorpusColumns(
        text_column=args.text_column,
        label_column=args.label_column,
        offensive_values=tuple(args.offensive_value),
        delimiter=args.delimiter,
        index_all=args.index_all,
    )
    entries = ingest_corpus(Path(args.corpus).read_text(encoding="utf-8"), columns)
    gateway = _gateway_from_args(args)
    index = build_index(entries, gateway)
    save_index(index, args.out)
    print(f"indexed {len(index)} entries (dim {index.dim}) -> {args.out}")
    return 0


def _cmd_index_query(args) -> int:
    index = load_index(args.index)
    gateway = _gateway_from_args(args)
    if gateway.dim != index.dim:
        gateway = MockGateway(dim=index.dim)
    hits = nearest(index, gateway.embed(args.text), k=args.k)
    if not hits:
        print("index is empty")
        return 0
    by_id = {entry.id: entry for entry in index.entries}
    for hit in hits:
        label = by_id[hit.entry_id].label
        print(f"id={hit.entry_id} distance={hit.distance:.6f} label={label}")
    return 0


def _cmd_gate_check(args) -> int:
    text = Path(args.file).read_text(encoding="utf-8") if args.file else args.text
    if not text or not text.strip():
        print("no text to check", file=sys.stderr)
        return 2
    index = load_index(args.index)
    gateway = _gateway_from_args(args)
    if gateway.dim != index.dim:
        gateway = MockGateway(dim=index.dim)
    config = DetoxConfig(alpha=args.alpha, k=args.k, scope=GateScope(args.scope))
    verdict = gate(text, index, gateway, config)
    decision = "BLOCK" if verdict.blocked else "PASS"
    if verdict.empty_index:
        print(f"{decision} (empty index) alpha={verdict.alpha}")
    else:
        nearest_d = verdict.min_distance
        print(f"{decision} min_distance={nearest_d:.6f} alpha={verdict.alpha}")
    return 1 if verdict.blocked else 0


def _cmd_eval_replay(args) -> int:
    config = _load_service_config(args)
    gateway = build_gateway(config)
    index = load_index(args.index) if args.index else resolve_index(config, gateway)
    replay_cfg = ReplayConfig(
        rules=tuple(resolve_rules(config)),
        template=resolve_template(config),
        detox=config.detox_config(),
        params=GenerationParams(
            model_name=config.provider.chat_model,
            temperature=config.temperature,
            max_output_tokens=config.max_output_tokens,
        ),
        token_budget=config.token_budget,
    )
    corpus = Path(args.infile).read_text(encoding="utf-8")
    results = replay_corpus(corpus, gateway, index, replay_cfg)
    payload = replay_results_to_jsonl(results)
    if args.out:
        Path(args.out).write_text(payload, encoding="utf-8")
        failed = sum(1 for r in results if r.error)
        print(f"replayed {len(results)} conversations ({failed} failed) -> {args.out}")
    else:
        sys.stdout.write(payload)
    return 0


def _cmd_eval_alpha(args) -> int:
    matrix = load_ratings(Path(args.infile).read_text(encoding="utf-8"))
    print(f"joint alpha: {krippendorff_alpha(matrix):.6f}")
    for dimension, value in alpha_by_dimension(matrix).items():
        shown = f"{value:.6f}" if value is not None else "n/a (insufficient data)"
        print(f"{dimension}: {shown}")
    return 0


def _cmd_eval_aggregate(args) -> int:
    matrix = load_ratings(Path(args.infile).read_text(encoding="utf-8"))
    table = aggregate(matrix, ConversationKind(args.kind))
    if args.out:
        Path(args.out).write_text(table_to_delimited(table), encoding="utf-8")
        print(f"wrote {args.out}")
    else:
        print(format_table(table))
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    from .service.api import create_app

    config = load_config(args.config)
    manager = build_manager(config)
    app = create_app(manager, auth_token=config.auth_token)
    uvicorn.run(app, host=config.host, port=config.port, log_level="info")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="replyplus")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    index_p = sub.add_parser("index", help="offensive-corpus vector index")
    index_sub = index_p.add_subparsers(dest="index_command", required=True)

    build_p = index_sub.add_parser("build", help="ingest a corpus and build the index")
    build_p.add_argument("--corpus", required=True)
    build_p.add_argument("--out", required=True)
    build_p.add_argument("--config", help="service config for provider settings")
    build_p.add_argument("--dim", type=int, default=DEFAULT_EMBEDDING_DIM)
    build_p.add_argument("--text-column", default="TEXT")
    build_p.add_argument("--label-column", default="label")
    build_p.add_argument("--offensive-value", action="append", default=None)
    build_p.add_argument("--delimiter", default=",")
    build_p.add_argument("--index-all", action="store_true", help="index every row regardless of label")
    build_p.set_defaults(func=_cmd_index_build)

    query_p = index_sub.add_parser("query", help="nearest entries for a text")
    query_p.add_argument("--index", required=True)
    query_p.add_argument("--text", required=True)
    query_p.add_argument("-k", type=int, default=1)
    query_p.add_argument("--config")
    query_p.add_argument("--dim", type=int, default=DEFAULT_EMBEDDING_DIM)
    query_p.set_defaults(func=_cmd_index_query)

    gate_p = sub.add_parser("gate", help="toxicity gate")
    gate_sub = gate_p.add_subparsers(dest="gate_command", required=True)
    check_p = gate_sub.add_parser("check", help="screen one text against the index")
    check_p.add_argument("--index", required=True)
    check_p.add_argument("--text")
    check_p.add_argument("--file", help="read the text from a file instead")
    check_p.add_argument("--alpha", type=float, default=0.2)
    check_p.add_argument("-k", type=int, default=1)
    check_p.add_argument("--scope", choices=[s.value for s in GateScope], default="whole_report")
    check_p.add_argument("--config")
    check_p.add_argument("--dim", type=int, default=DEFAULT_EMBEDDING_DIM)
    check_p.set_defaults(func=_cmd_gate_check)

    eval_p = sub.add_parser("eval", help="offline evaluation tooling")
    eval_sub = eval_p.add_subparsers(dest="eval_command", required=True)

    replay_p = eval_sub.add_parser("replay", help="run a conversation corpus through the pipeline")
    replay_p.add_argument("--in", dest="infile", required=True)
    replay_p.add_argument("--out")
    replay_p.add_argument("--config", help="service config for provider/detox/paths")
    replay_p.add_argument("--index", help="override the index file from the config")
    replay_p.set_defaults(func=_cmd_eval_replay)

    alpha_p = eval_sub.add_parser("alpha", help="inter-rater agreement from a ratings file")
    alpha_p.add_argument("--in", dest="infile", required=True)
    alpha_p.set_defaults(func=_cmd_eval_alpha)

    agg_p = eval_sub.add_parser("aggregate", help="per-dimension Yes/No/Not-sure table")
    agg_p.add_argument("--in", dest="infile", required=True)
    agg_p.add_argument("--out", help="write CSV here instead of printing the table")
    agg_p.add_argument(
        "--kind", choices=[k.value for k in ConversationKind], default="single_round"
    )
    agg_p.set_defaults(func=_cmd_eval_aggregate)

    serve_p = sub.add_parser("serve", help="start the HTTP session service")
    serve_p.add_argument("--config", required=True)
    serve_p.set_defaults(func=_cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    if getattr(args, "offensive_value", None) is None and hasattr(args, "offensive_value"):
        args.offensive_value = ["1"]
    try:
        return args.func(args)
    except Exception as exc:  # noqa: BLE001 - single reporting point for CLI failures
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
