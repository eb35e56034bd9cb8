"""Command-line entry point (``regkg``)."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import __version__
from .errors import RegKGError, error_payload
from .evaluation import evaluate_spans, format_table, reports_to_json
from .graph import census, export_cypher, load
from .linker import clean_degenerate, find_degenerate, format_degenerate
from .pipeline import load_config, run_pipeline, run_stage, write_dump
from .query import compute_stats, serialize, stats_to_csv
from .server import run_operation, serve
from .tagger import SpanTag


def _add_config(p: argparse.ArgumentParser, jobs: bool = False) -> None:
    p.add_argument("--config", required=True, help="pipeline YAML config")
    if jobs:
        p.add_argument("--jobs", type=int, default=None, help="worker processes for per-paragraph work")
        p.add_argument("--coref", choices=("on", "off"), help="override coreference enrichment")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="regkg", description="Regulatory knowledge-graph toolkit")
    parser.add_argument("--version", action="version", version=f"regkg {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="parse corpus documents into a corpus artifact")
    _add_config(p)
    p.add_argument("--out", required=True)

    for name, helptext in (("tag", "coreference enrichment + tagging"), ("link", "entity linking"),
                           ("relate", "relation extraction")):
        p = sub.add_parser(name, help=helptext)
        _add_config(p, jobs=name != "link")
        p.add_argument("--in", dest="input", required=True)
        p.add_argument("--out", required=True)

    p = sub.add_parser("build", help="assemble the graph dump from a related artifact")
    _add_config(p)
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("run", help="run every stage and write the dump")
    _add_config(p, jobs=True)
    p.add_argument("--out", help="dump path (overrides config output)")
    p.add_argument("--report", help="report path stem; writes .json and .txt")

    q = sub.add_parser("query", help="analytical queries over a dump")
    qs = q.add_subparsers(dest="query", required=True)
    p = qs.add_parser("intersect", help="tags shared by two documents")
    p.add_argument("--graph", required=True)
    p.add_argument("--ttype", required=True)
    p.add_argument("--left", required=True, help="substring of the left document title")
    p.add_argument("--right", required=True, help="substring of the right document title")
    p.add_argument("--limit", type=int)
    p = qs.add_parser("toc", help="heading tree of one document")
    p.add_argument("--graph", required=True)
    p.add_argument("--title", required=True)
    p.add_argument("--max-plevel", type=int, default=0)
    p = qs.add_parser("usage", help="occurrences of tags with a given lemma")
    p.add_argument("--graph", required=True)
    p.add_argument("--ttype", nargs="*", help="restrict to these concepts")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--lemma", help="exact lemma")
    g.add_argument("--contains", nargs="+", help="lemma must contain every term")
    p = qs.add_parser("paths", help="shortest paths between matching occurrences")
    p.add_argument("--graph", required=True)
    p.add_argument("--src-contains", required=True)
    p.add_argument("--dst-contains", required=True)
    p.add_argument("--max-len", type=int, default=4)
    p.add_argument("--limit", type=int)

    p = sub.add_parser("stats", help="tag statistics and co-occurrence")
    p.add_argument("--graph", required=True)
    p.add_argument("--ttype", default="PROD", help="concept for per-document lemma proportions")
    p.add_argument("--per-document", action="store_true", help="only the per-document figures")
    p.add_argument("--census", action="store_true", help="print the node/edge census instead")
    p.add_argument("--out", help="write to a file; .csv gives long-format CSV")

    p = sub.add_parser("clean", help="remove tags with (near-)empty lemmas")
    p.add_argument("--graph", required=True)
    p.add_argument("--max-lemma-len", type=int, required=True)
    p.add_argument("--dry-run", action="store_true", help="list what would go, change nothing")
    p.add_argument("--out", help="write the cleaned dump here instead of in place")

    p = sub.add_parser("export-cypher", help="write a Cypher CREATE script")
    p.add_argument("--graph", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("serve", help="serve queries as JSON over HTTP")
    p.add_argument("--graph", required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)

    p = sub.add_parser("eval", help="span-level precision/recall/F1")
    p.add_argument("--gold", required=True, help="JSON-lines span file")
    p.add_argument("--pred", required=True, help="JSON-lines span file")
    p.add_argument("--mode", choices=("overlap", "exact"), default="overlap")
    p.add_argument("--json", action="store_true")
    return parser


def _emit(data: bytes | str, out: str | None = None) -> None:
    if isinstance(data, str):
        data = data.encode("utf-8")
    if out:
        Path(out).write_bytes(data)
    else:
        sys.stdout.buffer.write(data)
        if not data.endswith(b"\n"):
            sys.stdout.buffer.write(b"\n")
        sys.stdout.flush()


def _read_spans(path: str) -> list[SpanTag]:
    spans = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                spans.append(SpanTag.from_dict(json.loads(line)))
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                from .errors import FormatError
                raise FormatError(f"{path}: bad span record: {exc}", lineno) from None
    return spans


def _overrides(args: argparse.Namespace) -> dict:
    coref = getattr(args, "coref", None)
    return {"jobs": getattr(args, "jobs", None),
            "coref_enabled": None if coref is None else coref == "on"}


def _dispatch(args: argparse.Namespace) -> int:
    cmd = args.command
    if cmd in ("ingest", "tag", "link", "relate", "build"):
        cfg = load_config(args.config, _overrides(args))
        run_stage(cmd, cfg, getattr(args, "input", None), args.out)
        return 0
    if cmd == "run":
        cfg = load_config(args.config, {**_overrides(args), "output": args.out})
        report = run_pipeline(cfg, args.report)
        _emit(report.to_text())
        return 0
    if cmd == "query":
        graph = load(args.graph)
        if args.query == "intersect":
            params = {"ttype": args.ttype, "left": args.left, "right": args.right, "limit": args.limit}
        elif args.query == "toc":
            params = {"title": args.title, "max_plevel": args.max_plevel}
        elif args.query == "usage":
            params = {"ttype": args.ttype or None}
            if args.lemma is not None:
                params["lemma"] = args.lemma
            else:
                params["lemma_contains"] = args.contains
        else:
            params = {"src_contains": args.src_contains, "dst_contains": args.dst_contains,
                      "max_len": args.max_len, "limit": args.limit}
        _emit(run_operation(graph, args.query, params))
        return 0
    if cmd == "stats":
        graph = load(args.graph)
        if args.census:
            _emit(serialize(census(graph).to_dict()), args.out)
            return 0
        stats = compute_stats(graph, args.ttype)
        if args.out and args.out.endswith(".csv"):
            _emit(stats_to_csv(stats), args.out)
            return 0
        payload = stats.to_dict()
        if args.per_document:
            payload = {k: payload[k] for k in ("per_document", "proportions", "proportions_ttype")}
        _emit(serialize(payload), args.out)
        return 0
    if cmd == "clean":
        graph = load(args.graph)
        if args.dry_run:
            _emit(format_degenerate(find_degenerate(graph, args.max_lemma_len)))
            return 0
        nodes, edges = clean_degenerate(graph, args.max_lemma_len)
        write_dump(graph, args.out or args.graph)
        _emit(f"Deleted {nodes} nodes, deleted {edges} relationships")
        return 0
    if cmd == "export-cypher":
        graph = load(args.graph)
        count = export_cypher(graph, args.out)
        _emit(f"{count} statements written to {args.out}")
        return 0
    if cmd == "serve":
        serve(load(args.graph), args.port, args.host)
        return 0
    if cmd == "eval":
        reports = evaluate_spans(_read_spans(args.gold), _read_spans(args.pred), args.mode)
        rows = list(reports.values())
        _emit(reports_to_json(rows) if args.json else format_table(rows))
        return 0
    raise AssertionError(f"unhandled command {cmd}")


def main(argv: list[str] | None = None) -> int:
    verbose = os.environ.get("REGKG_VERBOSE", "").strip().lower() not in ("", "0", "false", "no")
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    args = build_parser().parse_args(argv)
    try:
        return _dispatch(args)
    except (RegKGError, OSError) as exc:
        payload = error_payload(exc)
        if isinstance(exc, OSError):
            payload["error"]["code"] = "io_error"
        sys.stderr.write(json.dumps(payload, sort_keys=True, ensure_ascii=False) + "\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
