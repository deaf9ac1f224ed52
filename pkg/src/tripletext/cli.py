"""Command-line entry point wiring every stage of the pipeline.

Subcommands: ingest, build-index, datagen, serve, query, eval, stats.
Diagnostics go to stderr via logging; data goes to stdout. Exit codes:
0 success, 1 usage error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .client import plan_and_execute
from .config import AppConfig, ConfigError
from .corpus import Corpus, Lexicon
from .datagen import extract_all, read_all_datasets, write_datasets
from .evaluation import EvalConfig, build_report, evaluate, summarize
from .executor import QAExecutor
from .extractors import BaselineExtractor, ExtractorRegistry, GoldExtractor, RemoteExtractor
from .kg import TripleStore
from .ntriples import ingest_ntriples, ingest_tsv, write_tsv
from .search import SearchIndex
from .service import TpfServer, TpfService
from .sparql import parse_select

logger = logging.getLogger("tripletext")

USAGE_ERROR = 1
RUNTIME_ERROR = 2


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # exit 1 on usage errors, not argparse's 2
        self.print_usage(sys.stderr)
        self.exit(USAGE_ERROR, f"{self.prog}: error: {message}\n")


def _load_store(config: AppConfig) -> TripleStore:
    config.require("store_path")
    path = Path(config.store_path)
    if path.suffix == ".tsv":
        report = ingest_tsv(path, config.ingest)
    else:
        report = ingest_ntriples(path, config.ingest)
    logger.info(
        "store loaded: %d triples (%d blank-node lines, %d malformed lines skipped)",
        report.parsed,
        report.skipped_blank_nodes,
        report.skipped_malformed,
    )
    return report.store


def _load_lexicon(config: AppConfig, store: TripleStore | None) -> Lexicon:
    if config.lexicon_path:
        return Lexicon.from_tsv(config.lexicon_path)
    if store is None:
        store = _load_store(config)
    return Lexicon.from_store(store)


def _build_executor(config: AppConfig, with_store: bool = False) -> QAExecutor:
    config.require("corpus_path")
    corpus = Corpus.from_jsonl(config.corpus_path)
    store = _load_store(config) if (with_store or not config.lexicon_path) else None
    lexicon = _load_lexicon(config, store)
    if config.index_path and Path(config.index_path).exists():
        index = SearchIndex.load(config.index_path)
    else:
        logger.info("no index file, building in memory")
        index = SearchIndex.build(corpus)
    registry = None
    if config.registry_path:
        registry = ExtractorRegistry.from_file(config.registry_path, store=store, lexicon=lexicon)
    return QAExecutor(corpus, index, lexicon, registry=registry, config=config.executor)


def _cmd_ingest(args: argparse.Namespace) -> int:
    config = AppConfig.load(args.config) if args.config else AppConfig()
    source = Path(args.source or config.store_path or "")
    if not source or not source.exists():
        raise ConfigError(f"store dump not found: {source}")
    if source.suffix == ".tsv":
        report = ingest_tsv(source, config.ingest)
    else:
        report = ingest_ntriples(source, config.ingest)
    if args.out:
        write_tsv(report.store, args.out)
        logger.info("normalized store written to %s", args.out)
    print(
        json.dumps(
            {
                "triples": len(report.store),
                "parsed": report.parsed,
                "skipped_blank_nodes": report.skipped_blank_nodes,
                "skipped_malformed": report.skipped_malformed,
                "predicates": len(report.store.predicates()),
            },
            sort_keys=True,
        )
    )
    return 0


def _cmd_build_index(args: argparse.Namespace) -> int:
    config = AppConfig.load(args.config) if args.config else AppConfig()
    corpus_path = args.corpus or config.corpus_path
    out = args.out or config.index_path
    if not corpus_path or not out:
        raise ConfigError("build-index needs --corpus and --out (or a config providing them)")
    corpus = Corpus.from_jsonl(corpus_path)
    index = SearchIndex.build(corpus)
    index.save(out)
    print(json.dumps({"documents": len(index), "index": str(out)}, sort_keys=True))
    return 0


def _cmd_datagen(args: argparse.Namespace) -> int:
    config = AppConfig.load(args.config) if args.config else AppConfig()
    if args.store:
        config = AppConfig.from_dict({**config.to_dict(), "store_path": args.store})
    if args.corpus:
        config = AppConfig.from_dict({**config.to_dict(), "corpus_path": args.corpus})
    config.require("store_path", "corpus_path")
    cfg = config.datagen
    if args.setting:
        cfg = type(cfg).from_dict({**cfg.to_dict(), "setting": args.setting})
    if args.window_chars:
        cfg = type(cfg).from_dict({**cfg.to_dict(), "window_chars": args.window_chars})
    store = _load_store(config)
    corpus = Corpus.from_jsonl(config.corpus_path)
    lexicon = _load_lexicon(config, store)
    datasets = extract_all(store, corpus, lexicon, cfg)
    manifest = write_datasets(datasets, args.out, cfg)
    included = sum(1 for ds in datasets if ds.included(cfg))
    print(
        json.dumps(
            {"datasets": len(datasets), "included": included, "manifest": str(manifest)},
            sort_keys=True,
        )
    )
    return 0


def _cmd_serve(args: argparse.Namespace) -> int:
    config = AppConfig.load(args.config)
    executor = _build_executor(config, with_store=True)
    service = TpfService(executor, page_size=config.server.page_size)
    server = TpfServer(service, host=config.server.host, port=args.port or config.server.port)
    logger.info("serving fragments at %s/fragment", server.url)
    print(server.url, flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        logger.info("shutting down")
    return 0


def _cmd_query(args: argparse.Namespace) -> int:
    if args.sparql:
        text = Path(args.sparql).read_text(encoding="utf-8") if Path(args.sparql).exists() else args.sparql
        query = parse_select(text)
        if not args.endpoint:
            raise ConfigError("--sparql queries need --endpoint")
        table = plan_and_execute(query, args.endpoint)
        for warning in table.warnings:
            logger.warning("%s", warning)
        if args.json:
            sys.stdout.write(table.to_json_bytes().decode("utf-8") + "\n")
        else:  # TSV is the default; --tsv makes it explicit
            sys.stdout.write(table.to_tsv())
        return 0
    if args.pattern:
        from .service import parse_pattern_params

        parts = args.pattern.split()
        if len(parts) != 3:
            raise ConfigError("--pattern needs 's p o' with _ for variables")
        pattern = parse_pattern_params(dict(zip("spo", parts)))
        if not args.config:
            raise ConfigError("--pattern queries need --config")
        executor = _build_executor(AppConfig.load(args.config), with_store=True)
        result = executor.answer_pattern(pattern)
        payload = {
            "pattern": pattern.to_dict(),
            "bindings": [
                {
                    "binding": {k: t.to_dict() for k, t in rb.binding.items()},
                    "score": rb.score,
                    "evidence": {
                        "doc_iri": rb.evidence.doc_iri,
                        "start": rb.evidence.start,
                        "end": rb.evidence.end,
                        "text": rb.evidence.text,
                    },
                }
                for rb in result.bindings
            ],
            "estimated_total": result.estimated_total,
        }
        print(json.dumps(payload, sort_keys=True, ensure_ascii=False))
        return 0
    raise ConfigError("query needs --sparql or --pattern")


def _make_eval_extractor(spec: str, config: AppConfig | None):
    if spec == "baseline":
        return BaselineExtractor()
    if spec == "gold":
        if config is None:
            raise ConfigError("gold evaluation needs --config for the store")
        store = _load_store(config)
        return GoldExtractor(store, _load_lexicon(config, store))
    if spec.startswith("remote:"):
        return RemoteExtractor(spec.split(":", 1)[1])
    raise ConfigError(f"unknown extractor {spec!r} (use baseline, gold, or remote:URL)")


def _cmd_eval(args: argparse.Namespace) -> int:
    config = AppConfig.load(args.config) if args.config else None
    datasets = read_all_datasets(args.datasets)
    if not datasets:
        raise ConfigError(f"no included datasets under {args.datasets}")
    if config is not None:
        store = _load_store(config)
        lexicon = _load_lexicon(config, store)
    elif args.extractor in ("baseline", "gold"):
        raise ConfigError(f"{args.extractor} evaluation needs --config for predicate labels")
    else:
        lexicon = Lexicon({})  # remote extractors ignore predicate labels
    extractor = _make_eval_extractor(args.extractor, config)
    records = []
    for dataset in datasets:
        records.append(evaluate(dataset, extractor, lexicon, EvalConfig(split=args.split)))
    report = build_report(records)
    if args.report:
        Path(args.report).write_text(
            json.dumps(report, sort_keys=True, indent=2, ensure_ascii=False) + "\n",
            encoding="utf-8",
        )
        logger.info("report written to %s", args.report)
    print(json.dumps(report["summary"], sort_keys=True))
    return 0


def _cmd_stats(args: argparse.Namespace) -> int:
    manifest = json.loads((Path(args.datasets) / "manifest.json").read_text(encoding="utf-8"))
    kept = [entry["stats"]["kept"] for entry in manifest["datasets"] if entry["included"]]
    payload = {
        "datasets": len(manifest["datasets"]),
        "included": sum(1 for e in manifest["datasets"] if e["included"]),
        "excluded": sum(1 for e in manifest["datasets"] if not e["included"]),
        "kept_examples": summarize([float(k) for k in kept]),
    }
    print(json.dumps(payload, sort_keys=True))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="tripletext", description=__doc__)
    parser.add_argument("--version", action="version", version=f"tripletext {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="parse a store dump, report skip counts")
    p.add_argument("--config")
    p.add_argument("--source", help="N-Triples (.nt) or TSV (.tsv) dump")
    p.add_argument("--out", help="write the normalized TSV store here")
    p.set_defaults(func=_cmd_ingest)

    p = sub.add_parser("build-index", help="build the BM25 index file")
    p.add_argument("--config")
    p.add_argument("--corpus", help="corpus JSON-Lines")
    p.add_argument("--out", help="index output path")
    p.set_defaults(func=_cmd_build_index)

    p = sub.add_parser("datagen", help="construct slot-filling datasets")
    p.add_argument("--config")
    p.add_argument("--store")
    p.add_argument("--corpus")
    p.add_argument("--setting", choices=["sp", "po", "both"])
    p.add_argument("--window-chars", type=int, dest="window_chars")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_datagen)

    p = sub.add_parser("serve", help="run the fragment HTTP service")
    p.add_argument("--config", required=True)
    p.add_argument("--port", type=int)
    p.set_defaults(func=_cmd_serve)

    p = sub.add_parser("query", help="run a SPARQL query or one pattern")
    p.add_argument("--endpoint")
    p.add_argument("--sparql", help="query file or literal query text")
    p.add_argument("--pattern", help="'s p o' with _ for variables (local execution)")
    p.add_argument("--config")
    fmt = p.add_mutually_exclusive_group()
    fmt.add_argument("--json", action="store_true")
    fmt.add_argument("--tsv", action="store_true")
    p.set_defaults(func=_cmd_query)

    p = sub.add_parser("eval", help="score an extractor over written datasets")
    p.add_argument("--datasets", required=True)
    p.add_argument("--extractor", required=True, help="baseline | gold | remote:URL")
    p.add_argument("--split", choices=["test", "train", "all"], default="test")
    p.add_argument("--report", help="write the full report JSON here")
    p.add_argument("--config")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("stats", help="summarize a datagen output directory")
    p.add_argument("--datasets", required=True)
    p.set_defaults(func=_cmd_stats)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except ConfigError as exc:
        logger.error("%s", exc)
        return RUNTIME_ERROR
    except Exception as exc:  # pragma: no cover - defensive catch-all
        logger.error("%s: %s", type(exc).__name__, exc)
        if args.verbose:
            raise
        return RUNTIME_ERROR


if __name__ == "__main__":
    sys.exit(main())
