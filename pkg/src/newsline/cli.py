"""Command line entry point: ``newsline {run,evaluate,build-pool,index,bench}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Sequence

from newsline.config import RunConfig, build_embedder, build_gateway, build_provider, build_services
from newsline.core import EventDate, Timeline, Topic, parse_date
from newsline.datasets import KINDS, iter_corpus, load_dataset, topic_from_record
from newsline.errors import NewslineError
from newsline.evaluation import evaluate_run, run_bench
from newsline.metrics import TokenizerConfig
from newsline.pipeline import MODES, Services, run_pipeline
from newsline.pool_builder import build_pool
from newsline.questioning import ExamplePool
from newsline.retrieval.index import DEFAULT_CHUNK_SIZE, CorpusIndex, LocalSearchProvider

logger = logging.getLogger("newsline")


def _write_json(path: str | None, data: Any) -> None:
    text = json.dumps(data, ensure_ascii=False, indent=2, sort_keys=True) + "\n"
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(text, encoding="utf-8")


def _read_timeline(path: str) -> Timeline:
    """A timeline array, or a topic record carrying one."""
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    if isinstance(data, dict):
        if "events" in data and isinstance(data["events"], list) and "query" not in data:
            data = data["events"]
        else:
            topic = topic_from_record(data, path)
            if topic.reference is None:
                raise SystemExit(f"{path}: no timeline found")
            return topic.reference
    return Timeline.from_json(data)


def _load_topics(args: argparse.Namespace) -> list[Topic]:
    if getattr(args, "query", None):
        if not args.cutoff:
            raise SystemExit("--cutoff is required with --query")
        return [Topic(args.query, parse_date(args.cutoff))]
    if not args.topic:
        raise SystemExit("give a topic file or --query/--cutoff")
    return load_dataset(args.topic, "open_tls").topics


def _tokenizer(args: argparse.Namespace) -> TokenizerConfig:
    return TokenizerConfig(stemming=args.stem, stopword_removal=args.stopwords)


def cmd_run(args: argparse.Namespace) -> int:
    rc = RunConfig.load(args.config)
    cfg = rc.pipeline_config(mode=args.mode, rounds=args.rounds, m=args.m, N=args.N, s=args.s, l=args.l)
    services = build_services(rc, args.cache_dir)
    topics = _load_topics(args)
    if len(topics) != 1:
        raise SystemExit(f"run expects one topic, got {len(topics)}")
    timeline, report = run_pipeline(topics[0], cfg, services)
    _write_json(args.out, timeline.to_json())
    if args.report:
        Path(args.report).write_text(report.dumps() + "\n", encoding="utf-8")
    return 0


def cmd_evaluate(args: argparse.Namespace) -> int:
    pred = _read_timeline(args.pred)
    ref = _read_timeline(args.ref)
    report = evaluate_run(pred, ref, args.out, _tokenizer(args), label=Path(args.pred).stem)
    if args.out is None:
        _write_json(None, report.to_dict())
    print(report.to_table(Path(args.pred).stem), file=sys.stderr)
    return 0


def cmd_build_pool(args: argparse.Namespace) -> int:
    rc = RunConfig.load(args.config)
    cache_dir = Path(args.cache_dir) if args.cache_dir else rc.path(rc.cache_dir)
    embedder = build_embedder(rc)
    pool = None
    if args.extend and Path(args.out).exists():
        pool = ExamplePool.load(args.out, embedder)
    topics = load_dataset(args.topics, "open_tls").topics
    pool, report = build_pool(
        topics,
        args.m,
        args.N,
        gateway=build_gateway(rc, cache_dir),
        provider=build_provider(rc, cache_dir),
        embedder=embedder,
        candidate_count=args.candidates,
        pool=pool,
        parallelism=args.parallelism,
    )
    pool.save(args.out)
    if args.report:
        _write_json(args.report, report.to_json())
    print(f"pool: {len(pool)} entries, {len(report.done)} built, {len(report.skipped)} skipped", file=sys.stderr)
    return 0 if report.done or not topics else 1


def cmd_index(args: argparse.Namespace) -> int:
    index = CorpusIndex.from_documents(iter_corpus(args.corpus), chunk_size=args.chunk_size)
    index.save(args.out)
    print(f"indexed {index.n_chunks} chunks into {args.out}", file=sys.stderr)
    return 0


def cmd_bench(args: argparse.Namespace) -> int:
    rc = RunConfig.load(args.config)
    cfg = rc.pipeline_config(rounds=args.rounds, m=args.m, N=args.N, s=args.s)
    ds = load_dataset(args.dataset, args.kind)
    topics = ds.topics[: args.limit] if args.limit else ds.topics
    closed = args.kind == "t17_crisis"
    indexes: dict[Path, LocalSearchProvider] = {}

    def index_for(topic: Topic) -> LocalSearchProvider:
        path = ds.corpora[topic.query]
        if path not in indexes:
            indexes[path] = LocalSearchProvider(CorpusIndex.from_documents(iter_corpus(path)))
        return indexes[path]

    # closed-domain topics search their own corpus, never the configured provider
    base = build_services(rc, args.cache_dir, provider=index_for(topics[0]) if closed and topics else None)

    def services_for(topic: Topic) -> Services:
        if not closed:
            return base
        return Services(base.gateway, index_for(topic), base.embedder, base.pool)

    sweep = [int(x) for x in args.sweep.split(",") if x.strip()]
    result = run_bench(topics, cfg, services_for, sweep, tokenizer=_tokenizer(args))
    _write_json(args.out, result.to_json())
    print(result.table(), file=sys.stderr)
    return 0


def _add_tokenizer_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--stem", action="store_true", help="Porter-stem tokens (needs nltk)")
    p.add_argument("--stopwords", action="store_true", help="drop stopwords before scoring")


def _add_counts(p: argparse.ArgumentParser) -> None:
    p.add_argument("--rounds", "-R", type=int)
    p.add_argument("-m", type=int, dest="m")
    p.add_argument("-N", type=int, dest="N")
    p.add_argument("-s", type=int, dest="s")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="newsline", description="Timeline summarization by iterative self-questioning.")
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="topic -> timeline JSON (+ run report)")
    p.add_argument("topic", nargs="?", help="topic record JSON (query, cutoff, optional timeline)")
    p.add_argument("--query")
    p.add_argument("--cutoff", help="YYYY-MM-DD")
    p.add_argument("--config")
    p.add_argument("--mode", choices=MODES)
    _add_counts(p)
    p.add_argument("-l", type=int, dest="l")
    p.add_argument("--cache-dir")
    p.add_argument("--out", "-o", default="-")
    p.add_argument("--report")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("evaluate", help="predicted + reference timeline -> metric report")
    p.add_argument("pred")
    p.add_argument("ref")
    p.add_argument("--out", "-o", help="report JSON path; a .txt table is written alongside")
    _add_tokenizer_flags(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("build-pool", help="topics with references -> few-shot example pool")
    p.add_argument("topics")
    p.add_argument("--config")
    p.add_argument("--out", "-o", required=True)
    p.add_argument("--report")
    p.add_argument("-m", type=int, default=5, dest="m")
    p.add_argument("-N", type=int, default=30, dest="N")
    p.add_argument("--candidates", type=int, default=50)
    p.add_argument("--parallelism", type=int, default=1)
    p.add_argument("--extend", action="store_true", help="add to an existing pool file")
    p.add_argument("--cache-dir")
    p.set_defaults(func=cmd_build_pool)

    p = sub.add_parser("index", help="corpus JSON Lines -> BM25 index directory")
    p.add_argument("corpus")
    p.add_argument("out")
    p.add_argument("--chunk-size", type=int, default=DEFAULT_CHUNK_SIZE)
    p.set_defaults(func=cmd_index)

    p = sub.add_parser("bench", help="dataset -> aggregate metric table over systems")
    p.add_argument("dataset")
    p.add_argument("--kind", choices=KINDS, default="open_tls")
    p.add_argument("--config")
    _add_counts(p)
    p.add_argument("--sweep", default="0,1,2,3", help="comma-separated round counts")
    p.add_argument("--limit", type=int, help="first N topics only")
    p.add_argument("--cache-dir")
    p.add_argument("--out", "-o", default="-")
    _add_tokenizer_flags(p)
    p.set_defaults(func=cmd_bench)
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (NewslineError, ValueError, OSError) as exc:
        print(f"newsline {args.command}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
