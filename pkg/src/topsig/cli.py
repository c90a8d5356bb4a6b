"""Command-line interface: one executable, subcommand per workflow stage.

Data goes to standard output (or ``--out``); diagnostics and the run
metadata block (flag echo, index header echo, per-phase wall-clock times)
go to standard error.  Exit codes: 0 success, 1 usage/parameter error,
2 data or format error.
"""

from __future__ import annotations

import argparse
import os
import re
import sys
import time
from contextlib import contextmanager, nullcontext
from typing import IO, Sequence

from . import __version__
from .corpus import build_stats, read_corpus, tokenize
from .errors import TopsigError
from .evaluation import (
    average_precision,
    micro_purity,
    nccg,
    parse_labels,
    parse_qrels,
    parse_run,
    parse_topics,
    pr_curve,
    precision_at_n,
)
from .rindex import WEIGHTINGS, IndexConfig
from .search import (
    DEFAULT_PRF_K,
    DEFAULT_RERANK_DEPTH,
    QueryContext,
    RankedList,
    build_query,
    prf_refine,
    rank,
    rank_partial,
)
from .sigstore import IndexHeader, SignatureIndex, project_corpus, read_index, write_index
from .cluster import kmeans
from .distortion import run_experiment

_METRIC_RE = re.compile(r"^p@(\d+)$")


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse that reports usage problems instead of calling sys.exit."""

    def error(self, message: str) -> None:  # type: ignore[override]
        raise _UsageError(f"{self.prog}: {message}\n{self.format_usage()}")


class RunMetadata:
    """Collects the reproducibility block emitted on stderr for every run."""

    def __init__(self, argv: Sequence[str]) -> None:
        self.lines: list[str] = [
            f"topsig {__version__}",
            "args: " + " ".join(argv),
        ]

    def add(self, key: str, value) -> None:
        self.lines.append(f"{key}: {value}")

    def add_index(self, index: SignatureIndex) -> None:
        h = index.header
        self.add(
            "index",
            f"width_bits={h.width_bits} doc_count={h.doc_count} seed={h.seed} "
            f"sparsity={h.sparsity_denominator} weighting={h.weighting} "
            f"format_version={h.format_version}",
        )

    @contextmanager
    def phase(self, name: str):
        start = time.perf_counter()
        try:
            yield
        finally:
            self.add(f"phase {name}_ms", f"{(time.perf_counter() - start) * 1e3:.2f}")

    def emit(self, stream: IO[str]) -> None:
        for line in self.lines:
            print(f"# {line}", file=stream)


def _threads(args: argparse.Namespace) -> int:
    if args.threads is not None:
        value = args.threads
    else:
        value = int(os.environ.get("TOPSIG_THREADS", "1"))
    if value < 1:
        raise ValueError(f"--threads must be >= 1, got {value}")
    return value


@contextmanager
def _out_stream(path: str | None):
    if path is None:
        yield sys.stdout
    else:
        with open(path, "w", encoding="utf-8") as fh:
            yield fh


def _load_index_and_stats(args: argparse.Namespace, meta: RunMetadata):
    """Load the signature index and rebuild collection statistics.

    The index file stores signatures only, so query-side TF-IDF weights
    need one statistics pass over the corpus the index was built from.
    """
    with meta.phase("load"):
        index = read_index(args.index)
    meta.add_index(index)
    with meta.phase("stats_pass"):
        stats = build_stats(read_corpus(args.corpus))
    if stats.doc_count != index.doc_count:
        raise TopsigError(
            f"corpus has {stats.doc_count} documents but index has "
            f"{index.doc_count}; wrong corpus for this index?"
        )
    return index, stats


def _run_one_query(
    index: SignatureIndex,
    q: QueryContext,
    args: argparse.Namespace,
    threads: int,
    meta: RunMetadata | None = None,
) -> tuple[RankedList, int]:
    """Rank, optionally with partial scanning and feedback.

    Returns the final list truncated to --top, and the score base
    (the popcount of the mask the final distances were computed under).
    """
    scan_phase = meta.phase("scan") if meta else nullcontext()
    rerank_phase = meta.phase("rerank") if meta else nullcontext()
    depth = args.top
    if args.prf is not None:
        depth = max(depth, args.rerank_depth)
    with scan_phase:
        if args.prefix_bits is not None:
            initial = rank_partial(
                index,
                q,
                prefix_bits=args.prefix_bits,
                refine_fraction=args.refine_frac,
                threads=threads,
            )
        else:
            initial = rank(index, q, cutoff=max(depth, 1), threads=threads)
    score_base = q.mask_popcount()
    final = initial
    with rerank_phase:
        if args.prf is not None:
            final = prf_refine(
                index, q, initial, k=args.prf, rerank_depth=args.rerank_depth
            )
            score_base = index.header.width_bits
    return final[: args.top], score_base


def _write_run(
    out: IO[str],
    qid: str,
    entries: RankedList,
    doc_ids: list[str],
    score_base: int,
    tag: str,
) -> None:
    # TREC run format; score descends as distance ascends.
    for pos, (ordinal, distance) in enumerate(entries, start=1):
        print(
            f"{qid} Q0 {doc_ids[ordinal]} {pos} {score_base - distance} {tag}",
            file=out,
        )


def _cmd_index(args: argparse.Namespace, meta: RunMetadata) -> int:
    config = IndexConfig(
        width_bits=args.bits,
        sparsity_denominator=args.sparsity,
        seed=args.seed,
        weighting=args.weighting,
    )
    threads = _threads(args)
    with meta.phase("stats_pass"):
        stats = build_stats(read_corpus(args.corpus))
    with meta.phase("project_pass"):
        doc_ids, block = project_corpus(args.corpus, stats, config, threads=threads)
    index = SignatureIndex(
        header=IndexHeader(
            width_bits=config.width_bits,
            doc_count=len(doc_ids),
            seed=config.seed,
            sparsity_denominator=config.sparsity_denominator,
            weighting=config.weighting,
        ),
        doc_ids=doc_ids,
        signatures=block,
    )
    with meta.phase("write"):
        write_index(index, args.out)
    meta.add_index(index)
    return 0


def _cmd_search(args: argparse.Namespace, meta: RunMetadata) -> int:
    threads = _threads(args)
    index, stats = _load_index_and_stats(args, meta)
    q = build_query(tokenize(args.query), stats, index.header.config())
    entries, score_base = _run_one_query(index, q, args, threads, meta)
    with _out_stream(args.out) as out:
        _write_run(out, args.qid, entries, index.doc_ids, score_base, args.tag)
    return 0


def _cmd_batch_search(args: argparse.Namespace, meta: RunMetadata) -> int:
    threads = _threads(args)
    index, stats = _load_index_and_stats(args, meta)
    topics = parse_topics(args.topics, strict=not args.lenient)
    total = 0.0
    with _out_stream(args.out) as out:
        for qid, text in topics:
            start = time.perf_counter()
            q = build_query(tokenize(text), stats, index.header.config())
            entries, score_base = _run_one_query(index, q, args, threads)
            elapsed = (time.perf_counter() - start) * 1e3
            total += elapsed
            meta.add(f"phase query:{qid}_ms", f"{elapsed:.2f}")
            _write_run(out, qid, entries, index.doc_ids, score_base, args.tag)
    meta.add("phase scan_total_ms", f"{total:.2f}")
    return 0


def _cmd_cluster(args: argparse.Namespace, meta: RunMetadata) -> int:
    with meta.phase("load"):
        index = read_index(args.index)
    meta.add_index(index)
    with meta.phase("cluster"):
        result = kmeans(
            index, k=args.k, max_iters=args.max_iters, rng_seed=args.seed
        )
    with _out_stream(args.out) as out:
        for ordinal, doc_id in enumerate(index.doc_ids):
            print(f"{doc_id}\t{result.assignments[ordinal]}", file=out)
    meta.add(
        "summary",
        f"k={result.k} iterations={result.iterations_run} "
        f"objective={result.objective} converged={result.converged}",
    )
    return 0


def _cmd_eval(args: argparse.Namespace, meta: RunMetadata) -> int:
    pat = _METRIC_RE.match(args.metric)
    if not pat and args.metric not in ("pr", "map"):
        raise ValueError(f"unknown metric {args.metric!r}; use p@N, pr, or map")
    qrels = parse_qrels(args.qrels, strict=not args.lenient)
    run = parse_run(args.run, strict=not args.lenient)
    with meta.phase("eval"), _out_stream(args.out) as out:
        judged = [qid for qid in run if qid in qrels]
        for qid in run:
            if qid not in qrels:
                print(f"# skipping unjudged query {qid}", file=sys.stderr)
        if pat:
            n = int(pat.group(1))
            values = {q: precision_at_n(run[q], qrels, q, n) for q in judged}
            for qid, v in values.items():
                print(f"{qid}\t{v:.4f}", file=out)
            if values:
                mean = sum(values.values()) / len(values)
                print(f"all\t{mean:.4f}", file=out)
        elif args.metric == "map":
            values = {q: average_precision(run[q], qrels, q) for q in judged}
            for qid, v in values.items():
                print(f"{qid}\t{v:.4f}", file=out)
            if values:
                print(f"all\t{sum(values.values()) / len(values):.4f}", file=out)
        else:  # pr
            curves = {}
            for qid in judged:
                try:
                    curves[qid] = pr_curve(run[qid], qrels, qid)
                except ValueError:
                    print(
                        f"# skipping query {qid}: no relevant documents",
                        file=sys.stderr,
                    )
            for qid, curve in curves.items():
                for i, v in enumerate(curve):
                    print(f"{qid}\t{i / 10:.1f}\t{v:.4f}", file=out)
            if curves:
                for i in range(11):
                    mean = sum(c[i] for c in curves.values()) / len(curves)
                    print(f"all\t{i / 10:.1f}\t{mean:.4f}", file=out)
    return 0


def _cmd_eval_cluster(args: argparse.Namespace, meta: RunMetadata) -> int:
    assignments = parse_labels(args.assignments, strict=not args.lenient)
    with meta.phase("eval"), _out_stream(args.out) as out:
        if args.labels:
            labels = parse_labels(args.labels, strict=not args.lenient)
            print(f"micro_purity\t{micro_purity(assignments, labels):.4f}", file=out)
        if args.qrels:
            qrels = parse_qrels(args.qrels, strict=not args.lenient)
            qids = [args.topic] if args.topic else sorted(qrels)
            scores = []
            for qid in qids:
                try:
                    score = nccg(assignments, qrels, qid)
                except ValueError as exc:
                    print(f"# skipping topic {qid}: {exc}", file=sys.stderr)
                    continue
                scores.append(score)
                print(f"nccg\t{qid}\t{score:.4f}", file=out)
            if len(scores) > 1:
                print(f"nccg\tall\t{sum(scores) / len(scores):.4f}", file=out)
    return 0


def _cmd_distort(args: argparse.Namespace, meta: RunMetadata) -> int:
    dims = [int(x) for x in args.dims.split(",") if x]
    precisions: list = [
        "float" if x == "float" else int(x) for x in args.bits.split(",") if x
    ]
    with meta.phase("experiment"):
        rows = run_experiment(
            args.corpus,
            sample_size=args.sample,
            dims=dims,
            precisions=precisions,
            sparsity_denominator=args.sparsity,
            seed=args.seed,
        )
    with _out_stream(args.out) as out:
        print("dims\tbits\trmse", file=out)
        for width, precision, rmse in rows:
            print(f"{width}\t{precision}\t{rmse:.8g}", file=out)
    return 0


def _build_parser() -> _Parser:
    parser = _Parser(prog="topsig", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common_search_flags(p: _Parser) -> None:
        p.add_argument("--index", required=True)
        p.add_argument("--corpus", required=True, help="corpus the index was built from")
        p.add_argument("--top", type=int, default=10)
        p.add_argument("--prefix-bits", type=int, default=None)
        p.add_argument("--refine-frac", type=float, default=0.1)
        p.add_argument("--prf", type=int, default=None, metavar="K",
                       help=f"enable feedback from the top K results (e.g. {DEFAULT_PRF_K})")
        p.add_argument("--rerank-depth", type=int, default=DEFAULT_RERANK_DEPTH)
        p.add_argument("--tag", default="topsig")
        p.add_argument("--threads", type=int, default=None)
        p.add_argument("--out", default=None)
        p.add_argument("--lenient", action="store_true",
                       help="skip malformed input lines instead of failing")

    p = sub.add_parser("index", help="build a signature index from a TSV corpus")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--bits", type=int, default=1024)
    p.add_argument("--sparsity", type=int, default=12)
    p.add_argument("--weighting", choices=WEIGHTINGS, default="loglik")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=None)
    p.set_defaults(func=_cmd_index)

    p = sub.add_parser("search", help="run one query against an index")
    common_search_flags(p)
    p.add_argument("--query", required=True)
    p.add_argument("--qid", default="0")
    p.set_defaults(func=_cmd_search)

    p = sub.add_parser("batch-search", help="run a topics file, emit a TREC run")
    common_search_flags(p)
    p.add_argument("--topics", required=True, help="TSV: qid<TAB>query text")
    p.set_defaults(func=_cmd_batch_search)

    p = sub.add_parser("cluster", help="k-means over an index's signatures")
    p.add_argument("--index", required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--max-iters", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_cluster)

    p = sub.add_parser("eval", help="score a TREC run against qrels")
    p.add_argument("--run", required=True)
    p.add_argument("--qrels", required=True)
    p.add_argument("--metric", required=True,
                   help="p@N (e.g. p@10), pr, or map")
    p.add_argument("--lenient", action="store_true")
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("eval-cluster", help="purity / relevance spread of a clustering")
    p.add_argument("--assignments", required=True, help="TSV: doc_id<TAB>cluster_id")
    p.add_argument("--labels", default=None, help="TSV: doc_id<TAB>category")
    p.add_argument("--qrels", default=None)
    p.add_argument("--topic", default=None)
    p.add_argument("--lenient", action="store_true")
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_eval_cluster)

    p = sub.add_parser("distort", help="distance-distortion sweep over (dims, bits)")
    p.add_argument("--corpus", required=True)
    p.add_argument("--sample", type=int, default=200)
    p.add_argument("--dims", default="64,128,256,512,1024,2048,4096")
    p.add_argument("--bits", default="float,8,7,6,5,4,3,2,1")
    p.add_argument("--sparsity", type=int, default=12)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_distort)

    return parser


def dispatch(argv: Sequence[str]) -> int:
    """Parse and run one command; returns the process exit code."""
    parser = _build_parser()
    meta = RunMetadata(argv)
    try:
        try:
            args = parser.parse_args(argv)
        except _UsageError as exc:
            print(exc, file=sys.stderr)
            return 1
        try:
            return args.func(args, meta)
        except ValueError as exc:
            print(f"topsig: parameter error: {exc}", file=sys.stderr)
            return 1
        except (TopsigError, OSError) as exc:
            print(f"topsig: {exc}", file=sys.stderr)
            return 2
    finally:
        meta.emit(sys.stderr)


def main() -> None:
    sys.exit(dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
