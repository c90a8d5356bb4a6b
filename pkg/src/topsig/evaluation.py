"""Retrieval and clustering quality metrics, and the flat-file formats that
feed them (qrels, topics, category labels).

Relevance is binarized at grade >= 1 everywhere.
"""

from __future__ import annotations

import logging
from collections import Counter, defaultdict
from pathlib import Path
from typing import Hashable, Mapping, Sequence

logger = logging.getLogger(__name__)

# qid -> doc_id -> relevance grade
Qrels = dict[str, dict[str, int]]

RECALL_LEVELS = 11  # 0.0, 0.1, ... 1.0


def _parse_lines(path: str | Path, n_fields: int, sep: str | None, strict: bool):
    """Yield (lineno, fields) for every well-formed line.

    ``sep=None`` splits on any whitespace run.  Malformed lines raise in
    strict mode and are skipped with a warning otherwise.
    """
    path = Path(path)
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            fields = line.split(sep, n_fields - 1)
            if len(fields) != n_fields or not all(f.strip() for f in fields[:-1]):
                msg = f"{path}:{lineno}: expected {n_fields} fields, got {line!r}"
                if strict:
                    raise ValueError(msg)
                logger.warning("%s (skipped)", msg)
                continue
            yield lineno, fields


def parse_qrels(path: str | Path, strict: bool = True) -> Qrels:
    """Parse ``qid 0 doc_id grade`` lines (whitespace-separated)."""
    qrels: Qrels = defaultdict(dict)
    for lineno, (qid, _iteration, doc_id, grade) in _parse_lines(
        path, 4, None, strict
    ):
        try:
            value = int(grade)
        except ValueError:
            msg = f"{path}:{lineno}: non-integer grade {grade!r}"
            if strict:
                raise ValueError(msg) from None
            logger.warning("%s (skipped)", msg)
            continue
        if value < 0:
            msg = f"{path}:{lineno}: negative grade {value}"
            if strict:
                raise ValueError(msg)
            logger.warning("%s (skipped)", msg)
            continue
        qrels[qid][doc_id] = value
    return dict(qrels)


def parse_topics(path: str | Path, strict: bool = True) -> list[tuple[str, str]]:
    """Parse ``qid<TAB>query text`` lines, in file order."""
    return [(qid, text) for _, (qid, text) in _parse_lines(path, 2, "\t", strict)]


def parse_labels(path: str | Path, strict: bool = True) -> dict[str, str]:
    """Parse ``doc_id<TAB>label`` lines."""
    return {
        doc_id: label for _, (doc_id, label) in _parse_lines(path, 2, "\t", strict)
    }


def parse_run(path: str | Path, strict: bool = True) -> dict[str, list[str]]:
    """Parse a TREC run file (``qid Q0 doc_id rank score tag``) into
    qid -> doc ids ordered by the rank field.
    """
    ranked: dict[str, list[tuple[int, str]]] = defaultdict(list)
    for lineno, (qid, _q0, doc_id, rank, _score, _tag) in _parse_lines(
        path, 6, None, strict
    ):
        try:
            pos = int(rank)
        except ValueError:
            msg = f"{path}:{lineno}: non-integer rank {rank!r}"
            if strict:
                raise ValueError(msg) from None
            logger.warning("%s (skipped)", msg)
            continue
        ranked[qid].append((pos, doc_id))
    return {
        qid: [doc for _, doc in sorted(entries, key=lambda e: e[0])]
        for qid, entries in ranked.items()
    }


def _relevant_set(qrels: Qrels, qid: str) -> set[str]:
    if qid not in qrels:
        raise ValueError(f"unknown query id {qid!r}")
    return {doc for doc, grade in qrels[qid].items() if grade >= 1}


def precision_at_n(run: Sequence[str], qrels: Qrels, qid: str, n: int) -> float:
    """Fraction of the first n ranked documents that are relevant.

    A run shorter than n is padded with non-relevant results, i.e. the
    denominator is always n.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    relevant = _relevant_set(qrels, qid)
    return sum(1 for doc in run[:n] if doc in relevant) / n


def pr_curve(run: Sequence[str], qrels: Qrels, qid: str) -> list[float]:
    """11-point interpolated precision at recall 0.0, 0.1, ..., 1.0.

    Interpolated precision at a level is the best precision achieved at any
    recall at or beyond it.
    """
    relevant = _relevant_set(qrels, qid)
    total = len(relevant)
    if total == 0:
        raise ValueError(f"query {qid!r} has no relevant documents; curve undefined")
    # (hits, rank) at each rank where a relevant document appears
    points: list[tuple[int, int]] = []
    hits = 0
    seen: set[str] = set()
    for rank, doc in enumerate(run, start=1):
        if doc in relevant and doc not in seen:
            seen.add(doc)
            hits += 1
            points.append((hits, rank))
    curve = []
    for level in range(RECALL_LEVELS):
        # recall hits/total >= level/10, compared in integers to avoid
        # float-equality surprises at exact levels
        best = max(
            (h / r for h, r in points if 10 * h >= level * total), default=0.0
        )
        curve.append(best)
    return curve


def average_precision(run: Sequence[str], qrels: Qrels, qid: str) -> float:
    """Standard (non-interpolated) average precision."""
    relevant = _relevant_set(qrels, qid)
    total = len(relevant)
    if total == 0:
        return 0.0
    hits = 0
    seen: set[str] = set()
    acc = 0.0
    for rank, doc in enumerate(run, start=1):
        if doc in relevant and doc not in seen:
            seen.add(doc)
            hits += 1
            acc += hits / rank
    return acc / total


def micro_purity(
    assignments: Mapping[str, Hashable], labels: Mapping[str, str]
) -> float:
    """Size-weighted purity: majority-label mass over all clustered documents.

    Every clustered document must be labeled; 1.0 means every cluster is
    single-label.
    """
    if not assignments:
        raise ValueError("empty clustering")
    per_cluster: dict[Hashable, Counter[str]] = defaultdict(Counter)
    for doc_id, cluster in assignments.items():
        label = labels.get(doc_id)
        if label is None:
            raise ValueError(f"document {doc_id!r} has no category label")
        per_cluster[cluster][label] += 1
    majority_mass = sum(c.most_common(1)[0][1] for c in per_cluster.values())
    return majority_mass / len(assignments)


def nccg(assignments: Mapping[str, Hashable], qrels: Qrels, qid: str) -> float:
    """How concentrated a query's relevant documents are across clusters.

    1.0 when all relevant documents share one cluster, 0.0 when they are
    spread evenly over all k clusters; clamped to [0, 1] in between.
    """
    clusters = set(assignments.values())
    k = len(clusters)
    if k < 2:
        raise ValueError(f"nccg needs k >= 2 clusters, got {k}")
    relevant = _relevant_set(qrels, qid)
    counts = Counter(
        cluster for doc, cluster in assignments.items() if doc in relevant
    )
    total = sum(counts.values())
    if total == 0:
        raise ValueError(
            f"no relevant document for query {qid!r} appears in the clustering"
        )
    per_cluster = sorted(
        (counts.get(c, 0) for c in clusters), reverse=True
    )
    prefix = 0
    ccg = 0
    for r in per_cluster:
        prefix += r
        ccg += prefix
    best = k * total
    worst = total * (k + 1) / 2
    score = (ccg - worst) / (best - worst)
    return min(1.0, max(0.0, score))
