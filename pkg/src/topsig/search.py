"""Ranked retrieval over a signature index.

A query covers only the subspace its terms' index vectors touch, so every
comparison is a masked Hamming distance: popcount((doc XOR query) AND mask).
Ties are broken by ascending ordinal to keep rankings deterministic.
"""

from __future__ import annotations

import logging
import math
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .bitops import hamming_distances, popcount
from .corpus import CollectionStats
from .errors import EmptyQueryError
from .rindex import (
    IndexConfig,
    Signature,
    quantize_sign,
    snap_cancellations,
    term_vector,
)
from .sigstore import SignatureIndex

logger = logging.getLogger(__name__)

DEFAULT_PRF_K = 10
DEFAULT_RERANK_DEPTH = 100

# (ordinal, masked Hamming distance), ascending distance then ordinal
RankedList = list[tuple[int, int]]


@dataclass(frozen=True)
class QueryContext:
    """Query signature plus the coverage mask of the query's subspace."""

    signature: Signature
    mask: Signature

    def __post_init__(self) -> None:
        if self.signature.width_bits != self.mask.width_bits:
            raise ValueError(
                f"signature width {self.signature.width_bits} != "
                f"mask width {self.mask.width_bits}"
            )

    @property
    def width_bits(self) -> int:
        return self.signature.width_bits

    def mask_popcount(self) -> int:
        return popcount(np.frombuffer(self.mask.bits, dtype=np.uint8))


def build_query(
    terms: Sequence[str], stats: CollectionStats, config: IndexConfig
) -> QueryContext:
    """Build a query signature and mask from raw query terms.

    Terms are weighted with standard TF-IDF (tf_q * ln(doc_count / df)),
    so rarer terms dominate the sign wherever index vectors collide with
    conflicting signs.  Terms unknown to the collection are skipped with a
    warning; if nothing is left the query spans no subspace and
    :class:`EmptyQueryError` is raised.
    """
    acc = np.zeros(config.width_bits, dtype=np.float64)
    covered = np.zeros(config.width_bits, dtype=np.uint8)
    known = 0
    w_max = 0.0
    for term, tf_q in Counter(terms).items():
        rec = stats.terms.get(term)
        if rec is None:
            logger.warning("query term %r not in collection; skipped", term)
            continue
        known += 1
        w = tf_q * math.log(stats.doc_count / rec.df)
        w_max = max(w_max, abs(w))
        iv = term_vector(term, config)
        covered[iv.plus_positions] = 1
        covered[iv.minus_positions] = 1
        acc[iv.plus_positions] += w
        acc[iv.minus_positions] -= w
    if known == 0:
        raise EmptyQueryError(
            "no query term is known to the collection; query mask is empty"
        )
    # Covered positions whose weighted sum cancels exactly stay in the mask
    # and take the zero-as-positive bit.
    snap_cancellations(acc, w_max)
    return QueryContext(
        signature=quantize_sign(acc), mask=Signature.from_bit_array(covered)
    )


def masked_hamming(doc_sig: Signature, q: QueryContext) -> int:
    """popcount((doc XOR query signature) AND query mask)."""
    if doc_sig.width_bits != q.width_bits:
        raise ValueError(
            f"signature width {doc_sig.width_bits} != query width {q.width_bits}"
        )
    doc = np.frombuffer(doc_sig.bits, dtype=np.uint8)
    sig = np.frombuffer(q.signature.bits, dtype=np.uint8)
    mask = np.frombuffer(q.mask.bits, dtype=np.uint8)
    return int(hamming_distances(doc.reshape(1, -1), sig, mask)[0])


def _scan(
    block: np.ndarray, sig: np.ndarray, mask: np.ndarray | None, threads: int
) -> np.ndarray:
    """Distances of every block row to sig; chunk count never changes values."""
    n = block.shape[0]
    if threads <= 1 or n < 2048:
        return hamming_distances(block, sig, mask)
    bounds = np.linspace(0, n, threads + 1, dtype=np.int64)
    chunks = [block[a:b] for a, b in zip(bounds[:-1], bounds[1:]) if b > a]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        parts = list(pool.map(lambda c: hamming_distances(c, sig, mask), chunks))
    return np.concatenate(parts)


def _query_arrays(index: SignatureIndex, q: QueryContext) -> tuple[np.ndarray, np.ndarray]:
    if q.width_bits != index.header.width_bits:
        raise ValueError(
            f"query width {q.width_bits} != index width {index.header.width_bits}"
        )
    sig = np.frombuffer(q.signature.bits, dtype=np.uint8)
    mask = np.frombuffer(q.mask.bits, dtype=np.uint8)
    return sig, mask


def rank(
    index: SignatureIndex, q: QueryContext, cutoff: int, threads: int = 1
) -> RankedList:
    """Full scan: top-``cutoff`` documents by (masked distance, ordinal)."""
    if cutoff < 1:
        raise ValueError(f"cutoff must be >= 1, got {cutoff}")
    if index.doc_count == 0:
        return []
    sig, mask = _query_arrays(index, q)
    distances = _scan(index.signatures, sig, mask, threads)
    order = np.argsort(distances, kind="stable")[:cutoff]
    return [(int(i), int(distances[i])) for i in order]


def rank_partial(
    index: SignatureIndex,
    q: QueryContext,
    prefix_bits: int,
    refine_fraction: float,
    cutoff: int | None = None,
    threads: int = 1,
) -> RankedList:
    """Two-pass ranking: a cheap scan over the first ``prefix_bits`` of every
    signature, then a full-width re-rank of the top ``refine_fraction`` of
    the collection.  Final order uses full-width distances.
    """
    n_bits = index.header.width_bits
    if prefix_bits % 8 != 0:
        raise ValueError(f"prefix_bits must be byte-aligned, got {prefix_bits}")
    if not 8 <= prefix_bits <= n_bits:
        raise ValueError(
            f"prefix_bits must be in [8, {n_bits}], got {prefix_bits}"
        )
    if not 0.0 < refine_fraction <= 1.0:
        raise ValueError(
            f"refine_fraction must be in (0, 1], got {refine_fraction}"
        )
    if index.doc_count == 0:
        return []
    sig, mask = _query_arrays(index, q)

    nb = prefix_bits // 8
    prefix_d = _scan(index.signatures[:, :nb], sig[:nb], mask[:nb], threads)
    n_candidates = math.ceil(refine_fraction * index.doc_count)
    candidates = np.argsort(prefix_d, kind="stable")[:n_candidates]

    full_d = hamming_distances(index.signatures[candidates], sig, mask)
    order = np.lexsort((candidates, full_d))
    entries = [(int(candidates[i]), int(full_d[i])) for i in order]
    return entries[:cutoff] if cutoff is not None else entries


def feedback_signature(
    index: SignatureIndex, q: QueryContext, initial: RankedList, k: int
) -> QueryContext:
    """Fill the positions the query never covered with the sign of the mean
    of the top-k result signatures.

    Covered positions keep the original query bits exactly; the new mask is
    all ones because every position is now informed.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if len(initial) < k:
        raise ValueError(f"initial ranking has {len(initial)} entries, need {k}")
    top = np.array([ordinal for ordinal, _ in initial[:k]], dtype=np.int64)
    rows = index.signatures[top]
    # Mean sign of k +-1 vectors at a position == majority bit, ties to 1.
    ones_per_bit = np.unpackbits(rows, axis=1, bitorder="little").sum(axis=0)
    fb_bits = (2 * ones_per_bit >= k).astype(np.uint8)
    fb = np.packbits(fb_bits, bitorder="little")

    orig = np.frombuffer(q.signature.bits, dtype=np.uint8)
    mask = np.frombuffer(q.mask.bits, dtype=np.uint8)
    merged = (orig & mask) | (fb & ~mask)
    full_mask = np.full(index.header.width_bits // 8, 0xFF, dtype=np.uint8)
    return QueryContext(
        signature=Signature(bits=merged.tobytes()),
        mask=Signature(bits=full_mask.tobytes()),
    )


def prf_refine(
    index: SignatureIndex,
    q: QueryContext,
    initial: RankedList,
    k: int = DEFAULT_PRF_K,
    rerank_depth: int = DEFAULT_RERANK_DEPTH,
) -> RankedList:
    """Pseudo-relevance feedback: re-rank the head of an initial ranking
    against the feedback-completed query signature.

    Only the top ``rerank_depth`` entries are rescored; documents outside
    that shortlist stay excluded.
    """
    if rerank_depth < k:
        raise ValueError(
            f"rerank_depth={rerank_depth} must be >= k={k}"
        )
    refined = feedback_signature(index, q, initial, k)
    shortlist = np.array(
        [ordinal for ordinal, _ in initial[:rerank_depth]], dtype=np.int64
    )
    sig = np.frombuffer(refined.signature.bits, dtype=np.uint8)
    distances = hamming_distances(index.signatures[shortlist], sig, None)
    order = np.lexsort((shortlist, distances))
    return [(int(shortlist[i]), int(distances[i])) for i in order]
