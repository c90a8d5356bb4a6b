"""Hamming-space k-means over packed signatures.

Centroids are N-bit strings: each centroid bit is the per-position majority
of the member signatures (equivalently, the sign of the summed +-1
expansions), with exact ties encoded as 1 like every other zero sum.
Assignment ties go to the lowest cluster id, so runs are deterministic for
a fixed seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .bitops import hamming_distances
from .sigstore import SignatureIndex


@dataclass
class Clustering:
    """Result of one k-means run.

    ``objective`` is the total (unmasked) Hamming distance of every document
    to its centroid; ``objective_history`` records it after every half-step
    (assignment, then centroid update) for convergence monitoring.
    """

    k: int
    assignments: np.ndarray  # (doc_count,) int32, ordinal -> cluster id
    centroids: np.ndarray  # (k, width_bits // 8) uint8
    iterations_run: int
    objective: int
    objective_history: list[int] = field(default_factory=list)
    converged: bool = False


def centroid_update(members: np.ndarray) -> np.ndarray:
    """Majority bit per position over a non-empty (m, width/8) member block.

    Bit i is 1 when at least half the members have it set; a tie is a zero
    sum of +-1 values and is encoded as 1.
    """
    members = np.asarray(members, dtype=np.uint8)
    if members.ndim != 2 or members.shape[0] == 0:
        raise ValueError("centroid_update needs a non-empty 2-D member block")
    m = members.shape[0]
    ones = np.unpackbits(members, axis=1, bitorder="little").sum(axis=0)
    bits = (2 * ones.astype(np.int64) >= m).astype(np.uint8)
    return np.packbits(bits, bitorder="little")


def _distance_matrix(block: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    return np.vstack([hamming_distances(block, c) for c in centroids])


def _reseed_empty(
    assign: np.ndarray,
    doc_dist: np.ndarray,
    centroids: np.ndarray,
    block: np.ndarray,
    k: int,
) -> None:
    """Give each empty cluster the document farthest from its own centroid.

    Only clusters with at least two members can be robbed, so no cluster is
    emptied in turn.  Moving a document onto its own signature can only
    lower the objective.
    """
    counts = np.bincount(assign, minlength=k)
    for cid in np.flatnonzero(counts == 0):
        eligible = np.flatnonzero(counts[assign] >= 2)
        far = eligible[np.argmax(doc_dist[eligible])]
        counts[assign[far]] -= 1
        assign[far] = cid
        counts[cid] = 1
        centroids[cid] = block[far]
        doc_dist[far] = 0


def kmeans(
    index: SignatureIndex, k: int, max_iters: int = 10, rng_seed: int = 0
) -> Clustering:
    """Lloyd iterations in Hamming space, initialized from k random documents.

    Stops when assignments repeat or after ``max_iters`` iterations.  The
    objective is non-increasing at every half-step.
    """
    n = index.doc_count
    if not 1 <= k <= n:
        raise ValueError(f"k must be in [1, {n}], got {k}")
    if max_iters < 1:
        raise ValueError(f"max_iters must be >= 1, got {max_iters}")
    block = index.signatures
    rng = np.random.default_rng(rng_seed)
    centroids = block[rng.choice(n, size=k, replace=False)].copy()

    history: list[int] = []
    prev_assign: np.ndarray | None = None
    assign = np.zeros(n, dtype=np.int32)
    iterations = 0
    converged = False
    for _ in range(max_iters):
        dists = _distance_matrix(block, centroids)
        assign = np.argmin(dists, axis=0).astype(np.int32)
        doc_dist = dists[assign, np.arange(n)]
        _reseed_empty(assign, doc_dist, centroids, block, k)
        iterations += 1
        history.append(int(doc_dist.sum()))
        if prev_assign is not None and np.array_equal(assign, prev_assign):
            converged = True
            break
        prev_assign = assign.copy()

        obj = 0
        for cid in range(k):
            members = block[assign == cid]
            centroids[cid] = centroid_update(members)
            obj += int(hamming_distances(members, centroids[cid]).sum())
        history.append(obj)

    return Clustering(
        k=k,
        assignments=assign,
        centroids=centroids,
        iterations_run=iterations,
        objective=history[-1],
        objective_history=history,
        converged=converged,
    )


def objective(index: SignatureIndex, clustering: Clustering) -> int:
    """Recompute the total member-to-centroid Hamming distance."""
    assign = clustering.assignments
    if assign.shape[0] != index.doc_count:
        raise ValueError("clustering does not cover this index")
    total = 0
    for cid in range(clustering.k):
        members = index.signatures[assign == cid]
        if members.shape[0]:
            total += int(
                hamming_distances(members, clustering.centroids[cid]).sum()
            )
    return total
