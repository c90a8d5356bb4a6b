"""Topological distortion measurement: how well random projection plus
precision reduction preserves the pairwise-distance structure of a corpus
sample.

The full-precision baseline is the sample's TF-IDF representation.  Each
(dimension, precision) grid cell projects the same TF-IDF vectors through
one codebook per dimension (shared across precisions, so the precision axis
isolates quantization error), quantizes, and reports the RMSE between the
sum-normalized mutual-distance matrices.
"""

from __future__ import annotations

import math
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.sparse import csr_matrix

from .corpus import build_stats, read_corpus
from .rindex import IndexConfig, project_document, quantize_bits

Precision = int | str  # 1..8 or "float"


def pairwise_distances(vectors) -> np.ndarray:
    """Pairwise Euclidean distances (unnormalized, zero diagonal).

    Accepts a dense 2-D array or a scipy sparse matrix.
    """
    sparse = hasattr(vectors, "tocsr")
    if not sparse:
        vectors = np.asarray(vectors, dtype=np.float64)
        if vectors.ndim != 2:
            raise ValueError("expected a 2-D array of row vectors")
    m = vectors.shape[0]
    if m < 2:
        raise ValueError(f"need at least 2 vectors, got {m}")
    gram = (vectors @ vectors.T)
    if sparse:
        gram = np.asarray(gram.todense(), dtype=np.float64)
    sq = np.diag(gram)
    d2 = sq[:, None] + sq[None, :] - 2.0 * gram
    np.maximum(d2, 0.0, out=d2)
    dist = np.sqrt(d2)
    np.fill_diagonal(dist, 0.0)
    return dist


def mutual_distance_matrix(vectors) -> np.ndarray:
    """Pairwise Euclidean distances normalized so all entries sum to 1."""
    dist = pairwise_distances(vectors)
    total = dist.sum()
    if total == 0.0:
        raise ValueError("all pairwise distances are zero; matrix is degenerate")
    return dist / total


def distortion_rmse(full: np.ndarray, reduced: np.ndarray) -> float:
    """Root mean squared difference over the upper-triangle entries."""
    full = np.asarray(full, dtype=np.float64)
    reduced = np.asarray(reduced, dtype=np.float64)
    if full.shape != reduced.shape:
        raise ValueError(f"shape mismatch: {full.shape} vs {reduced.shape}")
    iu = np.triu_indices(full.shape[0], k=1)
    diff = full[iu] - reduced[iu]
    return float(np.sqrt(np.mean(diff * diff)))


def _tfidf_sample_matrix(documents, stats) -> csr_matrix:
    vocab: dict[str, int] = {}
    indptr = [0]
    indices: list[int] = []
    values: list[float] = []
    for doc in documents:
        for term, tdf in doc.term_counts().items():
            rec = stats.terms[term]
            indices.append(vocab.setdefault(term, len(vocab)))
            values.append(tdf * math.log(stats.doc_count / rec.df))
        indptr.append(len(indices))
    return csr_matrix(
        (values, indices, indptr),
        shape=(len(documents), max(len(vocab), 1)),
        dtype=np.float64,
    )


def run_experiment(
    corpus_path: str | Path,
    sample_size: int = 200,
    dims: Sequence[int] = (64, 128, 256, 512, 1024, 2048, 4096),
    precisions: Sequence[Precision] = ("float", 8, 7, 6, 5, 4, 3, 2, 1),
    sparsity_denominator: int = 12,
    seed: int = 0,
) -> list[tuple[int, Precision, float]]:
    """Sweep the (dimension, precision) grid on a seeded corpus sample.

    Returns one (dims, bits, rmse) row per grid cell, in sweep order.
    """
    documents = list(read_corpus(corpus_path))
    if sample_size > len(documents):
        raise ValueError(
            f"sample_size={sample_size} exceeds corpus size {len(documents)}"
        )
    for p in precisions:
        if p != "float" and not (isinstance(p, int) and 1 <= p <= 8):
            raise ValueError(f"precision must be 'float' or 1..8, got {p!r}")
    stats = build_stats(iter(documents))
    rng = np.random.default_rng(seed)
    picks = rng.choice(len(documents), size=sample_size, replace=False)
    sample = [documents[i] for i in picks]

    baseline = mutual_distance_matrix(_tfidf_sample_matrix(sample, stats))

    rows: list[tuple[int, Precision, float]] = []
    for width in dims:
        config = IndexConfig(
            width_bits=width,
            sparsity_denominator=sparsity_denominator,
            seed=seed,
            weighting="tfidf",
        )
        projected = np.vstack(
            [project_document(doc, stats, config) for doc in sample]
        )
        for precision in precisions:
            if precision == "float":
                reduced = projected
            else:
                reduced = np.vstack(
                    [quantize_bits(row, precision) for row in projected]
                )
            rmse = distortion_rmse(baseline, mutual_distance_matrix(reduced))
            rows.append((width, precision, rmse))
    return rows
