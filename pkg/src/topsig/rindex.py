"""Random indexing core: sparse ternary term vectors, term weighting,
document projection, and sign-bit quantization.

Everything here is a pure function of its inputs, so re-indexing a corpus
with the same configuration is bit-identical.  Term vectors come from a
fixed, documented generator (blake2b-64 of the term XOR the config seed,
feeding a counter-mode splitmix64 stream) so codebooks never depend on
numpy's RNG internals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .bitops import pack_bits, sample_distinct_positions, unpack_bits
from .corpus import CollectionStats, Document
from .hashing import term_hash64

WEIGHTINGS = ("loglik", "tfidf", "raw_tf")

_MASK64 = 0xFFFFFFFFFFFFFFFF


@dataclass(frozen=True)
class IndexConfig:
    """Signature geometry and weighting for one index.

    ``width_bits`` is the signature width N (a multiple of 8).  One in
    ``sparsity_denominator`` positions of each term vector is set to +1 and
    one in that many to -1 (``floor(N/s)`` of each).  12 is the retrieval
    default; 6 tends to work better for clustering indexes.
    """

    width_bits: int
    sparsity_denominator: int = 12
    seed: int = 0
    weighting: str = "loglik"

    def __post_init__(self) -> None:
        n, s = self.width_bits, self.sparsity_denominator
        if n < 8 or n % 8 != 0:
            raise ValueError(f"width_bits must be a multiple of 8 and >= 8, got {n}")
        if s < 2:
            raise ValueError(f"sparsity_denominator must be >= 2, got {s}")
        if n // s < 1:
            raise ValueError(
                f"width_bits={n} too small for sparsity_denominator={s}: "
                "every term vector needs at least one +1 and one -1"
            )
        if self.weighting not in WEIGHTINGS:
            raise ValueError(
                f"unknown weighting {self.weighting!r}, expected one of {WEIGHTINGS}"
            )

    @property
    def nonzeros_per_sign(self) -> int:
        """Count of +1 positions (= count of -1 positions) per term vector."""
        return self.width_bits // self.sparsity_denominator


@dataclass
class IndexVector:
    """A term's sparse ternary code: disjoint +1 and -1 position sets."""

    plus_positions: np.ndarray
    minus_positions: np.ndarray

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, IndexVector):
            return NotImplemented
        return np.array_equal(
            self.plus_positions, other.plus_positions
        ) and np.array_equal(self.minus_positions, other.minus_positions)

    def dense(self, width: int) -> np.ndarray:
        """Expand to a dense +1/-1/0 vector of the given width."""
        v = np.zeros(width, dtype=np.float64)
        v[self.plus_positions] = 1.0
        v[self.minus_positions] = -1.0
        return v


@lru_cache(maxsize=65536)
def _term_vector(term: str, width: int, sparsity: int, seed: int) -> IndexVector:
    k = width // sparsity
    stream_seed = term_hash64(term) ^ (seed & _MASK64)
    positions = sample_distinct_positions(stream_seed, width, 2 * k)
    plus = np.sort(positions[:k])
    minus = np.sort(positions[k:])
    plus.setflags(write=False)
    minus.setflags(write=False)
    return IndexVector(plus_positions=plus, minus_positions=minus)


def term_vector(term: str, config: IndexConfig) -> IndexVector:
    """Deterministic sparse ternary vector for a term.

    The first ``floor(N/s)`` distinct positions drawn from the term's
    stream carry +1, the next that many carry -1.  Cached instances are
    shared; treat the position arrays as read-only.
    """
    return _term_vector(
        term, config.width_bits, config.sparsity_denominator, config.seed
    )


def weight(tdf: int, doc_len: int, tcf: int, coll_len: int) -> float:
    """Log-likelihood term weight: how much more frequent a term is in the
    document than in the collection at large.

    Returns ``max(0, ln((tdf/doc_len) / (tcf/coll_len)))``; terms at or
    below their expected frequency get weight 0, which is what quietly
    discounts stop-words.
    """
    if doc_len < 1 or coll_len < 1:
        raise ValueError(f"doc_len={doc_len} and coll_len={coll_len} must be >= 1")
    if tdf < 1 or tcf < 1:
        raise ValueError(f"tdf={tdf} and tcf={tcf} must be >= 1")
    # Integer products keep the ratio exact when tdf/doc_len == tcf/coll_len.
    raw = math.log((tdf * coll_len) / (doc_len * tcf))
    return raw if raw > 0.0 else 0.0


def weight_alternative(
    scheme: str, tdf: int, doc_len: int, df: int, doc_count: int
) -> float:
    """Alternative weightings: raw term frequency or TF-IDF."""
    if scheme == "raw_tf":
        return float(tdf)
    if scheme == "tfidf":
        if df < 1:
            raise ValueError("tfidf requires df >= 1")
        return tdf * math.log(doc_count / df)
    raise ValueError(f"unknown scheme {scheme!r}")


def _document_weight(
    term: str, tdf: int, doc_len: int, stats: CollectionStats, scheme: str
) -> float:
    rec = stats.terms.get(term)
    if rec is None:
        raise ValueError(f"term {term!r} missing from collection statistics")
    if scheme == "loglik":
        return weight(tdf, doc_len, rec.tcf, stats.total_occurrences)
    if scheme == "raw_tf":
        return float(tdf)
    return weight_alternative("tfidf", tdf, doc_len, rec.df, stats.doc_count)


# Accumulator values this far below the largest contributing weight are
# rounding residue of an exact cancellation; snapping them to 0 keeps the
# sign convention stable under any positive rescaling of the weights
# (e.g. changing the logarithm base).
CANCEL_EPS = 1e-10


def snap_cancellations(acc: np.ndarray, weight_scale: float) -> np.ndarray:
    if weight_scale > 0.0:
        acc[np.abs(acc) <= CANCEL_EPS * weight_scale] = 0.0
    return acc


def project_document(
    doc: Document, stats: CollectionStats, config: IndexConfig
) -> np.ndarray:
    """Project a document into N dimensions: the weighted sum of its terms'
    ternary index vectors.

    Zero-weight terms contribute nothing; an empty document projects to the
    zero vector.  Positions where contributions cancel exactly are snapped
    to 0 so the downstream sign bits do not depend on rounding order.
    """
    acc = np.zeros(config.width_bits, dtype=np.float64)
    doc_len = doc.length
    w_max = 0.0
    for term, tdf in doc.term_counts().items():
        w = _document_weight(term, tdf, doc_len, stats, config.weighting)
        if w <= 0.0:
            continue
        w_max = max(w_max, w)
        iv = term_vector(term, config)
        acc[iv.plus_positions] += w
        acc[iv.minus_positions] -= w
    return snap_cancellations(acc, w_max)


@dataclass(frozen=True)
class Signature:
    """Packed N-bit document signature; bit 1 means +1, bit 0 means -1."""

    bits: bytes

    @property
    def width_bits(self) -> int:
        return len(self.bits) * 8

    def bit_array(self) -> np.ndarray:
        """0/1 expansion, bit i at index i."""
        return unpack_bits(np.frombuffer(self.bits, dtype=np.uint8), self.width_bits)

    @classmethod
    def from_bit_array(cls, bits: np.ndarray) -> "Signature":
        return cls(bits=pack_bits(bits).tobytes())


def quantize_sign(v: np.ndarray) -> Signature:
    """Keep only the sign bits of a projected vector.

    Bit i is 1 when ``v[i] >= 0``: zeros (positions no term touched, or
    exact cancellations) are encoded as positive.
    """
    v = np.asarray(v, dtype=np.float64)
    return Signature.from_bit_array((v >= 0.0).astype(np.uint8))


def quantize_bits(v: np.ndarray, b: int) -> np.ndarray:
    """Reduce a vector to ``b``-bit precision and return the values the
    levels stand for, ready for distance computations.

    The vector's own [min, max] range is mapped linearly onto integer
    levels 0 .. 2^b - 1 (round half up), then levels map back to their
    value midpoints.  ``b == 1`` instead applies the sign rule and returns
    the +-1 expansion.  Constant vectors map to all-zero levels.
    """
    if not 1 <= b <= 8:
        raise ValueError(f"bit precision must be in [1, 8], got {b}")
    v = np.asarray(v, dtype=np.float64)
    if b == 1:
        return np.where(v >= 0.0, 1.0, -1.0)
    lo = float(v.min())
    hi = float(v.max())
    if hi == lo:
        return np.full_like(v, lo)
    n_levels = (1 << b) - 1
    levels = np.floor((v - lo) / (hi - lo) * n_levels + 0.5)
    np.clip(levels, 0, n_levels, out=levels)
    return lo + levels * ((hi - lo) / n_levels)


def pack(values: np.ndarray) -> Signature:
    """Pack a +-1 vector into a Signature (+1 -> bit 1, -1 -> bit 0)."""
    values = np.asarray(values)
    if values.ndim != 1:
        raise ValueError("expected a 1-D vector")
    plus = values == 1
    minus = values == -1
    if not np.all(plus | minus):
        bad = values[~(plus | minus)][0]
        raise ValueError(f"entries must be +1 or -1, found {bad!r}")
    return Signature.from_bit_array(plus.astype(np.uint8))


def unpack(sig: Signature) -> np.ndarray:
    """Expand a Signature back to its +-1 vector (int8)."""
    bits = sig.bit_array().astype(np.int8)
    return (2 * bits - 1).astype(np.int8)
