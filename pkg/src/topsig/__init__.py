"""TopSig: compressed binary document signatures for search and clustering.

A term-by-document weight matrix is crushed into fixed-width bit strings by
weighted random indexing followed by sign-bit quantization.  Retrieval is a
masked-Hamming scan over the packed signatures; clustering is k-means with
majority-bit centroids in the same space.
"""

__version__ = "0.1.0"

from .corpus import CollectionStats, Document, build_stats, read_corpus, tokenize
from .rindex import (
    IndexConfig,
    IndexVector,
    Signature,
    pack,
    project_document,
    quantize_bits,
    quantize_sign,
    term_vector,
    unpack,
    weight,
    weight_alternative,
)
from .sigstore import SignatureIndex, build_index, read_index, write_index
from .search import (
    QueryContext,
    build_query,
    masked_hamming,
    prf_refine,
    rank,
    rank_partial,
)
from .cluster import Clustering, centroid_update, kmeans, objective
from .errors import (
    CorpusError,
    CorruptionError,
    EmptyQueryError,
    FormatError,
    TopsigError,
)

__all__ = [
    "__version__",
    "CollectionStats",
    "Document",
    "build_stats",
    "read_corpus",
    "tokenize",
    "IndexConfig",
    "IndexVector",
    "Signature",
    "pack",
    "project_document",
    "quantize_bits",
    "quantize_sign",
    "term_vector",
    "unpack",
    "weight",
    "weight_alternative",
    "SignatureIndex",
    "build_index",
    "read_index",
    "write_index",
    "QueryContext",
    "build_query",
    "masked_hamming",
    "prf_refine",
    "rank",
    "rank_partial",
    "Clustering",
    "centroid_update",
    "kmeans",
    "objective",
    "CorpusError",
    "CorruptionError",
    "EmptyQueryError",
    "FormatError",
    "TopsigError",
]
