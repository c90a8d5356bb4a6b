"""Signature index: two-pass build, binary persistence, validation.

On-disk layout, all integers little-endian:

    magic           4 bytes  b"TSIG"
    format_version  u32
    width_bits      u32
    doc_count       u64
    seed            u64
    sparsity        u32
    weighting_id    u32      index into rindex.WEIGHTINGS
    id table        doc_count x (u32 length + UTF-8 bytes), ordinal order
    signatures      doc_count x width_bits/8 bytes, contiguous

File size is exactly header + id table + doc_count * width_bits/8; this is
asserted on every write so index files can be hashed and compared.
"""

from __future__ import annotations

import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

from .corpus import CollectionStats, Document, build_stats, read_corpus
from .errors import CorpusError, CorruptionError, FormatError
from .rindex import (
    WEIGHTINGS,
    IndexConfig,
    Signature,
    project_document,
    quantize_sign,
)

MAGIC = b"TSIG"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sIIQQII")
HEADER_BYTES = _HEADER.size
_ID_LEN = struct.Struct("<I")


def signature_block_bytes(doc_count: int, width_bits: int) -> int:
    """Exact size of the packed signature block."""
    return doc_count * (width_bits // 8)


@dataclass(frozen=True)
class IndexHeader:
    """Index geometry plus everything needed to rebuild query-side vectors."""

    width_bits: int
    doc_count: int
    seed: int
    sparsity_denominator: int
    weighting: str
    format_version: int = FORMAT_VERSION

    def config(self) -> IndexConfig:
        return IndexConfig(
            width_bits=self.width_bits,
            sparsity_denominator=self.sparsity_denominator,
            seed=self.seed,
            weighting=self.weighting,
        )


@dataclass
class SignatureIndex:
    """Loaded index: header, ordinal -> doc_id table, packed signature block.

    Ordinal order is corpus ingestion order.  A loaded index is immutable
    and safe to share between concurrent searchers.
    """

    header: IndexHeader
    doc_ids: list[str]
    signatures: np.ndarray  # (doc_count, width_bits // 8) uint8

    def __post_init__(self) -> None:
        n, w8 = self.header.doc_count, self.header.width_bits // 8
        if len(self.doc_ids) != n:
            raise ValueError(f"{len(self.doc_ids)} doc ids for doc_count={n}")
        if self.signatures.shape != (n, w8):
            raise ValueError(
                f"signature block shape {self.signatures.shape} != {(n, w8)}"
            )

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SignatureIndex):
            return NotImplemented
        return (
            self.header == other.header
            and self.doc_ids == other.doc_ids
            and np.array_equal(self.signatures, other.signatures)
        )

    @property
    def doc_count(self) -> int:
        return self.header.doc_count

    def signature(self, ordinal: int) -> Signature:
        return Signature(bits=self.signatures[ordinal].tobytes())


def _signature_row(doc: Document, stats: CollectionStats, config: IndexConfig) -> np.ndarray:
    try:
        projected = project_document(doc, stats, config)
    except ValueError as exc:
        raise CorpusError(f"while indexing document {doc.doc_id!r}: {exc}") from exc
    sig = quantize_sign(projected)
    return np.frombuffer(sig.bits, dtype=np.uint8)


def project_corpus(
    corpus_path: str | Path,
    stats: CollectionStats,
    config: IndexConfig,
    threads: int = 1,
) -> tuple[list[str], np.ndarray]:
    """Pass 2: project and quantize every document in corpus order.

    Documents are independent, so the pass may run on a thread pool; rows
    are always written at their ordinal offsets, so the output is identical
    for any thread count.
    """
    doc_ids: list[str] = []
    rows: list[np.ndarray] = []
    if threads <= 1:
        for doc in read_corpus(corpus_path):
            doc_ids.append(doc.doc_id)
            rows.append(_signature_row(doc, stats, config))
    else:
        chunk: list[Document] = []
        with ThreadPoolExecutor(max_workers=threads) as pool:

            def flush() -> None:
                for row in pool.map(
                    lambda d: _signature_row(d, stats, config), chunk
                ):
                    rows.append(row)
                chunk.clear()

            for doc in read_corpus(corpus_path):
                doc_ids.append(doc.doc_id)
                chunk.append(doc)
                if len(chunk) >= 256:
                    flush()
            flush()
    width8 = config.width_bits // 8
    block = (
        np.vstack(rows) if rows else np.empty((0, width8), dtype=np.uint8)
    )
    return doc_ids, np.ascontiguousarray(block, dtype=np.uint8)


def build_index(
    corpus_path: str | Path, config: IndexConfig, threads: int = 1
) -> SignatureIndex:
    """Two-pass build: collection statistics, then per-document signatures.

    Output is deterministic for a fixed (corpus, config).
    """
    stats = build_stats(read_corpus(corpus_path))
    doc_ids, block = project_corpus(corpus_path, stats, config, threads=threads)
    header = IndexHeader(
        width_bits=config.width_bits,
        doc_count=len(doc_ids),
        seed=config.seed,
        sparsity_denominator=config.sparsity_denominator,
        weighting=config.weighting,
    )
    return SignatureIndex(header=header, doc_ids=doc_ids, signatures=block)


def expected_file_size(index: SignatureIndex) -> int:
    id_table = sum(_ID_LEN.size + len(d.encode("utf-8")) for d in index.doc_ids)
    return HEADER_BYTES + id_table + signature_block_bytes(
        index.header.doc_count, index.header.width_bits
    )


def write_index(index: SignatureIndex, path: str | Path) -> None:
    """Serialize the index; asserts the exact file-size arithmetic."""
    path = Path(path)
    header = index.header
    with path.open("wb") as fh:
        fh.write(
            _HEADER.pack(
                MAGIC,
                header.format_version,
                header.width_bits,
                header.doc_count,
                header.seed,
                header.sparsity_denominator,
                WEIGHTINGS.index(header.weighting),
            )
        )
        for doc_id in index.doc_ids:
            encoded = doc_id.encode("utf-8")
            fh.write(_ID_LEN.pack(len(encoded)))
            fh.write(encoded)
        fh.write(np.ascontiguousarray(index.signatures).tobytes())
        written = fh.tell()
    expected = expected_file_size(index)
    if written != expected:
        raise AssertionError(
            f"wrote {written} bytes, size arithmetic says {expected}"
        )


def read_index(path: str | Path) -> SignatureIndex:
    """Load and validate an index file.

    Raises :class:`FormatError` for a bad magic, version, or geometry, and
    :class:`CorruptionError` (with expected vs. actual byte counts) when
    the file is truncated or carries trailing bytes.
    """
    path = Path(path)
    data = path.read_bytes()
    if len(data) < HEADER_BYTES:
        raise CorruptionError(
            f"{path}: file is {len(data)} bytes, header alone needs {HEADER_BYTES}"
        )
    magic, version, width_bits, doc_count, seed, sparsity, weighting_id = _HEADER.unpack_from(
        data, 0
    )
    if magic != MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise FormatError(f"{path}: unsupported format version {version}")
    if width_bits < 8 or width_bits % 8 != 0:
        raise FormatError(f"{path}: width_bits={width_bits} is not a multiple of 8")
    if weighting_id >= len(WEIGHTINGS):
        raise FormatError(f"{path}: unknown weighting id {weighting_id}")

    offset = HEADER_BYTES
    doc_ids: list[str] = []
    for ordinal in range(doc_count):
        if offset + _ID_LEN.size > len(data):
            raise CorruptionError(
                f"{path}: truncated id table at ordinal {ordinal}"
            )
        (id_len,) = _ID_LEN.unpack_from(data, offset)
        offset += _ID_LEN.size
        if offset + id_len > len(data):
            raise CorruptionError(
                f"{path}: truncated id table at ordinal {ordinal}"
            )
        doc_ids.append(data[offset : offset + id_len].decode("utf-8"))
        offset += id_len

    block_bytes = signature_block_bytes(doc_count, width_bits)
    actual = len(data) - offset
    if actual != block_bytes:
        raise CorruptionError(
            f"{path}: signature block is {actual} bytes, expected {block_bytes}"
        )
    block = np.frombuffer(
        data, dtype=np.uint8, count=block_bytes, offset=offset
    ).reshape(doc_count, width_bits // 8)

    header = IndexHeader(
        width_bits=width_bits,
        doc_count=doc_count,
        seed=seed,
        sparsity_denominator=sparsity,
        weighting=WEIGHTINGS[weighting_id],
        format_version=version,
    )
    return SignatureIndex(header=header, doc_ids=doc_ids, signatures=block.copy())
