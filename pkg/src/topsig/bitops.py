"""Packed-bit primitives: deterministic position sampling, bit packing,
and popcount-based Hamming kernels.

Bit layout is fixed for the life of the file format: bit ``i`` of a width-N
string lives in byte ``i // 8`` at intra-byte position ``i % 8``,
least-significant-bit first.

The position sampler is a counter-mode splitmix64 stream.  It is implemented
here rather than through ``numpy.random`` so that generated codebooks are
bit-identical across numpy versions and platforms.
"""

from __future__ import annotations

import numpy as np

_MASK64 = np.uint64(0xFFFFFFFFFFFFFFFF)
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)

_HAS_BITWISE_COUNT = hasattr(np, "bitwise_count")

# 256-entry popcount table, fallback for numpy < 2.0
_POPCOUNT8 = np.unpackbits(np.arange(256, dtype=np.uint8)[:, None], axis=1).sum(
    axis=1, dtype=np.uint8
)


def splitmix64(seed: int, start: int, count: int) -> np.ndarray:
    """Outputs ``start .. start+count-1`` of the splitmix64 stream for ``seed``.

    Counter-mode: output k is a pure function of (seed, k), so any block of
    the stream can be generated independently and vectorized.
    """
    idx = np.arange(start + 1, start + count + 1, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = (np.uint64(seed & 0xFFFFFFFFFFFFFFFF) + idx * _GOLDEN) & _MASK64
        z = ((z ^ (z >> np.uint64(30))) * _MIX1) & _MASK64
        z = ((z ^ (z >> np.uint64(27))) * _MIX2) & _MASK64
        return z ^ (z >> np.uint64(31))


def sample_distinct_positions(seed: int, n_positions: int, count: int) -> np.ndarray:
    """First ``count`` distinct values in ``[0, n_positions)`` drawn from the
    splitmix64 stream for ``seed``, in draw order.

    Duplicates are rejected; the stream is consumed in counter order, so the
    result is a pure function of (seed, n_positions, count).
    """
    if count > n_positions:
        raise ValueError(
            f"cannot draw {count} distinct positions from {n_positions}"
        )
    out = np.empty(count, dtype=np.int64)
    seen: set[int] = set()
    got = 0
    cursor = 0
    batch = max(32, 3 * count)
    while got < count:
        draws = splitmix64(seed, cursor, batch) % np.uint64(n_positions)
        cursor += batch
        for p in draws:
            v = int(p)
            if v not in seen:
                seen.add(v)
                out[got] = v
                got += 1
                if got == count:
                    break
    return out


def pack_bits(bits: np.ndarray) -> np.ndarray:
    """Pack a 0/1 array (length a multiple of 8) into bytes, LSB-first."""
    bits = np.asarray(bits, dtype=np.uint8)
    if bits.ndim != 1 or bits.size % 8 != 0:
        raise ValueError(f"bit count {bits.size} is not a multiple of 8")
    return np.packbits(bits, bitorder="little")


def unpack_bits(data: np.ndarray, width: int) -> np.ndarray:
    """Expand packed bytes back into a 0/1 array of ``width`` bits."""
    data = np.asarray(data, dtype=np.uint8)
    return np.unpackbits(data, count=width, bitorder="little")


def popcount_rows(block: np.ndarray) -> np.ndarray:
    """Per-row popcount of a 2-D uint8 array."""
    if _HAS_BITWISE_COUNT:
        return np.bitwise_count(block).sum(axis=1, dtype=np.int64)
    return _POPCOUNT8[block].sum(axis=1, dtype=np.int64)


def popcount(data: np.ndarray) -> int:
    """Total popcount of a uint8 array."""
    data = np.ascontiguousarray(data, dtype=np.uint8)
    return int(popcount_rows(data.reshape(1, -1))[0])


def hamming_distances(
    block: np.ndarray, sig: np.ndarray, mask: np.ndarray | None = None
) -> np.ndarray:
    """Masked Hamming distance of every row of ``block`` to ``sig``.

    ``block`` is (n, w) uint8; ``sig`` and ``mask`` are (w,) uint8.  With no
    mask this is the plain Hamming distance.
    """
    x = np.bitwise_xor(block, sig)
    if mask is not None:
        x = np.bitwise_and(x, mask, out=x)
    return popcount_rows(x)
