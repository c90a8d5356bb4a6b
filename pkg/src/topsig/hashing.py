"""Stable 64-bit term hashing for codebook seeding."""

from __future__ import annotations

from hashlib import blake2b


def term_hash64(term: str) -> int:
    """64-bit hash of a term, stable across processes and platforms."""
    digest = blake2b(term.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")
