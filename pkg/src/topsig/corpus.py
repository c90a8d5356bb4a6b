"""Corpus ingestion: tokenization, TSV parsing, and collection statistics.

The corpus file format is UTF-8 TSV, one document per line:
``doc_id<TAB>text``.  Lines without a TAB are rejected with their line
number; text after the first TAB may itself contain tabs.
"""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

from .errors import CorpusError

# Unicode alphanumerics; underscore is a separator like any other punctuation.
_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)


def tokenize(text: str) -> list[str]:
    """Lowercase and split on any non-alphanumeric codepoint.

    No stemming, no stop-listing: downstream weighting discounts
    uninformative terms on its own.
    """
    return _TOKEN_RE.findall(text.lower())


@dataclass(frozen=True)
class Document:
    """One document: a non-empty id and its ordered, normalized tokens."""

    doc_id: str
    tokens: tuple[str, ...]

    def __post_init__(self) -> None:
        if not self.doc_id:
            raise ValueError("doc_id must be non-empty")

    @property
    def length(self) -> int:
        """Total number of term occurrences in the document."""
        return len(self.tokens)

    def term_counts(self) -> Counter[str]:
        return Counter(self.tokens)


@dataclass
class TermStats:
    """Collection frequency and document frequency of one term."""

    tcf: int = 0
    df: int = 0


@dataclass
class CollectionStats:
    """Global term statistics over a collection.

    Invariants: ``total_occurrences`` equals the sum of all tcf values, and
    for every term ``1 <= df <= doc_count`` and ``df <= tcf``.
    """

    total_occurrences: int = 0
    doc_count: int = 0
    terms: dict[str, TermStats] = field(default_factory=dict)

    def validate(self) -> None:
        total = sum(t.tcf for t in self.terms.values())
        if total != self.total_occurrences:
            raise ValueError(
                f"tcf sum {total} != total occurrences {self.total_occurrences}"
            )
        for term, t in self.terms.items():
            if not (1 <= t.df <= max(self.doc_count, 1)) or t.df > t.tcf:
                raise ValueError(f"inconsistent stats for term {term!r}: {t}")


def build_stats(documents: Iterable[Document]) -> CollectionStats:
    """Accumulate collection statistics over a document stream.

    The result is independent of stream order.  A repeated doc_id raises
    :class:`CorpusError` naming the id.
    """
    stats = CollectionStats()
    seen: set[str] = set()
    for doc in documents:
        if doc.doc_id in seen:
            raise CorpusError(f"duplicate doc_id {doc.doc_id!r}")
        seen.add(doc.doc_id)
        stats.doc_count += 1
        stats.total_occurrences += len(doc.tokens)
        for term, tdf in doc.term_counts().items():
            rec = stats.terms.setdefault(term, TermStats())
            rec.tcf += tdf
            rec.df += 1
    return stats


def merge_stats(a: CollectionStats, b: CollectionStats) -> CollectionStats:
    """Merge per-shard statistics; associative and commutative.

    Callers are responsible for ensuring no document was counted in more
    than one shard.
    """
    merged = CollectionStats(
        total_occurrences=a.total_occurrences + b.total_occurrences,
        doc_count=a.doc_count + b.doc_count,
        terms={t: TermStats(s.tcf, s.df) for t, s in a.terms.items()},
    )
    for term, s in b.terms.items():
        rec = merged.terms.setdefault(term, TermStats())
        rec.tcf += s.tcf
        rec.df += s.df
    return merged


def read_corpus(path: str | Path) -> Iterator[Document]:
    """Stream documents from a TSV corpus file in line order.

    Raises :class:`CorpusError` for undecodable lines (naming the document
    when its id is readable), for lines without a TAB, and for empty ids.
    """
    path = Path(path)
    with path.open("rb") as fh:
        for lineno, raw in enumerate(fh, start=1):
            raw = raw.rstrip(b"\r\n")
            try:
                line = raw.decode("utf-8")
            except UnicodeDecodeError as exc:
                doc_id = raw.split(b"\t", 1)[0].decode("utf-8", errors="replace")
                raise CorpusError(
                    f"{path}:{lineno}: invalid UTF-8 in document {doc_id!r}: {exc}"
                ) from exc
            if "\t" not in line:
                raise CorpusError(f"{path}:{lineno}: no TAB separator")
            doc_id, text = line.split("\t", 1)
            if not doc_id:
                raise CorpusError(f"{path}:{lineno}: empty doc_id")
            yield Document(doc_id=doc_id, tokens=tuple(tokenize(text)))
