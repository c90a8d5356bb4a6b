"""Exception types shared across the toolkit.

``ValueError`` is used for bad parameters (maps to CLI exit 1); subclasses
of :class:`TopsigError` signal data or file-format problems (CLI exit 2).
"""


class TopsigError(Exception):
    """Base for data and format errors."""


class CorpusError(TopsigError):
    """Malformed corpus input (bad encoding, missing TAB, duplicate ids)."""


class FormatError(TopsigError):
    """Index file violates the on-disk format (magic, version, geometry)."""


class CorruptionError(FormatError):
    """Index file is structurally valid but truncated or oversized."""


class EmptyQueryError(TopsigError):
    """No query term is known to the collection; the query spans no subspace."""
