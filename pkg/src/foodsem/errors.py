"""Exception types shared across the toolkit.

Every error raised by this package derives from :class:`FoodsemError`, so
callers (notably the CLI) can separate data-validation failures from
configuration problems.
"""


class FoodsemError(Exception):
    """Base class for all toolkit errors."""


# --- corpus ingestion ---------------------------------------------------


class MalformedXml(FoodsemError):
    """Input is not well-formed XML or violates the expected BioC shape."""


class MissingFullText(FoodsemError):
    """A document element lacks a (non-empty) full_text infon."""


class EmptySemanticTags(FoodsemError):
    """An annotation carries no entity URI."""


class VariantTextMismatch(FoodsemError):
    """Two ontology variants of the same source disagree on full_text."""


class DuplicateVariant(FoodsemError):
    """Two documents claim the same (source, ontology) slot."""


# --- entity references --------------------------------------------------


class UnrecognizedRef(FoodsemError):
    """A token matches no known entity-reference pattern."""


# --- phrase pools -------------------------------------------------------


class PoolFormatError(FoodsemError):
    """Pool file is malformed (bad record, duplicate phrase, unknown kind)."""


class EmptyPool(FoodsemError):
    """A required phrase pool is missing or has no phrases."""


# --- balancing ----------------------------------------------------------


class MixedOntology(FoodsemError):
    """Distribution analysis received pairs from more than one ontology."""


class MissingLabel(FoodsemError):
    """A deficit entity has no surface label in the lexicon."""


class DuplicateUnavoidable(FoodsemError):
    """Pair dedup could not be satisfied after bounded re-draws."""


# --- fold planning ------------------------------------------------------


class EmptyDataset(FoodsemError):
    """A dataset handed to the fold planner has no instances."""


# --- prompting ----------------------------------------------------------


class InsufficientExemplars(FoodsemError):
    """The exemplar pool has fewer matching pairs than requested shots."""


# --- evaluation ---------------------------------------------------------


class AlignmentError(FoodsemError):
    """A prediction does not align with any gold instance."""


# --- model gateway ------------------------------------------------------


class ConfigError(FoodsemError):
    """Gateway or CLI configuration is invalid."""
