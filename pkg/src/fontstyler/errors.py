"""Exception types shared across the package."""


class FontStylerError(Exception):
    """Base class for all package errors."""


class BadFont(FontStylerError):
    """Font file exists but cannot be parsed."""


class MissingGlyph(FontStylerError):
    """Font has no outline for the requested codepoint."""


class ShapeError(FontStylerError):
    """Array/tensor dimensions violate an operation's contract."""


class InsufficientData(FontStylerError):
    """A requested split or partition would be empty."""


class Exhausted(FontStylerError):
    """No valid sample satisfies the sampling constraints."""


class DataError(FontStylerError):
    """Dataset-level problem (empty split, unreadable entry)."""


class EmptyInput(FontStylerError):
    """An operation received an empty collection."""


class MissingWeights(FontStylerError):
    """Pretrained extractor weights requested but no file available."""


class EmptyIndex(FontStylerError):
    """Query against an index with no entries."""


class UnknownStyle(FontStylerError):
    """style_id not present in the available indexes."""


class MissingReferenceImage(FontStylerError):
    """An indexed charcode has no stored or renderable glyph."""


class MissingCheckpoint(FontStylerError):
    """A training stage requires a prior-stage checkpoint."""


class DegenerateSet(FontStylerError):
    """Image set too small to form the required statistics."""


class EmptyPartition(FontStylerError):
    """Evaluation requested on a partition with no entries."""
