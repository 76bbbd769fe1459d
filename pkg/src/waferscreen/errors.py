"""Exception types shared across the package.

All validation failures raise a subclass of :class:`WaferscreenError` so the
CLI can map them uniformly to its validation exit code.
"""


class WaferscreenError(Exception):
    """Base class for every error raised by this package."""


class MalformedCsv(WaferscreenError):
    """CSV structure is broken: ragged rows, duplicate ids, dead columns."""


class EmptyData(WaferscreenError):
    """No data rows or no data columns."""


class NonNumericCell(WaferscreenError):
    """A cell could not be parsed as a number and imputation is disabled."""


class UnknownParam(WaferscreenError):
    """A referenced parameter id does not exist in the matrix."""


class EmptySelection(WaferscreenError):
    """A feature selection produced (or was given) an empty id set."""


class DimMismatch(WaferscreenError):
    """Vector or matrix dimensions do not agree."""


class DegenerateData(WaferscreenError):
    """Too few rows to train a model."""


class EmptyColumn(WaferscreenError):
    """A column statistic was requested on an empty sample."""


class KOutOfRange(WaferscreenError):
    """Requested top-k is outside 1..len(ranking)."""


class KTooLarge(WaferscreenError):
    """More clusters requested than points available."""


class IterationOutOfRange(WaferscreenError):
    """Requested trace iteration was never recorded."""


class TooFewMethods(WaferscreenError):
    """Detection fusion needs at least two flag sets."""


class MissingLabels(WaferscreenError):
    """A lot referenced by an evaluation has no label."""


class InsufficientRows(WaferscreenError):
    """Not enough rows for the requested train/test split."""


class SpecInvalid(WaferscreenError):
    """A synthetic data specification violates its own constraints."""


class MalformedModel(WaferscreenError):
    """A serialized model file cannot be parsed."""
