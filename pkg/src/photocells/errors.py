"""Exception types shared across the package."""


class PhotocellsError(Exception):
    """Base class for all package errors."""


class TruncationCapExceeded(PhotocellsError, RuntimeError):
    """A series needed more terms than ``TruncationPolicy.max_terms`` allows."""


class DegenerateInputError(PhotocellsError, ValueError):
    """Input makes the requested quantity undefined (e.g. conditioning on a null event)."""


class LinearizationDomainError(PhotocellsError, ValueError):
    """A first-order formula was evaluated outside its small-parameter domain."""


class EmptyHistogramError(PhotocellsError, ValueError):
    """A histogram with no recorded trials was passed where data is required."""
