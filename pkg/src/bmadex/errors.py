"""Shared exception types."""


class BmadexError(Exception):
    """Base class for all package-specific errors."""


class ParseError(BmadexError):
    """A delimited input file could not be parsed."""


class SampleMismatchError(BmadexError):
    """Expression and covariate tables do not describe the same samples."""


class DuplicateIdError(BmadexError):
    """A gene or sample identifier occurs more than once."""


class NonFiniteError(BmadexError):
    """A missing or non-finite value was found where complete data is required."""


class RankDeficiencyError(BmadexError):
    """A design matrix is rank deficient at the working tolerance."""


class SaturatedFitError(BmadexError):
    """R-squared is numerically indistinguishable from 1."""
