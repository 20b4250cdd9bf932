"""Bayesian model averaging for differential expression in observational studies.

The package ranks genes by posterior inclusion probabilities computed from
Zellner-Siow null-based Bayes factors over an enumerated linear-model space,
with empirically calibrated prior model probabilities and posterior-expected
FDR. Frequentist single-model baselines, a correlated-covariate microarray
simulator, and an evaluation harness are included.
"""

__version__ = "0.1.0"

from bmadex.errors import (
    BmadexError,
    DuplicateIdError,
    NonFiniteError,
    ParseError,
    RankDeficiencyError,
    SampleMismatchError,
    SaturatedFitError,
)

__all__ = [
    "BmadexError",
    "DuplicateIdError",
    "NonFiniteError",
    "ParseError",
    "RankDeficiencyError",
    "SampleMismatchError",
    "SaturatedFitError",
    "__version__",
]
