"""Model assessment by internal replication.

Each module turns data into replicates that are iid uniform when the
postulated model holds; :func:`intrep.core.assess` combines them with
Fisher's statistic in both directions.
"""

__version__ = "0.1.0"

from .core import AssessmentResult, ConfidenceSet1D, USample, assess, confidence_set_scan, fisher_statistic
from .errors import (
    BracketError, ConfigError, ConvergenceError, DataError, DomainError, IntrepError, PrecisionLossError,
)
from .numerics import RngStream, rng_stream

__all__ = [
    "AssessmentResult", "ConfidenceSet1D", "USample", "assess", "confidence_set_scan",
    "fisher_statistic", "BracketError", "ConfigError", "ConvergenceError", "DataError",
    "DomainError", "IntrepError", "PrecisionLossError", "RngStream", "rng_stream", "__version__",
]
