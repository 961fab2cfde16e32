"""Intent classification with out-of-scope rejection.

oosguard trains a sentence-embedding encoder with a joint objective —
cross-entropy on a softmax head plus mean-squared reconstruction error on an
autoencoder head — then discards both heads and classifies queries by
Mahalanobis distance to per-class centroids under a shared covariance.
Queries farther than a calibrated threshold from every centroid are rejected
as out-of-scope.
"""

from oosguard.errors import ConfigError, DataError, NumericError

__version__ = "0.1.0"

__all__ = ["ConfigError", "DataError", "NumericError", "__version__"]
