"""Chronological citation recommendation.

Predicts a query's citing-time preference (a probability distribution over
publication-time slices) with a two-branch MLP and uses it to re-rank
content-similarity candidate lists. Ships the comparison weighting schemes,
ranking metrics, and a synthetic-corpus generator for desk-scale checks.
"""

__version__ = "0.1.0"

from chronorec.errors import ChronorecError, DataError, NumericalError

__all__ = ["ChronorecError", "DataError", "NumericalError", "__version__"]
