"""Nonanticipative analog forecasting of air-temperature extremes.

Mines precursor rules of the form (i1, i2, n, l, Min, Max) from multi-station
daily anomaly series and applies them to forecast extremes months ahead.
"""

from analogcast.errors import (
    AnalogError,
    ConfigError,
    DataError,
    ParseError,
    StoreError,
)

__version__ = "0.1.0"

__all__ = [
    "AnalogError",
    "ConfigError",
    "DataError",
    "ParseError",
    "StoreError",
    "__version__",
]
