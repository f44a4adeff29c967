"""Exception hierarchy. The CLI maps these onto exit codes."""


class AnalogError(Exception):
    """Base class for every error raised by the package."""


class ConfigError(AnalogError, ValueError):
    """Invalid user configuration (search sets, ranges, options)."""


class ParseError(AnalogError, ValueError):
    """Malformed manifest or series file."""


class DataError(AnalogError, ValueError):
    """Input data cannot support the requested computation."""


class StoreError(AnalogError):
    """Aligned store is missing, corrupt or of an unsupported version."""
