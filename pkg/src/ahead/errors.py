"""Exception types shared across the package."""


class AheadError(Exception):
    """Base class for all errors raised by this package."""


class InputError(AheadError, ValueError):
    """A caller supplied a value outside the accepted domain."""


class ConfigurationError(AheadError, ValueError):
    """Parameters are inconsistent or cannot support the requested run."""


class IngestionError(AheadError, ValueError):
    """A data file could not be read or parsed."""
