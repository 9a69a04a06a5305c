"""Exception hierarchy shared by every module."""


class TKFError(Exception):
    """Base class for all package errors."""


class ParamError(TKFError, ValueError):
    pass


class ProbError(TKFError, ValueError):
    """A probability evaluated to zero where a logarithm was requested."""


class ResourceError(TKFError):
    """Requested support or table size exceeds the configured cap."""


class DegenerateError(TKFError, ValueError):
    pass


class InvalidSlope(TKFError, ValueError):
    """The regression slope is non-positive, so the distance is undefined."""


class CapExceeded(TKFError, RuntimeError):
    """A simulated sequence grew past ``SimConfig.max_length_cap``."""
