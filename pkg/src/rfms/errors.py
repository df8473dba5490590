"""Exception types shared across the package."""


class RfmsError(Exception):
    """Base class for all package errors."""


class InvalidInputError(RfmsError, ValueError):
    """Caller violated an input contract (bad shapes, empty classes, bounds)."""


class ModelCodecError(RfmsError, ValueError):
    """Model byte stream is malformed, truncated or of an unknown version."""


class GpFitError(RfmsError, RuntimeError):
    """Gaussian process fit failed even after nugget escalation."""


class ProtocolError(RfmsError, RuntimeError):
    """Curator request/response violated the wire protocol."""


class TransportError(RfmsError, ConnectionError):
    """Network-level failure talking to a remote curator; safe to retry."""
