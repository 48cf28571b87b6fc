"""Exception taxonomy shared across the engine."""


class EngineError(Exception):
    """Base class for all errors raised by this package."""


class TransportError(EngineError):
    """A backend request failed in a retryable way (network, 5xx, timeout)."""


class ProtocolError(EngineError):
    """A backend answered, but the payload violates the wire contract.

    Carries the raw payload so the offending response can be audited.
    """

    def __init__(self, message: str, payload=None):
        super().__init__(message)
        self.payload = payload


class ContractViolation(EngineError):
    """A documented precondition was broken by the caller."""


class RoutingDegenerate(EngineError):
    """No usable answer clusters exist, so the routing statistics are undefined."""


class SelectionError(EngineError):
    """No chain is eligible for final-answer selection."""


class ReviewError(EngineError):
    """The reviewer produced no usable feedback for a chain."""


class IterationError(EngineError):
    """A refinement iteration processed zero chains."""


class ConfigError(EngineError):
    """Invalid configuration; the message names the offending field."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


class DatasetError(EngineError):
    """A dataset file is malformed; the message carries the line number."""
