from __future__ import annotations


class TraceRewardError(Exception):
    """Base class for every error raised by this package."""


class ArgumentError(TraceRewardError, ValueError):
    pass


class DomainError(TraceRewardError, ValueError):
    """A numeric input falls outside the domain an operation accepts."""


class ConfigError(TraceRewardError, ValueError):
    pass


class ParseError(TraceRewardError, ValueError):
    def __init__(self, message: str, offset: int | None = None, field: str | None = None):
        super().__init__(message)
        self.offset = offset
        self.field = field


class SchemaError(TraceRewardError, ValueError):
    def __init__(self, message: str, field: str):
        super().__init__(message)
        self.field = field


class RubricRangeError(SchemaError):
    pass


class ConsistencyError(TraceRewardError, ValueError):
    pass


class FixtureMissingError(TraceRewardError, KeyError):
    def __init__(self, key: str):
        super().__init__(key)
        self.key = key

    def __str__(self) -> str:
        return f"fixture missing for prompt hash {self.key}"


class TrainingError(TraceRewardError, RuntimeError):
    pass


class PreconditionError(TraceRewardError, ValueError):
    pass


class InconclusiveError(PreconditionError):
    """Too few Monte Carlo trials for the requested statistical check."""
