"""Exception types raised across the pipeline.

Every error derives from :class:`LaraError` so callers (notably the CLI) can
catch one base class and report ``type(err).__name__``.
"""


class LaraError(Exception):
    """Base class for all pipeline errors."""


# records / ingest
class RecordTooShort(LaraError):
    pass


class WindowOutOfRange(LaraError):
    pass


class EmptyRecord(LaraError):
    pass


class RecordRejected(LaraError):
    """A record failed the signal-quality gate."""


class ParseError(LaraError):
    def __init__(self, line, message="malformed value"):
        super().__init__(f"line {line}: {message}")
        self.line = line


class TimestampOrderError(LaraError):
    def __init__(self, line):
        super().__init__(f"line {line}: timestamp not strictly increasing")
        self.line = line


# rubric / dataset
class InsufficientSignal(LaraError):
    pass


class StratumTooSmall(LaraError):
    pass


# network
class ConfigError(LaraError):
    pass


class ShapeError(LaraError):
    pass


class EmptyDataset(LaraError):
    pass


class DivergenceError(LaraError):
    pass


class FormatError(LaraError):
    pass


class VersionError(LaraError):
    pass


class CorruptWeights(LaraError):
    pass


# fusion / metrics / synth
class EmptyAggregate(LaraError):
    pass


class DegenerateLabels(LaraError):
    pass


class DomainError(LaraError):
    pass


class SpecError(LaraError):
    pass
