"""Exception types shared across the package."""


class DimensionError(ValueError):
    """Operand shapes do not agree."""


class DomainError(ValueError):
    """A value lies outside the domain an operation accepts."""


class RankError(DomainError):
    """A matrix that must have full column rank does not."""


class SizeError(DomainError):
    """An exhaustive routine was asked to run beyond its size limits."""


class ParseError(ValueError):
    """Malformed input file. ``line`` is 1-based (0 when not tied to a line)."""

    def __init__(self, message, line=0, path=None):
        self.line = line
        self.path = path
        where = f"{path}:" if path else ""
        if line:
            where += f"{line}: "
        elif where:
            where += " "
        super().__init__(where + message)


class ConfigError(ValueError):
    """Invalid or incomplete configuration."""


class GenerationError(RuntimeError):
    """A random generator could not satisfy its constraints."""


class NumericalDriftError(RuntimeError):
    """Incrementally maintained quantities drifted from a scratch recomputation."""
