"""Exception hierarchy.

The CLI maps these onto exit codes: DSL problems exit 3, configuration
problems exit 4.
"""


class RoughStatError(Exception):
    """Base class for every error raised by this package."""


class ConfigurationError(RoughStatError, ValueError):
    """Invalid protocol, parameters, grid, or a checkpoint past the prefix budget."""


class DSLError(RoughStatError):
    """Lexing, parsing or static checking failure in a sequence program.

    ``position`` is a 1-based byte offset into the source.
    """

    def __init__(self, message: str, position: int | None = None):
        self.message = message
        self.position = position
        if position is not None:
            message = f"{message} at position {position}"
        super().__init__(message)


class LexError(DSLError):
    pass


class ParseError(DSLError):
    pass


class ProgramError(DSLError):
    """A well-formed program used where it is not allowed (e.g. a target that uses k)."""


class EstimationError(RoughStatError):
    pass


class CandidateError(RoughStatError):
    pass


class NotCauchyError(RoughStatError):
    """No anchor index produced a seed band capturing almost all terms."""


class ThresholdError(RoughStatError):
    pass
