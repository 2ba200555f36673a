"""Exception hierarchy shared by every tortho module."""


class TorthoError(Exception):
    """Base class for all library errors."""


class ArgumentError(TorthoError, ValueError):
    """An argument is outside its documented domain."""


class DegenerateRotationError(ArgumentError):
    pass


class SingularityError(TorthoError, ArithmeticError):
    """A projection was evaluated at (or too close to) a singular point."""


class NumericError(TorthoError, ArithmeticError):
    pass


class AlignmentError(TorthoError):
    """The geometry does not determine a Manhattan frame."""


class PlanningError(TorthoError):
    """A partition plan violates one of its invariants."""


class DegenerateFitError(TorthoError):
    """Fewer than two points survived outlier rejection."""


class FormatError(TorthoError, ValueError):
    """A file does not follow the expected layout."""


class TruncatedDataError(TorthoError, OSError):
    """A binary payload ended before the header said it would."""


class SfmParseError(FormatError):
    def __init__(self, path, line_no, message):
        super().__init__(f"{path}:{line_no}: {message}")
        self.path = path
        self.line_no = line_no


class ConfigError(TorthoError, ValueError):
    def __init__(self, key, message):
        super().__init__(f"config key {key!r}: {message}")
        self.key = key
