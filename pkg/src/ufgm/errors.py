"""Exception types shared across the package."""


class ConfigError(Exception):
    """Invalid configuration: bad field values or an unsupported combination."""


class NumericalError(Exception):
    """Non-finite values, or an iterative routine that failed to converge."""


class BacktrackExhausted(NumericalError):
    """The step-size search exceeded its doubling cap.

    Usually indicates an oracle that is not convex / Holder-smooth on the
    iterates, or a misconfigured tolerance.
    """


class ParseError(Exception):
    """Malformed data file; carries the 1-based line number when known."""

    def __init__(self, message, line_no=None):
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)
        self.line_no = line_no
