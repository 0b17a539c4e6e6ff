"""Exceptions raised by the analysis library.

Scripts catch PLeaderError (plus OSError / ValueError from file handling)
and turn it into a one-line message with exit code 1; anything else is an
internal error (exit code 2). See lib/cli.py.
"""


class PLeaderError(Exception):
    """Base class for every error the library raises on purpose."""

    kind = 'error'


class ParameterError(PLeaderError, ValueError):
    """An argument is outside its documented range."""

    kind = 'parameter'


class DepthError(PLeaderError):
    """Not enough samples (or octaves) for the requested decomposition depth."""

    kind = 'depth'

    def __init__(self, message, max_depth=None):
        super().__init__(message)
        self.max_depth = max_depth


class DegenerateValueError(PLeaderError):
    """Zero leaders or coefficients where a log or negative power is needed."""

    kind = 'degenerate'

    def __init__(self, message, count=0):
        super().__init__(message)
        self.count = count


class RegressionError(PLeaderError):
    """The requested scaling range cannot support a regression."""

    kind = 'regression'


class IngestionError(PLeaderError):
    """A data file (RR intervals, signal CSV, pyramid JSON) is malformed."""

    kind = 'ingestion'

    def __init__(self, message, line_number=None):
        if line_number is not None:
            message = f'line {line_number}: {message}'
        super().__init__(message)
        self.line_number = line_number


class SpecError(PLeaderError):
    """A synthesis or experiment description is invalid."""

    kind = 'spec'


class MonteCarloError(PLeaderError):
    """Too many realizations failed during a benchmark run."""

    kind = 'monte-carlo'
