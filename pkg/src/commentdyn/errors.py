"""Exception hierarchy shared by all commentdyn modules."""


class CommentDynError(Exception):
    """Base class for every error raised by the package."""


class IngestError(CommentDynError):
    """Malformed or inconsistent event log.

    ``line`` is the 1-based line of the offending record when known, and
    ``ids`` lists offending identifiers (orphans, out-of-order comments).
    """

    def __init__(self, message, line=None, ids=()):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
        self.ids = tuple(ids)


class EmptyCorpusError(CommentDynError):
    pass


class UnknownEntityError(CommentDynError, KeyError):
    """Unknown post or author id."""

    def __str__(self):
        return str(self.args[0]) if self.args else ""


class NoActivityError(CommentDynError):
    """Entity exists but has too few events for the requested series."""


class SupportError(CommentDynError, ValueError):
    """Argument outside the support of a distribution."""


class FitError(CommentDynError):
    """A fit could not produce usable parameters."""


class GeneratorError(CommentDynError):
    """Infeasible synthetic corpus specification."""
