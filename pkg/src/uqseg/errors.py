"""Exception hierarchy shared across the pipeline."""


class UqsegError(Exception):
    """Base class for all errors raised by this package."""


class FormatError(UqsegError):
    """A file on disk violates its declared format.

    Carries the path and, when known, the byte offset of the violation.
    """

    def __init__(self, message, path=None, offset=None):
        detail = message
        if path is not None:
            detail = f"{path}: {detail}"
        if offset is not None:
            detail = f"{detail} (byte offset {offset})"
        super().__init__(detail)
        self.path = path
        self.offset = offset


class DataError(UqsegError):
    """Invalid input data or dataset layout."""


class PredictorError(UqsegError):
    """A predictor invocation failed (bad output, crash, timeout)."""


class NoForegroundError(UqsegError):
    """A mask contains no foreground, so no measurement can be derived."""


class EllipseFitError(UqsegError):
    """The contour cannot be fitted with an ellipse (degenerate scatter)."""
