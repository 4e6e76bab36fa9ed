"""Exception types shared across the toolkit."""


class VortexCueError(Exception):
    """Base class for all toolkit errors."""


class InvalidParameterError(VortexCueError, ValueError):
    pass


class OutOfRangeError(VortexCueError, ValueError):
    pass


class MissingDataError(VortexCueError, LookupError):
    pass


class DegenerateGeometryError(VortexCueError, ValueError):
    pass


class NoInterceptError(VortexCueError):
    pass


class UndetectableError(VortexCueError):
    """The fur motion for a condition was too weak to be detected."""


class DataFileError(VortexCueError, ValueError):
    """Malformed or invalid data file; ``line`` is 1-based when known."""

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        super().__init__(where + message)


class ParseError(DataFileError):
    pass


class ValidationError(DataFileError):
    pass
