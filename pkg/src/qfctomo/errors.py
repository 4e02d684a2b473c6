"""Exception types shared across the package."""


class QfcError(Exception):
    """Base class for all package errors."""


class GridMismatchError(QfcError, ValueError):
    """Operands live on different frequency grids."""


class PreconditionError(QfcError, ValueError):
    """An operation was called outside its stated preconditions."""


class ValidityError(QfcError, ValueError):
    """A physical model was asked for a regime it does not cover."""


class CoverageError(PreconditionError):
    """A delay sweep is too short for the requested analysis."""


class ConsistencyError(QfcError):
    """Data disagree with their own metadata, or a numerical self-check failed."""


class FormatError(QfcError, ValueError):
    """A file does not conform to its declared schema.

    ``path``, ``row``, ``column`` and ``offset`` (byte offset into the file)
    are filled in when known.
    """

    def __init__(self, message, path=None, row=None, column=None, offset=None):
        self.path = path
        self.row = row
        self.column = column
        self.offset = offset
        where = []
        if path is not None:
            where.append(str(path))
        if row is not None:
            where.append(f"row {row}")
        if column is not None:
            where.append(f"column {column}")
        if offset is not None:
            where.append(f"byte {offset}")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)


class ConfigError(QfcError, ValueError):
    """Invalid experiment configuration; ``pointer`` is a JSON pointer."""

    def __init__(self, pointer, message):
        self.pointer = pointer
        super().__init__(f"{pointer or '/'}: {message}")
