"""Exception hierarchy shared across the toolkit."""


class ConvSqlError(Exception):
    """Base class for all toolkit errors."""


class SchemaFormatError(ConvSqlError):
    """The tables file is malformed or contains a duplicate db_id."""


class SchemaValidationError(ConvSqlError):
    """A loaded schema violates its structural invariants (dangling keys etc.)."""


class UnknownColumnError(ConvSqlError):
    """No schema column matches the requested name."""


class UnknownTableError(ConvSqlError):
    """No schema table matches the requested name."""


class AmbiguousColumnError(ConvSqlError):
    """More than one schema column matches and no table hint was given."""


class SqlSyntaxError(ConvSqlError):
    """SQL text could not be parsed; carries the offending token position."""

    def __init__(self, message: str, position: int | None = None):
        super().__init__(message if position is None else f"{message} (at token {position})")
        self.position = position


class UnsupportedSqlError(SqlSyntaxError):
    """The SQL is valid but uses a construct outside the supported dialect."""


class SchemaMismatchError(ConvSqlError):
    """Two queries bound to different databases were diffed or matched."""


class UnrenderableQueryError(ConvSqlError):
    """An AST has no faithful rendering in the parenthesis-free dialect."""


class RecordValidationError(ConvSqlError):
    """A training record or its inputs violate the record invariants."""


class DatasetFormatError(ConvSqlError):
    """An interactions file is missing required fields or is not JSON."""


class AlignmentError(ConvSqlError):
    """Prediction and gold structures do not line up; carries offending ids."""

    def __init__(self, message: str, offending_ids: list[str] | None = None):
        super().__init__(message)
        self.offending_ids = offending_ids or []


class TaxonomyError(ConvSqlError):
    """A taxonomy definition has the wrong size or duplicate names."""
