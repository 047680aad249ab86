"""Multi-table database schemas: loading, validation, and column lookup.

Schemas come from the standard tables file (one JSON list of database
entries).  Every schema exposes an ordered item list where item 0 is the
wildcard ``*`` bound to no table; the wildcard is an ordinary column for
labeling purposes, so ``SELECT *`` edits have a label home.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass

from .errors import (
    AmbiguousColumnError,
    SchemaFormatError,
    SchemaValidationError,
    UnknownColumnError,
)

log = logging.getLogger(__name__)

VALUE_TYPES = ("text", "number", "time", "boolean", "others")

WILDCARD = "*"

_KNOWN_FIELDS = {
    "db_id",
    "table_names_original",
    "table_names",
    "column_names_original",
    "column_names",
    "column_types",
    "primary_keys",
    "foreign_keys",
}


@dataclass(frozen=True)
class ColumnDef:
    """One schema item; ``table_index`` is -1 for the wildcard."""

    id: int
    table_index: int
    original_name: str
    normalized_name: str
    value_type: str


@dataclass(frozen=True)
class Schema:
    """Immutable database schema; safe to share across workers."""

    db_id: str
    tables: tuple[str, ...]
    normalized_tables: tuple[str, ...]
    columns: tuple[ColumnDef, ...]
    primary_keys: tuple[int, ...]
    foreign_keys: tuple[tuple[int, int], ...]

    @property
    def item_count(self) -> int:
        """Number of schema items, wildcard included."""
        return len(self.columns)

    def table_of(self, column_id: int) -> str | None:
        """Original table name owning ``column_id``, or None for the wildcard."""
        idx = self.columns[column_id].table_index
        return None if idx < 0 else self.tables[idx]


def _validate(schema: Schema) -> None:
    cols = schema.columns
    if not cols or cols[0].original_name != WILDCARD or cols[0].table_index != -1:
        raise SchemaValidationError(
            f"{schema.db_id}: column 0 must be the wildcard '*' bound to no table"
        )
    for i, col in enumerate(cols):
        if col.id != i:
            raise SchemaValidationError(f"{schema.db_id}: column ids must be dense")
        if col.id > 0 and not (0 <= col.table_index < len(schema.tables)):
            raise SchemaValidationError(
                f"{schema.db_id}: column {col.id} ({col.original_name!r}) references "
                f"unknown table index {col.table_index}"
            )
        if col.value_type not in VALUE_TYPES:
            raise SchemaValidationError(
                f"{schema.db_id}: column {col.id} has unknown type {col.value_type!r}"
            )
    m = len(cols)
    for key in schema.primary_keys:
        if not (0 < key < m):
            raise SchemaValidationError(f"{schema.db_id}: primary key {key} out of range")
    for left, right in schema.foreign_keys:
        for end in (left, right):
            if not (0 < end < m):
                raise SchemaValidationError(
                    f"{schema.db_id}: foreign key endpoint {end} out of range (M={m})"
                )


def _build_schema(entry: dict) -> Schema:
    try:
        db_id = entry["db_id"]
        table_names = list(entry["table_names_original"])
        column_names = list(entry["column_names_original"])
        column_types = list(entry["column_types"])
        primary_keys = list(entry.get("primary_keys", []))
        foreign_keys = [tuple(pair) for pair in entry.get("foreign_keys", [])]
    except (KeyError, TypeError) as exc:
        raise SchemaFormatError(f"malformed database entry: {entry!r}: {exc}") from exc

    unknown = set(entry) - _KNOWN_FIELDS
    if unknown:
        log.warning("tables entry %s: ignoring unknown fields %s", db_id, sorted(unknown))

    if len(column_types) != len(column_names):
        raise SchemaFormatError(
            f"{db_id}: {len(column_names)} columns but {len(column_types)} column types"
        )
    columns = []
    for cid, pair in enumerate(column_names):
        try:
            table_index, name = pair
        except (TypeError, ValueError) as exc:
            raise SchemaFormatError(f"{db_id}: bad column entry {pair!r}") from exc
        vtype = column_types[cid]
        if vtype not in VALUE_TYPES:
            vtype = "others"
        columns.append(
            ColumnDef(
                id=cid,
                table_index=int(table_index),
                original_name=str(name),
                normalized_name=str(name).casefold(),
                value_type=vtype,
            )
        )
    # Some tables files omit the leading wildcard row; the convention here
    # requires it, so add one rather than reject the whole database.
    if not columns or columns[0].original_name != WILDCARD:
        columns = [ColumnDef(0, -1, WILDCARD, WILDCARD, "text")] + [
            ColumnDef(c.id + 1, c.table_index, c.original_name, c.normalized_name, c.value_type)
            for c in columns
        ]
        primary_keys = [k + 1 for k in primary_keys]
        foreign_keys = [(a + 1, b + 1) for a, b in foreign_keys]

    schema = Schema(
        db_id=db_id,
        tables=tuple(str(t) for t in table_names),
        normalized_tables=tuple(str(t).casefold() for t in table_names),
        columns=tuple(columns),
        primary_keys=tuple(int(k) for k in primary_keys),
        foreign_keys=tuple((int(a), int(b)) for a, b in foreign_keys),
    )
    _validate(schema)
    return schema


def load_schemas(path: str) -> dict[str, Schema]:
    """Load every database schema from a tables file, keyed by db_id.

    Raises SchemaFormatError for malformed entries or duplicate db_ids and
    SchemaValidationError for dangling key references.
    """
    with open(path, encoding="utf-8") as handle:
        try:
            data = json.load(handle)
        except json.JSONDecodeError as exc:
            raise SchemaFormatError(f"{path}: not valid JSON: {exc}") from exc
    if not isinstance(data, list):
        raise SchemaFormatError(f"{path}: expected a list of database entries")
    schemas: dict[str, Schema] = {}
    for entry in data:
        schema = _build_schema(entry)
        if schema.db_id in schemas:
            raise SchemaFormatError(f"duplicate db_id {schema.db_id!r}")
        schemas[schema.db_id] = schema
    return schemas


def schema_items(schema: Schema) -> list[tuple[str | None, str]]:
    """Ordered (table name, column name) pairs, one per schema item.

    Index i corresponds to column id i; the wildcard pairs with no table.
    """
    return [(schema.table_of(col.id), col.original_name) for col in schema.columns]


def resolve_column(schema: Schema, table_hint: str | None, column_name: str) -> int:
    """Resolve a column name (case-insensitive) to its id.

    ``table_hint`` narrows the search to one table and disambiguates names
    shared across tables.  Raises UnknownColumnError when nothing matches and
    AmbiguousColumnError when several columns match without a hint.
    """
    if not column_name:
        raise UnknownColumnError("empty column name")
    wanted = column_name.casefold()
    hint = table_hint.casefold() if table_hint is not None else None
    matches = []
    for col in schema.columns:
        if col.normalized_name != wanted:
            continue
        if hint is not None:
            if col.table_index < 0:
                continue
            if schema.normalized_tables[col.table_index] != hint:
                continue
        matches.append(col.id)
    if not matches:
        where = f" in table {table_hint!r}" if table_hint else ""
        raise UnknownColumnError(f"{schema.db_id}: no column named {column_name!r}{where}")
    if len(matches) > 1:
        raise AmbiguousColumnError(
            f"{schema.db_id}: column {column_name!r} is ambiguous "
            f"(ids {matches}); pass a table hint"
        )
    return matches[0]
