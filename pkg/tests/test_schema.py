import json
import os

import pytest

from convsql import (
    AmbiguousColumnError,
    SchemaFormatError,
    SchemaValidationError,
    UnknownColumnError,
    load_schemas,
    resolve_column,
    schema_items,
)
from conftest import needs_sparc, sparc_dir


def test_fixture_m_counts(retail, concerts):
    # 2 tables, 5 real columns -> wildcard makes M = 6
    assert retail.item_count == 6
    assert concerts.item_count == 10


def test_wildcard_is_item_zero(retail):
    items = schema_items(retail)
    assert items[0] == (None, "*")
    assert len(items) == retail.item_count


def test_item_order_matches_column_ids(retail):
    items = schema_items(retail)
    for i, col in enumerate(retail.columns):
        table = None if col.table_index < 0 else retail.tables[col.table_index]
        assert items[i] == (table, col.original_name)


def test_load_is_deterministic(tables_path):
    assert load_schemas(tables_path) == load_schemas(tables_path)


def test_schema_items_deterministic(retail):
    assert schema_items(retail) == schema_items(retail)


def test_empty_file_gives_empty_map(tmp_path):
    path = tmp_path / "tables.json"
    path.write_text("[]", encoding="utf-8")
    assert load_schemas(str(path)) == {}


def test_dangling_foreign_key_rejected(tmp_path):
    entry = {
        "db_id": "broken",
        "table_names_original": ["t"],
        "column_names_original": [[-1, "*"], [0, "a"]],
        "column_types": ["text", "number"],
        "primary_keys": [1],
        "foreign_keys": [[1, 99]],
    }
    path = tmp_path / "tables.json"
    path.write_text(json.dumps([entry]), encoding="utf-8")
    with pytest.raises(SchemaValidationError):
        load_schemas(str(path))


def test_duplicate_db_id_rejected(tmp_path, tables_path):
    entries = json.load(open(tables_path))
    entries.append(entries[0])
    path = tmp_path / "tables.json"
    path.write_text(json.dumps(entries), encoding="utf-8")
    with pytest.raises(SchemaFormatError):
        load_schemas(str(path))


def test_malformed_entry_reports_offender(tmp_path):
    path = tmp_path / "tables.json"
    path.write_text(json.dumps([{"db_id": "x"}]), encoding="utf-8")
    with pytest.raises(SchemaFormatError) as err:
        load_schemas(str(path))
    assert "x" in str(err.value)


def test_unknown_fields_warn_but_load(tmp_path, caplog):
    entry = {
        "db_id": "extra",
        "table_names_original": ["t"],
        "column_names_original": [[-1, "*"], [0, "a"]],
        "column_types": ["text", "number"],
        "primary_keys": [],
        "foreign_keys": [],
        "surprise_field": 1,
    }
    path = tmp_path / "tables.json"
    path.write_text(json.dumps([entry]), encoding="utf-8")
    with caplog.at_level("WARNING"):
        schemas = load_schemas(str(path))
    assert "extra" in schemas
    assert any("surprise_field" in rec.message for rec in caplog.records)


def test_resolve_unique_column(retail):
    assert resolve_column(retail, None, "SALES") == 3


def test_resolve_ambiguous_without_hint(retail):
    with pytest.raises(AmbiguousColumnError):
        resolve_column(retail, None, "id")


def test_resolve_with_table_hint(sales_db):
    assert resolve_column(sales_db, "orders", "id") == 1
    assert resolve_column(sales_db, "customers", "id") == 4


def test_resolve_unknown_column(retail):
    with pytest.raises(UnknownColumnError):
        resolve_column(retail, None, "nonexistent")


def test_resolve_hint_excludes_other_tables(retail):
    with pytest.raises(UnknownColumnError):
        resolve_column(retail, "city", "sales")


@needs_sparc
def test_real_dataset_item_count_matches_tables_file():
    # the tables file already includes the wildcard row, so item count
    # equals its column count exactly
    path = os.path.join(sparc_dir(), "tables.json")
    schemas = load_schemas(path)
    entries = {e["db_id"]: e for e in json.load(open(path))}
    db_id = "concert_singer" if "concert_singer" in schemas else next(iter(schemas))
    assert len(schema_items(schemas[db_id])) == len(entries[db_id]["column_names_original"])


def test_resolve_matches_iff_unique():
    # property stated by the module: success iff exactly one item matches
    from conftest import TABLES_PATH

    schemas = load_schemas(str(TABLES_PATH))
    for schema in schemas.values():
        for col in schema.columns:
            table = None if col.table_index < 0 else schema.tables[col.table_index]
            same_name = [c for c in schema.columns if c.normalized_name == col.normalized_name]
            if len(same_name) == 1:
                assert resolve_column(schema, None, col.original_name) == col.id
            else:
                with pytest.raises(AmbiguousColumnError):
                    resolve_column(schema, None, col.original_name)
            if table is not None:
                assert resolve_column(schema, table, col.original_name.upper()) == col.id
