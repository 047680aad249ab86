"""Training records: encoder input sequences aligned with both label
families.

A record for prefix t serializes

    <s> u_1 ... <s> u_t </s> name(s_1) ... </s> name(s_M)

with one turn marker owning each turn (the leading marker included, so
every turn-switch label has a marker vector; the t=0 vector is the zero
vector and has no token) and one column marker owning each schema item.
Records export as line-delimited JSON behind a single header line that
carries both taxonomy name lists and the separator strings.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field

from .errors import RecordValidationError
from .schema import Schema
from .schemadiff import ColumnChangeLabel, label_prefix
from .sqlast import SqlQuery, to_text
from .taxonomy import Taxonomy, default_column_taxonomy, default_taxonomy
from .turndiff import TurnSwitchLabel

DEFAULT_TURN_SEPARATOR = "⟨s⟩"      # ⟨s⟩
DEFAULT_COLUMN_SEPARATOR = "⟨/s⟩"   # ⟨/s⟩

FORMAT_NAME = "convsql-records/1"

_WORD_RE = re.compile(r"\w+|[^\w\s]")


def tokenize_utterance(text: str) -> list[str]:
    return _WORD_RE.findall(text)


@dataclass(frozen=True)
class Turn:
    utterance: str
    tokens: tuple[str, ...]
    gold_sql_text: str
    gold_sql: SqlQuery


@dataclass(frozen=True)
class Conversation:
    id: str
    db_id: str
    turns: tuple[Turn, ...]

    def __post_init__(self):
        if not self.turns:
            raise ValueError(f"conversation {self.id!r} has no turns")

    def queries(self) -> list[SqlQuery]:
        return [t.gold_sql for t in self.turns]


@dataclass(frozen=True)
class RecordConfig:
    turn_separator: str = DEFAULT_TURN_SEPARATOR
    column_separator: str = DEFAULT_COLUMN_SEPARATOR
    max_length: int | None = None
    tsp_taxonomy: Taxonomy = field(default_factory=default_taxonomy)
    csp_taxonomy: Taxonomy = field(default_factory=default_column_taxonomy)


@dataclass(frozen=True)
class TrainingRecord:
    conversation_id: str
    db_id: str
    prefix_length: int
    tokens: tuple[str, ...]
    turn_marker_positions: tuple[int, ...]
    column_marker_positions: tuple[int, ...]
    tsp_labels: tuple[TurnSwitchLabel, ...]
    csp_labels: ColumnChangeLabel
    gold_sql_text: str


def schema_item_tokens(schema: Schema, column_id: int) -> list[str]:
    """Tokens rendering one schema item: ``table . column`` or ``*``."""
    table = schema.table_of(column_id)
    name = schema.columns[column_id].original_name
    if table is None:
        return [name]
    return [table, ".", name]


def validate_record(record: TrainingRecord, turn_separator: str, column_separator: str) -> None:
    """Check the marker-position invariants; raises RecordValidationError."""
    n = len(record.tokens)
    for positions, sep, want in (
        (record.turn_marker_positions, turn_separator, record.prefix_length),
        (record.column_marker_positions, column_separator, record.csp_labels.column_count),
    ):
        if len(positions) != want:
            raise RecordValidationError(
                f"{record.conversation_id}: expected {want} markers, got {len(positions)}"
            )
        last = -1
        for pos in positions:
            if not (0 <= pos < n):
                raise RecordValidationError(f"marker position {pos} out of bounds (n={n})")
            if pos <= last:
                raise RecordValidationError("marker positions must be strictly increasing")
            if record.tokens[pos] != sep:
                raise RecordValidationError(
                    f"token at marker position {pos} is {record.tokens[pos]!r}, not {sep!r}"
                )
            last = pos
    if len(record.tsp_labels) != record.prefix_length:
        raise RecordValidationError("one turn-switch label per serialized turn required")


def build_record(
    conv: Conversation,
    t: int,
    schema: Schema,
    config: RecordConfig | None = None,
) -> TrainingRecord:
    """Serialize the prefix ending at 1-based turn ``t`` with its labels."""
    config = config or RecordConfig()
    if not (1 <= t <= len(conv.turns)):
        raise RecordValidationError(f"{conv.id}: turn {t} out of range 1..{len(conv.turns)}")
    tokens: list[str] = []
    turn_positions: list[int] = []
    for turn in conv.turns[:t]:
        if not turn.utterance.strip() or not turn.tokens:
            raise RecordValidationError(f"{conv.id}: empty utterance at turn {t}")
        turn_positions.append(len(tokens))
        tokens.append(config.turn_separator)
        tokens.extend(turn.tokens)
    column_positions: list[int] = []
    for col in schema.columns:
        column_positions.append(len(tokens))
        tokens.append(config.column_separator)
        tokens.extend(schema_item_tokens(schema, col.id))
    if config.max_length is not None and len(tokens) > config.max_length:
        raise RecordValidationError(
            f"{conv.id} t={t}: sequence length {len(tokens)} exceeds max {config.max_length}"
        )
    tsp_labels, csp_label = label_prefix(
        conv.queries(), t, schema, (config.tsp_taxonomy, config.csp_taxonomy)
    )
    record = TrainingRecord(
        conversation_id=conv.id,
        db_id=conv.db_id,
        prefix_length=t,
        tokens=tuple(tokens),
        turn_marker_positions=tuple(turn_positions),
        column_marker_positions=tuple(column_positions),
        tsp_labels=tuple(tsp_labels),
        csp_labels=csp_label,
        gold_sql_text=conv.turns[t - 1].gold_sql_text,
    )
    validate_record(record, config.turn_separator, config.column_separator)
    return record


def build_conversation_records(
    conv: Conversation, schema: Schema, config: RecordConfig | None = None
) -> list[TrainingRecord]:
    """One record per prefix: a conversation of T turns yields T records."""
    return [build_record(conv, t, schema, config) for t in range(1, len(conv.turns) + 1)]


# ---------------------------------------------------------------------------
# Line-delimited export format.


def _record_to_json(record: TrainingRecord) -> dict:
    return {
        "conversation_id": record.conversation_id,
        "db_id": record.db_id,
        "prefix_length": record.prefix_length,
        "tokens": list(record.tokens),
        "turn_marker_positions": list(record.turn_marker_positions),
        "column_marker_positions": list(record.column_marker_positions),
        "tsp_labels": [[int(b) for b in label.bits] for label in record.tsp_labels],
        "csp_labels": [[int(b) for b in row] for row in record.csp_labels.rows],
        "gold_sql_text": record.gold_sql_text,
    }


def _record_from_json(data: dict) -> TrainingRecord:
    return TrainingRecord(
        conversation_id=data["conversation_id"],
        db_id=data["db_id"],
        prefix_length=data["prefix_length"],
        tokens=tuple(data["tokens"]),
        turn_marker_positions=tuple(data["turn_marker_positions"]),
        column_marker_positions=tuple(data["column_marker_positions"]),
        tsp_labels=tuple(
            TurnSwitchLabel(tuple(bool(b) for b in bits)) for bits in data["tsp_labels"]
        ),
        csp_labels=ColumnChangeLabel(
            tuple(tuple(bool(b) for b in row) for row in data["csp_labels"])
        ),
        gold_sql_text=data["gold_sql_text"],
    )


def export_records(
    records: list[TrainingRecord],
    path: str,
    config: RecordConfig | None = None,
) -> int:
    """Write records one per line behind the header line; returns the count."""
    config = config or RecordConfig()
    header = {
        "format": FORMAT_NAME,
        "turn_separator": config.turn_separator,
        "column_separator": config.column_separator,
        "tsp_taxonomy": config.tsp_taxonomy.names(),
        "csp_taxonomy": config.csp_taxonomy.names(),
    }
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(json.dumps(header, ensure_ascii=False) + "\n")
        for record in records:
            handle.write(json.dumps(_record_to_json(record), ensure_ascii=False) + "\n")
    return len(records)


def import_records(path: str) -> tuple[dict, list[TrainingRecord]]:
    """Read a record file; returns (header, records)."""
    with open(path, encoding="utf-8") as handle:
        lines = [line for line in handle.read().splitlines() if line.strip()]
    if not lines:
        raise RecordValidationError(f"{path}: missing header line")
    header = json.loads(lines[0])
    if header.get("format") != FORMAT_NAME:
        raise RecordValidationError(f"{path}: unknown record format {header.get('format')!r}")
    return header, [_record_from_json(json.loads(line)) for line in lines[1:]]


def render_gold_sql(query: SqlQuery, schema: Schema) -> str:
    """Canonical gold SQL text stored on records."""
    return to_text(query, schema)
