"""Reader for the exported training-record files.

The wire format is one JSON header line (format tag, separator strings,
both taxonomy name lists) followed by one JSON record per line.  This
module is the trainer's only coupling to the labeling toolkit.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

FORMAT_NAME = "convsql-records/1"


class RecordFormatError(Exception):
    pass


@dataclass(frozen=True)
class RecordHeader:
    turn_separator: str
    column_separator: str
    tsp_taxonomy: tuple[str, ...]
    csp_taxonomy: tuple[str, ...]


@dataclass(frozen=True)
class Record:
    conversation_id: str
    db_id: str
    prefix_length: int
    tokens: tuple[str, ...]
    turn_marker_positions: tuple[int, ...]
    column_marker_positions: tuple[int, ...]
    tsp_labels: tuple[tuple[int, ...], ...]   # (T, 17) 0/1
    csp_labels: tuple[tuple[int, ...], ...]   # (M, 11) 0/1
    gold_sql_text: str

    @property
    def turn_count(self) -> int:
        return len(self.turn_marker_positions)

    @property
    def column_count(self) -> int:
        return len(self.column_marker_positions)


def read_records(path: str) -> tuple[RecordHeader, list[Record]]:
    with open(path, encoding="utf-8") as handle:
        lines = [line for line in handle.read().splitlines() if line.strip()]
    if not lines:
        raise RecordFormatError(f"{path}: empty record file")
    head = json.loads(lines[0])
    if head.get("format") != FORMAT_NAME:
        raise RecordFormatError(f"{path}: unsupported format {head.get('format')!r}")
    header = RecordHeader(
        turn_separator=head["turn_separator"],
        column_separator=head["column_separator"],
        tsp_taxonomy=tuple(head["tsp_taxonomy"]),
        csp_taxonomy=tuple(head["csp_taxonomy"]),
    )
    if len(header.tsp_taxonomy) != 17 or len(header.csp_taxonomy) != 11:
        raise RecordFormatError(
            f"{path}: expected 17/11 label types, got "
            f"{len(header.tsp_taxonomy)}/{len(header.csp_taxonomy)}"
        )
    records = []
    for i, line in enumerate(lines[1:], start=2):
        data = json.loads(line)
        record = Record(
            conversation_id=data["conversation_id"],
            db_id=data["db_id"],
            prefix_length=data["prefix_length"],
            tokens=tuple(data["tokens"]),
            turn_marker_positions=tuple(data["turn_marker_positions"]),
            column_marker_positions=tuple(data["column_marker_positions"]),
            tsp_labels=tuple(tuple(row) for row in data["tsp_labels"]),
            csp_labels=tuple(tuple(row) for row in data["csp_labels"]),
            gold_sql_text=data["gold_sql_text"],
        )
        _validate(record, header, f"{path}:{i}")
        records.append(record)
    return header, records


def _validate(record: Record, header: RecordHeader, where: str) -> None:
    n = len(record.tokens)
    for positions, sep in ((record.turn_marker_positions, header.turn_separator),
                           (record.column_marker_positions, header.column_separator)):
        for pos in positions:
            if not (0 <= pos < n) or record.tokens[pos] != sep:
                raise RecordFormatError(f"{where}: marker position {pos} broken")
    if len(record.tsp_labels) != record.turn_count:
        raise RecordFormatError(f"{where}: turn label count mismatch")
    if any(len(row) != 17 for row in record.tsp_labels):
        raise RecordFormatError(f"{where}: turn labels must have 17 bits")
    if len(record.csp_labels) != record.column_count:
        raise RecordFormatError(f"{where}: column label count mismatch")
    if any(len(row) != 11 for row in record.csp_labels):
        raise RecordFormatError(f"{where}: column labels must have 11 bits")


def sql_tokens(text: str) -> list[str]:
    """Gold SQL is exported space-separated; the token stream doubles as the
    decoder's rule sequence."""
    return text.split()
