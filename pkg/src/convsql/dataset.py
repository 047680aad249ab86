"""Ingestion of conversational interaction files.

Each entry provides ``database_id`` and an ``interaction`` list of turns
with ``utterance`` and ``query`` (gold SQL text); a pre-parsed ``sql``
field, when present, is advisory and only consumed by the parse
cross-check.  A ``final`` object is ignored.  Extra fields are tolerated.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from .errors import ConvSqlError, DatasetFormatError
from .parser import parse_sql
from .records import Conversation, Turn, render_gold_sql, tokenize_utterance
from .schema import Schema


@dataclass(frozen=True)
class RawTurn:
    utterance: str
    query: str
    sql_struct: dict | None = None


@dataclass(frozen=True)
class RawInteraction:
    id: str
    db_id: str
    turns: tuple[RawTurn, ...]


@dataclass
class SkipReport:
    interaction_id: str
    turn: int
    reason: str


def load_interactions(path: str) -> list[RawInteraction]:
    with open(path, encoding="utf-8") as handle:
        try:
            data = json.load(handle)
        except json.JSONDecodeError as exc:
            raise DatasetFormatError(f"{path}: not valid JSON: {exc}") from exc
    if not isinstance(data, list):
        raise DatasetFormatError(f"{path}: expected a list of interactions")
    out: list[RawInteraction] = []
    for idx, entry in enumerate(data):
        try:
            db_id = entry["database_id"]
            raw_turns = entry["interaction"]
        except (KeyError, TypeError) as exc:
            raise DatasetFormatError(f"{path}[{idx}]: missing field: {exc}") from exc
        turns = []
        for turn_idx, turn in enumerate(raw_turns):
            try:
                utterance = turn["utterance"]
                query = turn["query"]
            except (KeyError, TypeError) as exc:
                raise DatasetFormatError(
                    f"{path}[{idx}] turn {turn_idx + 1}: missing field: {exc}"
                ) from exc
            sql_struct = turn.get("sql") if isinstance(turn.get("sql"), dict) else None
            turns.append(RawTurn(str(utterance), str(query), sql_struct))
        out.append(RawInteraction(id=str(idx), db_id=str(db_id), turns=tuple(turns)))
    return out


def bind_conversation(
    raw: RawInteraction, schema: Schema
) -> tuple[Conversation | None, list[SkipReport]]:
    """Parse the gold SQL of each turn; a failure truncates the conversation
    there (later prefixes would need the failed turn's labels)."""
    turns: list[Turn] = []
    skips: list[SkipReport] = []
    for i, raw_turn in enumerate(raw.turns):
        try:
            query = parse_sql(raw_turn.query, schema)
        except ConvSqlError as exc:
            for remaining in range(i, len(raw.turns)):
                skips.append(SkipReport(raw.id, remaining + 1,
                                        f"turn {i + 1} unparseable: {exc}"))
            break
        turns.append(
            Turn(
                utterance=raw_turn.utterance,
                tokens=tuple(tokenize_utterance(raw_turn.utterance)),
                gold_sql_text=render_gold_sql(query, schema),
                gold_sql=query,
            )
        )
    if not turns:
        return None, skips
    return Conversation(id=raw.id, db_id=raw.db_id, turns=tuple(turns)), skips
