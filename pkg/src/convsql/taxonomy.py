"""Edit-operation taxonomies for turn-level and per-column labels.

Both default taxonomies are reconstructions: the label spaces are fixed at
17 turn-switch operations and 11 per-column change types, but only a few
members are pinned by examples, so the remaining members were chosen to
cover every clause of the dialect.  Alternative taxonomies of the same
sizes can be loaded from a JSON config file without code changes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from .errors import TaxonomyError

TURN_SWITCH_SIZE = 17
COLUMN_CHANGE_SIZE = 11

KINDS = ("add", "remove", "change")


@dataclass(frozen=True)
class OpDescriptor:
    name: str
    clause: str
    kind: str


@dataclass(frozen=True)
class Taxonomy:
    """Ordered operation descriptors; index order defines label bit order."""

    ops: tuple[OpDescriptor, ...]

    def __len__(self) -> int:
        return len(self.ops)

    def names(self) -> list[str]:
        return [op.name for op in self.ops]

    def index_of(self, name: str) -> int:
        for i, op in enumerate(self.ops):
            if op.name == name:
                return i
        raise TaxonomyError(f"no operation named {name!r}")


_TSP_DEFAULT = [
    ("select_add_column", "select", "add"),
    ("select_remove_column", "select", "remove"),
    ("select_change_aggregate", "select", "change"),
    ("select_change_distinct", "select", "change"),
    ("where_add_condition", "where", "add"),
    ("where_remove_condition", "where", "remove"),
    ("where_change_comparison", "where", "change"),
    ("where_change_logic", "where", "change"),
    ("groupby_add", "group_by", "add"),
    ("groupby_remove", "group_by", "remove"),
    ("having_add", "having", "add"),
    ("having_remove_or_change", "having", "remove"),
    ("orderby_add", "order_by", "add"),
    ("orderby_remove", "order_by", "remove"),
    ("orderby_change_key_or_direction", "order_by", "change"),
    ("limit_change", "limit", "change"),
    ("from_or_setop_change", "from", "change"),
]

_CSP_DEFAULT = [
    ("added_to_select", "select", "add"),
    ("removed_from_select", "select", "remove"),
    ("aggregate_changed_in_select", "select", "change"),
    ("distinct_changed", "select", "change"),
    ("added_to_where", "where", "add"),
    ("removed_from_where", "where", "remove"),
    ("where_comparison_changed", "where", "change"),
    ("groupby_membership_changed", "group_by", "change"),
    ("having_membership_changed", "having", "change"),
    ("orderby_membership_changed", "order_by", "change"),
    ("join_or_from_membership_changed", "join", "change"),
]


def build_taxonomy(entries, expected_size: int) -> Taxonomy:
    ops = tuple(OpDescriptor(name, clause, kind) for name, clause, kind in entries)
    if len(ops) != expected_size:
        raise TaxonomyError(f"taxonomy must have exactly {expected_size} entries, got {len(ops)}")
    names = [op.name for op in ops]
    if len(set(names)) != len(names):
        raise TaxonomyError("taxonomy names must be unique")
    for op in ops:
        if op.kind not in KINDS:
            raise TaxonomyError(f"{op.name}: kind must be one of {KINDS}, got {op.kind!r}")
    return Taxonomy(ops)


def default_taxonomy() -> Taxonomy:
    """The 17 turn-switch operation descriptors, in label-bit order."""
    return build_taxonomy(_TSP_DEFAULT, TURN_SWITCH_SIZE)


def default_column_taxonomy() -> Taxonomy:
    """The 11 per-column usage-change descriptors, in label-bit order."""
    return build_taxonomy(_CSP_DEFAULT, COLUMN_CHANGE_SIZE)


def load_taxonomy(path: str, expected_size: int) -> Taxonomy:
    """Load (name, clause, kind) triples from a JSON file."""
    with open(path, encoding="utf-8") as handle:
        data = json.load(handle)
    try:
        entries = [(e["name"], e["clause"], e["kind"]) for e in data]
    except (TypeError, KeyError) as exc:
        raise TaxonomyError(f"{path}: entries need name/clause/kind fields: {exc}") from exc
    return build_taxonomy(entries, expected_size)
