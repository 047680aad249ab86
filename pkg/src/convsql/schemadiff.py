"""Per-column usage-change labels: how the final turn edits each schema
column's usage, one 11-bit row per schema item.

A column's usage multiset comes from collect_column_usages with subquery
depth collapsed (occurrences at any depth count the same).  Only the last
transition (t-1 -> t) is labeled; a column whose usage multiset is
unchanged keeps an all-false row.  The wildcard ``*`` is row 0 and
participates like any other column.
"""

from __future__ import annotations

from collections import Counter, defaultdict
from dataclasses import dataclass

from .errors import SchemaMismatchError, TaxonomyError
from .schema import Schema
from .sqlast import SqlQuery, collect_column_usages, normalize, require_same_db
from .taxonomy import Taxonomy, default_column_taxonomy, default_taxonomy
from .turndiff import TurnSwitchLabel, diff_turn


@dataclass(frozen=True)
class ColumnChangeLabel:
    """M rows of 11 booleans, indexed by schema column id."""

    rows: tuple[tuple[bool, ...], ...]

    def __post_init__(self):
        for row in self.rows:
            if len(row) != 11:
                raise ValueError(f"column-change rows need 11 bits, got {len(row)}")

    @property
    def column_count(self) -> int:
        return len(self.rows)

    def any(self) -> bool:
        return any(any(row) for row in self.rows)

    def columns_with(self, bit: int) -> list[int]:
        return [i for i, row in enumerate(self.rows) if row[bit]]


_CLAUSES = ("select", "where", "group_by", "having", "order_by", "join")


def _usage_decorations(q: SqlQuery | None) -> dict[int, dict[str, Counter]]:
    """column id -> clause -> multiset of (aggregate, distinct, comparison)."""
    out: dict[int, dict[str, Counter]] = defaultdict(lambda: defaultdict(Counter))
    if q is None:
        return out
    for usage, count in collect_column_usages(q).items():
        key = (usage.aggregate, usage.distinct_marked, usage.comparison)
        out[usage.column][usage.clause][key] += count
    return out


def _pair_residues(prev: Counter, curr: Counter) -> tuple[list, list, list]:
    removed = sorted((prev - curr).elements(), key=repr)
    added = sorted((curr - prev).elements(), key=repr)
    k = min(len(removed), len(added))
    pairs = list(zip(removed[:k], added[:k]))
    return pairs, removed[k:], added[k:]


def _column_events(prev_dec: dict[str, Counter], curr_dec: dict[str, Counter]) -> dict[str, list[str]]:
    events: dict[str, list[str]] = defaultdict(list)

    pairs, removed, added = _pair_residues(prev_dec.get("select", Counter()),
                                           curr_dec.get("select", Counter()))
    for (old_agg, old_dist, _), (new_agg, new_dist, _) in pairs:
        if old_agg != new_agg:
            events["aggregate_changed_in_select"].append(f"{old_agg} -> {new_agg}")
        if old_dist != new_dist:
            events["distinct_changed"].append(f"distinct {old_dist} -> {new_dist}")
    for agg, dist, _ in added:
        events["added_to_select"].append(f"+ select ({agg}{', distinct' if dist else ''})")
    for agg, dist, _ in removed:
        events["removed_from_select"].append(f"- select ({agg}{', distinct' if dist else ''})")

    pairs, removed, added = _pair_residues(prev_dec.get("where", Counter()),
                                           curr_dec.get("where", Counter()))
    for (_, _, old_cmp), (_, _, new_cmp) in pairs:
        events["where_comparison_changed"].append(f"{old_cmp} -> {new_cmp}")
    for _, _, cmp_op in added:
        events["added_to_where"].append(f"+ where ({cmp_op})")
    for _, _, cmp_op in removed:
        events["removed_from_where"].append(f"- where ({cmp_op})")

    membership = (
        ("group_by", "groupby_membership_changed"),
        ("having", "having_membership_changed"),
        ("order_by", "orderby_membership_changed"),
        ("join", "join_or_from_membership_changed"),
    )
    for clause, name in membership:
        before = prev_dec.get(clause, Counter())
        after = curr_dec.get(clause, Counter())
        if before != after:
            events[name].append(f"{clause} usages {sorted(before.elements(), key=repr)} "
                                f"-> {sorted(after.elements(), key=repr)}")
    return events


def diff_schema_usage_explain(
    prev: SqlQuery | None,
    curr: SqlQuery,
    schema: Schema,
    taxonomy: Taxonomy | None = None,
) -> tuple[ColumnChangeLabel, dict[int, dict[str, list[str]]]]:
    """Like diff_schema_usage but also returns per-column witnesses."""
    taxonomy = taxonomy or default_column_taxonomy()
    require_same_db(prev, curr)
    if curr.db_id and schema.db_id and curr.db_id != schema.db_id:
        raise SchemaMismatchError(f"query bound to {curr.db_id!r}, schema is {schema.db_id!r}")
    prev_n = None if prev is None else normalize(prev)
    curr_n = normalize(curr)
    prev_usages = _usage_decorations(prev_n)
    curr_usages = _usage_decorations(curr_n)

    names = taxonomy.names()
    rows: list[tuple[bool, ...]] = []
    witnesses: dict[int, dict[str, list[str]]] = {}
    for column in range(schema.item_count):
        events = _column_events(prev_usages.get(column, {}), curr_usages.get(column, {}))
        unknown = set(events) - set(names)
        if unknown:
            raise TaxonomyError(f"taxonomy does not cover computed changes {sorted(unknown)}")
        rows.append(tuple(bool(events.get(name)) for name in names))
        if events:
            witnesses[column] = dict(events)
    touched = set(prev_usages) | set(curr_usages)
    bad = [c for c in touched if c >= schema.item_count]
    if bad:
        raise SchemaMismatchError(f"query references column ids {bad} outside schema "
                                  f"{schema.db_id!r} (M={schema.item_count})")
    return ColumnChangeLabel(tuple(rows)), witnesses


def diff_schema_usage(
    prev: SqlQuery | None,
    curr: SqlQuery,
    schema: Schema,
    taxonomy: Taxonomy | None = None,
) -> ColumnChangeLabel:
    """Per-column 11-bit usage-change matrix for the prev -> curr transition."""
    label, _ = diff_schema_usage_explain(prev, curr, schema, taxonomy)
    return label


def label_prefix(
    conversation: list[SqlQuery],
    t: int,
    schema: Schema,
    taxonomies: tuple[Taxonomy, Taxonomy] | None = None,
) -> tuple[list[TurnSwitchLabel], ColumnChangeLabel]:
    """Labels for the prefix ending at 1-based turn ``t``: turn-switch labels
    for every adjacent pair within the prefix, and one column-change matrix
    for the final transition only."""
    if not (1 <= t <= len(conversation)):
        raise IndexError(f"turn index {t} out of range 1..{len(conversation)}")
    tsp_tax = taxonomies[0] if taxonomies else default_taxonomy()
    csp_tax = taxonomies[1] if taxonomies else default_column_taxonomy()
    tsp_labels = []
    prev: SqlQuery | None = None
    for query in conversation[:t]:
        tsp_labels.append(diff_turn(prev, query, tsp_tax))
        prev = query
    before_last = conversation[t - 2] if t >= 2 else None
    csp_label = diff_schema_usage(before_last, conversation[t - 1], schema, csp_tax)
    return tsp_labels, csp_label
