"""Turn-switch labels: which edit operations a new turn applies to the
previous turn's SQL.

Diff semantics are set-based per clause on normalized queries.  Within a
clause, entries that share an underlying expression are paired off and
reported as a "change" of that entry; unpaired residues become "add" and
"remove" events.  Every fired operation carries witness strings naming the
fragments that triggered it.

The first turn of a conversation is diffed against the empty state; only
"add"-kind operations can fire there.
"""

from __future__ import annotations

from collections import Counter, defaultdict
from dataclasses import dataclass

from .sqlast import (
    BoolOp,
    ConditionNode,
    SqlQuery,
    normalize,
    query_key,
    require_same_db,
    structural_key,
)
from .taxonomy import Taxonomy, default_taxonomy
from .errors import TaxonomyError


@dataclass(frozen=True)
class TurnSwitchLabel:
    bits: tuple[bool, ...]

    def __post_init__(self):
        if len(self.bits) != 17:
            raise ValueError(f"turn-switch label needs 17 bits, got {len(self.bits)}")

    def any(self) -> bool:
        return any(self.bits)

    def names(self, taxonomy: Taxonomy) -> list[str]:
        return [op.name for op, bit in zip(taxonomy.ops, self.bits) if bit]


def _fmt(key) -> str:
    """Compact, schema-free rendering of a structural key for witnesses."""
    if not isinstance(key, tuple):
        return str(key)
    tag = key[0]
    if tag == "col":
        return f"col#{key[1]}"
    if tag == "lit":
        return repr(key[2]) if key[1] == "s" else str(key[2])
    if tag == "agg":
        inner = _fmt(key[3])
        return f"{key[1]}(DISTINCT {inner})" if key[2] else f"{key[1]}({inner})"
    if tag == "arith":
        return f"{_fmt(key[2])} {key[1]} {_fmt(key[3])}"
    if tag == "subquery":
        return "(subquery)"
    if tag == "none":
        return "None"
    return repr(key)


def _leaf_text(expr_key, op: str, operand_keys) -> str:
    rendered = " AND ".join(_fmt(k) for k in operand_keys)
    return f"{_fmt(expr_key)} {op} {rendered}"


# ---------------------------------------------------------------------------
# Clause extraction (on normalized queries).


def _select_entries(q: SqlQuery | None) -> Counter:
    if q is None:
        return Counter()
    return Counter(
        (item.aggregate, structural_key(item.expr), item.distinct_inner)
        for item in q.select_items
    )


def _cond_leaves(node: ConditionNode | None) -> Counter:
    out: Counter = Counter()
    if node is None:
        return out

    def walk(n: ConditionNode) -> None:
        if isinstance(n, BoolOp):
            for child in n.children:
                walk(child)
            return
        out[(structural_key(n.expr), n.op,
             tuple(structural_key(o) for o in n.operands))] += 1

    walk(node)
    return out


def _logic_key(node: ConditionNode | None):
    return ("none",) if node is None else structural_key(node)


def _order_entries(q: SqlQuery | None) -> Counter:
    if q is None:
        return Counter()
    return Counter((structural_key(o.expr), o.direction) for o in q.order_by)


def _from_key(q: SqlQuery | None):
    if q is None:
        return None
    frm = q.from_clause
    sub = None if frm.subquery is None else query_key(frm.subquery)
    return (tuple(frm.tables), tuple(sorted(structural_key(j) for j in frm.joins)), sub)


def _setop_key(q: SqlQuery | None):
    if q is None or q.set_op is None:
        return None
    return (q.set_op[0], query_key(q.set_op[1]))


# ---------------------------------------------------------------------------
# Pairing helpers.


def _split_residue(prev: Counter, curr: Counter) -> tuple[list, list]:
    removed = list((prev - curr).elements())
    added = list((curr - prev).elements())
    removed.sort()
    added.sort()
    return removed, added


def _pair_by(group_of, removed: list, added: list):
    """Pair residual entries that share a grouping key; yields
    (paired_pairs, leftover_removed, leftover_added)."""
    by_key_rm: dict = defaultdict(list)
    by_key_add: dict = defaultdict(list)
    for e in removed:
        by_key_rm[group_of(e)].append(e)
    for e in added:
        by_key_add[group_of(e)].append(e)
    pairs, left_rm, left_add = [], [], []
    for key in sorted(set(by_key_rm) | set(by_key_add)):
        rms, adds = by_key_rm.get(key, []), by_key_add.get(key, [])
        k = min(len(rms), len(adds))
        pairs.extend(zip(rms[:k], adds[:k]))
        left_rm.extend(rms[k:])
        left_add.extend(adds[k:])
    return pairs, left_rm, left_add


# ---------------------------------------------------------------------------
# The diff engine.


def _turn_events(prev: SqlQuery | None, curr: SqlQuery) -> dict[str, list[str]]:
    events: dict[str, list[str]] = defaultdict(list)

    # SELECT: entries are (aggregate, expr, distinct); same-expression
    # residues pair into aggregate/distinct changes.
    p_sel, c_sel = _select_entries(prev), _select_entries(curr)
    removed, added = _split_residue(p_sel, c_sel)
    pairs, left_rm, left_add = _pair_by(lambda e: e[1], removed, added)
    for old, new in pairs:
        if old[0] != new[0]:
            events["select_change_aggregate"].append(f"{_fmt(old[1])}: {old[0]} -> {new[0]}")
        if old[2] != new[2]:
            events["select_change_distinct"].append(f"{_fmt(old[1])}: distinct {old[2]} -> {new[2]}")
    for e in left_add:
        events["select_add_column"].append(f"+ {e[0]}({_fmt(e[1])})" if e[0] != "none" else f"+ {_fmt(e[1])}")
    for e in left_rm:
        events["select_remove_column"].append(f"- {e[0]}({_fmt(e[1])})" if e[0] != "none" else f"- {_fmt(e[1])}")
    prev_distinct = prev.select_distinct if prev is not None else False
    if prev_distinct != curr.select_distinct:
        events["select_change_distinct"].append(
            f"SELECT DISTINCT {prev_distinct} -> {curr.select_distinct}"
        )

    # WHERE: leaves pair by their left expression; operator or operand
    # changes (including inside subquery operands) are comparison changes.
    p_where = _cond_leaves(prev.where_clause if prev is not None else None)
    c_where = _cond_leaves(curr.where_clause)
    removed, added = _split_residue(p_where, c_where)
    pairs, left_rm, left_add = _pair_by(lambda e: e[0], removed, added)
    for old, new in pairs:
        events["where_change_comparison"].append(
            f"{_leaf_text(*old)} -> {_leaf_text(*new)}"
        )
    for e in left_add:
        events["where_add_condition"].append(f"+ {_leaf_text(*e)}")
    for e in left_rm:
        events["where_remove_condition"].append(f"- {_leaf_text(*e)}")
    if p_where == c_where and p_where:
        prev_logic = _logic_key(prev.where_clause if prev is not None else None)
        curr_logic = _logic_key(curr.where_clause)
        if prev_logic != curr_logic:
            events["where_change_logic"].append("AND/OR structure changed over equal leaves")

    # GROUP BY: plain column membership; replacement is add + remove.
    p_group = Counter(prev.group_by) if prev is not None else Counter()
    c_group = Counter(curr.group_by)
    for col in sorted((c_group - p_group).elements()):
        events["groupby_add"].append(f"+ col#{col}")
    for col in sorted((p_group - c_group).elements()):
        events["groupby_remove"].append(f"- col#{col}")

    # HAVING: adds are their own operation; removals, paired changes, and
    # logic restructures share the remove-or-change bit.
    p_hav = _cond_leaves(prev.having if prev is not None else None)
    c_hav = _cond_leaves(curr.having)
    removed, added = _split_residue(p_hav, c_hav)
    pairs, left_rm, left_add = _pair_by(lambda e: e[0], removed, added)
    for old, new in pairs:
        events["having_remove_or_change"].append(f"{_leaf_text(*old)} -> {_leaf_text(*new)}")
    for e in left_add:
        events["having_add"].append(f"+ {_leaf_text(*e)}")
    for e in left_rm:
        events["having_remove_or_change"].append(f"- {_leaf_text(*e)}")
    if p_hav == c_hav and p_hav:
        if _logic_key(prev.having if prev is not None else None) != _logic_key(curr.having):
            events["having_remove_or_change"].append("AND/OR structure changed over equal leaves")

    # ORDER BY: same-key residues with a new direction, and key-for-key
    # replacements, are both "change"; pure additions/removals keep add/remove.
    p_ord, c_ord = _order_entries(prev), _order_entries(curr)
    removed, added = _split_residue(p_ord, c_ord)
    pairs, left_rm, left_add = _pair_by(lambda e: e[0], removed, added)
    for old, new in pairs:
        events["orderby_change_key_or_direction"].append(
            f"{_fmt(old[0])} {old[1]} -> {new[1]}"
        )
    k = min(len(left_rm), len(left_add))
    for old, new in zip(left_rm[:k], left_add[:k]):
        events["orderby_change_key_or_direction"].append(
            f"{_fmt(old[0])} {old[1]} -> {_fmt(new[0])} {new[1]}"
        )
    for e in left_add[k:]:
        events["orderby_add"].append(f"+ {_fmt(e[0])} {e[1]}")
    for e in left_rm[k:]:
        events["orderby_remove"].append(f"- {_fmt(e[0])} {e[1]}")

    # LIMIT: one bit covers added/removed/modified.
    p_limit = prev.limit if prev is not None else None
    if p_limit != curr.limit:
        events["limit_change"].append(f"LIMIT {p_limit} -> {curr.limit}")

    # FROM and set operations: any change to the table set, join conditions,
    # subquery source, or INTERSECT/UNION/EXCEPT structure.
    if _from_key(prev) != _from_key(curr) and prev is not None:
        events["from_or_setop_change"].append("FROM clause changed")
    if _setop_key(prev) != _setop_key(curr) and prev is not None:
        events["from_or_setop_change"].append("set operation changed")
    if prev is None:
        if curr.from_clause.tables or curr.from_clause.subquery is not None:
            events["from_or_setop_change"].append("FROM clause added")
        if curr.set_op is not None:
            events["from_or_setop_change"].append("set operation added")

    return events


def _events_to_label(events: dict[str, list[str]], taxonomy: Taxonomy,
                     first_turn: bool) -> tuple[TurnSwitchLabel, dict[str, list[str]]]:
    known = set(events)
    for op in taxonomy.ops:
        known.discard(op.name)
    if known:
        raise TaxonomyError(f"taxonomy does not cover computed operations {sorted(known)}")
    bits = []
    witnesses: dict[str, list[str]] = {}
    for op in taxonomy.ops:
        fired = bool(events.get(op.name))
        if first_turn and op.kind != "add":
            fired = False
        bits.append(fired)
        if fired:
            witnesses[op.name] = events[op.name]
    return TurnSwitchLabel(tuple(bits)), witnesses


def diff_turn_explain(
    prev: SqlQuery | None,
    curr: SqlQuery,
    taxonomy: Taxonomy | None = None,
) -> tuple[TurnSwitchLabel, dict[str, list[str]]]:
    """Like diff_turn but also returns witness fragments per set bit."""
    taxonomy = taxonomy or default_taxonomy()
    require_same_db(prev, curr)
    prev_n = None if prev is None else normalize(prev)
    curr_n = normalize(curr)
    events = _turn_events(prev_n, curr_n)
    return _events_to_label(events, taxonomy, first_turn=prev is None)


def diff_turn(
    prev: SqlQuery | None,
    curr: SqlQuery,
    taxonomy: Taxonomy | None = None,
) -> TurnSwitchLabel:
    """17-bit edit-operation label for the prev -> curr transition.

    ``prev=None`` denotes the before-first-turn state; only "add" operations
    can fire there.  Several bits may be true at once.
    """
    label, _ = diff_turn_explain(prev, curr, taxonomy)
    return label


def label_conversation(
    queries: list[SqlQuery],
    taxonomy: Taxonomy | None = None,
) -> list[TurnSwitchLabel]:
    """One label per turn; turn 1 is diffed against the empty state."""
    if not queries:
        raise ValueError("conversation must have at least one turn")
    for a, b in zip(queries, queries[1:]):
        require_same_db(a, b)
    labels = []
    prev: SqlQuery | None = None
    for query in queries:
        labels.append(diff_turn(prev, query, taxonomy))
        prev = query
    return labels
