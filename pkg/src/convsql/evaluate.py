"""Question-match / interaction-match scoring under exact set semantics.

The default ("official") policy mirrors the benchmark matcher: clause
components compared as sets, literal values and the LIMIT value ignored,
DISTINCT ignored, GROUP BY compared in order, ORDER BY in order with its
direction, set operations matched recursively, JOIN ON conditions not
compared, and (when a schema is supplied) foreign-key-linked columns
folded to one representative before comparison.  The value-sensitive
policy additionally compares condition literals and the LIMIT value.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

from .errors import AlignmentError
from .schema import Schema
from .sqlast import (
    AggExpr,
    Arith,
    BoolOp,
    ColumnRef,
    ConditionNode,
    Literal,
    SqlQuery,
    Subquery,
    normalize,
    require_same_db,
)

POLICIES = ("official", "value-sensitive")

TURN_BUCKET_CAP = 4


def _identity(col: int) -> int:
    return col


def _fk_clusters(schema: Schema) -> dict[int, int]:
    """column id -> smallest column id of its foreign-key cluster."""
    parent: dict[int, int] = {}

    def find(x: int) -> int:
        while parent.get(x, x) != x:
            parent[x] = parent.get(parent[x], parent[x])
            x = parent[x]
        return x

    for a, b in schema.foreign_keys:
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)
    return {col.id: find(col.id) for col in schema.columns if find(col.id) != col.id}


def _query_remap(schema: Schema | None, q: SqlQuery):
    """Fold FK-linked columns of the query's own FROM tables, as the
    benchmark matcher does before comparing components."""
    if schema is None:
        return _identity
    clusters = _fk_clusters(schema)
    if not clusters:
        return _identity
    tables = set(q.from_clause.tables)

    def remap(col: int) -> int:
        rep = clusters.get(col)
        if rep is not None and schema.columns[col].table_index in tables:
            return rep
        return col

    return remap


def _expr_key(expr, policy: str, remap, schema):
    if isinstance(expr, ColumnRef):
        return ("col", remap(expr.column))
    if isinstance(expr, AggExpr):
        return ("agg", expr.func, _expr_key(expr.operand, policy, remap, schema))
    if isinstance(expr, Arith):
        return ("arith", expr.op, _expr_key(expr.left, policy, remap, schema),
                _expr_key(expr.right, policy, remap, schema))
    if isinstance(expr, Subquery):
        return ("subquery", match_key(expr.query, policy, schema))
    raise TypeError(f"unexpected expression {type(expr).__name__}")


def _operand_key(operand, policy: str, schema):
    if isinstance(operand, Literal):
        if policy == "official":
            return ("value",)
        return ("lit", operand.is_string, operand.text)
    if isinstance(operand, Subquery):
        # The benchmark matcher never folds FK columns inside condition
        # subqueries; compare them without a schema.
        return ("subquery", match_key(operand.query, policy, None))
    return _expr_key(operand, policy, _identity, schema)


def _leaves(node: ConditionNode | None, policy: str, remap, schema) -> tuple:
    if node is None:
        return ()
    out: Counter = Counter()

    def walk(n: ConditionNode) -> None:
        if isinstance(n, BoolOp):
            for child in n.children:
                walk(child)
            return
        out[(_expr_key(n.expr, policy, remap, schema), n.op,
             tuple(_operand_key(o, policy, schema) for o in n.operands))] += 1

    walk(node)
    return tuple(sorted(out.items()))


def _connectives(node: ConditionNode | None) -> tuple:
    ops: set[str] = set()

    def walk(n: ConditionNode) -> None:
        if isinstance(n, BoolOp):
            ops.add(n.op)
            for child in n.children:
                walk(child)

    if node is not None:
        walk(node)
    return tuple(sorted(ops))


def match_key(q: SqlQuery, policy: str = "official", schema: Schema | None = None):
    """Canonical comparable for a normalized query under ``policy``."""
    remap = _query_remap(schema, q)
    select = tuple(sorted(
        (item.aggregate, _expr_key(item.expr, policy, remap, schema))
        for item in q.select_items
    ))
    frm = q.from_clause
    from_part = (
        tuple(sorted(frm.tables)),
        None if frm.subquery is None else match_key(frm.subquery, policy, schema),
    )
    order = tuple((_expr_key(o.expr, policy, remap, schema), o.direction) for o in q.order_by)
    if policy == "official":
        limit = q.limit is not None
    else:
        limit = q.limit
    set_part = None if q.set_op is None else (q.set_op[0], match_key(q.set_op[1], policy, schema))
    return (
        select,
        from_part,
        _leaves(q.where_clause, policy, remap, schema),
        _connectives(q.where_clause),
        tuple(remap(c) for c in q.group_by),
        _leaves(q.having, policy, remap, schema),
        _connectives(q.having),
        order,
        limit,
        set_part,
    )


def exact_set_match(
    pred: SqlQuery,
    gold: SqlQuery,
    policy: str = "official",
    schema: Schema | None = None,
) -> bool:
    """True iff every clause matches under set semantics and ``policy``."""
    if policy not in POLICIES:
        raise ValueError(f"unknown policy {policy!r}; choose from {POLICIES}")
    require_same_db(pred, gold)
    return match_key(normalize(pred), policy, schema) == match_key(normalize(gold), policy, schema)


# ---------------------------------------------------------------------------
# Interaction-level scoring.


@dataclass
class EvalReport:
    qm: float
    im: float
    per_turn_qm: dict[int, float]
    questions: int
    interactions: int
    per_turn_counts: dict[int, int]
    per_turn_matched: dict[int, int] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "qm": self.qm,
            "im": self.im,
            "per_turn_qm": {str(k): v for k, v in sorted(self.per_turn_qm.items())},
            "questions": self.questions,
            "interactions": self.interactions,
            "per_turn_counts": {str(k): v for k, v in sorted(self.per_turn_counts.items())},
        }

    def render_text(self) -> str:
        lines = [
            f"QM: {self.qm * 100:.1f}  ({sum(self.per_turn_matched.values())}/{self.questions})",
            f"IM: {self.im * 100:.1f}  (interactions: {self.interactions})",
        ]
        buckets = sorted(self.per_turn_counts)
        header = "            " + "  ".join(
            f"Turn {b}" + ("+" if b == TURN_BUCKET_CAP else " ") for b in buckets
        )
        row = "QM by turn: " + "  ".join(
            f"{self.per_turn_qm[b] * 100:5.1f} " for b in buckets
        )
        counts = "questions:  " + "  ".join(f"{self.per_turn_counts[b]:5d} " for b in buckets)
        lines.extend([header, row, counts])
        return "\n".join(lines)


def evaluate(
    pred_interactions: list[tuple[str, list[SqlQuery | None]]],
    gold_interactions: list[tuple[str, list[SqlQuery]]],
    policy: str = "official",
    schemas: dict[str, Schema] | None = None,
) -> EvalReport:
    """Score aligned prediction/gold interactions.

    Predictions of ``None`` (unparseable) count as mismatches.  Turn indexes
    of 4 and above share one report bucket.  When ``schemas`` is given, the
    foreign-key folding of the official matcher applies.
    """
    if len(pred_interactions) != len(gold_interactions):
        missing = [gid for gid, _ in gold_interactions[len(pred_interactions):]]
        extra = [pid for pid, _ in pred_interactions[len(gold_interactions):]]
        raise AlignmentError(
            f"{len(pred_interactions)} predicted interactions vs {len(gold_interactions)} gold",
            offending_ids=missing or extra,
        )
    bad_ids = []
    for (pred_id, preds), (gold_id, golds) in zip(pred_interactions, gold_interactions):
        if pred_id != gold_id or len(preds) != len(golds):
            bad_ids.append(gold_id)
    if bad_ids:
        raise AlignmentError("misaligned interactions", offending_ids=bad_ids)

    questions = 0
    matched = 0
    interactions_matched = 0
    per_turn_counts: dict[int, int] = {}
    per_turn_matched: dict[int, int] = {}
    for (_, preds), (_, golds) in zip(pred_interactions, gold_interactions):
        all_matched = True
        for turn_idx, (pred, gold) in enumerate(zip(preds, golds), start=1):
            bucket = min(turn_idx, TURN_BUCKET_CAP)
            per_turn_counts[bucket] = per_turn_counts.get(bucket, 0) + 1
            questions += 1
            schema = schemas.get(gold.db_id) if schemas else None
            ok = pred is not None and exact_set_match(pred, gold, policy, schema)
            if ok:
                matched += 1
                per_turn_matched[bucket] = per_turn_matched.get(bucket, 0) + 1
            else:
                all_matched = False
        if all_matched:
            interactions_matched += 1

    per_turn_qm = {
        bucket: per_turn_matched.get(bucket, 0) / count
        for bucket, count in per_turn_counts.items()
    }
    return EvalReport(
        qm=matched / questions if questions else 0.0,
        im=interactions_matched / len(gold_interactions) if gold_interactions else 0.0,
        per_turn_qm=per_turn_qm,
        questions=questions,
        interactions=len(gold_interactions),
        per_turn_counts=per_turn_counts,
        per_turn_matched=per_turn_matched,
    )
