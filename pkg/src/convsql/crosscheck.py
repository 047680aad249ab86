"""Cross-validation of this parser against a dataset's pre-parsed SQL.

Dataset files carry a structured ``sql`` field in the classic nested
list/dict encoding (select/from/where/groupBy/orderBy/having/limit plus
intersect/union/except, with column ids as integers).  Both that encoding
and this package's AST are projected onto a common value-inclusive
signature; disagreement means one of the two parses differs structurally.
"""

from __future__ import annotations

from collections import Counter

from .sqlast import (
    AggExpr,
    Arith,
    BoolOp,
    ColumnRef,
    Literal,
    SqlQuery,
    Subquery,
)

_CLASSIC_AGG = ("none", "max", "min", "count", "sum", "avg")
_CLASSIC_UNIT = ("none", "-", "+", "*", "/")
_CLASSIC_WHERE = ("not", "between", "=", ">", "<", ">=", "<=", "!=", "in", "like", "is", "exists")


class AnomalousStructure(Exception):
    """The dataset-side structured SQL is corrupt or unrecognizable."""


# ---------------------------------------------------------------------------
# Classic-side signature.


def _classic_col_unit(cu) -> tuple:
    agg_id, col_id, distinct = cu
    if not isinstance(col_id, int):
        raise AnomalousStructure(f"column id {col_id!r} is not an int")
    core = ("col", col_id)
    if _CLASSIC_AGG[agg_id] != "none":
        return ("agg", _CLASSIC_AGG[agg_id], core, bool(distinct))
    return core


def _classic_col_unit_distinct(cu) -> bool:
    return bool(cu[2])


def _classic_val_unit(vu) -> tuple:
    unit_op, cu1, cu2 = vu
    op = _CLASSIC_UNIT[unit_op]
    if op == "none":
        return _classic_col_unit(cu1)
    return ("arith", op, _classic_col_unit(cu1), _classic_col_unit(cu2))


def _classic_value(val) -> tuple:
    if val is None:
        raise AnomalousStructure("missing comparison value")
    if isinstance(val, dict):
        return ("subquery", classic_signature(val))
    if isinstance(val, bool):
        raise AnomalousStructure(f"boolean comparison value {val!r}")
    if isinstance(val, (int, float)):
        return ("num", float(val))
    if isinstance(val, str):
        text = val.strip()
        if len(text) >= 2 and text[0] in "'\"" and text[-1] == text[0]:
            text = text[1:-1]
        try:
            return ("num", float(text))
        except ValueError:
            return ("str", text.casefold())
    if isinstance(val, (list, tuple)):
        if len(val) == 3 and isinstance(val[0], int):
            return ("expr", _classic_col_unit(val))
        if len(val) == 3:
            return ("expr", _classic_val_unit(val))
    raise AnomalousStructure(f"unrecognized comparison value {val!r}")


def _classic_cond_leaves(condition) -> tuple[Counter, Counter]:
    leaves: Counter = Counter()
    connectives: Counter = Counter()
    if not condition:
        return leaves, connectives
    for i, unit in enumerate(condition):
        if i % 2 == 1:
            if unit not in ("and", "or"):
                raise AnomalousStructure(f"bad connective {unit!r}")
            connectives[unit] += 1
            continue
        try:
            not_op, op_id, val_unit, val1, val2 = unit
        except (TypeError, ValueError) as exc:
            raise AnomalousStructure(f"bad condition unit {unit!r}") from exc
        op = _CLASSIC_WHERE[op_id]
        if not_op:
            op = f"not {op}"
        operands = [_classic_value(val1)]
        if op == "between":
            operands.append(_classic_value(val2))
        leaves[(_classic_val_unit(val_unit), op, tuple(operands))] += 1
    return leaves, connectives


def classic_signature(sql: dict) -> tuple:
    """Comparable signature of the classic structured encoding."""
    if not isinstance(sql, dict):
        raise AnomalousStructure(f"structured sql is {type(sql).__name__}, not a dict")
    try:
        distinct, items = sql["select"]
        select = tuple(
            (
                _CLASSIC_AGG[agg_id],
                _classic_val_unit(vu),
                _classic_col_unit_distinct(vu[1]) if _CLASSIC_UNIT[vu[0]] == "none" else False,
            )
            for agg_id, vu in items
        )
        tables: Counter = Counter()
        subquery_sig = None
        for kind, unit in sql["from"]["table_units"]:
            if kind == "table_unit":
                if not isinstance(unit, int):
                    raise AnomalousStructure(f"table unit {unit!r} is not an int")
                tables[unit] += 1
            elif kind == "sql":
                subquery_sig = classic_signature(unit)
            else:
                raise AnomalousStructure(f"unknown table unit kind {kind!r}")
        join_leaves, _ = _classic_cond_leaves(sql["from"].get("conds") or [])
        where_leaves, where_conn = _classic_cond_leaves(sql.get("where") or [])
        having_leaves, having_conn = _classic_cond_leaves(sql.get("having") or [])
        group = tuple(_classic_col_unit(cu) for cu in sql.get("groupBy") or [])
        order_raw = sql.get("orderBy") or []
        if order_raw:
            direction, val_units = order_raw
            order = (direction, tuple(_classic_val_unit(vu) for vu in val_units))
        else:
            order = None
        limit = sql.get("limit")
        set_part = None
        for kind in ("intersect", "union", "except"):
            nested = sql.get(kind)
            if nested is not None:
                set_part = (kind, classic_signature(nested))
    except AnomalousStructure:
        raise
    except Exception as exc:
        raise AnomalousStructure(f"malformed structured sql: {exc}") from exc
    return (
        bool(distinct),
        select,
        tuple(sorted(tables.items())),
        tuple(sorted(join_leaves.items())),
        subquery_sig,
        tuple(sorted(where_leaves.items())),
        tuple(sorted(where_conn.items())),
        group,
        tuple(sorted(having_leaves.items())),
        tuple(sorted(having_conn.items())),
        order,
        limit,
        set_part,
    )


# ---------------------------------------------------------------------------
# AST-side signature (same shape).


def _ast_expr(expr) -> tuple:
    if isinstance(expr, ColumnRef):
        return ("col", expr.column)
    if isinstance(expr, AggExpr):
        return ("agg", expr.func, _ast_expr(expr.operand), expr.distinct)
    if isinstance(expr, Arith):
        return ("arith", expr.op, _ast_expr(expr.left), _ast_expr(expr.right))
    if isinstance(expr, Subquery):
        return ("subquery", ast_signature(expr.query))
    raise TypeError(f"unexpected expression {type(expr).__name__}")


def _ast_operand(operand) -> tuple:
    if isinstance(operand, Literal):
        # Quoted numerics ('2014') and bare numerics both project to num,
        # mirroring the classic side's encoding of values.
        try:
            return ("num", float(operand.text))
        except ValueError:
            return ("str", operand.text.casefold())
    if isinstance(operand, Subquery):
        return ("subquery", ast_signature(operand.query))
    return ("expr", _ast_expr(operand))


def _ast_cond_leaves(node) -> tuple[Counter, Counter]:
    leaves: Counter = Counter()
    connectives: Counter = Counter()

    def walk(n):
        if isinstance(n, BoolOp):
            connectives[n.op] += len(n.children) - 1
            for child in n.children:
                walk(child)
            return
        leaves[(_ast_expr(n.expr), n.op, tuple(_ast_operand(o) for o in n.operands))] += 1

    if node is not None:
        walk(node)
    return leaves, connectives


def ast_signature(q: SqlQuery) -> tuple:
    select = tuple(
        (item.aggregate, _ast_expr(item.expr), item.distinct_inner) for item in q.select_items
    )
    tables = Counter(q.from_clause.tables)
    join_leaves: Counter = Counter()
    for j in q.from_clause.joins:
        join_leaves[(_ast_expr(j.left), j.op, (("expr", _ast_expr(j.right)),))] += 1
    subquery_sig = (
        None if q.from_clause.subquery is None else ast_signature(q.from_clause.subquery)
    )
    where_leaves, where_conn = _ast_cond_leaves(q.where_clause)
    having_leaves, having_conn = _ast_cond_leaves(q.having)
    group = tuple(("col", c) for c in q.group_by)
    order = None
    if q.order_by:
        order = (q.order_by[0].direction, tuple(_ast_expr(o.expr) for o in q.order_by))
    set_part = None if q.set_op is None else (q.set_op[0], ast_signature(q.set_op[1]))
    return (
        q.select_distinct,
        select,
        tuple(sorted(tables.items())),
        tuple(sorted(join_leaves.items())),
        subquery_sig,
        tuple(sorted(where_leaves.items())),
        tuple(sorted(where_conn.items())),
        group,
        tuple(sorted(having_leaves.items())),
        tuple(sorted(having_conn.items())),
        order,
        q.limit,
        set_part,
    )


def parses_agree(structured_sql: dict, query: SqlQuery) -> bool:
    """True when the dataset's structured SQL matches this parse.

    Raises AnomalousStructure when the dataset side is corrupt.
    """
    return classic_signature(structured_sql) == ast_signature(query)
