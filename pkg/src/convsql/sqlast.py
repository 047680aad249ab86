"""Canonical AST for the single-block SQL dialect of the gold corpus.

Nodes are frozen (hashable) dataclasses, so clause contents can live in
multisets and queries can be compared structurally.  ``normalize`` produces
the canonical form used by every downstream consumer: AND/OR children
sorted by a total order, nested same-operator boolean nodes flattened,
FROM tables and join conditions sorted.  Literal values stay verbatim.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Union

from .errors import SchemaMismatchError, UnrenderableQueryError
from .schema import Schema

AGG_OPS = ("none", "max", "min", "count", "sum", "avg")
ARITH_OPS = ("+", "-", "*", "/")
COMPARISON_OPS = ("=", "!=", "<", ">", "<=", ">=", "between", "like", "not like", "in", "not in")
SET_OPS = ("intersect", "union", "except")
DIRECTIONS = ("asc", "desc")


@dataclass(frozen=True)
class ColumnRef:
    column: int


@dataclass(frozen=True)
class Arith:
    op: str
    left: "ValueExpr"
    right: "ValueExpr"


@dataclass(frozen=True)
class AggExpr:
    """Aggregate applied inside an expression (HAVING count(*), ORDER BY avg(x))."""

    func: str
    operand: "ValueExpr"
    distinct: bool = False


@dataclass(frozen=True)
class Subquery:
    query: "SqlQuery"


ValueExpr = Union[ColumnRef, Arith, AggExpr, Subquery]


@dataclass(frozen=True)
class Literal:
    """A condition operand as written: quotes stripped for strings."""

    text: str
    is_string: bool


Operand = Union[Literal, ColumnRef, Arith, AggExpr, Subquery]


@dataclass(frozen=True)
class Comparison:
    """Condition leaf; ``between`` carries exactly two operands, all else one."""

    expr: ValueExpr
    op: str
    operands: tuple[Operand, ...]


@dataclass(frozen=True)
class BoolOp:
    op: str  # "and" | "or"
    children: tuple["ConditionNode", ...]


ConditionNode = Union[Comparison, BoolOp]


@dataclass(frozen=True)
class SelectItem:
    aggregate: str
    expr: ValueExpr
    distinct_inner: bool = False


@dataclass(frozen=True)
class JoinCond:
    left: ValueExpr
    op: str
    right: ValueExpr


@dataclass(frozen=True)
class FromClause:
    """Either plain tables joined inner-style, or a single subquery source."""

    tables: tuple[int, ...]
    joins: tuple[JoinCond, ...] = ()
    subquery: "SqlQuery | None" = None


@dataclass(frozen=True)
class OrderItem:
    expr: ValueExpr
    direction: str = "asc"


@dataclass(frozen=True)
class SqlQuery:
    select_distinct: bool
    select_items: tuple[SelectItem, ...]
    from_clause: FromClause
    where_clause: ConditionNode | None = None
    group_by: tuple[int, ...] = ()
    having: ConditionNode | None = None
    order_by: tuple[OrderItem, ...] = ()
    limit: int | None = None
    set_op: tuple[str, "SqlQuery"] | None = None
    db_id: str = field(default="", compare=False)


@dataclass(frozen=True)
class ColumnUsage:
    """One occurrence of a column in a query, with its clausal context."""

    column: int
    clause: str  # select | where | group_by | having | order_by | join
    aggregate: str = "none"
    distinct_marked: bool = False
    comparison: str | None = None
    depth: int = 0


def require_same_db(a: SqlQuery | None, b: SqlQuery | None) -> None:
    """Raise SchemaMismatchError when two bound queries disagree on db."""
    if a is None or b is None:
        return
    if a.db_id and b.db_id and a.db_id != b.db_id:
        raise SchemaMismatchError(f"queries bound to different schemas: {a.db_id!r} vs {b.db_id!r}")


# ---------------------------------------------------------------------------
# Structural keys: a deterministic total order over AST fragments.


def structural_key(node) -> tuple:
    if node is None:
        return ("none",)
    if isinstance(node, ColumnRef):
        return ("col", node.column)
    if isinstance(node, Literal):
        return ("lit", "s" if node.is_string else "n", node.text)
    if isinstance(node, AggExpr):
        return ("agg", node.func, int(node.distinct), structural_key(node.operand))
    if isinstance(node, Arith):
        return ("arith", node.op, structural_key(node.left), structural_key(node.right))
    if isinstance(node, Subquery):
        return ("subquery", query_key(node.query))
    if isinstance(node, Comparison):
        return ("cmp", node.op, structural_key(node.expr),
                tuple(structural_key(o) for o in node.operands))
    if isinstance(node, BoolOp):
        return ("bool", node.op, tuple(structural_key(c) for c in node.children))
    if isinstance(node, SelectItem):
        return ("item", node.aggregate, int(node.distinct_inner), structural_key(node.expr))
    if isinstance(node, JoinCond):
        return ("join", node.op, structural_key(node.left), structural_key(node.right))
    if isinstance(node, OrderItem):
        return ("order", node.direction, structural_key(node.expr))
    raise TypeError(f"no structural key for {type(node).__name__}")


def query_key(q: SqlQuery) -> tuple:
    set_part = ("none",) if q.set_op is None else (q.set_op[0], query_key(q.set_op[1]))
    return (
        "query",
        int(q.select_distinct),
        tuple(structural_key(i) for i in q.select_items),
        q.from_clause.tables,
        tuple(structural_key(j) for j in q.from_clause.joins),
        ("none",) if q.from_clause.subquery is None else query_key(q.from_clause.subquery),
        ("none",) if q.where_clause is None else structural_key(q.where_clause),
        q.group_by,
        ("none",) if q.having is None else structural_key(q.having),
        tuple(structural_key(o) for o in q.order_by),
        -1 if q.limit is None else q.limit,
        set_part,
    )


# ---------------------------------------------------------------------------
# Normalization.


def _normalize_expr(expr: ValueExpr) -> ValueExpr:
    if isinstance(expr, Arith):
        return Arith(expr.op, _normalize_expr(expr.left), _normalize_expr(expr.right))
    if isinstance(expr, AggExpr):
        return AggExpr(expr.func, _normalize_expr(expr.operand), expr.distinct)
    if isinstance(expr, Subquery):
        return Subquery(normalize(expr.query))
    return expr


def _normalize_operand(op: Operand) -> Operand:
    if isinstance(op, Literal):
        return op
    return _normalize_expr(op)


def _normalize_cond(node: ConditionNode) -> ConditionNode:
    if isinstance(node, Comparison):
        return Comparison(
            _normalize_expr(node.expr),
            node.op,
            tuple(_normalize_operand(o) for o in node.operands),
        )
    children: list[ConditionNode] = []
    for child in node.children:
        norm = _normalize_cond(child)
        if isinstance(norm, BoolOp) and norm.op == node.op:
            children.extend(norm.children)
        else:
            children.append(norm)
    children.sort(key=structural_key)
    if len(children) == 1:
        return children[0]
    return BoolOp(node.op, tuple(children))


def _normalize_item(item: SelectItem) -> SelectItem:
    expr = _normalize_expr(item.expr)
    agg, distinct = item.aggregate, item.distinct_inner
    if agg == "none" and isinstance(expr, AggExpr):
        agg, distinct, expr = expr.func, distinct or expr.distinct, expr.operand
    return SelectItem(agg, expr, distinct)


def _normalize_join(j: JoinCond) -> JoinCond:
    left = _normalize_expr(j.left)
    right = _normalize_expr(j.right)
    if j.op == "=" and structural_key(right) < structural_key(left):
        left, right = right, left
    return JoinCond(left, j.op, right)


def normalize(q: SqlQuery) -> SqlQuery:
    """Canonical form: idempotent, order-insensitive where SQL is."""
    frm = FromClause(
        tables=tuple(sorted(q.from_clause.tables)),
        joins=tuple(sorted((_normalize_join(j) for j in q.from_clause.joins), key=structural_key)),
        subquery=None if q.from_clause.subquery is None else normalize(q.from_clause.subquery),
    )
    return SqlQuery(
        select_distinct=q.select_distinct,
        select_items=tuple(_normalize_item(i) for i in q.select_items),
        from_clause=frm,
        where_clause=None if q.where_clause is None else _normalize_cond(q.where_clause),
        group_by=q.group_by,
        having=None if q.having is None else _normalize_cond(q.having),
        order_by=tuple(OrderItem(_normalize_expr(o.expr), o.direction) for o in q.order_by),
        limit=q.limit,
        set_op=None if q.set_op is None else (q.set_op[0], normalize(q.set_op[1])),
        db_id=q.db_id,
    )


# ---------------------------------------------------------------------------
# Rendering.


def _render_column(column: int, schema: Schema) -> str:
    col = schema.columns[column]
    if col.table_index < 0:
        return col.original_name
    return f"{schema.tables[col.table_index]}.{col.original_name}"


def _render_expr(expr: ValueExpr, schema: Schema) -> str:
    if isinstance(expr, ColumnRef):
        return _render_column(expr.column, schema)
    if isinstance(expr, AggExpr):
        inner = _render_expr(expr.operand, schema)
        if expr.distinct:
            inner = f"DISTINCT {inner}"
        return f"{expr.func}( {inner} )"
    if isinstance(expr, Arith):
        return f"{_render_expr(expr.left, schema)} {expr.op} {_render_expr(expr.right, schema)}"
    if isinstance(expr, Subquery):
        return f"( {to_text(expr.query, schema)} )"
    raise TypeError(f"cannot render {type(expr).__name__}")


def _render_operand(op: Operand, schema: Schema) -> str:
    if isinstance(op, Literal):
        if op.is_string:
            return "'" + op.text.replace("'", "''") + "'"
        return op.text
    return _render_expr(op, schema)


def _render_cond(node: ConditionNode, schema: Schema) -> str:
    if isinstance(node, Comparison):
        expr = _render_expr(node.expr, schema)
        if node.op == "between":
            lo, hi = node.operands
            return f"{expr} BETWEEN {_render_operand(lo, schema)} AND {_render_operand(hi, schema)}"
        op = node.op.upper() if node.op in ("like", "not like", "in", "not in") else node.op
        return f"{expr} {op} {_render_operand(node.operands[0], schema)}"
    if node.op == "and" and any(isinstance(c, BoolOp) for c in node.children):
        # the dialect has no boolean parentheses; OR under AND cannot render
        raise UnrenderableQueryError("OR nested under AND has no parenthesis-free rendering")
    joiner = f" {node.op.upper()} "
    return joiner.join(_render_cond(c, schema) for c in node.children)


def to_text(q: SqlQuery, schema: Schema) -> str:
    """Render to canonical SQL text; parse(to_text(q)) == normalize(q)."""
    parts = ["SELECT"]
    if q.select_distinct:
        parts.append("DISTINCT")
    rendered_items = []
    for item in q.select_items:
        if item.aggregate != "none":
            inner = _render_expr(item.expr, schema)
            if item.distinct_inner:
                inner = f"DISTINCT {inner}"
            rendered_items.append(f"{item.aggregate}( {inner} )")
        else:
            rendered_items.append(_render_expr(item.expr, schema))
    parts.append(" , ".join(rendered_items))
    parts.append("FROM")
    frm = q.from_clause
    if frm.subquery is not None:
        parts.append(f"( {to_text(frm.subquery, schema)} )")
    else:
        tables = [schema.tables[t] for t in frm.tables]
        if len(tables) == 1:
            parts.append(tables[0])
        else:
            joined = tables[0]
            for t in tables[1:]:
                joined += f" JOIN {t}"
            if frm.joins:
                on = " AND ".join(_render_cond(Comparison(j.left, j.op, (j.right,)), schema)
                                  for j in frm.joins)
                joined += f" ON {on}"
            parts.append(joined)
    if q.where_clause is not None:
        parts.append("WHERE " + _render_cond(q.where_clause, schema))
    if q.group_by:
        parts.append("GROUP BY " + " , ".join(_render_column(c, schema) for c in q.group_by))
    if q.having is not None:
        parts.append("HAVING " + _render_cond(q.having, schema))
    if q.order_by:
        keys = " , ".join(_render_expr(o.expr, schema) for o in q.order_by)
        directions = {o.direction for o in q.order_by}
        suffix = q.order_by[-1].direction.upper() if len(directions) == 1 else None
        if suffix is None:
            keys = " , ".join(
                f"{_render_expr(o.expr, schema)} {o.direction.upper()}" for o in q.order_by
            )
            parts.append("ORDER BY " + keys)
        else:
            parts.append(f"ORDER BY {keys} {suffix}")
    if q.limit is not None:
        parts.append(f"LIMIT {q.limit}")
    text = " ".join(parts)
    if q.set_op is not None:
        kind, right = q.set_op
        text += f" {kind.upper()} {to_text(right, schema)}"
    return text


# ---------------------------------------------------------------------------
# Column usage extraction.


def _expr_usages(expr: ValueExpr, clause: str, agg: str, distinct: bool,
                 comparison: str | None, depth: int, out: list[ColumnUsage]) -> None:
    if isinstance(expr, ColumnRef):
        out.append(ColumnUsage(expr.column, clause, agg, distinct, comparison, depth))
    elif isinstance(expr, AggExpr):
        _expr_usages(expr.operand, clause, expr.func, distinct or expr.distinct,
                     comparison, depth, out)
    elif isinstance(expr, Arith):
        _expr_usages(expr.left, clause, agg, distinct, comparison, depth, out)
        _expr_usages(expr.right, clause, agg, distinct, comparison, depth, out)
    elif isinstance(expr, Subquery):
        _query_usages(expr.query, depth + 1, out)


def _cond_usages(node: ConditionNode, clause: str, depth: int, out: list[ColumnUsage]) -> None:
    if isinstance(node, BoolOp):
        for child in node.children:
            _cond_usages(child, clause, depth, out)
        return
    _expr_usages(node.expr, clause, "none", False, node.op, depth, out)
    for operand in node.operands:
        if isinstance(operand, Literal):
            continue
        _expr_usages(operand, clause, "none", False, node.op, depth, out)


def _query_usages(q: SqlQuery, depth: int, out: list[ColumnUsage]) -> None:
    for item in q.select_items:
        agg = item.aggregate
        distinct = item.distinct_inner or q.select_distinct
        _expr_usages(item.expr, "select", agg, distinct, None, depth, out)
    for join in q.from_clause.joins:
        _expr_usages(join.left, "join", "none", False, join.op, depth, out)
        _expr_usages(join.right, "join", "none", False, join.op, depth, out)
    if q.from_clause.subquery is not None:
        _query_usages(q.from_clause.subquery, depth + 1, out)
    if q.where_clause is not None:
        _cond_usages(q.where_clause, "where", depth, out)
    for col in q.group_by:
        out.append(ColumnUsage(col, "group_by", "none", False, None, depth))
    if q.having is not None:
        _cond_usages(q.having, "having", depth, out)
    for item in q.order_by:
        _expr_usages(item.expr, "order_by", "none", False, None, depth, out)
    if q.set_op is not None:
        _query_usages(q.set_op[1], depth + 1, out)


def collect_column_usages(q: SqlQuery) -> Counter[ColumnUsage]:
    """Multiset of every column occurrence, recursing into subqueries and
    set-operation operands with incremented depth."""
    out: list[ColumnUsage] = []
    _query_usages(q, 0, out)
    return Counter(out)
