"""Random query generation over the fixture schemas.

Two flavors: a restricted fragment (single table, plain columns, no
subqueries or arithmetic) for the turn-level / column-level consistency
property, and a richer generator with joins, subquery operands, and set
operations for identity/duality/normalization properties.
"""

from __future__ import annotations

import random

from convsql import (
    AggExpr,
    BoolOp,
    ColumnRef,
    Comparison,
    FromClause,
    JoinCond,
    Literal,
    OrderItem,
    SelectItem,
    SqlQuery,
    Subquery,
    normalize,
)

AGGS = ("none", "max", "min", "count", "sum", "avg")
NUM_OPS = ("=", "!=", "<", ">", "<=", ">=")


def _table_columns(schema, table_index):
    return [c.id for c in schema.columns if c.table_index == table_index]


def _numeric_columns(schema, table_index):
    return [c.id for c in schema.columns
            if c.table_index == table_index and c.value_type == "number"]


def random_fragment_query(rng: random.Random, schema, table_index: int = 0) -> SqlQuery:
    """Subquery-free, arithmetic-free query over one table."""
    columns = _table_columns(schema, table_index)
    numeric = _numeric_columns(schema, table_index) or columns

    items = []
    seen = set()
    for _ in range(rng.randint(1, 3)):
        agg = rng.choice(AGGS) if rng.random() < 0.4 else "none"
        col = rng.choice(columns + [0])
        if col == 0 and agg == "none":
            agg = "count"
        key = (agg, col)
        if key in seen:
            continue
        seen.add(key)
        items.append(SelectItem(agg, ColumnRef(col), False))
    if not items:
        items = [SelectItem("none", ColumnRef(rng.choice(columns)), False)]

    where = None
    n_leaves = rng.choice([0, 0, 1, 1, 2, 3])
    leaves = []
    leaf_seen = set()
    for _ in range(n_leaves):
        col = rng.choice(numeric)
        op = rng.choice(NUM_OPS)
        value = str(rng.randint(0, 5) * 10)
        if (col, op, value) in leaf_seen:
            continue
        leaf_seen.add((col, op, value))
        leaves.append(Comparison(ColumnRef(col), op, (Literal(value, False),)))
    if len(leaves) == 1:
        where = leaves[0]
    elif leaves:
        where = BoolOp(rng.choice(["and", "or"]), tuple(leaves))

    group = ()
    if rng.random() < 0.3:
        group = tuple(sorted(rng.sample(columns, rng.randint(1, min(2, len(columns))))))

    having = None
    if group and rng.random() < 0.5:
        col = rng.choice(numeric + [0])
        agg = "count" if col == 0 else rng.choice(["count", "sum", "avg", "max", "min"])
        having = Comparison(
            AggExpr(agg, ColumnRef(col)), rng.choice(NUM_OPS), (Literal(str(rng.randint(1, 5)), False),)
        )

    order = []
    if rng.random() < 0.4:
        direction = rng.choice(["asc", "desc"])
        for col in rng.sample(columns, rng.randint(1, min(2, len(columns)))):
            order.append(OrderItem(ColumnRef(col), direction))

    limit = rng.choice([None, None, None, 1, 3, 5])

    return normalize(SqlQuery(
        select_distinct=rng.random() < 0.15,
        select_items=tuple(items),
        from_clause=FromClause(tables=(table_index,)),
        where_clause=where,
        group_by=group,
        having=having,
        order_by=tuple(order),
        limit=limit,
        db_id=schema.db_id,
    ))


def random_query(rng: random.Random, schema) -> SqlQuery:
    """Richer generator: may join two tables, use a subquery operand, or
    attach a set operation."""
    table_index = rng.randrange(len(schema.tables))
    query = random_fragment_query(rng, schema, table_index)

    if rng.random() < 0.3 and len(schema.tables) >= 2:
        other = rng.choice([t for t in range(len(schema.tables)) if t != table_index])
        left = rng.choice(_table_columns(schema, table_index))
        right = rng.choice(_table_columns(schema, other))
        query = query.__class__(
            **{**query.__dict__,
               "from_clause": FromClause(
                   tables=tuple(sorted((table_index, other))),
                   joins=(JoinCond(ColumnRef(left), "=", ColumnRef(right)),),
               )}
        )

    if rng.random() < 0.25:
        inner = random_fragment_query(rng, schema, table_index)
        inner_col = rng.choice(_table_columns(schema, table_index))
        inner = inner.__class__(**{
            **inner.__dict__,
            "select_items": (SelectItem("none", ColumnRef(inner_col)),),
            "order_by": (),
            "limit": None,
        })
        outer_col = rng.choice(_table_columns(schema, table_index))
        leaf = Comparison(ColumnRef(outer_col), rng.choice(["in", "not in"]),
                          (Subquery(inner),))
        existing = query.where_clause
        if existing is None:
            where = leaf
        elif isinstance(existing, BoolOp):
            # keep the tree flat; OR under AND has no parenthesis-free rendering
            where = BoolOp(existing.op, existing.children + (leaf,))
        else:
            where = BoolOp("and", (existing, leaf))
        query = query.__class__(**{**query.__dict__, "where_clause": where})

    if rng.random() < 0.15:
        right = random_fragment_query(rng, schema, table_index)
        right = right.__class__(**{**right.__dict__, "order_by": (), "limit": None})
        kind = rng.choice(["intersect", "union", "except"])
        query = query.__class__(**{**query.__dict__, "set_op": (kind, right),
                                   "order_by": (), "limit": None})

    return normalize(query)


_MUTATIONS = (
    "add_where", "drop_where", "tweak_literal", "tweak_op", "add_select",
    "drop_select", "tweak_agg", "flip_distinct", "toggle_group", "toggle_order",
    "flip_direction", "toggle_limit",
)


def mutate_query(rng: random.Random, schema, q: SqlQuery) -> SqlQuery:
    """Apply one random clause edit; may return the query unchanged when the
    chosen edit does not apply."""
    table_index = q.from_clause.tables[0] if q.from_clause.tables else 0
    columns = _table_columns(schema, table_index)
    numeric = _numeric_columns(schema, table_index) or columns
    kind = rng.choice(_MUTATIONS)
    d = dict(q.__dict__)

    def leaves_of(node):
        if node is None:
            return []
        if isinstance(node, BoolOp):
            return list(node.children)
        return [node]

    def rebuild(leaves, op="and"):
        if not leaves:
            return None
        if len(leaves) == 1:
            return leaves[0]
        return BoolOp(op, tuple(leaves))

    if kind == "add_where":
        leaf = Comparison(ColumnRef(rng.choice(numeric)), rng.choice(NUM_OPS),
                          (Literal(str(rng.randint(0, 50)), False),))
        d["where_clause"] = rebuild(leaves_of(q.where_clause) + [leaf])
    elif kind == "drop_where":
        leaves = leaves_of(q.where_clause)
        if leaves:
            leaves.pop(rng.randrange(len(leaves)))
            d["where_clause"] = rebuild(leaves)
    elif kind == "tweak_literal":
        leaves = leaves_of(q.where_clause)
        picks = [i for i, leaf in enumerate(leaves)
                 if isinstance(leaf, Comparison) and isinstance(leaf.operands[0], Literal)]
        if picks:
            i = rng.choice(picks)
            old = leaves[i]
            leaves[i] = Comparison(old.expr, old.op, (Literal(str(rng.randint(51, 99)), False),))
            d["where_clause"] = rebuild(leaves)
    elif kind == "tweak_op":
        leaves = leaves_of(q.where_clause)
        picks = [i for i, leaf in enumerate(leaves)
                 if isinstance(leaf, Comparison) and leaf.op in NUM_OPS]
        if picks:
            i = rng.choice(picks)
            old = leaves[i]
            new_op = rng.choice([op for op in NUM_OPS if op != old.op])
            leaves[i] = Comparison(old.expr, new_op, old.operands)
            d["where_clause"] = rebuild(leaves)
    elif kind == "add_select":
        col = rng.choice(columns)
        item = SelectItem("none", ColumnRef(col))
        if item not in q.select_items:
            d["select_items"] = q.select_items + (item,)
    elif kind == "drop_select":
        if len(q.select_items) > 1:
            items = list(q.select_items)
            items.pop(rng.randrange(len(items)))
            d["select_items"] = tuple(items)
    elif kind == "tweak_agg":
        items = list(q.select_items)
        i = rng.randrange(len(items))
        new_agg = rng.choice([a for a in AGGS if a != items[i].aggregate])
        if not (new_agg == "none" and isinstance(items[i].expr, ColumnRef)
                and items[i].expr.column == 0):
            items[i] = SelectItem(new_agg, items[i].expr, items[i].distinct_inner)
            d["select_items"] = tuple(items)
    elif kind == "flip_distinct":
        d["select_distinct"] = not q.select_distinct
    elif kind == "toggle_group":
        if q.group_by:
            d["group_by"] = ()
            d["having"] = None
        else:
            d["group_by"] = (rng.choice(columns),)
    elif kind == "toggle_order":
        if q.order_by:
            d["order_by"] = ()
        else:
            d["order_by"] = (OrderItem(ColumnRef(rng.choice(columns)),
                                       rng.choice(["asc", "desc"])),)
    elif kind == "flip_direction":
        if q.order_by:
            flipped = "desc" if q.order_by[0].direction == "asc" else "asc"
            d["order_by"] = tuple(OrderItem(o.expr, flipped) for o in q.order_by)
    elif kind == "toggle_limit":
        d["limit"] = None if q.limit is not None else rng.choice([1, 3, 10])

    return normalize(SqlQuery(**d))
