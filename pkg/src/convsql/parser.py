"""Recursive-descent parser for the gold-query SQL dialect.

Supported grammar (everything else raises UnsupportedSqlError or
SqlSyntaxError rather than degrading silently):

    query     := core [ (INTERSECT|UNION|EXCEPT) query ]
    core      := SELECT [DISTINCT] item (',' item)*
                 FROM source
                 [WHERE cond] [GROUP BY colref (',' colref)*] [HAVING cond]
                 [ORDER BY expr (',' expr)* [ASC|DESC]] [LIMIT int]
    source    := table [AS alias] (JOIN table [AS alias] [ON eq ('AND' eq)*])*
               | '(' query ')'
    item      := expr                     -- top-level aggregate is lifted
    expr      := prim (('+'|'-'|'*'|'/') prim)*
    prim      := agg '(' [DISTINCT] expr ')' | colref | '(' query ')'
    cond      := disjunction of conjunctions of leaves (AND binds tighter)
    leaf      := expr cmp value | expr BETWEEN value AND value
               | expr [NOT] IN '(' query ')' | expr [NOT] LIKE value
    value     := string | [-]number | colref-expr | '(' query ')'

Not supported: IS [NOT] NULL, EXISTS, CASE, window functions, functions
other than the five aggregates, OUTER joins, IN over literal lists,
column aliases, OFFSET, multiple set operations chained at one level
(nesting on the right-hand side works).
"""

from __future__ import annotations

import re

from .errors import SqlSyntaxError, UnknownColumnError, UnknownTableError, UnsupportedSqlError
from .schema import Schema
from .sqlast import (
    AGG_OPS,
    AggExpr,
    Arith,
    BoolOp,
    ColumnRef,
    Comparison,
    ConditionNode,
    FromClause,
    JoinCond,
    Literal,
    OrderItem,
    SelectItem,
    SqlQuery,
    Subquery,
    ValueExpr,
    normalize,
)

_TOKEN_RE = re.compile(
    r"""
    '(?:[^']|'')*'            # single-quoted string
  | "(?:[^"])*"               # double-quoted string
  | \d+\.\d+ | \.\d+ | \d+    # numbers
  | [A-Za-z_][A-Za-z0-9_$]*(?:\.(?:[A-Za-z_][A-Za-z0-9_$]*|\*))?   # idents, t.col, t.*
  | <> | != | <= | >= | [=<>(),*+\-/;.]
    """,
    re.VERBOSE,
)

_KEYWORDS = {
    "select", "distinct", "from", "join", "on", "as", "where", "group", "by",
    "having", "order", "limit", "intersect", "union", "except", "and", "or",
    "not", "in", "like", "between", "asc", "desc",
}

_CMP_OPS = {"=", "!=", "<>", "<", ">", "<=", ">="}

_UNSUPPORTED_WORDS = {"is", "exists", "case", "over", "offset", "left", "right",
                      "outer", "inner", "full", "cross", "null"}


def tokenize(text: str) -> list[str]:
    """Lowercases keywords/identifiers, keeps quoted literals verbatim."""
    tokens: list[str] = []
    pos = 0
    text = text.strip().rstrip(";").strip()
    while pos < len(text):
        if text[pos].isspace():
            pos += 1
            continue
        match = _TOKEN_RE.match(text, pos)
        if not match:
            raise SqlSyntaxError(f"cannot tokenize {text[pos:pos + 12]!r}", position=len(tokens))
        tok = match.group(0)
        if tok[0] in "'\"":
            tokens.append(tok)
        else:
            tokens.append(tok.lower())
        pos = match.end()
    return tokens


def _scan_aliases(tokens: list[str]) -> dict[str, str]:
    aliases: dict[str, str] = {}
    for i, tok in enumerate(tokens):
        if tok == "as" and 0 < i < len(tokens) - 1:
            aliases[tokens[i + 1]] = tokens[i - 1]
    return aliases


class _Parser:
    def __init__(self, tokens: list[str], schema: Schema):
        self.toks = tokens
        self.schema = schema
        self.aliases = _scan_aliases(tokens)
        self.table_by_name = {name: idx for idx, name in enumerate(schema.normalized_tables)}

    # -- token helpers ------------------------------------------------------

    def peek(self, i: int) -> str | None:
        return self.toks[i] if i < len(self.toks) else None

    def expect(self, i: int, tok: str) -> int:
        if self.peek(i) != tok:
            raise SqlSyntaxError(f"expected {tok!r}, found {self.peek(i)!r}", position=i)
        return i + 1

    def _check_supported(self, i: int) -> None:
        tok = self.peek(i)
        if tok in _UNSUPPORTED_WORDS:
            raise UnsupportedSqlError(f"unsupported construct {tok!r}", position=i)

    # -- name resolution ----------------------------------------------------

    def _table_index(self, name: str, i: int) -> int:
        resolved = self.aliases.get(name, name)
        if resolved not in self.table_by_name:
            raise UnknownTableError(f"{self.schema.db_id}: unknown table {name!r} (token {i})")
        return self.table_by_name[resolved]

    def _column_id(self, tok: str, i: int, default_tables: list[int]) -> int:
        if tok == "*":
            return 0
        if "." in tok:
            table_part, col_part = tok.split(".", 1)
            if col_part == "*":
                return 0
            table_idx = self._table_index(table_part, i)
            for col in self.schema.columns:
                if col.table_index == table_idx and col.normalized_name == col_part:
                    return col.id
            raise UnknownColumnError(
                f"{self.schema.db_id}: no column {col_part!r} in table "
                f"{self.schema.tables[table_idx]!r}"
            )
        for table_idx in default_tables:
            for col in self.schema.columns:
                if col.table_index == table_idx and col.normalized_name == tok:
                    return col.id
        raise UnknownColumnError(
            f"{self.schema.db_id}: column {tok!r} not found in the FROM tables"
        )

    # -- expressions --------------------------------------------------------

    def _starts_primary(self, i: int) -> bool:
        tok = self.peek(i)
        if tok is None or tok in _KEYWORDS or tok in (")", ","):
            return False
        return tok == "(" or tok == "*" or bool(re.match(r"[A-Za-z_]", tok)) or tok in AGG_OPS

    def parse_primary(self, i: int, default_tables: list[int]) -> tuple[int, ValueExpr]:
        tok = self.peek(i)
        if tok is None:
            raise SqlSyntaxError("unexpected end of query", position=i)
        self._check_supported(i)
        if tok in AGG_OPS and tok != "none" and self.peek(i + 1) == "(":
            func = tok
            i += 2
            distinct = False
            if self.peek(i) == "distinct":
                distinct = True
                i += 1
            i, operand = self.parse_expr(i, default_tables)
            i = self.expect(i, ")")
            return i, AggExpr(func, operand, distinct)
        if tok == "(":
            if self.peek(i + 1) == "select":
                i, sub = self.parse_query(i + 1)
                i = self.expect(i, ")")
                return i, Subquery(sub)
            i, inner = self.parse_expr(i + 1, default_tables)
            i = self.expect(i, ")")
            return i, inner
        if tok in _KEYWORDS:
            raise SqlSyntaxError(f"expected expression, found {tok!r}", position=i)
        column = self._column_id(tok, i, default_tables)
        return i + 1, ColumnRef(column)

    def parse_expr(self, i: int, default_tables: list[int]) -> tuple[int, ValueExpr]:
        i, left = self.parse_primary(i, default_tables)
        while True:
            tok = self.peek(i)
            if tok in ("+", "-", "/"):
                op = tok
            elif tok == "*" and self._starts_primary(i + 1):
                op = "*"
            else:
                break
            i, right = self.parse_primary(i + 1, default_tables)
            left = Arith(op, left, right)
        return i, left

    # -- conditions ---------------------------------------------------------

    def parse_value(self, i: int, default_tables: list[int]) -> tuple[int, object]:
        tok = self.peek(i)
        if tok is None:
            raise SqlSyntaxError("missing comparison value", position=i)
        if tok[0] in "'\"":
            return i + 1, Literal(tok[1:-1].replace("''", "'"), is_string=True)
        if tok == "-" and self.peek(i + 1) is not None and re.match(r"\d", self.peek(i + 1)):
            return i + 2, Literal("-" + self.toks[i + 1], is_string=False)
        if re.match(r"\d|\.\d", tok):
            return i + 1, Literal(tok, is_string=False)
        if tok == "(" and self.peek(i + 1) == "select":
            i, sub = self.parse_query(i + 1)
            i = self.expect(i, ")")
            return i, Subquery(sub)
        return self.parse_expr(i, default_tables)

    def parse_leaf(self, i: int, default_tables: list[int]) -> tuple[int, Comparison]:
        i, expr = self.parse_expr(i, default_tables)
        negated = False
        if self.peek(i) == "not":
            negated = True
            i += 1
        tok = self.peek(i)
        self._check_supported(i)
        if tok == "between":
            if negated:
                raise UnsupportedSqlError("NOT BETWEEN is not supported", position=i)
            i, low = self.parse_value(i + 1, default_tables)
            i = self.expect(i, "and")
            i, high = self.parse_value(i, default_tables)
            return i, Comparison(expr, "between", (low, high))
        if tok == "in":
            if self.peek(i + 1) != "(" or self.peek(i + 2) != "select":
                raise UnsupportedSqlError("IN requires a subquery operand", position=i)
            i, sub = self.parse_query(i + 2)
            i = self.expect(i, ")")
            return i, Comparison(expr, "not in" if negated else "in", (Subquery(sub),))
        if tok == "like":
            i, value = self.parse_value(i + 1, default_tables)
            return i, Comparison(expr, "not like" if negated else "like", (value,))
        if tok in _CMP_OPS:
            if negated:
                raise UnsupportedSqlError("NOT before a comparison is not supported", position=i)
            op = "!=" if tok == "<>" else tok
            i, value = self.parse_value(i + 1, default_tables)
            return i, Comparison(expr, op, (value,))
        raise SqlSyntaxError(f"expected a comparison operator, found {tok!r}", position=i)

    def parse_condition(self, i: int, default_tables: list[int]) -> tuple[int, ConditionNode]:
        """AND binds tighter than OR; the dialect has no parenthesized booleans."""
        groups: list[list[ConditionNode]] = [[]]
        i, leaf = self.parse_leaf(i, default_tables)
        groups[-1].append(leaf)
        while self.peek(i) in ("and", "or"):
            conn = self.toks[i]
            i, leaf = self.parse_leaf(i + 1, default_tables)
            if conn == "or":
                groups.append([])
            groups[-1].append(leaf)
        ands = [g[0] if len(g) == 1 else BoolOp("and", tuple(g)) for g in groups]
        node = ands[0] if len(ands) == 1 else BoolOp("or", tuple(ands))
        return i, node

    # -- clauses ------------------------------------------------------------

    def parse_from(self, i: int) -> tuple[int, FromClause, list[int]]:
        i = self.expect(i, "from")
        if self.peek(i) == "(":
            i, sub = self.parse_query(self.expect(i + 1, "select") - 1)
            i = self.expect(i, ")")
            if self.peek(i) == "as":
                i += 2
            # Outer columns of a derived table still carry base-schema ids,
            # so resolution falls through to the subquery's own tables.
            inner = sub
            while inner.from_clause.subquery is not None:
                inner = inner.from_clause.subquery
            return i, FromClause(tables=(), subquery=sub), list(inner.from_clause.tables)
        tables: list[int] = []
        joins: list[JoinCond] = []
        while True:
            self._check_supported(i)
            tok = self.peek(i)
            if tok is None or tok in _KEYWORDS and tok not in ("join",):
                raise SqlSyntaxError(f"expected table name, found {tok!r}", position=i)
            tables.append(self._table_index(tok, i))
            i += 1
            if self.peek(i) == "as":
                i += 2
            if self.peek(i) == "on":
                i, cond = self.parse_condition(i + 1, tables)
                joins.extend(self._as_join_conds(cond, i))
            if self.peek(i) == "join":
                i += 1
                continue
            if self.peek(i) == ",":
                i += 1
                continue
            break
        return i, FromClause(tables=tuple(tables), joins=tuple(joins)), tables

    def _as_join_conds(self, cond: ConditionNode, i: int) -> list[JoinCond]:
        if isinstance(cond, Comparison):
            if len(cond.operands) != 1 or isinstance(cond.operands[0], Literal):
                raise UnsupportedSqlError(
                    "JOIN conditions must compare two expressions", position=i
                )
            return [JoinCond(cond.expr, cond.op, cond.operands[0])]
        if cond.op != "and":
            raise UnsupportedSqlError("OR inside an ON clause", position=i)
        out: list[JoinCond] = []
        for child in cond.children:
            out.extend(self._as_join_conds(child, i))
        return out

    def parse_query(self, i: int) -> tuple[int, SqlQuery]:
        i = self.expect(i, "select")
        select_start = i
        # The FROM clause is parsed first so bare columns can resolve.
        from_i = self._find_from(i)
        after_from, from_clause, default_tables = self.parse_from(from_i)

        distinct = False
        if self.peek(select_start) == "distinct":
            distinct = True
            select_start += 1
        i, items = self._parse_select_items(select_start, default_tables, stop=from_i)

        i = after_from
        where = None
        if self.peek(i) == "where":
            i, where = self.parse_condition(i + 1, default_tables)
        group: tuple[int, ...] = ()
        if self.peek(i) == "group":
            i = self.expect(i + 1, "by")
            cols = []
            while True:
                tok = self.peek(i)
                if tok is None or tok in _KEYWORDS or tok == ")":
                    break
                cols.append(self._column_id(tok, i, default_tables))
                i += 1
                if self.peek(i) == ",":
                    i += 1
                else:
                    break
            if not cols:
                raise SqlSyntaxError("empty GROUP BY", position=i)
            group = tuple(cols)
        having = None
        if self.peek(i) == "having":
            i, having = self.parse_condition(i + 1, default_tables)
        order: tuple[OrderItem, ...] = ()
        if self.peek(i) == "order":
            i = self.expect(i + 1, "by")
            exprs: list[ValueExpr] = []
            direction = "asc"
            while True:
                i, expr = self.parse_expr(i, default_tables)
                exprs.append(expr)
                if self.peek(i) in ("asc", "desc"):
                    direction = self.toks[i]
                    i += 1
                if self.peek(i) == ",":
                    i += 1
                    continue
                break
            order = tuple(OrderItem(e, direction) for e in exprs)
        limit = None
        if self.peek(i) == "limit":
            tok = self.peek(i + 1)
            if tok is None or not tok.isdigit():
                raise SqlSyntaxError(f"LIMIT needs an integer, found {tok!r}", position=i + 1)
            limit = int(tok)
            i += 2
        set_op = None
        if self.peek(i) in ("intersect", "union", "except"):
            kind = self.toks[i]
            i, right = self.parse_query(self.expect(i + 1, "select") - 1)
            set_op = (kind, right)

        if not items:
            raise SqlSyntaxError("empty SELECT list", position=select_start)
        query = SqlQuery(
            select_distinct=distinct,
            select_items=tuple(items),
            from_clause=from_clause,
            where_clause=where,
            group_by=group,
            having=having,
            order_by=order,
            limit=limit,
            set_op=set_op,
            db_id=self.schema.db_id,
        )
        return i, query

    def _find_from(self, i: int) -> int:
        depth = 0
        for j in range(i, len(self.toks)):
            tok = self.toks[j]
            if tok == "(":
                depth += 1
            elif tok == ")":
                depth -= 1
            elif tok == "from" and depth == 0:
                return j
        raise SqlSyntaxError("missing FROM clause", position=i)

    def _parse_select_items(self, i: int, default_tables: list[int],
                            stop: int) -> tuple[int, list[SelectItem]]:
        items: list[SelectItem] = []
        while i < stop:
            i, expr = self.parse_expr(i, default_tables)
            if isinstance(expr, AggExpr):
                items.append(SelectItem(expr.func, expr.operand, expr.distinct))
            else:
                items.append(SelectItem("none", expr))
            if i < stop:
                if self.peek(i) != ",":
                    raise SqlSyntaxError(f"expected ',' in SELECT list, found {self.peek(i)!r}",
                                         position=i)
                i += 1
        return i, items


def parse_sql(text: str, schema: Schema) -> SqlQuery:
    """Parse gold SQL text against ``schema`` and return the normalized AST.

    Raises SqlSyntaxError (with token position), UnknownColumnError /
    UnknownTableError, or UnsupportedSqlError; never returns a partial parse.
    """
    tokens = tokenize(text)
    if not tokens:
        raise SqlSyntaxError("empty query", position=0)
    parser = _Parser(tokens, schema)
    end, query = parser.parse_query(0)
    if end != len(tokens):
        raise SqlSyntaxError(f"trailing tokens after query: {tokens[end:]!r}", position=end)
    return normalize(query)
