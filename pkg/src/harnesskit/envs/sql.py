"""Deterministic SQL-subset interpreter for the in-memory database environment.

Supported statements:

    SELECT col[, col...] | * | COUNT(*) | MAX/MIN/SUM/AVG(col)
        FROM table [WHERE col OP literal [AND ...]]
        [ORDER BY col [ASC|DESC]] [LIMIT n]
    INSERT INTO table VALUES (lit, ...)
    UPDATE table SET col = lit [, col = lit ...] [WHERE ...]
    DELETE FROM table [WHERE ...]

OP is one of = != < > <= >= LIKE.  Identifiers may be backtick-quoted, which
is the only way to reference names containing spaces or reserved words.
Aggregates over an empty row set yield NULL (COUNT yields 0).
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Any

Value = int | float | str

KEYWORDS = frozenset(
    [
        "select", "from", "where", "and", "order", "by", "limit", "asc", "desc",
        "insert", "into", "values", "update", "set", "delete",
        "count", "max", "min", "sum", "avg", "like",
    ]
)

_COMPARE_OPS = ("<=", ">=", "!=", "=", "<", ">")


class SqlError(ValueError):
    """Any parse-time or execution-time SQL failure, with a user-facing message."""


@dataclass
class Column:
    name: str
    type: str  # "integer" | "real" | "text"


@dataclass
class Table:
    name: str
    columns: list[Column]
    rows: list[list[Value]]

    def column_index(self, name: str) -> int:
        for i, col in enumerate(self.columns):
            if col.name == name:
                return i
        raise SqlError(f"unknown column '{name}'")


# --- tokenizer ---------------------------------------------------------------


@dataclass(frozen=True)
class Token:
    kind: str  # keyword | ident | number | string | op | punct | star
    value: Any


def _lex(text: str) -> list[Token]:
    tokens: list[Token] = []
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
            continue
        if ch == "'":
            j = i + 1
            buf = []
            while True:
                if j >= n:
                    raise SqlError("syntax error: unterminated string literal")
                if text[j] == "'":
                    if j + 1 < n and text[j + 1] == "'":  # '' escapes a quote
                        buf.append("'")
                        j += 2
                        continue
                    break
                buf.append(text[j])
                j += 1
            tokens.append(Token("string", "".join(buf)))
            i = j + 1
            continue
        if ch == "`":
            j = text.find("`", i + 1)
            if j < 0:
                raise SqlError("syntax error: unterminated backtick identifier")
            tokens.append(Token("ident", text[i + 1 : j]))
            i = j + 1
            continue
        if ch.isdigit() or (ch == "-" and i + 1 < n and text[i + 1].isdigit()):
            m = re.match(r"-?\d+(\.\d+)?", text[i:])
            assert m is not None
            lit = m.group(0)
            tokens.append(Token("number", float(lit) if "." in lit else int(lit)))
            i += len(lit)
            continue
        if ch.isalpha() or ch == "_":
            m = re.match(r"[A-Za-z_][A-Za-z0-9_]*", text[i:])
            assert m is not None
            word = m.group(0)
            if word.lower() in KEYWORDS:
                tokens.append(Token("keyword", word.lower()))
            else:
                tokens.append(Token("ident", word))
            i += len(word)
            continue
        matched = False
        for op in _COMPARE_OPS:
            if text.startswith(op, i):
                tokens.append(Token("op", op))
                i += len(op)
                matched = True
                break
        if matched:
            continue
        if ch in "(),*;":
            tokens.append(Token("punct", ch))
            i += 1
            continue
        raise SqlError(f"syntax error near '{ch}'")
    return tokens


# --- AST ---------------------------------------------------------------------


@dataclass(frozen=True)
class Condition:
    column: str
    op: str  # comparison op or "like"
    literal: Value


@dataclass(frozen=True)
class SelectStmt:
    table: str
    columns: tuple[str, ...] = ()  # empty with star=True or aggregate set
    star: bool = False
    aggregate: tuple[str, str] | None = None  # (func, column or "*")
    where: tuple[Condition, ...] = ()
    order_by: tuple[str, str] | None = None  # (column, "asc"|"desc")
    limit: int | None = None


@dataclass(frozen=True)
class InsertStmt:
    table: str
    values: tuple[Value, ...]


@dataclass(frozen=True)
class UpdateStmt:
    table: str
    assignments: tuple[tuple[str, Value], ...]
    where: tuple[Condition, ...] = ()


@dataclass(frozen=True)
class DeleteStmt:
    table: str
    where: tuple[Condition, ...] = ()


Statement = SelectStmt | InsertStmt | UpdateStmt | DeleteStmt


class _Parser:
    def __init__(self, tokens: list[Token]):
        self.tokens = tokens
        self.pos = 0

    def peek(self) -> Token | None:
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def next(self) -> Token:
        tok = self.peek()
        if tok is None:
            raise SqlError("syntax error: unexpected end of statement")
        self.pos += 1
        return tok

    def expect_keyword(self, word: str) -> None:
        tok = self.next()
        if tok.kind != "keyword" or tok.value != word:
            raise SqlError(f"syntax error near '{tok.value}'")

    def expect_punct(self, ch: str) -> None:
        tok = self.next()
        if tok.kind != "punct" or tok.value != ch:
            raise SqlError(f"syntax error near '{tok.value}'")

    def accept_keyword(self, word: str) -> bool:
        tok = self.peek()
        if tok is not None and tok.kind == "keyword" and tok.value == word:
            self.pos += 1
            return True
        return False

    def ident(self) -> str:
        tok = self.next()
        if tok.kind != "ident":
            raise SqlError(f"syntax error near '{tok.value}'")
        return str(tok.value)

    def literal(self) -> Value:
        tok = self.next()
        if tok.kind in ("number", "string"):
            return tok.value
        raise SqlError(f"syntax error near '{tok.value}'")

    # grammar rules

    def statement(self) -> Statement:
        tok = self.peek()
        if tok is None:
            raise SqlError("syntax error: empty statement")
        if tok.kind != "keyword":
            raise SqlError(f"syntax error near '{tok.value}'")
        stmt: Statement
        if tok.value == "select":
            stmt = self.select()
        elif tok.value == "insert":
            stmt = self.insert()
        elif tok.value == "update":
            stmt = self.update()
        elif tok.value == "delete":
            stmt = self.delete()
        else:
            raise SqlError(f"syntax error near '{tok.value}'")
        if self.peek() is not None and self.peek().kind == "punct" and self.peek().value == ";":
            self.pos += 1
        if self.peek() is not None:
            raise SqlError(f"syntax error near '{self.peek().value}'")
        return stmt

    def select(self) -> SelectStmt:
        self.expect_keyword("select")
        star = False
        aggregate: tuple[str, str] | None = None
        columns: list[str] = []
        tok = self.peek()
        if tok is not None and tok.kind == "punct" and tok.value == "*":
            self.pos += 1
            star = True
        elif tok is not None and tok.kind == "keyword" and tok.value in ("count", "max", "min", "sum", "avg"):
            func = tok.value
            self.pos += 1
            self.expect_punct("(")
            if func == "count":
                self.expect_punct("*")
                aggregate = ("count", "*")
            else:
                aggregate = (func, self.ident())
            self.expect_punct(")")
        else:
            columns.append(self.ident())
            while self.peek() is not None and self.peek().kind == "punct" and self.peek().value == ",":
                self.pos += 1
                columns.append(self.ident())
        self.expect_keyword("from")
        table = self.ident()
        where = self.where_clause()
        order_by = None
        if self.accept_keyword("order"):
            self.expect_keyword("by")
            col = self.ident()
            direction = "asc"
            if self.accept_keyword("desc"):
                direction = "desc"
            elif self.accept_keyword("asc"):
                direction = "asc"
            order_by = (col, direction)
        limit = None
        if self.accept_keyword("limit"):
            tok = self.next()
            if tok.kind != "number" or not isinstance(tok.value, int) or tok.value < 0:
                raise SqlError("syntax error: LIMIT expects a non-negative integer")
            limit = tok.value
        return SelectStmt(
            table=table,
            columns=tuple(columns),
            star=star,
            aggregate=aggregate,
            where=where,
            order_by=order_by,
            limit=limit,
        )

    def insert(self) -> InsertStmt:
        self.expect_keyword("insert")
        self.expect_keyword("into")
        table = self.ident()
        self.expect_keyword("values")
        self.expect_punct("(")
        values = [self.literal()]
        while self.peek() is not None and self.peek().kind == "punct" and self.peek().value == ",":
            self.pos += 1
            values.append(self.literal())
        self.expect_punct(")")
        return InsertStmt(table=table, values=tuple(values))

    def update(self) -> UpdateStmt:
        self.expect_keyword("update")
        table = self.ident()
        self.expect_keyword("set")
        assignments = [self.assignment()]
        while self.peek() is not None and self.peek().kind == "punct" and self.peek().value == ",":
            self.pos += 1
            assignments.append(self.assignment())
        where = self.where_clause()
        return UpdateStmt(table=table, assignments=tuple(assignments), where=where)

    def assignment(self) -> tuple[str, Value]:
        col = self.ident()
        tok = self.next()
        if tok.kind != "op" or tok.value != "=":
            raise SqlError(f"syntax error near '{tok.value}'")
        return (col, self.literal())

    def delete(self) -> DeleteStmt:
        self.expect_keyword("delete")
        self.expect_keyword("from")
        table = self.ident()
        return DeleteStmt(table=table, where=self.where_clause())

    def where_clause(self) -> tuple[Condition, ...]:
        if not self.accept_keyword("where"):
            return ()
        conds = [self.condition()]
        while self.accept_keyword("and"):
            conds.append(self.condition())
        return tuple(conds)

    def condition(self) -> Condition:
        col = self.ident()
        tok = self.next()
        if tok.kind == "op":
            op = str(tok.value)
        elif tok.kind == "keyword" and tok.value == "like":
            op = "like"
        else:
            raise SqlError(f"syntax error near '{tok.value}'")
        return Condition(column=col, op=op, literal=self.literal())


def parse(text: str) -> Statement:
    """Tokenize and parse one statement; raises SqlError on any violation."""
    return _Parser(_lex(text)).statement()


# --- execution ---------------------------------------------------------------


@dataclass(frozen=True)
class QueryResult:
    """Outcome of a successful statement execution."""

    kind: str  # "rows" | "scalar" | "mutation"
    columns: tuple[str, ...] = ()
    rows: tuple[tuple[Value, ...], ...] = ()
    scalar: Value | None = None
    rows_affected: int = 0
    verb: str = ""  # inserted | updated | deleted

    def render(self) -> str:
        if self.kind == "mutation":
            return f"{self.rows_affected} row(s) {self.verb}."
        if self.kind == "scalar":
            return canonical_value(self.scalar)
        if not self.rows:
            return "(empty result)"
        if len(self.columns) == 1:
            return ", ".join(canonical_value(r[0]) for r in self.rows)
        return ", ".join(
            "(" + ", ".join(canonical_value(v) for v in row) + ")" for row in self.rows
        )


def canonical_value(value: Value | None) -> str:
    """Canonical text form: integral reals render as integers, NULL as 'NULL'."""
    if value is None:
        return "NULL"
    if isinstance(value, bool):  # guard: bools are ints in Python
        return str(int(value))
    if isinstance(value, float):
        return str(int(value)) if value.is_integer() else repr(value)
    return str(value)


def _check_literal_type(table: Table, col: Column, literal: Value) -> Value:
    if col.type == "text":
        if not isinstance(literal, str):
            raise SqlError(f"type mismatch: column '{col.name}' is text")
        return literal
    if isinstance(literal, str):
        raise SqlError(f"type mismatch: column '{col.name}' is {col.type}")
    if col.type == "integer":
        if isinstance(literal, float):
            raise SqlError(f"type mismatch: column '{col.name}' is integer")
        return int(literal)
    return float(literal)


def _like_to_regex(pattern: str) -> re.Pattern[str]:
    out = []
    for ch in pattern:
        if ch == "%":
            out.append(".*")
        elif ch == "_":
            out.append(".")
        else:
            out.append(re.escape(ch))
    return re.compile("".join(out), re.IGNORECASE)


def _matches(table: Table, row: list[Value], cond: Condition) -> bool:
    idx = table.column_index(cond.column)
    col = table.columns[idx]
    value = row[idx]
    if cond.op == "like":
        if col.type != "text":
            raise SqlError(f"type mismatch: LIKE needs a text column, got '{col.name}'")
        if not isinstance(cond.literal, str):
            raise SqlError("type mismatch: LIKE expects a string pattern")
        return _like_to_regex(cond.literal).fullmatch(str(value)) is not None
    literal = _check_literal_type(table, col, cond.literal)
    if cond.op == "=":
        return value == literal
    if cond.op == "!=":
        return value != literal
    if cond.op == "<":
        return value < literal
    if cond.op == ">":
        return value > literal
    if cond.op == "<=":
        return value <= literal
    return value >= literal


def _filter_rows(table: Table, where: tuple[Condition, ...]) -> list[int]:
    kept = []
    for i, row in enumerate(table.rows):
        if all(_matches(table, row, cond) for cond in where):
            kept.append(i)
    return kept


def execute(tables: dict[str, Table], statement: Statement) -> QueryResult:
    """Execute a parsed statement against mutable tables."""
    table = tables.get(statement.table)
    if table is None:
        raise SqlError(f"unknown table '{statement.table}'")

    if isinstance(statement, SelectStmt):
        kept = _filter_rows(table, statement.where)
        if statement.aggregate is not None:
            func, col_name = statement.aggregate
            if func == "count":
                return QueryResult(kind="scalar", scalar=len(kept))
            idx = table.column_index(col_name)
            col = table.columns[idx]
            if col.type == "text" and func in ("sum", "avg"):
                raise SqlError(f"type mismatch: cannot {func.upper()} text column '{col_name}'")
            values = [table.rows[i][idx] for i in kept]
            if not values:
                return QueryResult(kind="scalar", scalar=None)
            if func == "max":
                return QueryResult(kind="scalar", scalar=max(values))
            if func == "min":
                return QueryResult(kind="scalar", scalar=min(values))
            total = sum(values)
            if func == "sum":
                return QueryResult(kind="scalar", scalar=total)
            return QueryResult(kind="scalar", scalar=total / len(values))
        rows = [list(table.rows[i]) for i in kept]
        if statement.order_by is not None:
            col_name, direction = statement.order_by
            idx = table.column_index(col_name)
            rows.sort(key=lambda r: r[idx], reverse=(direction == "desc"))
        if statement.limit is not None:
            rows = rows[: statement.limit]
        if statement.star:
            out_cols = tuple(c.name for c in table.columns)
            out_rows = tuple(tuple(r) for r in rows)
        else:
            idxs = [table.column_index(c) for c in statement.columns]
            out_cols = tuple(statement.columns)
            out_rows = tuple(tuple(r[i] for i in idxs) for r in rows)
        return QueryResult(kind="rows", columns=out_cols, rows=out_rows)

    if isinstance(statement, InsertStmt):
        if len(statement.values) != len(table.columns):
            raise SqlError(
                f"expected {len(table.columns)} values for table '{table.name}', got {len(statement.values)}"
            )
        row = [
            _check_literal_type(table, col, lit)
            for col, lit in zip(table.columns, statement.values)
        ]
        table.rows.append(row)
        return QueryResult(kind="mutation", rows_affected=1, verb="inserted")

    if isinstance(statement, UpdateStmt):
        assignments = []
        for col_name, lit in statement.assignments:
            idx = table.column_index(col_name)
            assignments.append((idx, _check_literal_type(table, table.columns[idx], lit)))
        kept = _filter_rows(table, statement.where)
        for i in kept:
            for idx, value in assignments:
                table.rows[i][idx] = value
        return QueryResult(kind="mutation", rows_affected=len(kept), verb="updated")

    assert isinstance(statement, DeleteStmt)
    kept = set(_filter_rows(table, statement.where))
    table.rows = [row for i, row in enumerate(table.rows) if i not in kept]
    return QueryResult(kind="mutation", rows_affected=len(kept), verb="deleted")


def run_statement(tables: dict[str, Table], text: str) -> QueryResult:
    return execute(tables, parse(text))
