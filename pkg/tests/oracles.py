"""Independent reference implementations used to cross-check the package.

Everything here is written from first principles against the documented
behavior, deliberately not sharing code paths with the implementations under
test: a from-scratch Okapi BM25, a row-scan evaluator for structured query
descriptions, a memoized recursive edit distance, and an unpruned
breadth-first planner driven only through the environment's public API.
"""

from __future__ import annotations

import math
import re
from collections import deque
from functools import lru_cache
from typing import Any, Callable, Sequence

# --- BM25 ------------------------------------------------------------------------

_WORD_RE = re.compile(r"[0-9a-z]+")

_STOP = frozenset(
    [
        "a", "an", "and", "are", "as", "at", "be", "by", "for", "from",
        "has", "have", "in", "is", "it", "its", "not", "of", "on", "or",
        "that", "the", "this", "to", "was", "were", "will", "with", "you", "your",
    ]
)


def brute_tokens(text: str) -> list[str]:
    return [t for t in _WORD_RE.findall(text.lower()) if len(t) >= 2 and t not in _STOP]


def brute_bm25(
    query: Sequence[str], docs: dict[str, str], k1: float = 1.2, b: float = 0.75
) -> dict[str, float]:
    """Okapi BM25 scores for every document, computed the long way round."""
    tokenized = {doc_id: brute_tokens(text) for doc_id, text in docs.items()}
    n = len(docs)
    if n == 0:
        return {}
    avg_len = sum(len(toks) for toks in tokenized.values()) / n
    if avg_len == 0:
        return {doc_id: 0.0 for doc_id in docs}
    scores: dict[str, float] = {}
    for doc_id, toks in tokenized.items():
        score = 0.0
        for term in query:
            tf = sum(1 for t in toks if t == term)
            if tf == 0:
                continue
            df = sum(1 for other in tokenized.values() if term in other)
            idf = math.log((n - df + 0.5) / (df + 0.5) + 1.0)
            denom = tf + k1 * (1.0 - b + b * len(toks) / avg_len)
            score += idf * tf * (k1 + 1.0) / denom
        scores[doc_id] = score
    return scores


# --- row-scan query evaluation -----------------------------------------------------

# A structured statement description mirrors what the random generator knows
# about the statement it produced, so evaluation never touches SQL text:
#   {"op": "count", "table": t, "where": cond | None}
#   {"op": "agg", "func": "max|min|sum|avg", "column": c, "table": t, "where": ...}
#   {"op": "select", "columns": [c, ...], "table": t, "where": ...,
#    "order_by": (col, "asc"|"desc") | None, "limit": int | None}
#   {"op": "insert", "table": t, "values": [...]}
#   {"op": "update", "table": t, "assignments": [(col, value), ...], "where": ...}
#   {"op": "delete", "table": t, "where": ...}
# A condition is {"column": c, "cmp": one of = != < > <= >= like, "value": v}
# or {"and": [cond, cond]}.

Rows = list[dict[str, Any]]


def _like_match(value: Any, pattern: str) -> bool:
    regex = ""
    for ch in pattern:
        if ch == "%":
            regex += ".*"
        elif ch == "_":
            regex += "."
        else:
            regex += re.escape(ch)
    return re.fullmatch(regex, str(value), flags=re.IGNORECASE) is not None


def _cond_holds(cond: dict[str, Any], row: dict[str, Any]) -> bool:
    if "and" in cond:
        return all(_cond_holds(c, row) for c in cond["and"])
    value = row[cond["column"]]
    target = cond["value"]
    cmp = cond["cmp"]
    if cmp == "like":
        return _like_match(value, target)
    if isinstance(target, bool) or isinstance(value, bool):
        raise ValueError("booleans are not part of the value domain")
    if cmp == "=":
        return value == target
    if cmp == "!=":
        return value != target
    if cmp == "<":
        return value < target
    if cmp == ">":
        return value > target
    if cmp == "<=":
        return value <= target
    if cmp == ">=":
        return value >= target
    raise ValueError(f"unknown comparison {cmp}")


def _kept(rows: Rows, where: dict[str, Any] | None) -> Rows:
    if where is None:
        return list(rows)
    return [row for row in rows if _cond_holds(where, row)]


def canonical_scalar(value: Any) -> str:
    if value is None:
        return "NULL"
    if isinstance(value, float) and value.is_integer():
        return str(int(value))
    return str(value)


def scan_eval(stmt: dict[str, Any], tables: dict[str, Rows]) -> str:
    """Evaluate a structured statement against dict-rows; returns the expected
    observation text (result rendering or mutation report)."""
    rows = tables[stmt["table"]]
    op = stmt["op"]
    if op == "count":
        return str(len(_kept(rows, stmt.get("where"))))
    if op == "agg":
        values = [row[stmt["column"]] for row in _kept(rows, stmt.get("where"))]
        func = stmt["func"]
        if not values:
            return "0" if func == "count" else "NULL"
        if func == "max":
            result: Any = max(values)
        elif func == "min":
            result = min(values)
        elif func == "sum":
            result = sum(values)
        else:
            result = sum(values) / len(values)
        return canonical_scalar(result)
    if op == "select":
        kept = _kept(rows, stmt.get("where"))
        order = stmt.get("order_by")
        if order is not None:
            col, direction = order
            kept = sorted(kept, key=lambda r: r[col], reverse=direction == "desc")
        limit = stmt.get("limit")
        if limit is not None:
            kept = kept[:limit]
        columns = stmt["columns"]
        if not kept:
            return "(empty result)"
        if len(columns) == 1:
            return ", ".join(canonical_scalar(r[columns[0]]) for r in kept)
        return ", ".join(
            "(" + ", ".join(canonical_scalar(r[c]) for c in columns) + ")" for r in kept
        )
    if op == "insert":
        new_row = dict(zip(stmt["column_names"], stmt["values"]))
        rows.append(new_row)
        return "1 row(s) inserted."
    if op == "update":
        kept = _kept(rows, stmt.get("where"))
        for row in kept:
            for col, value in stmt["assignments"]:
                row[col] = value
        return f"{len(kept)} row(s) updated."
    if op == "delete":
        kept = _kept(rows, stmt.get("where"))
        for row in kept:
            rows.remove(row)
        return f"{len(kept)} row(s) deleted."
    raise ValueError(f"unknown op {op}")


# --- edit distance -----------------------------------------------------------------


def levenshtein_ref(a: str, b: str) -> int:
    """Memoized recursive definition, as independent check for the DP version."""

    @lru_cache(maxsize=None)
    def dist(i: int, j: int) -> int:
        if i == 0:
            return j
        if j == 0:
            return i
        cost = 0 if a[i - 1] == b[j - 1] else 1
        return min(
            dist(i - 1, j) + 1,
            dist(i, j - 1) + 1,
            dist(i - 1, j - 1) + cost,
        )

    return dist(len(a), len(b))


# --- unpruned breadth-first planning ------------------------------------------------


def bfs_plan_length(
    env: Any,
    *,
    skip_verbs: tuple[str, ...] = ("look", "inventory", "examine"),
    max_depth: int = 12,
) -> int | None:
    """Shortest plan length using only the environment's public interface.

    Unlike the package planner this does no goal-directed pruning beyond
    dropping pure inspection commands, so it independently witnesses
    optimality (inspection commands never change state, hence never belong
    to a shortest plan).
    """
    start = env.clone()
    if start.is_end():
        return 0
    seen = {start.state_fingerprint()}
    frontier: deque[tuple[Any, int]] = deque([(start, 0)])
    while frontier:
        state, depth = frontier.popleft()
        if depth >= max_depth:
            continue
        for action in state.admissible_actions():
            if action.split(" ", 1)[0] in skip_verbs:
                continue
            succ = state.clone()
            succ.step(action)
            if succ.is_end():
                return depth + 1
            fp = succ.state_fingerprint()
            if fp in seen:
                continue
            seen.add(fp)
            frontier.append((succ, depth + 1))
    return None
