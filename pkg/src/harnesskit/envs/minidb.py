"""Tool-calling database environment over the in-memory SQL interpreter.

Actions are strict tool calls:

    execute_query("<SQL>")
    commit_final_answer("<answer>")

Anything else produces an error observation and leaves state unchanged.
Mutation tasks are evaluated by comparing table contents (as multisets)
against the state produced by applying the task's reference statement to a
pristine copy; committing is how an episode ends, but the tables are the
ground truth.  Answer tasks compare the committed string against the stored
answer after whitespace and numeric normalization.
"""

from __future__ import annotations

import copy
import random
import re
from dataclasses import dataclass
from typing import Any

from harnesskit.envs import sql
from harnesskit.envs.base import Environment, EnvironmentEvidence

ENVIRONMENT_ID = "minidb"

TOOL_EXECUTE = "execute_query"
TOOL_COMMIT = "commit_final_answer"

ERROR_FORMAT = (
    "Error: unrecognized action format. "
    'Use execute_query("<SQL>") or commit_final_answer("<answer>").'
)

_CALL_RE = re.compile(
    r'^\s*([A-Za-z_][A-Za-z0-9_]*)\s*\(\s*"((?:[^"\\]|\\.)*)"\s*\)\s*$',
    re.DOTALL,
)

_MUTATION_OBS_RE = re.compile(r"^\d+ row\(s\) (inserted|updated|deleted)\.$")


def parse_tool_call(text: str) -> tuple[str, str] | None:
    """Strict `tool("arg")` parse; returns (tool, unescaped arg) or None."""
    m = _CALL_RE.match(text)
    if m is None:
        return None
    raw_arg = m.group(2)
    arg = re.sub(r'\\(["\\])', r"\1", raw_arg)
    return m.group(1), arg


def render_tool_call(tool: str, arg: str) -> str:
    escaped = arg.replace("\\", "\\\\").replace('"', '\\"')
    return f'{tool}("{escaped}")'


def normalize_answer(text: str) -> str:
    """Trim, collapse internal whitespace, and canonicalize numeric strings."""
    collapsed = " ".join(text.split())
    try:
        number = float(collapsed)
    except ValueError:
        return collapsed
    if number.is_integer():
        return str(int(number))
    return repr(number)


def tables_from_dict(doc: dict[str, Any]) -> dict[str, sql.Table]:
    tables: dict[str, sql.Table] = {}
    for spec in doc["tables"]:
        columns = [sql.Column(name=c["name"], type=c["type"]) for c in spec["columns"]]
        rows = [list(r) for r in spec.get("rows", [])]
        for row in rows:
            if len(row) != len(columns):
                raise ValueError(f"row arity mismatch in table '{spec['name']}'")
        tables[spec["name"]] = sql.Table(name=spec["name"], columns=columns, rows=rows)
    return tables


def _multiset(table: sql.Table) -> dict[tuple[Any, ...], int]:
    counts: dict[tuple[Any, ...], int] = {}
    for row in table.rows:
        key = tuple(row)
        counts[key] = counts.get(key, 0) + 1
    return counts


@dataclass
class MiniDbEnv(Environment):
    """One task instance over a mutable copy of a world's tables."""

    tables: dict[str, sql.Table]
    task_kind: str  # select | count | aggregate | mutation
    expected_answer: str = ""
    reference_sql: str = ""
    committed_answer: str | None = None
    mutation_succeeded: bool = False
    candidate_answer: str = ""
    terminal: bool = False
    expected_tables: dict[str, sql.Table] | None = None

    environment_id = ENVIRONMENT_ID

    def __post_init__(self) -> None:
        self.initial_observation = self._describe()
        if self.task_kind == "mutation" and self.expected_tables is None:
            expected = copy.deepcopy(self.tables)
            sql.run_statement(expected, self.reference_sql)
            self.expected_tables = expected

    def _describe(self) -> str:
        parts = [
            "You are connected to a database. "
            'Interact with execute_query("<SQL>") and finish with '
            'commit_final_answer("<answer>").',
            "Tables:",
        ]
        for name, table in self.tables.items():
            cols = ", ".join(f"{c.name} ({c.type})" for c in table.columns)
            parts.append(f"- {name}: {cols}")
        return "\n".join(parts)

    def step(self, action: str) -> str:
        call = parse_tool_call(action)
        if call is None:
            if re.match(r"^\s*[A-Za-z_][A-Za-z0-9_]*\s*\(", action or ""):
                name = re.match(r"^\s*([A-Za-z_][A-Za-z0-9_]*)", action).group(1)
                if name not in (TOOL_EXECUTE, TOOL_COMMIT):
                    return (
                        f"Error: unknown tool '{name}'. "
                        f"Available tools: {TOOL_EXECUTE}, {TOOL_COMMIT}."
                    )
            return ERROR_FORMAT
        tool, arg = call
        if tool == TOOL_EXECUTE:
            try:
                result = sql.run_statement(self.tables, arg)
            except sql.SqlError as exc:
                return f"Error: {exc}"
            rendering = result.render()
            if result.kind == "mutation":
                self.mutation_succeeded = True
            else:
                self.candidate_answer = rendering
            return rendering
        if tool == TOOL_COMMIT:
            self.committed_answer = arg
            self.terminal = True
            return "Final answer committed."
        return (
            f"Error: unknown tool '{tool}'. "
            f"Available tools: {TOOL_EXECUTE}, {TOOL_COMMIT}."
        )

    def is_end(self, observation: str = "") -> bool:
        return self.terminal

    def evaluate(self, task: Any) -> float:
        if self.task_kind == "mutation":
            if not self.mutation_succeeded or self.expected_tables is None:
                return 0.0
            if set(self.tables) != set(self.expected_tables):
                return 0.0
            for name, table in self.tables.items():
                if _multiset(table) != _multiset(self.expected_tables[name]):
                    return 0.0
            return 1.0
        if self.committed_answer is None:
            return 0.0
        if normalize_answer(self.committed_answer) == normalize_answer(self.expected_answer):
            return 1.0
        return 0.0

    def evidence(self) -> EnvironmentEvidence:
        facts: dict[str, Any] = {
            "task_kind": self.task_kind,
            "mutation_succeeded": self.mutation_succeeded,
            "candidate_answer": self.candidate_answer,
            "task_critical_verbs": (TOOL_EXECUTE, TOOL_COMMIT),
        }
        completing = ""
        if self.task_kind == "mutation":
            if self.mutation_succeeded:
                completing = render_tool_call(TOOL_COMMIT, "done")
        elif self.candidate_answer:
            completing = render_tool_call(TOOL_COMMIT, self.candidate_answer)
        facts["completing_action"] = completing
        schema = {
            name: tuple(c.name for c in table.columns) for name, table in self.tables.items()
        }
        return EnvironmentEvidence(
            admissible_actions=(),
            no_op_phrases=(),
            progress_facts=facts,
            schema_map=schema,
        )

    def clone(self) -> MiniDbEnv:
        twin = MiniDbEnv(
            tables=copy.deepcopy(self.tables),
            task_kind=self.task_kind,
            expected_answer=self.expected_answer,
            reference_sql=self.reference_sql,
            expected_tables=copy.deepcopy(self.expected_tables),
        )
        twin.committed_answer = self.committed_answer
        twin.mutation_succeeded = self.mutation_succeeded
        twin.candidate_answer = self.candidate_answer
        twin.terminal = self.terminal
        return twin

    def state_fingerprint(self) -> str:
        payload = []
        for name in sorted(self.tables):
            table = self.tables[name]
            payload.append((name, sorted(map(tuple, table.rows))))
        return repr((payload, self.committed_answer, self.mutation_succeeded, self.terminal))


def is_mutation_observation(observation: str) -> bool:
    """True for the success rendering of INSERT/UPDATE/DELETE."""
    return _MUTATION_OBS_RE.match(observation) is not None


def build_env(world_doc: dict[str, Any], success_spec: dict[str, Any], seed: int) -> MiniDbEnv:
    """Instantiate a task environment; the seed permutes row storage order."""
    tables = tables_from_dict(world_doc)
    rng = random.Random(seed)
    for table in tables.values():
        rng.shuffle(table.rows)
    return MiniDbEnv(
        tables=tables,
        task_kind=success_spec["kind"],
        expected_answer=str(success_spec.get("answer", "")),
        reference_sql=success_spec.get("reference_sql", ""),
    )


def solve_plan(env: MiniDbEnv, success_spec: dict[str, Any]) -> list[str]:
    """Reference action sequence: run the reference statement, then commit."""
    plan = [render_tool_call(TOOL_EXECUTE, env.reference_sql)]
    if env.task_kind == "mutation":
        plan.append(render_tool_call(TOOL_COMMIT, "done"))
    else:
        probe = env.clone()
        rendering = probe.step(plan[0])
        if rendering.startswith("Error:"):
            raise ValueError(f"reference statement failed: {rendering}")
        plan.append(render_tool_call(TOOL_COMMIT, rendering))
    return plan
