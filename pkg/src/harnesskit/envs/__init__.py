"""Environment registry: construction, reference solvers, base contracts."""

from __future__ import annotations

from typing import Any

from harnesskit.contract import Contract, ToolParam, ToolSpec
from harnesskit.envs import gridhouse, minidb
from harnesskit.envs.base import Environment, EnvironmentEvidence, UnknownTask

ENVIRONMENT_IDS = (gridhouse.ENVIRONMENT_ID, minidb.ENVIRONMENT_ID)

DEFAULT_BUDGETS = {gridhouse.ENVIRONMENT_ID: 50, minidb.ENVIRONMENT_ID: 15}


def make_env(
    environment_id: str, world_doc: dict[str, Any], success_spec: dict[str, Any], seed: int
) -> Environment:
    if environment_id == gridhouse.ENVIRONMENT_ID:
        return gridhouse.build_env(world_doc, success_spec, seed)
    if environment_id == minidb.ENVIRONMENT_ID:
        return minidb.build_env(world_doc, success_spec, seed)
    raise UnknownTask(f"unknown environment '{environment_id}'")


def solve_plan(env: Environment, success_spec: dict[str, Any]) -> list[str]:
    """Reference plan for a freshly built environment instance."""
    if isinstance(env, gridhouse.GridHouseEnv):
        return gridhouse.solve_plan(env, success_spec)
    if isinstance(env, minidb.MiniDbEnv):
        return minidb.solve_plan(env, success_spec)
    raise UnknownTask(f"no solver for environment '{env.environment_id}'")


_GRIDHOUSE_CONTRACT = Contract(
    environment_id=gridhouse.ENVIRONMENT_ID,
    tools=(
        ToolSpec(
            name="command",
            description=(
                "Execute one household command. Verbs: go to <place>; "
                "open <receptacle>; close <receptacle>; take <object> from <receptacle>; "
                "put <object> in/on <receptacle>; clean <object> with <sink>; "
                "heat <object> with <microwave>; cool <object> with <fridge>; "
                "look; inventory; examine <target>."
            ),
            parameters=(ToolParam(name="text"),),
            admissibility_note=(
                "Commands outside the current admissible set do nothing and waste a step."
            ),
        ),
    ),
    policy_notes=(
        "Issue exactly one command per step, as plain text.",
    ),
    answer_format="",
)

_MINIDB_CONTRACT = Contract(
    environment_id=minidb.ENVIRONMENT_ID,
    tools=(
        ToolSpec(
            name=minidb.TOOL_EXECUTE,
            description="Run one SQL statement against the database and observe the result.",
            parameters=(ToolParam(name="sql"),),
            admissibility_note=(
                "Supported: SELECT (columns, *, COUNT(*), MAX/MIN/SUM/AVG), INSERT, "
                "UPDATE, DELETE; WHERE with =, !=, <, >, <=, >=, LIKE and AND; "
                "ORDER BY; LIMIT. Backtick-quote identifiers containing spaces."
            ),
        ),
        ToolSpec(
            name=minidb.TOOL_COMMIT,
            description="Submit the final answer and end the episode.",
            parameters=(ToolParam(name="answer"),),
            admissibility_note="Committing is terminal; verify with a query first.",
        ),
    ),
    policy_notes=(
        'Call tools as execute_query("<SQL>") or commit_final_answer("<answer>").',
    ),
    answer_format=(
        "Commit a single value or comma-separated list exactly as the query renders it; "
        "numbers are written bare (3, not 3.0)."
    ),
)


def base_contract(environment_id: str) -> Contract:
    if environment_id == gridhouse.ENVIRONMENT_ID:
        return _GRIDHOUSE_CONTRACT
    if environment_id == minidb.ENVIRONMENT_ID:
        return _MINIDB_CONTRACT
    raise UnknownTask(f"unknown environment '{environment_id}'")


__all__ = [
    "DEFAULT_BUDGETS",
    "ENVIRONMENT_IDS",
    "Environment",
    "EnvironmentEvidence",
    "UnknownTask",
    "base_contract",
    "gridhouse",
    "make_env",
    "minidb",
    "solve_plan",
]
