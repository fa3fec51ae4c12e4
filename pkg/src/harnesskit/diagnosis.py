"""Failure diagnosis: assign each failed episode to one harness layer.

Categories, checked in priority order with purely mechanical rules:

    action_realization      the episode wasted steps on output the environment
                            could not execute (format errors, unknown tools,
                            SQL dialect errors, non-verb prose in a text world)
    contract_mismatch       executable actions that violate the interaction
                            protocol (committing before any query or before a
                            successful mutation, non-numeric answers to counts)
    trajectory_degeneration repetition, oscillation, or stalling against a
                            wall of no-op observations
    residual_reasoning      everything else; by construction the only category
                            with no pinpointed evidence steps

The classifier reads episode log rows; an adapter converts in-memory
records.  Success episodes are never classified.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Any, Iterable, Mapping

from harnesskit.envs import gridhouse, minidb
from harnesskit.persistence import build_row
from harnesskit.runtime import EpisodeRecord


class FailureCategory:
    ACTION_REALIZATION = "action_realization"
    CONTRACT_MISMATCH = "contract_mismatch"
    TRAJECTORY_DEGENERATION = "trajectory_degeneration"
    RESIDUAL_REASONING = "residual_reasoning"


CATEGORY_ORDER = (
    FailureCategory.ACTION_REALIZATION,
    FailureCategory.CONTRACT_MISMATCH,
    FailureCategory.TRAJECTORY_DEGENERATION,
    FailureCategory.RESIDUAL_REASONING,
)


@dataclass(frozen=True)
class DiagnosisReport:
    episode_id: str
    category: str
    evidence_steps: tuple[int, ...]
    triggering_rule_id: str


_AR_ERROR_PREFIXES = (
    "Error: unrecognized action format",
    "Error: unknown tool",
)
_SQL_ERROR_PREFIXES = (
    "Error: syntax error",
    "Error: unknown table",
    "Error: unknown column",
    "Error: type mismatch",
    "Error: expected",
)

_GRIDHOUSE_VERBS = frozenset(
    ["go", "open", "close", "take", "put", "clean", "heat", "cool", "look", "inventory", "examine"]
)
_VERB_ALIASES = {"goto": "go", "grab": "take", "place": "put"}

_NOOP_PHRASES = {gridhouse.ENVIRONMENT_ID: (gridhouse.NO_OP_OBSERVATION,)}

_QUERY_SUCCESS_EXCLUDED = ("Error:", "Final answer committed.")

_REPEAT_K = 3
_STALL_K = 3


def _step_action(step: Mapping[str, Any]) -> str:
    decision = step.get("decision") or {}
    if decision.get("kind") == "exec" and decision.get("action"):
        return str(decision["action"])
    return " ".join(str(step.get("raw_model_output", "")).split())


def _is_commit_step(step: Mapping[str, Any]) -> bool:
    decision = step.get("decision") or {}
    action = decision.get("action") or ""
    return decision.get("kind") == "exec" and action.startswith(f"{minidb.TOOL_COMMIT}(")


def _commit_argument(step: Mapping[str, Any]) -> str:
    action = (step.get("decision") or {}).get("action") or ""
    parsed = minidb.parse_tool_call(action)
    return parsed[1] if parsed else ""


def _is_successful_query(step: Mapping[str, Any]) -> bool:
    decision = step.get("decision") or {}
    action = decision.get("action") or ""
    if decision.get("kind") != "exec" or not action.startswith(f"{minidb.TOOL_EXECUTE}("):
        return False
    observation = str(step.get("observation", ""))
    return not any(observation.startswith(p) for p in _QUERY_SUCCESS_EXCLUDED)


def _first_word(text: str) -> str:
    word = text.split(" ", 1)[0].lower() if text else ""
    return _VERB_ALIASES.get(word, word)


def _rule_ar(row: Mapping[str, Any]) -> tuple[str, tuple[int, ...]] | None:
    environment = str(row.get("environment_id", ""))
    steps = row.get("steps") or []
    unknown: list[int] = []
    dialect: list[int] = []
    prose: list[int] = []
    noops = _NOOP_PHRASES.get(environment, ())
    for step in steps:
        observation = str(step.get("observation", ""))
        if any(observation.startswith(p) for p in _AR_ERROR_PREFIXES):
            unknown.append(int(step["index"]))
            continue
        if any(observation.startswith(p) for p in _SQL_ERROR_PREFIXES):
            dialect.append(int(step["index"]))
            continue
        if environment == gridhouse.ENVIRONMENT_ID:
            decision = step.get("decision") or {}
            blocked = decision.get("kind") == "block"
            attempted = _step_action(step)
            if (observation in noops or blocked) and _first_word(attempted) not in _GRIDHOUSE_VERBS:
                prose.append(int(step["index"]))
    if unknown:
        return "ar-unknown-call", tuple(unknown)
    if dialect:
        return "ar-dialect-error", tuple(dialect)
    if prose:
        return "ar-unparseable-command", tuple(prose)
    return None


def _rule_cm(row: Mapping[str, Any]) -> tuple[str, tuple[int, ...]] | None:
    if str(row.get("environment_id", "")) != minidb.ENVIRONMENT_ID:
        return None
    task_kind = str(row.get("task_kind", ""))
    steps = row.get("steps") or []
    if task_kind == "mutation":
        mutated = False
        for step in steps:
            if _is_commit_step(step) and not mutated:
                return ("cm-commit-before-mutation", (int(step["index"]),))
            if minidb.is_mutation_observation(str(step.get("observation", ""))):
                mutated = True
        return None
    queried = False
    for step in steps:
        if _is_commit_step(step):
            if not queried:
                return ("cm-commit-without-query", (int(step["index"]),))
            if task_kind in ("count", "aggregate"):
                argument = _commit_argument(step).strip()
                try:
                    float(argument)
                except ValueError:
                    return ("cm-non-numeric-answer", (int(step["index"]),))
            return None
        if _is_successful_query(step):
            queried = True
    return None


def _rule_td(row: Mapping[str, Any]) -> tuple[str, tuple[int, ...]] | None:
    steps = row.get("steps") or []
    actions = [_step_action(s) for s in steps]
    exhausted = str(row.get("outcome", "")) == "budget_exhausted"
    if exhausted and len(actions) >= _REPEAT_K:
        run_start = 0
        for i in range(1, len(actions) + 1):
            if i == len(actions) or actions[i] != actions[run_start]:
                if i - run_start >= _REPEAT_K:
                    return (
                        "td-repetition",
                        tuple(int(steps[j]["index"]) for j in range(run_start, i)),
                    )
                run_start = i
    if exhausted and len(actions) >= 4:
        for i in range(len(actions) - 3):
            a, b, c, d = actions[i : i + 4]
            if a == c and b == d and a != b:
                return ("td-oscillation", tuple(int(steps[i + j]["index"]) for j in range(4)))
    noops = _NOOP_PHRASES.get(str(row.get("environment_id", "")), ())
    if noops:
        streak: list[int] = []
        for step in steps:
            if str(step.get("observation", "")) in noops:
                streak.append(int(step["index"]))
                if len(streak) >= _STALL_K:
                    return ("td-noop-stall", tuple(streak))
            else:
                streak = []
    return None


def classify_row(row: Mapping[str, Any]) -> DiagnosisReport:
    """Diagnose one failed episode row; rules fire in category priority order."""
    episode = str(row.get("episode_id", ""))
    for rule in (_rule_ar, _rule_cm, _rule_td):
        hit = rule(row)
        if hit is not None:
            rule_id, steps = hit
            category = {
                "ar": FailureCategory.ACTION_REALIZATION,
                "cm": FailureCategory.CONTRACT_MISMATCH,
                "td": FailureCategory.TRAJECTORY_DEGENERATION,
            }[rule_id.split("-", 1)[0]]
            return DiagnosisReport(
                episode_id=episode,
                category=category,
                evidence_steps=steps,
                triggering_rule_id=rule_id,
            )
    return DiagnosisReport(
        episode_id=episode,
        category=FailureCategory.RESIDUAL_REASONING,
        evidence_steps=(),
        triggering_rule_id="none",
    )


def classify_record(
    record: EpisodeRecord,
    *,
    task_id: str = "",
    environment_id: str = "",
    task_kind: str = "",
    run_index: int = 0,
) -> DiagnosisReport:
    """Adapter: diagnose an in-memory episode without writing a log."""
    row = build_row(
        record,
        task_id=task_id or record.trajectory.task.task_id,
        environment_id=environment_id or record.trajectory.task.environment_id,
        policy_id="",
        intervention_set_id="",
        intervention_set_version=0,
        run_index=run_index,
        task_kind=task_kind,
        rendered_contract="",
    )
    return classify_row(row)


def diagnose_rows(rows: Iterable[Mapping[str, Any]]) -> list[DiagnosisReport]:
    """Classify every failed row (reward < 1); successes are skipped."""
    reports = []
    for row in rows:
        if float(row.get("reward", 0.0)) >= 1.0:
            continue
        reports.append(classify_row(row))
    return reports


def histogram(
    rows: Iterable[Mapping[str, Any]], reports: Iterable[DiagnosisReport]
) -> dict[str, dict[str, int]]:
    """environment_id -> category -> count, zero-filled for stable rendering."""
    env_of = {str(r.get("episode_id", "")): str(r.get("environment_id", "")) for r in rows}
    counts: dict[str, Counter[str]] = {}
    for report in reports:
        environment = env_of.get(report.episode_id, "")
        counts.setdefault(environment, Counter())[report.category] += 1
    return {
        environment: {category: bucket.get(category, 0) for category in CATEGORY_ORDER}
        for environment, bucket in sorted(counts.items())
    }


def render_histogram(table: dict[str, dict[str, int]]) -> str:
    if not table:
        return "no failures to diagnose"
    width = max(len(c) for c in CATEGORY_ORDER)
    lines = []
    for environment, bucket in table.items():
        lines.append(f"{environment}:")
        for category in CATEGORY_ORDER:
            lines.append(f"  {category.ljust(width)}  {bucket.get(category, 0)}")
    return "\n".join(lines)


def dominant_category(reports: Iterable[DiagnosisReport]) -> str | None:
    """Most frequent category; ties break by the fixed priority order."""
    tally = Counter(r.category for r in reports)
    if not tally:
        return None
    best = max(tally.values())
    for category in CATEGORY_ORDER:
        if tally.get(category) == best:
            return category
    return None
