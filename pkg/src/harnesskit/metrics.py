"""Aggregate run metrics over task-by-run success matrices.

pass@1 is the plain success rate over every cell.  pass^k is the all-of-k
rate: the fraction of tasks whose k runs all succeeded, a stability measure
that can only be at most pass@1.  pass@k (any-of-k) is the optimistic
counterpart.  relative_gain is the standard (after - before) / before.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Iterable, Mapping


class KMismatchError(ValueError):
    """Requested k does not match the matrix's runs-per-task."""


class ZeroBaselineError(ZeroDivisionError):
    """relative_gain is undefined for a zero baseline."""


@dataclass(frozen=True)
class RunMatrix:
    """Successes per task: task_id -> one 0/1 flag per run, equal run counts."""

    cells: dict[str, tuple[int, ...]]

    def __post_init__(self) -> None:
        lengths = {len(v) for v in self.cells.values()}
        if len(lengths) > 1:
            raise ValueError(f"unequal runs per task: {sorted(lengths)}")
        for task_id, flags in self.cells.items():
            if any(f not in (0, 1) for f in flags):
                raise ValueError(f"non-binary success flag for task '{task_id}'")

    @property
    def runs_per_task(self) -> int:
        return len(next(iter(self.cells.values()))) if self.cells else 0

    @property
    def task_count(self) -> int:
        return len(self.cells)


def matrix_from_rows(
    rows: Iterable[Mapping[str, Any]], *, reward_threshold: float = 1.0
) -> RunMatrix:
    """Build a matrix from episode log rows (needs task_id, run_index, reward)."""
    by_task: dict[str, dict[int, int]] = {}
    for row in rows:
        flag = 1 if float(row["reward"]) >= reward_threshold else 0
        by_task.setdefault(str(row["task_id"]), {})[int(row["run_index"])] = flag
    cells = {
        task_id: tuple(flags[i] for i in sorted(flags))
        for task_id, flags in sorted(by_task.items())
    }
    return RunMatrix(cells=cells)


def pass_at_1(matrix: RunMatrix) -> float:
    """Mean success over every (task, run) cell."""
    total = sum(len(flags) for flags in matrix.cells.values())
    if total == 0:
        return 0.0
    hits = sum(sum(flags) for flags in matrix.cells.values())
    return hits / total


def pass_hat_k(matrix: RunMatrix, k: int) -> float:
    """Fraction of tasks with all k runs successful."""
    if k != matrix.runs_per_task:
        raise KMismatchError(f"matrix has {matrix.runs_per_task} runs per task, asked for k={k}")
    if not matrix.cells:
        return 0.0
    stable = sum(1 for flags in matrix.cells.values() if all(flags))
    return stable / matrix.task_count


def pass_any_k(matrix: RunMatrix, k: int) -> float:
    """Fraction of tasks with at least one of k runs successful."""
    if k != matrix.runs_per_task:
        raise KMismatchError(f"matrix has {matrix.runs_per_task} runs per task, asked for k={k}")
    if not matrix.cells:
        return 0.0
    lucky = sum(1 for flags in matrix.cells.values() if any(flags))
    return lucky / matrix.task_count


def relative_gain(before: float, after: float) -> float:
    if before == 0:
        raise ZeroBaselineError("relative gain undefined for a zero baseline")
    return (after - before) / before


def group_rows(
    rows: Iterable[Mapping[str, Any]], key: str
) -> dict[str, list[Mapping[str, Any]]]:
    groups: dict[str, list[Mapping[str, Any]]] = {}
    for row in rows:
        groups.setdefault(str(row.get(key, "")), []).append(row)
    return dict(sorted(groups.items()))


def summarize(rows: list[Mapping[str, Any]]) -> dict[str, Any]:
    """Overall and per-environment / per-policy metrics for a run log."""
    matrix = matrix_from_rows(rows)
    k = matrix.runs_per_task
    summary: dict[str, Any] = {
        "episodes": len(rows),
        "tasks": matrix.task_count,
        "runs_per_task": k,
        "pass_at_1": pass_at_1(matrix),
    }
    if k > 1:
        summary["pass_hat_k"] = pass_hat_k(matrix, k)
        summary["pass_any_k"] = pass_any_k(matrix, k)
    for key in ("environment_id", "policy_id"):
        buckets = {}
        for name, group in group_rows(rows, key).items():
            buckets[name] = pass_at_1(matrix_from_rows(group))
        summary[f"by_{key}"] = buckets
    return summary


def render_summary(summary: dict[str, Any]) -> str:
    lines = [
        f"episodes: {summary['episodes']}  tasks: {summary['tasks']}  runs/task: {summary['runs_per_task']}",
        f"pass@1: {summary['pass_at_1']:.3f}",
    ]
    if "pass_hat_k" in summary:
        k = summary["runs_per_task"]
        lines.append(f"pass^{k}: {summary['pass_hat_k']:.3f}  pass@{k}: {summary['pass_any_k']:.3f}")
    for key in ("by_environment_id", "by_policy_id"):
        for name, value in summary.get(key, {}).items():
            lines.append(f"  {key[3:]}={name}: pass@1 {value:.3f}")
    return "\n".join(lines)
