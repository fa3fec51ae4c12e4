"""Greedy harness evolution against a frozen policy on a train split.

Each round: run the train suite under the current set, diagnose the
failures, take the dominant failure category, and try candidates (those
whose layer matches the category first, then the rest in registry order).
A candidate is adopted only if it strictly increases train successes while
breaking nothing that passed before; adoption bumps the set version.  The
search stops when a full pass adopts nothing, and the result is frozen.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Sequence

from harnesskit.config import TaskUnit
from harnesskit.diagnosis import (
    DiagnosisReport,
    FailureCategory,
    classify_row,
    dominant_category,
)
from harnesskit.interventions import (
    Intervention,
    InterventionSet,
    Layer,
    PASS_THROUGH,
    freeze,
    thaw_copy,
)
from harnesskit.policies import PolicyHandle
from harnesskit.runner import run_unit

# which layers can plausibly fix which diagnosis category
LAYERS_FOR_CATEGORY: dict[str, tuple[Layer, ...]] = {
    FailureCategory.ACTION_REALIZATION: (Layer.ACTION,),
    FailureCategory.CONTRACT_MISMATCH: (Layer.CONTRACT, Layer.SKILL),
    FailureCategory.TRAJECTORY_DEGENERATION: (Layer.REGULATION,),
    FailureCategory.RESIDUAL_REASONING: (),
}


class SplitHygieneError(ValueError):
    """Evolution may only ever see train-split tasks."""


@dataclass(frozen=True)
class CandidateTrial:
    intervention_id: str
    layer: str
    score_before: int
    score_after: int
    regressed_tasks: tuple[str, ...]
    accepted: bool
    version_after: int


@dataclass(frozen=True)
class EvolutionReport:
    initial_score: int
    final_score: int
    train_size: int
    trials: tuple[CandidateTrial, ...]
    final_version: int

    def accepted_ids(self) -> tuple[str, ...]:
        return tuple(t.intervention_id for t in self.trials if t.accepted)


def _unit_key(index: int, unit: TaskUnit) -> str:
    """Stable per-unit label; family-qualified because one task can appear
    under several fault families in the same train list."""
    if unit.family:
        return f"{unit.task.task_id}:{unit.family}"
    return f"{unit.task.task_id}#{index}"


def _evaluate(
    units: Sequence[TaskUnit],
    policy: PolicyHandle,
    candidate_set: InterventionSet,
    *,
    seed: int,
    budget: int | None,
) -> tuple[set[str], list[dict[str, Any]]]:
    """Run every train unit once; returns passing unit keys and all rows."""
    passing: set[str] = set()
    rows: list[dict[str, Any]] = []
    for index, unit in enumerate(units):
        _, row = run_unit(
            unit,
            policy,
            candidate_set,
            base_seed=seed,
            run_index=0,
            budget=budget,
        )
        rows.append(row)
        if float(row["reward"]) >= 1.0:
            passing.add(_unit_key(index, unit))
    return passing, rows


def _ordered_candidates(
    remaining: list[tuple[int, Intervention]], category: str | None
) -> list[tuple[int, Intervention]]:
    preferred = LAYERS_FOR_CATEGORY.get(category or "", ())
    return sorted(
        remaining,
        key=lambda pair: (0 if pair[1].layer in preferred else 1, pair[0]),
    )


def evolve(
    base: InterventionSet | None,
    candidates: Sequence[Intervention],
    train_units: Sequence[TaskUnit],
    policy: PolicyHandle,
    *,
    seed: int = 0,
    budget: int | None = None,
    evolved_set_id: str | None = None,
) -> tuple[InterventionSet, EvolutionReport]:
    bad = [u.task.task_id for u in train_units if u.split != "train"]
    if bad:
        raise SplitHygieneError(f"non-train tasks passed to evolve: {bad}")
    if not train_units:
        raise ValueError("evolution needs at least one train task")
    keys = [_unit_key(i, u) for i, u in enumerate(train_units)]
    if len(set(keys)) != len(keys):
        raise ValueError("duplicate (task, family) pairs in train units")

    source = base if base is not None else PASS_THROUGH
    current = thaw_copy(source, evolved_set_id or f"{source.set_id}-evolved")
    current_ids = set(current.ids())

    passing, rows = _evaluate(train_units, policy, current, seed=seed, budget=budget)
    initial_score = len(passing)
    trials: list[CandidateTrial] = []
    remaining = [
        (index, candidate)
        for index, candidate in enumerate(candidates)
        if candidate.intervention_id not in current_ids
    ]

    improved = True
    while improved and remaining:
        improved = False
        failures: list[DiagnosisReport] = [
            classify_row(row) for row in rows if float(row["reward"]) < 1.0
        ]
        if not failures:
            break
        category = dominant_category(failures)
        for index, candidate in _ordered_candidates(remaining, category):
            trial_set = current.with_added(candidate)
            trial_passing, trial_rows = _evaluate(
                train_units, policy, trial_set, seed=seed, budget=budget
            )
            regressed = tuple(sorted(passing - trial_passing))
            accepted = len(trial_passing) > len(passing) and not regressed
            trials.append(
                CandidateTrial(
                    intervention_id=candidate.intervention_id,
                    layer=candidate.layer.value,
                    score_before=len(passing),
                    score_after=len(trial_passing),
                    regressed_tasks=regressed,
                    accepted=accepted,
                    version_after=trial_set.version if accepted else current.version,
                )
            )
            if accepted:
                current = trial_set
                passing = trial_passing
                rows = trial_rows
                remaining = [(i, c) for i, c in remaining if i != index]
                improved = True
                break

    final = freeze(current)
    report = EvolutionReport(
        initial_score=initial_score,
        final_score=len(passing),
        train_size=len(train_units),
        trials=tuple(trials),
        final_version=final.version,
    )
    return final, report


def render_report(report: EvolutionReport) -> str:
    lines = [
        f"train tasks: {report.train_size}",
        f"score: {report.initial_score} -> {report.final_score}"
        f" (version {report.final_version})",
    ]
    for trial in report.trials:
        verdict = "accepted" if trial.accepted else "rejected"
        detail = f"{trial.score_before} -> {trial.score_after}"
        if trial.regressed_tasks:
            detail += f", regressed: {', '.join(trial.regressed_tasks)}"
        lines.append(f"  [{verdict}] {trial.intervention_id} ({trial.layer}): {detail}")
    return "\n".join(lines)
