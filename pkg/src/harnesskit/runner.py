"""Suite execution: build envs from manifests, run episodes, emit log rows.

One episode is fully determined by (base seed, task_id, run_index): the
derived seed drives world variation, plan binding, and any scripted coin
flips.  Suites fan out over a thread pool; rows come back in completion
order and the persistence layer adds the deterministic sorted companion.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor, as_completed
from functools import lru_cache
from pathlib import Path
from typing import Any, Sequence

from harnesskit import envs as env_registry
from harnesskit.config import TaskUnit, default_budget, load_yaml
from harnesskit.contract import render_contract
from harnesskit.interventions import InterventionSet
from harnesskit.persistence import build_row, derive_episode_seed
from harnesskit.policies import PolicyHandle, bind_policy
from harnesskit.runtime import Budget, EpisodeRecord, EpisodeTrace, run_episode


@lru_cache(maxsize=64)
def _world_doc_cached(path_text: str) -> dict[str, Any]:
    return load_yaml(Path(path_text))


def load_world_doc(path: Path) -> dict[str, Any]:
    return _world_doc_cached(str(path))


def task_kind_of(unit: TaskUnit) -> str:
    spec = unit.task.success_spec
    if unit.task.environment_id == env_registry.gridhouse.ENVIRONMENT_ID:
        return spec["goal"].get("attribute") or "place"
    return spec.get("kind", "")


def build_unit_env(unit: TaskUnit, seed: int) -> env_registry.Environment:
    world_doc = load_world_doc(unit.world_path)
    return env_registry.make_env(unit.task.environment_id, world_doc, unit.task.success_spec, seed)


def run_unit(
    unit: TaskUnit,
    policy_handle: PolicyHandle,
    intervention_set: InterventionSet,
    *,
    base_seed: int = 0,
    run_index: int = 0,
    budget: int | None = None,
    disabled_layers: frozenset[str] | set[str] = frozenset(),
    trace: EpisodeTrace | None = None,
) -> tuple[EpisodeRecord, dict[str, Any]]:
    """Run one (task, run_index) episode and return it with its log row."""
    seed = derive_episode_seed(base_seed, unit.task.task_id, run_index)
    env = build_unit_env(unit, seed)
    contract = env_registry.base_contract(unit.task.environment_id)
    policy = bind_policy(
        policy_handle, unit.task, env, family=unit.family or None, seed=seed
    )
    steps = budget if budget is not None else (unit.budget or default_budget(unit.task.environment_id))
    record = run_episode(
        unit.task,
        env,
        contract,
        Budget(total_steps=steps),
        intervention_set,
        policy,
        seed=seed,
        disabled_layers=disabled_layers,
        trace=trace,
    )
    row = build_row(
        record,
        task_id=unit.task.task_id,
        environment_id=unit.task.environment_id,
        policy_id=policy_handle.policy_id,
        intervention_set_id=intervention_set.set_id,
        intervention_set_version=intervention_set.version,
        run_index=run_index,
        task_kind=task_kind_of(unit),
        rendered_contract=render_contract(record.trajectory.contract),
    )
    return record, row


def run_suite(
    units: Sequence[TaskUnit],
    policy_handle: PolicyHandle,
    intervention_set: InterventionSet,
    *,
    base_seed: int = 0,
    runs: int = 1,
    budget: int | None = None,
    disabled_layers: frozenset[str] | set[str] = frozenset(),
    workers: int = 4,
) -> list[dict[str, Any]]:
    """All (task, run_index) episodes, rows in completion order."""
    jobs = [(unit, run_index) for unit in units for run_index in range(runs)]
    rows: list[dict[str, Any]] = []
    if workers <= 1 or len(jobs) <= 1:
        for unit, run_index in jobs:
            _, row = run_unit(
                unit,
                policy_handle,
                intervention_set,
                base_seed=base_seed,
                run_index=run_index,
                budget=budget,
                disabled_layers=disabled_layers,
            )
            rows.append(row)
        return rows
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [
            pool.submit(
                run_unit,
                unit,
                policy_handle,
                intervention_set,
                base_seed=base_seed,
                run_index=run_index,
                budget=budget,
                disabled_layers=disabled_layers,
            )
            for unit, run_index in jobs
        ]
        for future in as_completed(futures):
            _, row = future.result()
            rows.append(row)
    return rows
