"""Episode runtime: one frozen policy, one environment, one harness pass.

The loop per step: render the trajectory for the policy, realize its raw
output into EXEC or BLOCK, observe (a BLOCK short-circuits the environment
but still consumes budget), update the progress tracker, then regulate.
Remaining budget after step t of B is B - t - 1; the episode ends on
environment termination, policy fault, or budget exhaustion.

A pending budget Directive from the previous step is force-executed when
the model's next move is neither the suggested completing action nor any
task-critical action, provided the suggestion is still admissible.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Protocol

from harnesskit.contract import Contract, apply_delta, render_contract
from harnesskit.envs.base import Environment
from harnesskit.interventions import HarnessBundle, InterventionSet, assemble
from harnesskit.realization import (
    DecisionKind,
    RawModelOutput,
    RealizationDecision,
    RescuePath,
    VERB_ALIASES,
    parse_call_text,
    realize_with_details,
)
from harnesskit.regulation import (
    ProgressTracker,
    RegulationLevel,
    RegulationSignal,
    regulate,
    update_tracker,
)
from harnesskit.skills import inject, retrieve


class PolicyFault(RuntimeError):
    """The policy could not produce output (transport failure, bad payload)."""


class EnvironmentMismatch(ValueError):
    """Task, contract, and environment must agree on the environment id."""


class Outcome(Enum):
    SUCCESS = "success"
    FAILURE = "failure"
    BUDGET_EXHAUSTED = "budget_exhausted"
    ENVIRONMENT_TERMINATED = "environment_terminated"


@dataclass(frozen=True)
class TaskSpec:
    task_id: str
    environment_id: str
    instruction: str
    success_spec: dict[str, Any] = field(default_factory=dict)


@dataclass(frozen=True)
class Budget:
    total_steps: int

    def __post_init__(self) -> None:
        if self.total_steps < 0:
            raise ValueError("budget cannot be negative")


@dataclass(frozen=True)
class StepRecord:
    index: int
    raw_model_output: str
    decision: RealizationDecision
    observation: str
    regulation: RegulationSignal
    remaining_budget: int


@dataclass(frozen=True)
class Trajectory:
    contract: Contract
    task: TaskSpec
    initial_observation: str
    steps: tuple[StepRecord, ...] = ()
    outcome: Outcome | None = None


@dataclass(frozen=True)
class EpisodeRecord:
    trajectory: Trajectory
    reward: float
    wall_steps: int
    seed: int
    fault_note: str = ""


@dataclass(frozen=True)
class BlockAudit:
    """What a gate refused, plus the environment as it stood at that moment."""

    step_index: int
    candidate: str
    env_before: Environment


@dataclass
class EpisodeTrace:
    """Optional sink for phase-ordering audits and block-soundness replays."""

    phases: list[tuple[int, str]] = field(default_factory=list)
    blocks: list[BlockAudit] = field(default_factory=list)


class BoundPolicy(Protocol):
    policy_id: str

    def next_action(self, rendered: str, trajectory: Trajectory) -> RawModelOutput: ...


def render_for_model(trajectory: Trajectory) -> str:
    """Flat textual episode view: contract, task, then the step transcript.

    Non-empty regulation signals appear as NOTE lines after the observation
    they follow.  This format is frozen; scripted policies parse it.
    """
    parts = [
        render_contract(trajectory.contract),
        "",
        f"TASK: {trajectory.task.instruction}",
        "",
        f"OBSERVATION: {trajectory.initial_observation}",
    ]
    for step in trajectory.steps:
        parts.append(f"ACTION: {step.raw_model_output}")
        parts.append(f"OBSERVATION: {step.observation}")
        if step.regulation.level is not RegulationLevel.EMPTY:
            parts.append(f"NOTE: {step.regulation.message}")
    return "\n".join(parts)


def _first_verb(action: str) -> str:
    word = action.split(" ", 1)[0].lower() if action else ""
    return VERB_ALIASES.get(word, word)


def is_task_critical(action: str, evidence: Any) -> bool:
    """True when the action advances the task per the environment's own list."""
    verbs = tuple(evidence.progress_facts.get("task_critical_verbs", ()))
    if not verbs:
        return False
    call = parse_call_text(action)
    if call is not None:
        return call[0] in verbs
    return _first_verb(action) in verbs


def _suggestion_still_valid(suggestion: str, evidence: Any) -> bool:
    if evidence.admissible_actions:
        return suggestion in evidence.admissible_actions
    return parse_call_text(suggestion) is not None


def apply_contract_layer(contract: Contract, bundle: HarnessBundle) -> Contract:
    return functools.reduce(apply_delta, bundle.deltas, contract)


def apply_skill_layer(task: TaskSpec, bundle: HarnessBundle) -> TaskSpec:
    library = bundle.skill_library()
    if library.size == 0:
        return task
    hits = retrieve(task, library, k=bundle.skill_top_k)
    return inject(task, hits)


def run_episode(
    task: TaskSpec,
    env: Environment,
    contract: Contract,
    budget: Budget,
    harness: InterventionSet,
    policy: BoundPolicy,
    *,
    seed: int = 0,
    disabled_layers: frozenset[str] | set[str] = frozenset(),
    trace: EpisodeTrace | None = None,
) -> EpisodeRecord:
    if contract.environment_id != env.environment_id or task.environment_id != env.environment_id:
        raise EnvironmentMismatch(
            f"task/contract/environment ids disagree: "
            f"{task.environment_id}/{contract.environment_id}/{env.environment_id}"
        )

    bundle = assemble(harness, env.environment_id, disabled_layers)
    contract_prime = apply_contract_layer(contract, bundle)
    task_prime = apply_skill_layer(task, bundle)
    initial_observation = env.initial_observation

    steps: list[StepRecord] = []
    tracker = ProgressTracker()
    pending_directive: RegulationSignal | None = None
    fault_note = ""
    ended = False

    def snapshot() -> Trajectory:
        return Trajectory(
            contract=contract_prime,
            task=task_prime,
            initial_observation=initial_observation,
            steps=tuple(steps),
        )

    total = budget.total_steps
    for t in range(total):
        trajectory_now = snapshot()
        rendered = render_for_model(trajectory_now)
        try:
            raw = policy.next_action(rendered, trajectory_now)
        except PolicyFault as exc:
            fault_note = str(exc) or exc.__class__.__name__
            break
        if trace is not None:
            trace.phases.append((t, "raw"))

        evidence = env.evidence()
        decision, candidate = realize_with_details(
            raw, trajectory_now, contract_prime, evidence, bundle.gate_rules
        )
        if (
            pending_directive is not None
            and pending_directive.suggested_action
            and decision.kind is DecisionKind.EXEC
            and decision.action != pending_directive.suggested_action
            and not is_task_critical(decision.action, evidence)
            and _suggestion_still_valid(pending_directive.suggested_action, evidence)
        ):
            decision = RealizationDecision(
                kind=DecisionKind.EXEC,
                action=pending_directive.suggested_action,
                canonicalized=False,
                rescue_path=RescuePath.NONE,
            )
            candidate = decision.action or candidate
        if trace is not None:
            trace.phases.append((t, "decision"))

        if decision.kind is DecisionKind.BLOCK:
            if trace is not None:
                trace.blocks.append(
                    BlockAudit(step_index=t, candidate=candidate, env_before=env.clone())
                )
            observation = decision.block_message or ""
        else:
            observation = env.step(decision.action or "")
        if trace is not None:
            trace.phases.append((t, "observation"))

        evidence_after = env.evidence()
        acted = decision.action if decision.kind is DecisionKind.EXEC else candidate
        tracker = update_tracker(tracker, acted or "", observation, evidence_after)
        remaining = total - t - 1
        signal = regulate(
            snapshot(),
            acted or "",
            observation,
            remaining,
            tracker,
            evidence_after,
            bundle.detector_config,
        )
        if trace is not None:
            trace.phases.append((t, "regulation"))

        steps.append(
            StepRecord(
                index=t,
                raw_model_output=raw.text,
                decision=decision,
                observation=observation,
                regulation=signal,
                remaining_budget=remaining,
            )
        )
        if signal.level is RegulationLevel.DIRECTIVE and signal.suggested_action:
            pending_directive = signal
        else:
            pending_directive = None

        if decision.kind is DecisionKind.EXEC and env.is_end(observation):
            ended = True
            break

    reward = env.evaluate(task_prime)
    if reward >= 1.0:
        outcome = Outcome.SUCCESS
    elif fault_note:
        outcome = Outcome.FAILURE
    elif ended:
        outcome = Outcome.ENVIRONMENT_TERMINATED
    else:
        outcome = Outcome.BUDGET_EXHAUSTED

    trajectory = Trajectory(
        contract=contract_prime,
        task=task_prime,
        initial_observation=initial_observation,
        steps=tuple(steps),
        outcome=outcome,
    )
    return EpisodeRecord(
        trajectory=trajectory,
        reward=reward,
        wall_steps=len(steps),
        seed=seed,
        fault_note=fault_note,
    )
