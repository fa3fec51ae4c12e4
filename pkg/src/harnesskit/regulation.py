"""Trajectory regulation: detect degeneration, feed graded signals back.

Detectors run in a fixed priority order and the first one that fires wins:

    budget      remaining steps at or below a threshold
    repetition  the same action several times in a row
    stagnation  several consecutive no-op observations
    oscillation A-B-A-B flip-flop between two actions

Signals are graded Empty < SoftRecovery < Warning < Directive.  A Directive
is only issued when the environment exposes a concrete completing action
that is currently admissible; the runtime may force-execute it if the model
keeps burning its last steps on non-critical moves.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Any

from harnesskit.envs.base import EnvironmentEvidence

HISTORY_WINDOW = 12

DETECTOR_BUDGET = "budget"
DETECTOR_REPETITION = "repetition"
DETECTOR_STAGNATION = "stagnation"
DETECTOR_OSCILLATION = "oscillation"

ALL_DETECTORS = (
    DETECTOR_BUDGET,
    DETECTOR_REPETITION,
    DETECTOR_STAGNATION,
    DETECTOR_OSCILLATION,
)


class RegulationLevel(IntEnum):
    EMPTY = 0
    SOFT_RECOVERY = 1
    WARNING = 2
    DIRECTIVE = 3


@dataclass(frozen=True)
class RegulationSignal:
    level: RegulationLevel
    message: str = ""
    suggested_action: str | None = None
    detector_id: str = ""


EMPTY_SIGNAL = RegulationSignal(level=RegulationLevel.EMPTY)


@dataclass(frozen=True)
class DetectorConfig:
    """Per-environment detector enablement and thresholds."""

    environment_id: str = ""
    enabled: tuple[str, ...] = ALL_DETECTORS
    repeat_k: int = 3
    stall_k: int = 3
    oscillation_window: int = 6
    budget_warn: int = 2


def config_from_dict(doc: dict[str, Any]) -> DetectorConfig:
    return DetectorConfig(
        environment_id=doc.get("environment_id", ""),
        enabled=tuple(doc.get("enabled", ALL_DETECTORS)),
        repeat_k=int(doc.get("repeat_k", 3)),
        stall_k=int(doc.get("stall_k", 3)),
        oscillation_window=int(doc.get("oscillation_window", 6)),
        budget_warn=int(doc.get("budget_warn", 2)),
    )


def config_to_dict(config: DetectorConfig) -> dict[str, Any]:
    return {
        "environment_id": config.environment_id,
        "enabled": list(config.enabled),
        "repeat_k": config.repeat_k,
        "stall_k": config.stall_k,
        "oscillation_window": config.oscillation_window,
        "budget_warn": config.budget_warn,
    }


@dataclass(frozen=True)
class HistoryEntry:
    action: str
    observation_hash: str
    is_noop: bool


@dataclass(frozen=True)
class ProgressTracker:
    """Rolling window of recent steps plus cheap aggregate progress state."""

    history: tuple[HistoryEntry, ...] = ()
    no_progress_streak: int = 0
    visited_state_hashes: frozenset[str] = frozenset()
    inventory_and_location: dict[str, str] = field(default_factory=dict)


def observation_hash(observation: str) -> str:
    normalized = " ".join(observation.split())
    return hashlib.sha1(normalized.encode("utf-8")).hexdigest()[:16]


def update_tracker(
    tracker: ProgressTracker,
    action: str,
    observation: str,
    evidence: EnvironmentEvidence,
) -> ProgressTracker:
    obs_hash = observation_hash(observation)
    is_noop = observation in evidence.no_op_phrases
    if tracker.history and tracker.history[-1].observation_hash == obs_hash:
        streak = tracker.no_progress_streak + 1 if tracker.no_progress_streak else 2
    else:
        streak = 0
    entry = HistoryEntry(action=action, observation_hash=obs_hash, is_noop=is_noop)
    history = (tracker.history + (entry,))[-HISTORY_WINDOW:]
    facts = evidence.progress_facts
    location = str(facts.get("location", "")) if facts else ""
    state_key = location or obs_hash
    visited = tracker.visited_state_hashes | {observation_hash(state_key)}
    snapshot = {
        "location": location,
        "holding": str(facts.get("holding", "")) if facts else "",
    }
    return ProgressTracker(
        history=history,
        no_progress_streak=streak,
        visited_state_hashes=visited,
        inventory_and_location=snapshot,
    )


def _trailing_identical_actions(history: tuple[HistoryEntry, ...]) -> int:
    if not history:
        return 0
    last = history[-1].action
    count = 0
    for entry in reversed(history):
        if entry.action != last:
            break
        count += 1
    return count


def _trailing_noops(history: tuple[HistoryEntry, ...]) -> int:
    count = 0
    for entry in reversed(history):
        if not entry.is_noop:
            break
        count += 1
    return count


def _is_oscillating(history: tuple[HistoryEntry, ...], window: int) -> bool:
    recent = [e.action for e in history[-window:]]
    if len(recent) < 4:
        return False
    a, b, c, d = recent[-4:]
    return a == c and b == d and a != b


def _unvisited_location_suggestion(
    tracker: ProgressTracker, evidence: EnvironmentEvidence
) -> str | None:
    locations = evidence.progress_facts.get("locations", ()) if evidence.progress_facts else ()
    for name in locations:
        if observation_hash(str(name)) in tracker.visited_state_hashes:
            continue
        suggestion = f"go to {name}"
        if suggestion in evidence.admissible_actions:
            return suggestion
    return None


def regulate(
    trajectory: Any,
    action: str,
    observation: str,
    remaining_budget: int,
    tracker: ProgressTracker,
    evidence: EnvironmentEvidence,
    config: DetectorConfig | None,
) -> RegulationSignal:
    """Evaluate detectors against the just-updated tracker; first hit wins."""
    if config is None:
        return EMPTY_SIGNAL

    if DETECTOR_BUDGET in config.enabled and remaining_budget <= config.budget_warn:
        facts = evidence.progress_facts or {}
        completing = str(facts.get("completing_action", "") or "")
        admissible = evidence.admissible_actions
        usable = bool(completing) and (not admissible or completing in admissible)
        if usable:
            return RegulationSignal(
                level=RegulationLevel.DIRECTIVE,
                message=(
                    f"Directive: only {remaining_budget} step(s) remain. "
                    f"Execute `{completing}` now to finish the task."
                ),
                suggested_action=completing,
                detector_id=DETECTOR_BUDGET,
            )
        return RegulationSignal(
            level=RegulationLevel.WARNING,
            message=(
                f"Warning: only {remaining_budget} step(s) remain. "
                "Work directly toward the task goal."
            ),
            detector_id=DETECTOR_BUDGET,
        )

    if DETECTOR_REPETITION in config.enabled:
        run = _trailing_identical_actions(tracker.history)
        if run >= config.repeat_k:
            repeated = tracker.history[-1].action
            return RegulationSignal(
                level=RegulationLevel.WARNING,
                message=(
                    f"Warning: the action '{repeated}' has been repeated "
                    f"{run} times in a row without progress. Try something different."
                ),
                detector_id=DETECTOR_REPETITION,
            )

    if DETECTOR_STAGNATION in config.enabled:
        stalled = _trailing_noops(tracker.history)
        if stalled >= config.stall_k:
            suggestion = _unvisited_location_suggestion(tracker, evidence)
            if suggestion is not None:
                return RegulationSignal(
                    level=RegulationLevel.SOFT_RECOVERY,
                    message=(
                        f"The last {stalled} actions changed nothing. "
                        f"Consider `{suggestion}` to reach an unexplored spot."
                    ),
                    suggested_action=suggestion,
                    detector_id=DETECTOR_STAGNATION,
                )
            return RegulationSignal(
                level=RegulationLevel.SOFT_RECOVERY,
                message=(
                    f"The last {stalled} actions changed nothing. "
                    "Re-read the admissible commands and change approach."
                ),
                detector_id=DETECTOR_STAGNATION,
            )

    if DETECTOR_OSCILLATION in config.enabled and _is_oscillating(
        tracker.history, config.oscillation_window
    ):
        a, b = tracker.history[-2].action, tracker.history[-1].action
        return RegulationSignal(
            level=RegulationLevel.WARNING,
            message=(
                f"Warning: alternating between '{a}' and '{b}' is not making progress. "
                "Break the cycle."
            ),
            detector_id=DETECTOR_OSCILLATION,
        )

    return EMPTY_SIGNAL
