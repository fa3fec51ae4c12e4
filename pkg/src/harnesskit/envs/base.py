"""Shared environment interface: deterministic worlds with declared evidence."""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Any

if TYPE_CHECKING:  # pragma: no cover
    from ..runtime import TaskSpec


class UnknownTask(KeyError):
    """Raised when a task references a world the environment cannot build."""


@dataclass(frozen=True)
class EnvironmentEvidence:
    """Deterministic, state-derived facts the harness may consult.

    ``admissible_actions`` is exhaustive for text-command environments and
    empty for tool-call environments (which expose ``schema_map`` instead).
    ``progress_facts`` never reveals more of the success criterion than the
    task instruction and observations already did.
    """

    admissible_actions: tuple[str, ...] = ()
    no_op_phrases: tuple[str, ...] = ()
    progress_facts: dict[str, Any] = field(default_factory=dict)
    schema_map: dict[str, tuple[str, ...]] | None = None


class Environment(ABC):
    """Deterministic episodic environment.

    Transitions are pure functions of (state, action); the construction seed
    is spent entirely on world generation.  ``clone`` must produce a state
    whose future behaviour is indistinguishable from the original's.
    """

    environment_id: str = ""
    initial_observation: str = ""

    @abstractmethod
    def step(self, action: str) -> str:
        """Apply one action string and return the observation."""

    @abstractmethod
    def is_end(self, observation: str = "") -> bool:
        """True once the episode is over from the environment's view."""

    @abstractmethod
    def evaluate(self, task: "TaskSpec") -> float:
        """Binary reward for the current (usually final) state."""

    @abstractmethod
    def evidence(self) -> EnvironmentEvidence:
        """Current evidence snapshot, derived from state alone."""

    @abstractmethod
    def clone(self) -> "Environment":
        """Deep copy with identical future behaviour."""

    @abstractmethod
    def state_fingerprint(self) -> str:
        """Stable digest of the full mutable state, for purity checks."""
