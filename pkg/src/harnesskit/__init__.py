"""Runtime harness for frozen text-emitting agent policies.

Wraps a fixed policy with four adaptable layers: an explicit environment
contract, retrieved skills, action realization with gate rules, and
trajectory regulation.  Harness capability lives in versioned intervention
sets that an offline loop evolves against diagnosed failures while the
policy stays untouched.
"""

from __future__ import annotations

__version__ = "0.1.0"

from harnesskit.contract import Contract, ContractDelta, ToolParam, ToolSpec
from harnesskit.interventions import InterventionSet, PASS_THROUGH
from harnesskit.runtime import (
    Budget,
    EpisodeRecord,
    Outcome,
    TaskSpec,
    Trajectory,
    run_episode,
)

__all__ = [
    "Budget",
    "Contract",
    "ContractDelta",
    "EpisodeRecord",
    "InterventionSet",
    "Outcome",
    "PASS_THROUGH",
    "TaskSpec",
    "ToolParam",
    "ToolSpec",
    "Trajectory",
    "__version__",
    "run_episode",
]
