"""Episode log persistence: versioned JSONL plus a deterministic sorted view.

Rows are written in completion order (parallel runs finish when they
finish), so the log itself is not byte-stable.  A companion `.sorted.jsonl`
file holds the same rows ordered by episode_id; that artifact is
byte-identical across reruns of the same configuration and is what
reproducibility checks compare.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Any, Iterable

from harnesskit.realization import DecisionKind, RescuePath
from harnesskit.regulation import RegulationLevel, RegulationSignal
from harnesskit.runtime import EpisodeRecord, StepRecord

SCHEMA_VERSION = 1

SORTED_SUFFIX = ".sorted.jsonl"


class SchemaVersionError(ValueError):
    """Log row written by an incompatible schema."""


def derive_episode_seed(base_seed: int, task_id: str, run_index: int) -> int:
    """Stable per-episode seed; avoids correlated streams across tasks/runs."""
    digest = hashlib.sha256(f"{base_seed}:{task_id}:{run_index}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") & (2**63 - 1)


def episode_id(task_id: str, run_index: int, seed: int) -> str:
    digest = hashlib.sha256(f"{task_id}:{run_index}:{seed}".encode("utf-8")).hexdigest()
    return digest[:16]


def contract_digest(rendered_contract: str) -> str:
    return hashlib.sha256(rendered_contract.encode("utf-8")).hexdigest()[:16]


def _step_to_dict(step: StepRecord) -> dict[str, Any]:
    decision = {
        "kind": step.decision.kind.value,
        "action": step.decision.action,
        "block_message": step.decision.block_message,
        "canonicalized": step.decision.canonicalized,
        "rescue_path": step.decision.rescue_path.value,
    }
    regulation = {
        "level": step.regulation.level.name.lower(),
        "message": step.regulation.message,
        "suggested_action": step.regulation.suggested_action,
        "detector_id": step.regulation.detector_id,
    }
    return {
        "index": step.index,
        "raw_model_output": step.raw_model_output,
        "decision": decision,
        "observation": step.observation,
        "regulation": regulation,
        "remaining_budget": step.remaining_budget,
    }


def build_row(
    record: EpisodeRecord,
    *,
    task_id: str,
    environment_id: str,
    policy_id: str,
    intervention_set_id: str,
    intervention_set_version: int,
    run_index: int,
    task_kind: str,
    rendered_contract: str,
) -> dict[str, Any]:
    return {
        "schema_version": SCHEMA_VERSION,
        "episode_id": episode_id(task_id, run_index, record.seed),
        "task_id": task_id,
        "environment_id": environment_id,
        "policy_id": policy_id,
        "intervention_set_id": intervention_set_id,
        "intervention_set_version": intervention_set_version,
        "run_index": run_index,
        "seed": record.seed,
        "outcome": record.trajectory.outcome.value if record.trajectory.outcome else "",
        "reward": record.reward,
        "wall_steps": record.wall_steps,
        "task_kind": task_kind,
        "instruction": record.trajectory.task.instruction,
        "initial_observation": record.trajectory.initial_observation,
        "contract_digest": contract_digest(rendered_contract),
        "fault_note": record.fault_note,
        "steps": [_step_to_dict(s) for s in record.trajectory.steps],
    }


def serialize_row(row: dict[str, Any]) -> str:
    return json.dumps(row, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def parse_row(line: str) -> dict[str, Any]:
    row = json.loads(line)
    version = row.get("schema_version")
    if version != SCHEMA_VERSION:
        raise SchemaVersionError(f"unsupported schema_version {version!r}, expected {SCHEMA_VERSION}")
    return row


def sorted_companion_path(path: str | Path) -> Path:
    path = Path(path)
    return path.with_name(path.name.rsplit(".jsonl", 1)[0] + SORTED_SUFFIX)


def write_log(rows: Iterable[dict[str, Any]], path: str | Path) -> Path:
    """Write rows as given, then the episode_id-sorted companion file."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    materialized = list(rows)
    with path.open("w", encoding="utf-8") as handle:
        for row in materialized:
            handle.write(serialize_row(row) + "\n")
    ordered = sorted(materialized, key=lambda r: str(r["episode_id"]))
    companion = sorted_companion_path(path)
    with companion.open("w", encoding="utf-8") as handle:
        for row in ordered:
            handle.write(serialize_row(row) + "\n")
    return path


def read_log(path: str | Path) -> list[dict[str, Any]]:
    rows = []
    with Path(path).open("r", encoding="utf-8") as handle:
        for line in handle:
            line = line.strip()
            if line:
                rows.append(parse_row(line))
    return rows


# --- structured round-trip back to runtime objects -----------------------------


def decision_from_dict(doc: dict[str, Any]) -> Any:
    from harnesskit.realization import RealizationDecision

    return RealizationDecision(
        kind=DecisionKind(doc["kind"]),
        action=doc.get("action"),
        block_message=doc.get("block_message"),
        canonicalized=bool(doc.get("canonicalized", False)),
        rescue_path=RescuePath(doc.get("rescue_path", RescuePath.NONE.value)),
    )


def signal_from_dict(doc: dict[str, Any]) -> RegulationSignal:
    return RegulationSignal(
        level=RegulationLevel[doc["level"].upper()],
        message=doc.get("message", ""),
        suggested_action=doc.get("suggested_action"),
        detector_id=doc.get("detector_id", ""),
    )
