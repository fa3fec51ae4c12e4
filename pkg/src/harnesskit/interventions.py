"""Versioned, freezable sets of harness interventions.

An intervention targets exactly one layer: contract amendments, retrievable
skills, action gate rules, or regulation detector configs.  A set is the
deployable unit: evolution grows it one accepted intervention at a time,
bumping the version, and freezing it makes it immutable so evaluation splits
can insist on a fixed artifact.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path
from typing import Any

import yaml

from harnesskit.contract import ContractDelta, delta_from_dict, delta_to_dict
from harnesskit.realization import GateRule, rule_from_dict, rule_to_dict
from harnesskit.regulation import DetectorConfig, config_from_dict, config_to_dict
from harnesskit.skills import Skill, SkillLibrary, skill_from_dict, skill_to_dict


class Layer(Enum):
    CONTRACT = "contract"
    SKILL = "skill"
    ACTION = "action"
    REGULATION = "regulation"


Payload = ContractDelta | Skill | GateRule | DetectorConfig

_PAYLOAD_TYPES = {
    Layer.CONTRACT: ContractDelta,
    Layer.SKILL: Skill,
    Layer.ACTION: GateRule,
    Layer.REGULATION: DetectorConfig,
}


class FrozenSetError(RuntimeError):
    """Raised on any attempt to mutate a frozen intervention set."""


@dataclass(frozen=True)
class Intervention:
    intervention_id: str
    layer: Layer
    payload: Payload
    provenance: str = ""

    def __post_init__(self) -> None:
        expected = _PAYLOAD_TYPES[self.layer]
        if not isinstance(self.payload, expected):
            raise TypeError(
                f"intervention '{self.intervention_id}' layer {self.layer.value} "
                f"expects {expected.__name__}, got {type(self.payload).__name__}"
            )


@dataclass(frozen=True)
class InterventionSet:
    set_id: str
    version: int = 0
    interventions: tuple[Intervention, ...] = ()
    frozen: bool = False

    def __post_init__(self) -> None:
        seen = set()
        for iv in self.interventions:
            if iv.intervention_id in seen:
                raise ValueError(f"duplicate intervention id '{iv.intervention_id}'")
            seen.add(iv.intervention_id)

    def with_added(self, intervention: Intervention) -> InterventionSet:
        if self.frozen:
            raise FrozenSetError(f"intervention set '{self.set_id}' is frozen")
        return replace(
            self,
            interventions=self.interventions + (intervention,),
            version=self.version + 1,
        )

    def ids(self) -> tuple[str, ...]:
        return tuple(iv.intervention_id for iv in self.interventions)


PASS_THROUGH = InterventionSet(set_id="pass-through", version=0, interventions=(), frozen=True)


def freeze(intervention_set: InterventionSet) -> InterventionSet:
    if intervention_set.frozen:
        return intervention_set
    return replace(intervention_set, frozen=True)


def thaw_copy(intervention_set: InterventionSet, new_id: str) -> InterventionSet:
    """Mutable working copy under a new identity (the original stays frozen)."""
    return InterventionSet(
        set_id=new_id,
        version=intervention_set.version,
        interventions=intervention_set.interventions,
        frozen=False,
    )


# --- serialization ------------------------------------------------------------


def intervention_from_dict(doc: dict[str, Any]) -> Intervention:
    layer = Layer(doc["layer"])
    payload_doc = doc["payload"]
    if layer is Layer.CONTRACT:
        payload: Payload = delta_from_dict(payload_doc)
    elif layer is Layer.SKILL:
        payload = skill_from_dict(payload_doc)
    elif layer is Layer.ACTION:
        payload = rule_from_dict(payload_doc)
    else:
        payload = config_from_dict(payload_doc)
    return Intervention(
        intervention_id=doc["intervention_id"],
        layer=layer,
        payload=payload,
        provenance=doc.get("provenance", ""),
    )


def intervention_to_dict(intervention: Intervention) -> dict[str, Any]:
    payload = intervention.payload
    if isinstance(payload, ContractDelta):
        payload_doc = delta_to_dict(payload)
    elif isinstance(payload, Skill):
        payload_doc = skill_to_dict(payload)
    elif isinstance(payload, GateRule):
        payload_doc = rule_to_dict(payload)
    else:
        payload_doc = config_to_dict(payload)
    doc: dict[str, Any] = {
        "intervention_id": intervention.intervention_id,
        "layer": intervention.layer.value,
        "payload": payload_doc,
    }
    if intervention.provenance:
        doc["provenance"] = intervention.provenance
    return doc


def set_to_dict(intervention_set: InterventionSet) -> dict[str, Any]:
    return {
        "set_id": intervention_set.set_id,
        "version": intervention_set.version,
        "frozen": intervention_set.frozen,
        "interventions": [intervention_to_dict(iv) for iv in intervention_set.interventions],
    }


def set_from_dict(doc: dict[str, Any]) -> InterventionSet:
    return InterventionSet(
        set_id=doc["set_id"],
        version=int(doc.get("version", 0)),
        interventions=tuple(intervention_from_dict(d) for d in doc.get("interventions", [])),
        frozen=bool(doc.get("frozen", False)),
    )


def save_set(intervention_set: InterventionSet, path: str | Path) -> None:
    text = yaml.safe_dump(set_to_dict(intervention_set), sort_keys=True, default_flow_style=False)
    Path(path).write_text(text, encoding="utf-8")


def load_set(path: str | Path) -> InterventionSet:
    doc = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
    return set_from_dict(doc)


def load_intervention_file(path: str | Path) -> Intervention:
    doc = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
    return intervention_from_dict(doc)


def load_registry(directory: str | Path) -> list[Intervention]:
    """Candidate interventions from a directory, in sorted filename order."""
    root = Path(directory)
    candidates = []
    for path in sorted(root.glob("*.yaml")):
        candidates.append(load_intervention_file(path))
    return candidates


# --- assembly -------------------------------------------------------------------


@dataclass(frozen=True)
class HarnessBundle:
    """Layer-sorted view of one intervention set for a given environment."""

    deltas: tuple[ContractDelta, ...] = ()
    skills: tuple[Skill, ...] = ()
    gate_rules: tuple[GateRule, ...] = ()
    detector_config: DetectorConfig | None = None
    skill_top_k: int = 1

    def skill_library(self) -> SkillLibrary:
        return SkillLibrary(skills=self.skills)


def assemble(
    intervention_set: InterventionSet,
    environment_id: str,
    disabled_layers: frozenset[str] | set[str] = frozenset(),
) -> HarnessBundle:
    """Split a set into per-layer payloads scoped to one environment.

    disabled_layers names Layer values to ignore wholesale, which is how
    ablations and fault-localization runs are expressed.
    """
    disabled = {Layer(v) if not isinstance(v, Layer) else v for v in disabled_layers}
    deltas: list[ContractDelta] = []
    skills: list[Skill] = []
    rules: list[GateRule] = []
    detector: DetectorConfig | None = None
    for iv in intervention_set.interventions:
        if iv.layer in disabled:
            continue
        payload = iv.payload
        scope = getattr(payload, "environment_id", "")
        if scope and scope != environment_id:
            continue
        if iv.layer is Layer.CONTRACT:
            deltas.append(payload)  # type: ignore[arg-type]
        elif iv.layer is Layer.SKILL:
            skills.append(payload)  # type: ignore[arg-type]
        elif iv.layer is Layer.ACTION:
            rules.append(payload)  # type: ignore[arg-type]
        else:
            detector = payload  # type: ignore[assignment]  # last one wins
    rules.sort(key=lambda r: r.rule_id)
    return HarnessBundle(
        deltas=tuple(deltas),
        skills=tuple(skills),
        gate_rules=tuple(rules),
        detector_config=detector,
    )
