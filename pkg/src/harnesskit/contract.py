"""Model-visible interaction contracts and append-only contract amendments.

A contract describes, in text the policy can read, which tools exist, how they
are called, and how the final answer must be shaped.  Harness interventions
never rewrite that base text; they append clearly separated notes.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Any

AMENDMENT_SEPARATOR = "\nNOTE: "
PITFALL_PREFIX = "Pitfall: "


class UnknownTool(KeyError):
    """Raised when a delta amends a tool the contract does not define."""


@dataclass(frozen=True)
class ToolParam:
    name: str
    semantic_type: str = "text"
    required: bool = True


@dataclass(frozen=True)
class ToolSpec:
    """One callable tool: name, description, ordered parameters, admissibility note."""

    name: str
    description: str
    parameters: tuple[ToolParam, ...] = ()
    admissibility_note: str = ""

    def __post_init__(self) -> None:
        names = [p.name for p in self.parameters]
        if len(names) != len(set(names)):
            raise ValueError(f"duplicate parameter names in tool {self.name!r}")
        seen_optional = False
        for p in self.parameters:
            if not p.required:
                seen_optional = True
            elif seen_optional:
                # required-after-optional makes positional rescue ambiguous
                raise ValueError(f"required parameter after optional in tool {self.name!r}")

    @property
    def required_params(self) -> tuple[ToolParam, ...]:
        return tuple(p for p in self.parameters if p.required)


@dataclass(frozen=True)
class Contract:
    """Environment contract: the fixed, model-visible interaction rules."""

    environment_id: str
    tools: tuple[ToolSpec, ...] = ()
    policy_notes: tuple[str, ...] = ()
    answer_format: str = ""

    def __post_init__(self) -> None:
        names = [t.name for t in self.tools]
        if len(names) != len(set(names)):
            raise ValueError("duplicate tool names in contract")

    def tool(self, name: str) -> ToolSpec | None:
        for t in self.tools:
            if t.name == name:
                return t
        return None

    @property
    def tool_names(self) -> tuple[str, ...]:
        return tuple(t.name for t in self.tools)

    @property
    def command_tool(self) -> ToolSpec | None:
        """First declared tool; the target for fenced-block rescue."""
        return self.tools[0] if self.tools else None


@dataclass(frozen=True, eq=True)
class ContractDelta:
    """Append-only amendment: per-tool description notes, policy notes, pitfalls.

    ``environment_id`` scopes the delta when several environments share an
    intervention set; empty string means "applies to any contract".
    """

    delta_id: str
    environment_id: str = ""
    tool_amendments: tuple[tuple[str, str], ...] = ()
    added_policy_notes: tuple[str, ...] = ()
    pitfalls: tuple[str, ...] = ()


def apply_delta(contract: Contract, delta: ContractDelta) -> Contract:
    """Append a delta to a contract without touching existing text.

    Idempotent by content: an amendment or note that is already present is
    skipped, so applying the same delta twice equals applying it once.
    """
    if delta.environment_id and delta.environment_id != contract.environment_id:
        return contract
    known = set(contract.tool_names)
    for tool_name, _ in delta.tool_amendments:
        if tool_name not in known:
            raise UnknownTool(tool_name)

    tools = list(contract.tools)
    for tool_name, text in delta.tool_amendments:
        idx = next(i for i, t in enumerate(tools) if t.name == tool_name)
        addition = AMENDMENT_SEPARATOR + text
        if addition not in tools[idx].description:
            tools[idx] = replace(tools[idx], description=tools[idx].description + addition)

    notes = list(contract.policy_notes)
    for note in delta.added_policy_notes:
        if note not in notes:
            notes.append(note)
    for pitfall in delta.pitfalls:
        note = PITFALL_PREFIX + pitfall
        if note not in notes:
            notes.append(note)

    return replace(contract, tools=tuple(tools), policy_notes=tuple(notes))


def render_contract(contract: Contract) -> str:
    """Deterministic plain-text rendering shown to the policy."""
    lines = [f"=== ENVIRONMENT CONTRACT: {contract.environment_id} ==="]
    if contract.tools:
        lines.append("TOOLS:")
        for tool in contract.tools:
            lines.append(f"- {tool.name}")
            for text_line in tool.description.splitlines():
                lines.append(f"    {text_line}")
            if tool.parameters:
                rendered = ", ".join(
                    f"{p.name} ({p.semantic_type}, {'required' if p.required else 'optional'})"
                    for p in tool.parameters
                )
                lines.append(f"    parameters: {rendered}")
            if tool.admissibility_note:
                lines.append(f"    admissibility: {tool.admissibility_note}")
    if contract.policy_notes:
        lines.append("POLICY NOTES:")
        for note in contract.policy_notes:
            lines.append(f"- {note}")
    if contract.answer_format:
        lines.append("ANSWER FORMAT:")
        lines.append(contract.answer_format)
    return "\n".join(lines)


def delta_from_dict(doc: dict[str, Any]) -> ContractDelta:
    """Parse one delta document (one document per delta)."""
    amendments = doc.get("tool_amendments") or {}
    if isinstance(amendments, dict):
        pairs = tuple(sorted(amendments.items()))
    else:
        pairs = tuple((str(k), str(v)) for k, v in amendments)
    return ContractDelta(
        delta_id=str(doc["delta_id"]),
        environment_id=str(doc.get("environment_id", "")),
        tool_amendments=pairs,
        added_policy_notes=tuple(doc.get("added_policy_notes") or ()),
        pitfalls=tuple(doc.get("pitfalls") or ()),
    )


def delta_to_dict(delta: ContractDelta) -> dict[str, Any]:
    return {
        "delta_id": delta.delta_id,
        "environment_id": delta.environment_id,
        "tool_amendments": {k: v for k, v in delta.tool_amendments},
        "added_policy_notes": list(delta.added_policy_notes),
        "pitfalls": list(delta.pitfalls),
    }
