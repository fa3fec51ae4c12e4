"""Action realization: turn raw model output into exactly one EXEC or BLOCK.

The pipeline is fixed:

1. structured tool calls pass through if they name a contract tool with all
   required arguments;
2. otherwise a rescue ladder (JSON object, keyword call, fenced block,
   XML-like tags) tries to recover a well-formed call;
3. the candidate is fuzzily snapped onto the admissible set when the
   environment publishes one (high string similarity plus verb agreement,
   unique target only);
4. gate rules from the active intervention set run in rule-id order; a
   canonicalize effect rewrites the candidate and evaluation continues, the
   first block effect wins.

Nothing here invents arguments: a rescue that cannot fill every required
parameter is abandoned and the raw text goes to the environment as-is.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Iterable, Sequence

from harnesskit.contract import Contract
from harnesskit.envs import sql
from harnesskit.envs.base import EnvironmentEvidence

SIMILARITY_THRESHOLD = 0.85
# identical blocked attempts before the block message starts listing alternatives
BLOCK_ESCALATION_AFTER = 2

VERB_ALIASES = {"goto": "go", "grab": "take", "place": "put"}


class DecisionKind(Enum):
    EXEC = "exec"
    BLOCK = "block"


class RescuePath(Enum):
    NONE = "none"
    JSON = "json"
    KEYWORD = "keyword"
    FENCED = "fenced"
    XML_LIKE = "xml_like"


@dataclass(frozen=True)
class ToolCall:
    name: str
    arguments: dict[str, Any] = field(default_factory=dict)


@dataclass(frozen=True)
class RawModelOutput:
    text: str
    tool_call: ToolCall | None = None


@dataclass(frozen=True)
class RealizationDecision:
    kind: DecisionKind
    action: str | None = None
    block_message: str | None = None
    canonicalized: bool = False
    rescue_path: RescuePath = RescuePath.NONE

    def __post_init__(self) -> None:
        if self.kind is DecisionKind.EXEC:
            if self.action is None or self.block_message is not None:
                raise ValueError("EXEC carries an action and no block message")
        else:
            if self.block_message is None or self.action is not None:
                raise ValueError("BLOCK carries a block message and no action")


# --- string similarity -----------------------------------------------------


def levenshtein(a: str, b: str) -> int:
    if a == b:
        return 0
    if not a:
        return len(b)
    if not b:
        return len(a)
    previous = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        current = [i]
        for j, cb in enumerate(b, start=1):
            cost = 0 if ca == cb else 1
            current.append(min(previous[j] + 1, current[j - 1] + 1, previous[j - 1] + cost))
        previous = current
    return previous[len(b)]


def similarity(a: str, b: str) -> float:
    if not a and not b:
        return 1.0
    longest = max(len(a), len(b))
    return 1.0 - levenshtein(a, b) / longest


def _leading_verb(text: str) -> str:
    word = text.split(" ", 1)[0].lower() if text else ""
    return VERB_ALIASES.get(word, word)


def fuzzy_admissible(candidate: str, admissible: Sequence[str]) -> str | None:
    """The unique admissible action close to the candidate, if one exists.

    Closeness means similarity >= SIMILARITY_THRESHOLD and an agreeing
    leading verb (after alias folding); ties or no match return None.
    """
    text = " ".join(candidate.split())
    if not text or text in admissible:
        return None
    verb = _leading_verb(text)
    matches = [
        option
        for option in admissible
        if _leading_verb(option) == verb
        and similarity(text.lower(), option.lower()) >= SIMILARITY_THRESHOLD
    ]
    if len(matches) == 1:
        return matches[0]
    return None


# --- canonical call syntax ---------------------------------------------------

_STRICT_CALL_RE = re.compile(
    r'^\s*([A-Za-z_][A-Za-z0-9_]*)\s*\(\s*"((?:[^"\\]|\\.)*)"\s*\)\s*$', re.DOTALL
)


def parse_call_text(text: str) -> tuple[str, str] | None:
    """Parse canonical `tool("arg")` syntax; (tool, unescaped arg) or None."""
    m = _STRICT_CALL_RE.match(text)
    if m is None:
        return None
    return m.group(1), re.sub(r'\\(["\\])', r"\1", m.group(2))


def render_call_text(tool: str, arg: str) -> str:
    escaped = str(arg).replace("\\", "\\\\").replace('"', '\\"')
    return f'{tool}("{escaped}")'


def _validated_call(contract: Contract, name: str, arguments: dict[str, Any]) -> ToolCall | None:
    """Keep only declared parameters; reject missing required ones."""
    if name not in contract.tool_names:
        return None
    spec = contract.tool(name)
    declared = {p.name for p in spec.parameters}
    kept = {k: v for k, v in arguments.items() if k in declared}
    for param in spec.required_params:
        if param.name not in kept:
            return None
    return ToolCall(name=name, arguments=kept)


def _call_to_action(call: ToolCall, contract: Contract, text_mode: bool) -> str:
    spec = contract.tool(call.name) if call.name in contract.tool_names else None
    if spec is not None:
        ordered = [p.name for p in spec.parameters if p.name in call.arguments]
    else:
        ordered = list(call.arguments)
    values = [str(call.arguments[k]) for k in ordered]
    if text_mode:
        # text environments take the command itself, not a rendered call
        return values[0] if values else call.name
    if len(values) == 1:
        return render_call_text(call.name, values[0])
    joined = ", ".join(f'"{v}"' for v in values)
    return f"{call.name}({joined})"


# --- rescue ladder ---------------------------------------------------------


def _balanced_json_spans(text: str) -> Iterable[str]:
    depth = 0
    start = -1
    in_string = False
    escaped = False
    for i, ch in enumerate(text):
        if in_string:
            if escaped:
                escaped = False
            elif ch == "\\":
                escaped = True
            elif ch == '"':
                in_string = False
            continue
        if ch == '"':
            in_string = True
        elif ch == "{":
            if depth == 0:
                start = i
            depth += 1
        elif ch == "}" and depth > 0:
            depth -= 1
            if depth == 0:
                yield text[start : i + 1]
    return


def _rescue_json(text: str, contract: Contract) -> ToolCall | None:
    for span in _balanced_json_spans(text):
        try:
            doc = json.loads(span)
        except json.JSONDecodeError:
            continue
        if not isinstance(doc, dict):
            continue
        name = doc.get("name") or doc.get("tool")
        if not isinstance(name, str):
            continue
        arguments = doc.get("arguments", doc.get("args", {}))
        if not isinstance(arguments, dict):
            continue
        call = _validated_call(contract, name, arguments)
        if call is not None:
            return call
    return None


_KEYWORD_CALL_RE = re.compile(r"^\s*([A-Za-z_][A-Za-z0-9_]*)\s*\((.*)\)\s*[.;]?\s*$")
_NAME_COLON_RE = re.compile(r"^\s*([A-Za-z_][A-Za-z0-9_]*)\s*:\s*(.+?)\s*$")


def _split_call_args(body: str) -> list[str]:
    parts: list[str] = []
    buf: list[str] = []
    quote: str | None = None
    escaped = False
    for ch in body:
        if quote is not None:
            buf.append(ch)
            if escaped:
                escaped = False
            elif ch == "\\":
                escaped = True
            elif ch == quote:
                quote = None
            continue
        if ch in "\"'":
            quote = ch
            buf.append(ch)
        elif ch == ",":
            parts.append("".join(buf))
            buf = []
        else:
            buf.append(ch)
    parts.append("".join(buf))
    return [p.strip() for p in parts]


def _unquote(value: str) -> str:
    if len(value) >= 2 and value[0] == value[-1] and value[0] in "\"'":
        inner = value[1:-1]
        return re.sub(r"\\([\"'\\])", r"\1", inner)
    return value


def _rescue_keyword(text: str, contract: Contract) -> ToolCall | None:
    for line in text.splitlines():
        m = _KEYWORD_CALL_RE.match(line)
        if m is not None:
            name, body = m.group(1), m.group(2)
            if name not in contract.tool_names:
                continue
            spec = contract.tool(name)
            arguments: dict[str, Any] = {}
            positional: list[str] = []
            if body.strip():
                for piece in _split_call_args(body):
                    kv = re.match(r"^([A-Za-z_][A-Za-z0-9_]*)\s*=\s*(.+)$", piece)
                    if kv is not None and kv.group(1) in {p.name for p in spec.parameters}:
                        arguments[kv.group(1)] = _unquote(kv.group(2).strip())
                    else:
                        positional.append(_unquote(piece))
            free_params = [p for p in spec.parameters if p.name not in arguments]
            if len(positional) > len(free_params):
                continue  # never drop argument content silently
            for param, value in zip(free_params, positional):
                arguments[param.name] = value
            call = _validated_call(contract, name, arguments)
            if call is not None:
                return call
        m = _NAME_COLON_RE.match(line)
        if m is not None and m.group(1) in contract.tool_names:
            spec = contract.tool(m.group(1))
            required = spec.required_params
            if len(required) == 1:
                call = _validated_call(contract, spec.name, {required[0].name: m.group(2)})
                if call is not None:
                    return call
    return None


_FENCE_RE = re.compile(r"```[a-zA-Z0-9_-]*\n(.*?)```", re.DOTALL)


def _rescue_fenced(text: str, contract: Contract) -> ToolCall | None:
    command = contract.command_tool
    if command is None:
        return None
    required = command.required_params
    if len(required) != 1:
        return None
    m = _FENCE_RE.search(text)
    if m is None:
        return None
    content = m.group(1).strip()
    if not content:
        return None
    inner = parse_call_text(content)
    if inner is not None:
        call = _validated_call(contract, inner[0], _single_arg(contract, inner[0], inner[1]))
        if call is not None:
            return call
    return _validated_call(contract, command.name, {required[0].name: content})


def _single_arg(contract: Contract, name: str, value: str) -> dict[str, Any]:
    if name in contract.tool_names:
        required = contract.tool(name).required_params
        if len(required) == 1:
            return {required[0].name: value}
    return {}


_XML_RE = re.compile(r"<([A-Za-z_][A-Za-z0-9_]*)(?:\s[^<>]*)?>(.*?)</\1>", re.DOTALL)


def _rescue_xml(text: str, contract: Contract) -> ToolCall | None:
    for m in _XML_RE.finditer(text):
        name, inner = m.group(1), m.group(2).strip()
        if name not in contract.tool_names:
            continue
        required = contract.tool(name).required_params
        if len(required) == 1 and inner:
            call = _validated_call(contract, name, {required[0].name: inner})
            if call is not None:
                return call
    return None


def rescue_tool_call(text: str, contract: Contract) -> tuple[ToolCall, RescuePath] | None:
    """Try each recovery path in a fixed order; first hit wins."""
    ladder = (
        (_rescue_json, RescuePath.JSON),
        (_rescue_keyword, RescuePath.KEYWORD),
        (_rescue_fenced, RescuePath.FENCED),
        (_rescue_xml, RescuePath.XML_LIKE),
    )
    for attempt, path in ladder:
        call = attempt(text, contract)
        if call is not None:
            return call, path
    return None


# --- canonicalize ops (gate-rule effects) ---------------------------------------


def extract_admissible(candidate: str, admissible: Sequence[str]) -> str | None:
    """The unique maximal admissible action embedded in the candidate text."""
    text = " ".join(candidate.split())
    if not text or text in admissible:
        return None
    lowered = text.lower()
    found = []
    for option in admissible:
        pattern = r"(?<![a-z0-9])" + re.escape(option.lower()) + r"(?![a-z0-9])"
        if re.search(pattern, lowered):
            found.append(option)
    maximal = [
        a for a in found if not any(a != b and a.lower() in b.lower() for b in found)
    ]
    if len(maximal) == 1:
        return maximal[0]
    return None


_SQL_START_RE = re.compile(r"(?i)\b(select|insert|update|delete)\b")


def extract_sql_call(candidate: str, execute_tool: str = "execute_query") -> str | None:
    """Lift a SQL statement out of surrounding prose into a canonical call."""
    if parse_call_text(candidate) is not None:
        return None
    m = _SQL_START_RE.search(candidate)
    if m is None:
        return None
    statement = candidate[m.start() :].strip()
    statement = statement.rstrip(".!?\"'`").rstrip()
    while statement.endswith(")") and statement.count(")") > statement.count("("):
        statement = statement[:-1].rstrip().rstrip(".!?\"'`").rstrip()
    if not statement:
        return None
    return render_call_text(execute_tool, statement)


_ANSWER_RE = re.compile(r"(?i)\b(?:final\s+)?answer\s*(?:is|:)\s*(.+?)\s*$")


def extract_answer_call(candidate: str, commit_tool: str = "commit_final_answer") -> str | None:
    """Lift 'the answer is X' prose into a canonical commit call."""
    if parse_call_text(candidate) is not None:
        return None
    m = _ANSWER_RE.search(" ".join(candidate.split()))
    if m is None:
        return None
    value = m.group(1).strip().rstrip(".!?").strip()
    if len(value) >= 2 and value[0] == value[-1] and value[0] in "\"'`":
        value = value[1:-1].strip()
    if not value:
        return None
    return render_call_text(commit_tool, value)


def repair_backticks(query: str, schema_names: Iterable[str]) -> str:
    """Backtick-quote schema identifiers that break parsing; only adopt the
    rewrite if it turns an unparseable statement into a parseable one."""
    try:
        sql.parse(query)
        return query
    except sql.SqlError:
        pass
    flagged = [
        name
        for name in schema_names
        if " " in name or name.lower() in sql.KEYWORDS
    ]
    if not flagged:
        return query
    flagged.sort(key=len, reverse=True)

    segments: list[tuple[bool, str]] = []
    buf: list[str] = []
    in_literal = False
    i = 0
    while i < len(query):
        ch = query[i]
        if in_literal:
            buf.append(ch)
            if ch == "'":
                if i + 1 < len(query) and query[i + 1] == "'":
                    buf.append("'")
                    i += 2
                    continue
                segments.append((True, "".join(buf)))
                buf = []
                in_literal = False
            i += 1
            continue
        if ch == "'":
            if buf:
                segments.append((False, "".join(buf)))
            buf = [ch]
            in_literal = True
            i += 1
            continue
        buf.append(ch)
        i += 1
    if buf:
        segments.append((in_literal, "".join(buf)))

    rewritten = []
    for is_literal, segment in segments:
        if not is_literal:
            for name in flagged:
                pattern = re.compile(
                    r"(?<![\w`])" + re.escape(name) + r"(?![\w`])", re.IGNORECASE
                )
                segment = pattern.sub(f"`{name}`", segment)
        rewritten.append(segment)
    repaired = "".join(rewritten)
    if repaired == query:
        return query
    try:
        sql.parse(repaired)
    except sql.SqlError:
        return query
    return repaired


def _op_backtick_repair(candidate: str, evidence: EnvironmentEvidence) -> str | None:
    parsed = parse_call_text(candidate)
    if parsed is None or evidence.schema_map is None:
        return None
    tool, arg = parsed
    if tool != "execute_query":
        return None
    names: list[str] = list(evidence.schema_map)
    for columns in evidence.schema_map.values():
        names.extend(columns)
    repaired = repair_backticks(arg, names)
    if repaired == arg:
        return None
    return render_call_text(tool, repaired)


def _op_null_answer_zero(candidate: str) -> str | None:
    parsed = parse_call_text(candidate)
    if parsed is None:
        return None
    tool, arg = parsed
    if tool != "commit_final_answer" or arg.strip() != "NULL":
        return None
    return render_call_text(tool, "0")


# --- gate rules ----------------------------------------------------------------


@dataclass(frozen=True)
class GateRule:
    """Declarative trigger/effect pair evaluated against the action context."""

    rule_id: str
    trigger: dict[str, Any]
    effect: dict[str, Any]
    environment_id: str = ""
    description: str = ""

    def __post_init__(self) -> None:
        keys = set(self.effect)
        if not keys & {"block", "canonicalize"}:
            raise ValueError(f"rule '{self.rule_id}' effect must block or canonicalize")


def rule_from_dict(doc: dict[str, Any]) -> GateRule:
    return GateRule(
        rule_id=doc["rule_id"],
        trigger=doc.get("trigger", {}),
        effect=doc["effect"],
        environment_id=doc.get("environment_id", ""),
        description=doc.get("description", ""),
    )


def rule_to_dict(rule: GateRule) -> dict[str, Any]:
    doc: dict[str, Any] = {
        "rule_id": rule.rule_id,
        "trigger": rule.trigger,
        "effect": rule.effect,
    }
    if rule.environment_id:
        doc["environment_id"] = rule.environment_id
    if rule.description:
        doc["description"] = rule.description
    return doc


def _lookup(context: dict[str, Any], dotted: str) -> Any:
    node: Any = context
    for part in dotted.split("."):
        if isinstance(node, dict) and part in node:
            node = node[part]
        else:
            return None
    return node


def _eval_leaf(leaf: dict[str, Any], context: dict[str, Any]) -> bool:
    value = _lookup(context, leaf["field"])
    op = leaf["op"]
    if op in ("in_field", "not_in_field"):
        target = _lookup(context, leaf["value"])
        hit = isinstance(target, (list, tuple)) and value in target
        return hit if op == "in_field" else not hit
    literal = leaf.get("value")
    if op == "eq":
        return value == literal
    if op == "ne":
        return value != literal
    if op == "gt":
        return value is not None and value > literal
    if op == "lt":
        return value is not None and value < literal
    if op == "in":
        return value in literal
    if op == "not_in":
        return value not in literal
    if op == "contains":
        return value is not None and str(literal) in str(value)
    if op == "not_contains":
        return value is None or str(literal) not in str(value)
    if op == "regex":
        return value is not None and re.search(str(literal), str(value)) is not None
    raise ValueError(f"unknown trigger op '{op}'")


def eval_trigger(trigger: dict[str, Any], context: dict[str, Any]) -> bool:
    if not trigger:
        return True
    if "all" in trigger:
        return all(eval_trigger(t, context) for t in trigger["all"])
    if "any" in trigger:
        return any(eval_trigger(t, context) for t in trigger["any"])
    if "not" in trigger:
        return not eval_trigger(trigger["not"], context)
    return _eval_leaf(trigger, context)


class _Template(dict):
    def __missing__(self, key: str) -> str:
        return ""


def _build_context(
    candidate: str,
    raw_text: str,
    contract: Contract,
    evidence: EnvironmentEvidence,
    trajectory: Any,
    repeat_blocks: int,
) -> dict[str, Any]:
    parsed = parse_call_text(candidate)
    steps = getattr(trajectory, "steps", ()) or ()
    last_observation = steps[-1].observation if steps else ""
    progress = dict(evidence.progress_facts)
    return {
        "action": {
            "candidate": candidate,
            "raw": raw_text,
            "tool": parsed[0] if parsed else "",
            "arg": parsed[1] if parsed else "",
            "is_call": parsed is not None,
            "first_word": _leading_verb(candidate),
            "text_mode": bool(evidence.admissible_actions),
        },
        "evidence": {
            "admissible": list(evidence.admissible_actions),
            "has_admissible": bool(evidence.admissible_actions),
            "noop_phrases": list(evidence.no_op_phrases),
            "progress": progress,
            "schema_tables": sorted(evidence.schema_map) if evidence.schema_map else [],
        },
        "contract": {
            "environment_id": contract.environment_id,
            "tool_names": list(contract.tool_names),
        },
        "trajectory": {
            "step_count": len(steps),
            "last_observation": last_observation,
            "repeat_blocks": repeat_blocks,
        },
    }


def _count_repeat_blocks(trajectory: Any, raw_text: str) -> int:
    normalized = " ".join(raw_text.split())
    count = 0
    for step in getattr(trajectory, "steps", ()) or ():
        decision = getattr(step, "decision", None)
        if decision is None or decision.kind is not DecisionKind.BLOCK:
            continue
        if " ".join(step.raw_model_output.split()) == normalized:
            count += 1
    return count


def _alternatives_suffix(contract: Contract, evidence: EnvironmentEvidence) -> str:
    if evidence.admissible_actions:
        listing = "; ".join(evidence.admissible_actions[:30])
        return f" Admissible actions: {listing}."
    usages = ", ".join(
        f'{t.name}("<{t.parameters[0].name}>")' if t.parameters else f"{t.name}()"
        for t in contract.tools
    )
    return f" Available calls: {usages}."


def _apply_canonicalize_op(
    op: str, candidate: str, contract: Contract, evidence: EnvironmentEvidence
) -> str | None:
    if op == "fuzzy_admissible":
        return fuzzy_admissible(candidate, evidence.admissible_actions)
    if op == "extract_admissible":
        return extract_admissible(candidate, evidence.admissible_actions)
    if op == "extract_sql_call":
        return extract_sql_call(candidate)
    if op == "extract_answer_call":
        return extract_answer_call(candidate)
    if op == "backtick_repair":
        return _op_backtick_repair(candidate, evidence)
    if op == "null_answer_zero":
        return _op_null_answer_zero(candidate)
    if op == "rescue_tool_call":
        rescued = rescue_tool_call(candidate, contract)
        if rescued is None:
            return None
        action = _call_to_action(rescued[0], contract, bool(evidence.admissible_actions))
        return action if action != candidate else None
    raise ValueError(f"unknown canonicalize op '{op}'")


# --- main entry point ------------------------------------------------------------


def realize_with_details(
    raw: RawModelOutput,
    trajectory: Any,
    contract: Contract,
    evidence: EnvironmentEvidence,
    gate_rules: Sequence[GateRule] = (),
) -> tuple[RealizationDecision, str]:
    """Realize one decision; also returns the final candidate string, which is
    the action a BLOCK refused (used by the block-soundness audit)."""
    text_mode = bool(evidence.admissible_actions)
    text = raw.text.strip()
    candidate = text
    canonicalized = False
    rescue_path = RescuePath.NONE

    if raw.tool_call is not None:
        call = _validated_call(contract, raw.tool_call.name, raw.tool_call.arguments)
        if call is not None:
            candidate = _call_to_action(call, contract, text_mode)
        else:
            values = ", ".join(f'"{v}"' for v in raw.tool_call.arguments.values())
            candidate = f"{raw.tool_call.name}({values})"
    elif text_mode or parse_call_text(text) is None:
        # text environments unwrap even canonical call syntax into the command
        rescued = rescue_tool_call(text, contract)
        if rescued is not None:
            action = _call_to_action(rescued[0], contract, text_mode)
            if action != text:
                candidate = action
                rescue_path = rescued[1]

    if text_mode and candidate not in evidence.admissible_actions:
        snapped = fuzzy_admissible(candidate, evidence.admissible_actions)
        if snapped is not None:
            candidate = snapped
            canonicalized = True

    repeat_blocks = _count_repeat_blocks(trajectory, raw.text)
    applicable = [
        r
        for r in sorted(gate_rules, key=lambda r: r.rule_id)
        if not r.environment_id or r.environment_id == contract.environment_id
    ]
    for rule in applicable:
        context = _build_context(candidate, text, contract, evidence, trajectory, repeat_blocks)
        if not eval_trigger(rule.trigger, context):
            continue
        if "canonicalize" in rule.effect:
            op = rule.effect["canonicalize"]["op"]
            rewritten = _apply_canonicalize_op(op, candidate, contract, evidence)
            if rewritten is not None and rewritten != candidate:
                candidate = rewritten
                canonicalized = True
            continue
        template = rule.effect["block"]["message"]
        fields = _Template(
            candidate=candidate,
            raw=text,
            tool=context["action"]["tool"],
            arg=context["action"]["arg"],
            rule_id=rule.rule_id,
        )
        message = template.format_map(fields)
        if repeat_blocks >= BLOCK_ESCALATION_AFTER:
            message += _alternatives_suffix(contract, evidence)
        decision = RealizationDecision(
            kind=DecisionKind.BLOCK,
            block_message=message,
            canonicalized=canonicalized,
            rescue_path=rescue_path,
        )
        return decision, candidate

    decision = RealizationDecision(
        kind=DecisionKind.EXEC,
        action=candidate,
        canonicalized=canonicalized,
        rescue_path=rescue_path,
    )
    return decision, candidate


def realize(
    raw: RawModelOutput,
    trajectory: Any,
    contract: Contract,
    evidence: EnvironmentEvidence,
    gate_rules: Sequence[GateRule] = (),
) -> RealizationDecision:
    decision, _ = realize_with_details(raw, trajectory, contract, evidence, gate_rules)
    return decision
