"""Frozen text policies: scripted fault families, replay, remote HTTP.

Scripted policies are deterministic functions of the rendered trajectory
plus a bound reference plan.  Each behavior models one recurring failure
mode of real models; crucially, every behavior consults only the rendered
text (contract, task, observations, NOTE lines), so harness-layer changes
are the only thing that can alter what it does.
"""

from __future__ import annotations

import json
import random
import re
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Sequence

from harnesskit import envs as env_registry
from harnesskit.contract import render_contract
from harnesskit.envs.base import Environment
from harnesskit.realization import RawModelOutput, ToolCall, parse_call_text, render_call_text
from harnesskit.runtime import PolicyFault, TaskSpec, Trajectory


class Behavior(Enum):
    ORACLE = "oracle"
    FREE_TEXT = "freetext"
    LOOP = "loop"
    WRONG_TOOL = "wrongtool"
    PREMATURE_COMMIT = "prematurecommit"
    FOLLOW_HINT = "followhint"


# config value asking bind_policy to pick the behavior from the task's family tag
FAMILY_DISPATCH = "family"

_ANSWER_TOOL_NOTE_RE = re.compile(r"ANSWER TOOL: `([A-Za-z_][A-Za-z0-9_]*)`")
_HINT_RE = re.compile(r"`([^`\n]+)`")


@dataclass(frozen=True)
class PolicyHandle:
    """Portable policy description; bind it to a task to get a runnable policy."""

    policy_id: str
    kind: str = "scripted"  # scripted | remote | replay
    config: dict[str, Any] = field(default_factory=dict)


def handle_from_dict(doc: dict[str, Any]) -> PolicyHandle:
    config = {k: v for k, v in doc.items() if k not in ("policy_id", "kind")}
    return PolicyHandle(
        policy_id=str(doc["policy_id"]),
        kind=str(doc.get("kind", "scripted")),
        config=config,
    )


def _step_index(rendered: str) -> int:
    return rendered.count("\nACTION: ")


def _note_count(rendered: str) -> int:
    return rendered.count("\nNOTE: ")


def _last_feedback(rendered: str) -> str:
    """Everything after the latest ACTION line (or the whole prompt at step 0)."""
    idx = rendered.rfind("\nACTION: ")
    if idx < 0:
        return rendered
    newline = rendered.find("\n", idx + 1)
    return rendered[newline:] if newline >= 0 else ""


def _last_hint(feedback: str) -> str | None:
    spans = [s for s in _HINT_RE.findall(feedback) if "<" not in s]
    return spans[-1] if spans else None


class ScriptedPolicy:
    """Plan-following policy with a selectable failure behavior."""

    def __init__(
        self,
        policy_id: str,
        behavior: Behavior,
        plan: Sequence[str],
        environment_id: str,
        *,
        seed: int = 0,
        fault_rate: float = 1.0,
        hint_compliance: float = 1.0,
    ):
        if not plan:
            raise ValueError("scripted policies need a non-empty plan")
        self.policy_id = policy_id
        self.behavior = behavior
        self.plan = list(plan)
        self.environment_id = environment_id
        self.seed = seed
        self.fault_rate = fault_rate
        self.hint_compliance = hint_compliance

    # deterministic per-step coin flips keyed by (seed, step index)
    def _roll(self, idx: int) -> float:
        return random.Random(f"{self.seed}:{idx}").random()

    def _filler(self) -> str:
        if self.environment_id == env_registry.gridhouse.ENVIRONMENT_ID:
            return "look"
        return self.plan[0]

    def _plan_step(self, idx: int) -> str:
        return self.plan[min(idx, len(self.plan) - 1)]

    def next_action(self, rendered: str, trajectory: Trajectory) -> RawModelOutput:
        idx = _step_index(rendered)
        if self.behavior is Behavior.ORACLE:
            return RawModelOutput(text=self._plan_step(idx))

        if self.behavior is Behavior.FREE_TEXT:
            action = self._plan_step(idx)
            if self._roll(idx) >= self.fault_rate:
                return RawModelOutput(text=action)
            call = parse_call_text(action)
            if call is None:
                return RawModelOutput(text=f"I think I should {action} now.")
            tool, arg = call
            if tool == "commit_final_answer":
                return RawModelOutput(text=f"I believe the answer is {arg}.")
            return RawModelOutput(text=f"I believe we should now run {arg}")

        if self.behavior is Behavior.LOOP:
            feedback = _last_feedback(rendered)
            if "\nNOTE: " in feedback:
                notes = _note_count(rendered)
                if self.environment_id == env_registry.gridhouse.ENVIRONMENT_ID:
                    return RawModelOutput(text=self._plan_step(notes - 1))
                return RawModelOutput(text=self._plan_step(notes))
            return RawModelOutput(text=self._filler())

        if self.behavior is Behavior.WRONG_TOOL:
            if idx < len(self.plan) - 1:
                return RawModelOutput(text=self.plan[idx])
            final = self.plan[-1]
            call = parse_call_text(final)
            if call is None:
                return RawModelOutput(text=final)
            _, arg = call
            note = _ANSWER_TOOL_NOTE_RE.search(rendered)
            tool = note.group(1) if note else "submit_answer"
            return RawModelOutput(text=render_call_text(tool, arg))

        if self.behavior is Behavior.PREMATURE_COMMIT:
            if "BEFORE COMMIT" in rendered:
                return RawModelOutput(text=self._plan_step(idx))
            return RawModelOutput(text=self.plan[-1])

        assert self.behavior is Behavior.FOLLOW_HINT
        hint = _last_hint(_last_feedback(rendered))
        if hint is not None and self._roll(idx) < self.hint_compliance:
            return RawModelOutput(text=hint)
        return RawModelOutput(text="look")


class ReplayPolicy:
    """Plays back a fixed list of raw outputs; repeats the last one after."""

    def __init__(self, policy_id: str, outputs: Sequence[str | RawModelOutput]):
        if not outputs:
            raise ValueError("replay needs at least one output")
        self.policy_id = policy_id
        self.outputs = [
            o if isinstance(o, RawModelOutput) else RawModelOutput(text=o) for o in outputs
        ]

    def next_action(self, rendered: str, trajectory: Trajectory) -> RawModelOutput:
        idx = min(_step_index(rendered), len(self.outputs) - 1)
        return self.outputs[idx]


PostFn = Callable[[str, dict[str, Any], dict[str, str], float], dict[str, Any]]


def _default_post(url: str, payload: dict[str, Any], headers: dict[str, str], timeout: float) -> dict[str, Any]:
    import requests

    response = requests.post(url, json=payload, headers=headers, timeout=timeout)
    response.raise_for_status()
    return response.json()


class RemotePolicy:
    """Chat-completion HTTP client treated as a frozen policy (temperature 0)."""

    def __init__(self, handle: PolicyHandle, post_fn: PostFn | None = None):
        self.policy_id = handle.policy_id
        config = handle.config
        self.url = str(config.get("url", ""))
        self.model = str(config.get("model", ""))
        self.max_tokens = int(config.get("max_tokens", 256))
        self.api_key = str(config.get("api_key", ""))
        self.retries = int(config.get("retries", 2))
        self.backoff = float(config.get("backoff", 0.5))
        self.timeout = float(config.get("timeout", 30.0))
        self._post = post_fn or _default_post
        if not self.url:
            raise ValueError("remote policy requires a url")

    def _messages(self, trajectory: Trajectory) -> list[dict[str, str]]:
        system = render_contract(trajectory.contract) + f"\n\nTASK: {trajectory.task.instruction}"
        messages = [
            {"role": "system", "content": system},
            {"role": "user", "content": f"OBSERVATION: {trajectory.initial_observation}"},
        ]
        for step in trajectory.steps:
            messages.append({"role": "assistant", "content": step.raw_model_output})
            content = f"OBSERVATION: {step.observation}"
            if step.regulation.message:
                content += f"\nNOTE: {step.regulation.message}"
            messages.append({"role": "user", "content": content})
        return messages

    def next_action(self, rendered: str, trajectory: Trajectory) -> RawModelOutput:
        payload = {
            "model": self.model,
            "messages": self._messages(trajectory),
            "temperature": 0.0,
            "max_tokens": self.max_tokens,
        }
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        last_error: Exception | None = None
        for attempt in range(self.retries + 1):
            try:
                doc = self._post(self.url, payload, headers, self.timeout)
                return self._parse(doc)
            except Exception as exc:  # noqa: BLE001 - every transport error retries
                last_error = exc
                if attempt < self.retries and self.backoff > 0:
                    time.sleep(self.backoff * (attempt + 1))
        raise PolicyFault(f"remote policy failed after {self.retries + 1} attempts: {last_error}")

    @staticmethod
    def _parse(doc: dict[str, Any]) -> RawModelOutput:
        message = doc["choices"][0]["message"]
        tool_calls = message.get("tool_calls") or []
        if tool_calls:
            function = tool_calls[0]["function"]
            arguments = function.get("arguments") or "{}"
            if isinstance(arguments, str):
                arguments = json.loads(arguments)
            call = ToolCall(name=function["name"], arguments=dict(arguments))
            return RawModelOutput(text=str(message.get("content") or ""), tool_call=call)
        content = message.get("content")
        if not isinstance(content, str):
            raise PolicyFault("remote response carried no text content")
        return RawModelOutput(text=content)


def bind_policy(
    handle: PolicyHandle,
    task: TaskSpec,
    env: Environment,
    *,
    family: str | None = None,
    seed: int = 0,
    post_fn: PostFn | None = None,
) -> Any:
    """Attach a policy description to one concrete task instance."""
    if handle.kind == "remote":
        return RemotePolicy(handle, post_fn=post_fn)
    if handle.kind == "replay":
        return ReplayPolicy(handle.policy_id, handle.config["outputs"])
    behavior_name = str(handle.config.get("behavior", Behavior.ORACLE.value))
    if behavior_name == FAMILY_DISPATCH:
        behavior_name = family or Behavior.ORACLE.value
    behavior = Behavior(behavior_name)
    plan = env_registry.solve_plan(env, task.success_spec)
    if not plan:
        plan = ["look"]
    return ScriptedPolicy(
        policy_id=handle.policy_id,
        behavior=behavior,
        plan=plan,
        environment_id=env.environment_id,
        seed=seed,
        fault_rate=float(handle.config.get("fault_rate", 1.0)),
        hint_compliance=float(handle.config.get("hint_compliance", 1.0)),
    )
