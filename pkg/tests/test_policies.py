"""Scripted fault-family policies, replay, remote HTTP client, binding."""

from __future__ import annotations

import pytest

from harnesskit import policies as pol
from harnesskit.envs import base_contract
from harnesskit.realization import RawModelOutput, ToolCall
from harnesskit.regulation import EMPTY_SIGNAL, RegulationLevel, RegulationSignal
from harnesskit.runtime import (
    PolicyFault,
    RealizationDecision,
    StepRecord,
    TaskSpec,
    Trajectory,
)
from harnesskit.realization import DecisionKind

from conftest import make_gridhouse, make_minidb

GH_PLAN = [
    "go to countertop 1",
    "take mug 1 from countertop 1",
    "go to cabinet 1",
    "open cabinet 1",
    "put mug 1 in cabinet 1",
]

DB_PLAN = [
    'execute_query("SELECT COUNT(*) FROM pets")',
    'commit_final_answer("3")',
]


def scripted(behavior, plan=None, env="gridhouse", **kwargs):
    return pol.ScriptedPolicy(
        policy_id="p",
        behavior=pol.Behavior(behavior),
        plan=plan or (GH_PLAN if env == "gridhouse" else DB_PLAN),
        environment_id=env,
        **kwargs,
    )


def rendered_prompt(actions_and_feedback, env="gridhouse", instruction="do it"):
    """Minimal rendered text with the markers the policies actually read."""
    lines = [f"=== ENVIRONMENT CONTRACT: {env} ===", f"TASK: {instruction}", "OBSERVATION: start"]
    for action, observation, note in actions_and_feedback:
        lines.append(f"ACTION: {action}")
        lines.append(f"OBSERVATION: {observation}")
        if note:
            lines.append(f"NOTE: {note}")
    return "\n".join(lines)


def act(policy, rendered):
    return policy.next_action(rendered, None).text


# --- rendered-text helpers ---


def test_step_index_counts_action_lines():
    assert pol._step_index(rendered_prompt([])) == 0
    two = rendered_prompt([("a", "x", ""), ("b", "y", "note")])
    assert pol._step_index(two) == 2


def test_last_feedback_is_text_after_latest_action():
    text = rendered_prompt([("a", "x", ""), ("b", "y", "hello")])
    feedback = pol._last_feedback(text)
    assert "OBSERVATION: y" in feedback
    assert "NOTE: hello" in feedback
    assert "OBSERVATION: x" not in feedback
    assert pol._last_feedback("no actions yet") == "no actions yet"


def test_last_hint_takes_final_backticked_span():
    assert pol._last_hint("try `look` or `go to kitchen`") == "go to kitchen"
    assert pol._last_hint("angle `a <b>` ignored") is None
    assert pol._last_hint("no hints") is None


# --- oracle ---


def test_oracle_follows_plan_then_repeats_last_step():
    policy = scripted("oracle")
    assert act(policy, rendered_prompt([])) == GH_PLAN[0]
    steps = [(a, "ok", "") for a in GH_PLAN]
    assert act(policy, rendered_prompt(steps)) == GH_PLAN[-1]


# --- freetext ---


def test_freetext_wraps_text_commands_in_prose():
    policy = scripted("freetext")
    assert act(policy, rendered_prompt([])) == "I think I should go to countertop 1 now."


def test_freetext_wraps_sql_and_answer_calls():
    policy = scripted("freetext", env="minidb")
    assert act(policy, rendered_prompt([], env="minidb")) == (
        "I believe we should now run SELECT COUNT(*) FROM pets"
    )
    one_done = rendered_prompt([(DB_PLAN[0], "3", "")], env="minidb")
    assert act(policy, one_done) == "I believe the answer is 3."


def test_freetext_fault_rate_zero_is_oracle():
    policy = scripted("freetext", fault_rate=0.0)
    assert act(policy, rendered_prompt([])) == GH_PLAN[0]


def test_freetext_rolls_are_seed_deterministic():
    a = scripted("freetext", fault_rate=0.5, seed=7)
    b = scripted("freetext", fault_rate=0.5, seed=7)
    prompts = [rendered_prompt([("x", "y", "")] * i) for i in range(6)]
    assert [act(a, p) for p in prompts] == [act(b, p) for p in prompts]


# --- loop ---


def test_loop_emits_filler_until_noted():
    policy = scripted("loop")
    assert act(policy, rendered_prompt([])) == "look"
    ignored = rendered_prompt([("look", "same", "")] * 3)
    assert act(policy, ignored) == "look"


def test_loop_advances_one_plan_step_per_note():
    policy = scripted("loop")
    one_note = rendered_prompt([("look", "same", ""), ("look", "same", "warned")])
    assert act(policy, one_note) == GH_PLAN[0]
    # an older note with quiet feedback afterwards returns to filler
    stale = rendered_prompt(
        [("look", "same", ""), ("look", "same", "warned"), (GH_PLAN[0], "ok", "")]
    )
    assert act(policy, stale) == "look"


def test_loop_on_minidb_replays_plan_by_note_count():
    policy = scripted("loop", env="minidb")
    assert act(policy, rendered_prompt([], env="minidb")) == DB_PLAN[0]
    noted = rendered_prompt([(DB_PLAN[0], "3", "push on")], env="minidb")
    assert act(policy, noted) == DB_PLAN[1]


# --- wrongtool ---


def test_wrongtool_swaps_commit_tool():
    policy = scripted("wrongtool", env="minidb")
    assert act(policy, rendered_prompt([], env="minidb")) == DB_PLAN[0]
    at_commit = rendered_prompt([(DB_PLAN[0], "3", "")], env="minidb")
    assert act(policy, at_commit) == 'submit_answer("3")'


def test_wrongtool_reads_answer_tool_note_from_contract():
    policy = scripted("wrongtool", env="minidb")
    at_commit = rendered_prompt([(DB_PLAN[0], "3", "")], env="minidb")
    amended = "ANSWER TOOL: `commit_final_answer`.\n" + at_commit
    assert act(policy, amended) == 'commit_final_answer("3")'


def test_wrongtool_with_text_plan_defers_to_plan():
    policy = scripted("wrongtool")
    steps = [(a, "ok", "") for a in GH_PLAN[:-1]]
    assert act(policy, rendered_prompt(steps)) == GH_PLAN[-1]


# --- prematurecommit ---


def test_prematurecommit_jumps_to_final_step():
    policy = scripted("prematurecommit", env="minidb")
    assert act(policy, rendered_prompt([], env="minidb")) == DB_PLAN[-1]


def test_prematurecommit_behaves_when_workflow_note_present():
    policy = scripted("prematurecommit", env="minidb")
    prompt = "Remember: verify the write BEFORE COMMIT.\n" + rendered_prompt([], env="minidb")
    assert act(policy, prompt) == DB_PLAN[0]


# --- followhint ---


def test_followhint_takes_last_backticked_suggestion():
    policy = scripted("followhint")
    noted = rendered_prompt([("look", "same", "Consider `go to livingroom` next.")])
    assert act(policy, noted) == "go to livingroom"


def test_followhint_defaults_to_look_without_hint():
    policy = scripted("followhint")
    assert act(policy, rendered_prompt([("look", "same", "")])) == "look"


def test_followhint_compliance_zero_never_follows():
    policy = scripted("followhint", hint_compliance=0.0)
    noted = rendered_prompt([("look", "same", "try `go to livingroom`")])
    assert act(policy, noted) == "look"


# --- replay ---


def test_replay_walks_outputs_then_repeats():
    policy = pol.ReplayPolicy("r", ["one", RawModelOutput(text="two")])
    assert act(policy, rendered_prompt([])) == "one"
    assert act(policy, rendered_prompt([("one", "x", "")])) == "two"
    assert act(policy, rendered_prompt([("one", "x", ""), ("two", "y", "")])) == "two"


def test_replay_requires_outputs():
    with pytest.raises(ValueError, match="at least one output"):
        pol.ReplayPolicy("r", [])


def test_scripted_requires_plan():
    with pytest.raises(ValueError, match="non-empty plan"):
        pol.ScriptedPolicy("p", pol.Behavior.ORACLE, [], "gridhouse")


# --- remote ---


def chat_response(content=None, tool_call=None):
    message = {"content": content}
    if tool_call:
        message["tool_calls"] = [{"function": tool_call}]
    return {"choices": [{"message": message}]}


def remote_handle(**config):
    config.setdefault("url", "https://inference.local/v1/chat")
    config.setdefault("backoff", 0.0)
    return pol.PolicyHandle(policy_id="remote-1", kind="remote", config=config)


def fake_trajectory():
    contract = base_contract("minidb")
    task = TaskSpec(task_id="t", environment_id="minidb", instruction="count pets")
    step = StepRecord(
        index=0,
        raw_model_output="hello",
        decision=RealizationDecision(kind=DecisionKind.EXEC, action="look"),
        observation="obs-1",
        regulation=RegulationSignal(level=RegulationLevel.WARNING, message="slow down"),
        remaining_budget=9,
    )
    return Trajectory(contract=contract, task=task, initial_observation="start", steps=(step,))


def test_remote_builds_chat_messages_from_trajectory():
    seen = {}

    def post(url, payload, headers, timeout):
        seen.update(url=url, payload=payload, headers=headers, timeout=timeout)
        return chat_response(content="next step")

    policy = pol.RemotePolicy(remote_handle(api_key="k", model="m"), post_fn=post)
    out = policy.next_action("", fake_trajectory())
    assert out.text == "next step"
    assert seen["url"] == "https://inference.local/v1/chat"
    assert seen["headers"]["Authorization"] == "Bearer k"
    assert seen["payload"]["temperature"] == 0.0
    assert seen["payload"]["model"] == "m"
    messages = seen["payload"]["messages"]
    assert messages[0]["role"] == "system"
    assert "ENVIRONMENT CONTRACT: minidb" in messages[0]["content"]
    assert "TASK: count pets" in messages[0]["content"]
    assert messages[1] == {"role": "user", "content": "OBSERVATION: start"}
    assert messages[2] == {"role": "assistant", "content": "hello"}
    assert messages[3] == {"role": "user", "content": "OBSERVATION: obs-1\nNOTE: slow down"}


def test_remote_parses_structured_tool_calls():
    def post(url, payload, headers, timeout):
        return chat_response(
            content="",
            tool_call={"name": "execute_query", "arguments": '{"sql": "SELECT 1"}'},
        )

    policy = pol.RemotePolicy(remote_handle(), post_fn=post)
    out = policy.next_action("", fake_trajectory())
    assert out.tool_call == ToolCall(name="execute_query", arguments={"sql": "SELECT 1"})


def test_remote_retries_then_raises_policy_fault():
    calls = []

    def post(url, payload, headers, timeout):
        calls.append(1)
        raise ConnectionError("down")

    policy = pol.RemotePolicy(remote_handle(retries=2), post_fn=post)
    with pytest.raises(PolicyFault, match="after 3 attempts"):
        policy.next_action("", fake_trajectory())
    assert len(calls) == 3


def test_remote_recovers_on_retry():
    attempts = []

    def post(url, payload, headers, timeout):
        attempts.append(1)
        if len(attempts) == 1:
            raise TimeoutError("slow")
        return chat_response(content="ok")

    policy = pol.RemotePolicy(remote_handle(retries=1), post_fn=post)
    assert policy.next_action("", fake_trajectory()).text == "ok"


def test_remote_rejects_contentless_response():
    policy = pol.RemotePolicy(remote_handle(retries=0), post_fn=lambda *a: chat_response())
    with pytest.raises(PolicyFault):
        policy.next_action("", fake_trajectory())


def test_remote_requires_url():
    with pytest.raises(ValueError, match="requires a url"):
        pol.RemotePolicy(pol.PolicyHandle(policy_id="r", kind="remote", config={}))


# --- binding ---


def test_handle_from_dict_splits_config():
    handle = pol.handle_from_dict({"policy_id": "p", "behavior": "loop", "fault_rate": 0.5})
    assert handle == pol.PolicyHandle(
        policy_id="p", kind="scripted", config={"behavior": "loop", "fault_rate": 0.5}
    )


def test_bind_scripted_policy_solves_plan():
    env = make_minidb()
    task = TaskSpec(
        task_id="t",
        environment_id="minidb",
        instruction="count",
        success_spec={"kind": "count", "answer": "3"},
    )
    handle = pol.PolicyHandle(policy_id="p", config={"behavior": "oracle"})
    policy = pol.bind_policy(handle, task, env)
    assert isinstance(policy, pol.ScriptedPolicy)
    assert policy.plan == [
        'execute_query("SELECT COUNT(*) FROM pets")',
        'commit_final_answer("3")',
    ]


def test_bind_family_dispatch_uses_unit_family():
    env = make_gridhouse()
    task = TaskSpec(task_id="t", environment_id="gridhouse", instruction="place the mug")
    handle = pol.PolicyHandle(policy_id="p", config={"behavior": "family"})
    policy = pol.bind_policy(handle, task, env, family="loop")
    assert policy.behavior is pol.Behavior.LOOP
    fallback = pol.bind_policy(handle, task, env, family=None)
    assert fallback.behavior is pol.Behavior.ORACLE


def test_bind_replay_policy():
    env = make_gridhouse()
    task = TaskSpec(task_id="t", environment_id="gridhouse", instruction="x")
    handle = pol.PolicyHandle(policy_id="p", kind="replay", config={"outputs": ["look"]})
    policy = pol.bind_policy(handle, task, env)
    assert isinstance(policy, pol.ReplayPolicy)


def test_bind_falls_back_to_look_when_goal_pre_satisfied():
    env = make_gridhouse()
    env.goal["object_type"] = env.objects["mug 1"].otype
    env.goal["receptacle_type"] = env.objects["mug 1"].location.rsplit(" ", 1)[0]
    task = TaskSpec(task_id="t", environment_id="gridhouse", instruction="x")
    handle = pol.PolicyHandle(policy_id="p", config={"behavior": "oracle"})
    policy = pol.bind_policy(handle, task, env)
    assert policy.plan == ["look"]
