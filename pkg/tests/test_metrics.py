"""Success-matrix metrics: pass@1, pass^k, pass@k, gains, summaries."""

from __future__ import annotations

import pytest
from hypothesis import given
from hypothesis import strategies as st

from harnesskit import metrics as mt

WORKED = mt.RunMatrix(cells={"t1": (1, 1, 1), "t2": (1, 0, 1)})


def rows_for(cells, policy_id="p", environment_id="minidb"):
    rows = []
    for task_id, flags in cells.items():
        for run_index, flag in enumerate(flags):
            rows.append(
                {
                    "task_id": task_id,
                    "run_index": run_index,
                    "reward": float(flag),
                    "policy_id": policy_id,
                    "environment_id": environment_id,
                }
            )
    return rows


# --- matrix construction ---


def test_matrix_rejects_unequal_run_counts():
    with pytest.raises(ValueError, match="unequal runs per task"):
        mt.RunMatrix(cells={"a": (1,), "b": (1, 0)})


def test_matrix_rejects_non_binary_flags():
    with pytest.raises(ValueError, match="non-binary"):
        mt.RunMatrix(cells={"a": (1, 2)})


def test_matrix_from_rows_orders_by_run_index():
    rows = [
        {"task_id": "t", "run_index": 2, "reward": 1.0},
        {"task_id": "t", "run_index": 0, "reward": 0.0},
        {"task_id": "t", "run_index": 1, "reward": 1.0},
    ]
    matrix = mt.matrix_from_rows(rows)
    assert matrix.cells == {"t": (0, 1, 1)}


def test_matrix_from_rows_threshold():
    rows = [{"task_id": "t", "run_index": 0, "reward": 0.5}]
    assert mt.matrix_from_rows(rows).cells == {"t": (0,)}
    assert mt.matrix_from_rows(rows, reward_threshold=0.5).cells == {"t": (1,)}


def test_empty_matrix_properties():
    empty = mt.RunMatrix(cells={})
    assert empty.runs_per_task == 0
    assert empty.task_count == 0
    assert mt.pass_at_1(empty) == 0.0
    assert mt.pass_hat_k(empty, 0) == 0.0
    assert mt.pass_any_k(empty, 0) == 0.0


# --- worked example ---


def test_worked_example_values():
    # Two tasks, three runs: [1,1,1] and [1,0,1].
    assert mt.pass_at_1(WORKED) == pytest.approx(5 / 6)
    assert mt.pass_hat_k(WORKED, 3) == pytest.approx(1 / 2)
    assert mt.pass_any_k(WORKED, 3) == pytest.approx(1.0)


def test_k_mismatch_raises():
    with pytest.raises(mt.KMismatchError, match="runs per task"):
        mt.pass_hat_k(WORKED, 2)
    with pytest.raises(mt.KMismatchError):
        mt.pass_any_k(WORKED, 4)


def test_relative_gain():
    assert mt.relative_gain(0.4, 0.6) == pytest.approx(0.5)
    assert mt.relative_gain(0.5, 0.25) == pytest.approx(-0.5)
    with pytest.raises(mt.ZeroBaselineError):
        mt.relative_gain(0.0, 0.9)


# --- ordering properties ---


@given(
    st.dictionaries(
        st.text(alphabet="abcdef", min_size=1, max_size=4),
        st.tuples(*[st.integers(min_value=0, max_value=1)] * 3),
        min_size=1,
        max_size=8,
    )
)
def test_pass_hat_k_never_exceeds_pass_at_1_never_exceeds_pass_any_k(cells):
    matrix = mt.RunMatrix(cells=cells)
    k = matrix.runs_per_task
    assert mt.pass_hat_k(matrix, k) <= mt.pass_at_1(matrix) <= mt.pass_any_k(matrix, k)


@given(
    st.dictionaries(
        st.text(alphabet="abc", min_size=1, max_size=3),
        st.tuples(st.integers(0, 1)),
        min_size=1,
        max_size=6,
    )
)
def test_single_run_metrics_coincide(cells):
    matrix = mt.RunMatrix(cells=cells)
    assert mt.pass_hat_k(matrix, 1) == mt.pass_at_1(matrix) == mt.pass_any_k(matrix, 1)


# --- grouping and summaries ---


def test_group_rows_sorted_keys():
    rows = [{"k": "b"}, {"k": "a"}, {"k": "b"}]
    groups = mt.group_rows(rows, "k")
    assert list(groups) == ["a", "b"]
    assert len(groups["b"]) == 2


def test_summarize_worked_example():
    rows = rows_for({"t1": (1, 1, 1), "t2": (1, 0, 1)})
    summary = mt.summarize(rows)
    assert summary["episodes"] == 6
    assert summary["tasks"] == 2
    assert summary["runs_per_task"] == 3
    assert summary["pass_at_1"] == pytest.approx(5 / 6)
    assert summary["pass_hat_k"] == pytest.approx(0.5)
    assert summary["pass_any_k"] == pytest.approx(1.0)
    assert summary["by_environment_id"] == {"minidb": pytest.approx(5 / 6)}
    assert summary["by_policy_id"] == {"p": pytest.approx(5 / 6)}


def test_summarize_single_run_omits_k_metrics():
    summary = mt.summarize(rows_for({"t1": (1,), "t2": (0,)}))
    assert "pass_hat_k" not in summary
    assert "pass_any_k" not in summary


def test_summarize_splits_mixed_groups():
    rows = rows_for({"t1": (1,)}, policy_id="a") + rows_for({"t2": (0,)}, policy_id="b")
    summary = mt.summarize(rows)
    assert summary["by_policy_id"] == {"a": 1.0, "b": 0.0}


def test_render_summary_lines():
    text = mt.render_summary(mt.summarize(rows_for({"t1": (1, 1, 1), "t2": (1, 0, 1)})))
    lines = text.splitlines()
    assert lines[0] == "episodes: 6  tasks: 2  runs/task: 3"
    assert lines[1] == "pass@1: 0.833"
    assert lines[2] == "pass^3: 0.500  pass@3: 1.000"
    assert "  environment_id=minidb: pass@1 0.833" in lines
    assert "  policy_id=p: pass@1 0.833" in lines
