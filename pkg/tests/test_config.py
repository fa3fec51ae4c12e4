"""Config loading: resource scheme, task manifests, suite and evolution configs."""

from __future__ import annotations

from pathlib import Path

import pytest

from harnesskit import config as cfg
from harnesskit.envs import DEFAULT_BUDGETS

PKG_DATA = cfg.resolve_resource("pkg:")

POOLS = (
    "pkg:suites/gridhouse_pool.yaml",
    "pkg:suites/minidb_query_pool.yaml",
    "pkg:suites/minidb_mutation_pool.yaml",
)


def write_yaml(path: Path, text: str) -> Path:
    path.write_text(text, encoding="utf-8")
    return path


# --- resource resolution ---


def test_pkg_scheme_points_into_the_installed_data_directory():
    path = cfg.resolve_resource("pkg:suites/gridhouse_pool.yaml")
    assert path == PKG_DATA / "suites" / "gridhouse_pool.yaml"
    assert path.is_file()


def test_absolute_paths_pass_through(tmp_path):
    ref = str(tmp_path / "x.yaml")
    assert cfg.resolve_resource(ref, tmp_path / "elsewhere") == Path(ref)


def test_relative_paths_resolve_against_the_base_dir(tmp_path):
    assert cfg.resolve_resource("sub/x.yaml", tmp_path) == tmp_path / "sub" / "x.yaml"
    assert cfg.resolve_resource("sub/x.yaml") == Path("sub/x.yaml")


def test_bare_world_ids_resolve_to_packaged_worlds(tmp_path):
    assert cfg._world_path("gh_w1", tmp_path) == PKG_DATA / "worlds" / "gh_w1.yaml"
    assert cfg._world_path("custom.yaml", tmp_path) == tmp_path / "custom.yaml"
    assert cfg._world_path("deep/custom.yaml", tmp_path) == tmp_path / "deep" / "custom.yaml"
    assert cfg._world_path("pkg:worlds/db_w2.yaml", tmp_path) == PKG_DATA / "worlds" / "db_w2.yaml"


# --- task manifests ---


@pytest.mark.parametrize("pool", POOLS)
def test_bundled_pools_split_28_tasks_into_8_train_20_test(pool):
    path = cfg.resolve_resource(pool)
    assert len(cfg.load_manifest(path)) == 28
    assert len(cfg.load_manifest(path, "train")) == 8
    assert len(cfg.load_manifest(path, "test")) == 20


@pytest.mark.parametrize("pool", POOLS)
def test_bundled_pool_units_are_complete(pool):
    units = cfg.load_manifest(cfg.resolve_resource(pool))
    ids = [unit.task.task_id for unit in units]
    assert len(set(ids)) == len(ids)
    for unit in units:
        assert unit.world_path.is_file()
        assert unit.split in ("train", "test")
        assert unit.task.instruction
        assert unit.budget is None
        if unit.task.environment_id == "gridhouse":
            goal = unit.task.success_spec["goal"]
            assert goal["object_type"] and goal["receptacle_type"]
        else:
            assert unit.task.environment_id == "minidb"
            assert unit.task.success_spec["kind"]


def test_manifest_rejects_unknown_split():
    path = cfg.resolve_resource(POOLS[0])
    with pytest.raises(ValueError, match="split must be one of"):
        cfg.load_manifest(path, "validation")


def test_manifest_rejects_unknown_environment(tmp_path):
    path = write_yaml(
        tmp_path / "bad.yaml",
        "environment_id: holodeck\ntasks: []\n",
    )
    with pytest.raises(ValueError, match="unknown environment 'holodeck'"):
        cfg.load_manifest(path)


def test_manifest_rejects_duplicate_task_ids(tmp_path):
    path = write_yaml(
        tmp_path / "dup.yaml",
        """\
environment_id: minidb
tasks:
  - {task_id: t1, world: db_w1, kind: count, answer: '3', instruction: Count pets.}
  - {task_id: t1, world: db_w1, kind: count, answer: '3', instruction: Count pets again.}
""",
    )
    with pytest.raises(ValueError, match="duplicate task_id 't1'"):
        cfg.load_manifest(path)


def test_manifest_rows_default_to_train_and_can_pin_budgets(tmp_path):
    path = write_yaml(
        tmp_path / "mini.yaml",
        """\
environment_id: minidb
tasks:
  - {task_id: a, world: db_w1, kind: count, answer: '3', instruction: Count., budget: 5}
  - {task_id: b, world: db_w1, kind: select, answer: rex, instruction: Name., family: f1}
""",
    )
    first, second = cfg.load_manifest(path)
    assert (first.split, first.budget, first.family) == ("train", 5, "")
    assert (second.split, second.budget, second.family) == ("train", None, "f1")
    assert cfg.load_manifest(path, "test") == []


def test_duplicate_ids_fail_even_when_filtered_out_by_split(tmp_path):
    path = write_yaml(
        tmp_path / "cross.yaml",
        """\
environment_id: minidb
tasks:
  - {task_id: t1, world: db_w1, split: train, kind: count, answer: '3', instruction: Count.}
  - {task_id: t1, world: db_w1, split: test, kind: count, answer: '3', instruction: Count.}
""",
    )
    with pytest.raises(ValueError, match="duplicate task_id"):
        cfg.load_manifest(path, "train")
    with pytest.raises(ValueError, match="duplicate task_id"):
        cfg.split_hygiene_check(path)


@pytest.mark.parametrize("pool", POOLS)
def test_bundled_pools_pass_split_hygiene(pool):
    cfg.split_hygiene_check(cfg.resolve_resource(pool))


def test_default_budgets_track_the_environment_table():
    assert cfg.default_budget("gridhouse") == DEFAULT_BUDGETS["gridhouse"] == 50
    assert cfg.default_budget("minidb") == DEFAULT_BUDGETS["minidb"] == 15
    with pytest.raises(KeyError):
        cfg.default_budget("holodeck")


# --- suite configs ---


def test_suite_config_validates_fields():
    handle = cfg.PolicyHandle(policy_id="p")
    with pytest.raises(ValueError, match="split"):
        cfg.SuiteConfig(tasks=Path("x"), policy=handle, intervention_set=None, split="dev")
    with pytest.raises(ValueError, match="runs"):
        cfg.SuiteConfig(tasks=Path("x"), policy=handle, intervention_set=None, runs=0)
    with pytest.raises(ValueError, match="workers"):
        cfg.SuiteConfig(tasks=Path("x"), policy=handle, intervention_set=None, workers=0)


def test_load_suite_config_fills_defaults(tmp_path):
    path = write_yaml(
        tmp_path / "run.yaml",
        "tasks: pool.yaml\npolicy: {policy_id: p, behavior: oracle}\n",
    )
    suite = cfg.load_suite_config(path)
    assert suite.tasks == tmp_path / "pool.yaml"
    assert suite.policy == cfg.PolicyHandle("p", "scripted", {"behavior": "oracle"})
    assert suite.intervention_set is None
    assert (suite.split, suite.runs, suite.seed) == ("all", 1, 0)
    assert (suite.budget, suite.workers) == (None, 4)
    assert suite.out == Path.cwd() / "runs" / "episodes.jsonl"
    assert suite.disable_layers == ()


def test_load_suite_config_resolves_references(tmp_path):
    path = write_yaml(
        tmp_path / "run.yaml",
        """\
tasks: pkg:suites/minidb_query_pool.yaml
policy: {policy_id: p, kind: replay, outputs: [look]}
intervention_set: sets/mine.yaml
split: test
runs: 3
seed: 11
budget: 9
workers: 2
out: /tmp/out.jsonl
disable_layers: [action, regulation]
""",
    )
    suite = cfg.load_suite_config(path)
    assert suite.tasks == PKG_DATA / "suites" / "minidb_query_pool.yaml"
    assert suite.policy.kind == "replay"
    assert suite.intervention_set == tmp_path / "sets" / "mine.yaml"
    assert (suite.split, suite.runs, suite.seed, suite.budget) == ("test", 3, 11, 9)
    assert suite.workers == 2
    assert suite.out == Path("/tmp/out.jsonl")
    assert suite.disable_layers == ("action", "regulation")


@pytest.mark.parametrize("marker", ["none", "", None])
def test_intervention_set_markers_mean_pass_through(tmp_path, marker):
    body = "tasks: pool.yaml\npolicy: {policy_id: p}\n"
    if marker is not None:
        body += f"intervention_set: '{marker}'\n" if marker else "intervention_set: ''\n"
    suite = cfg.load_suite_config(write_yaml(tmp_path / "run.yaml", body))
    assert suite.intervention_set is None


@pytest.mark.parametrize(
    "name",
    ["run_oracle_gridhouse.yaml", "run_freetext_bare.yaml", "run_freetext_harnessed.yaml"],
)
def test_bundled_run_configs_load(name):
    suite = cfg.load_suite_config(PKG_DATA / "configs" / name)
    assert suite.tasks.is_file()
    assert suite.policy.policy_id
    if suite.intervention_set is not None:
        assert suite.intervention_set.is_file()


# --- evolution configs ---


def test_bundled_evolution_config_loads():
    evo = cfg.load_evolution_config(PKG_DATA / "configs" / "evolve_default.yaml")
    assert evo.registry.is_dir()
    assert evo.base_set is None
    assert [family for _, family in evo.train] == [
        "freetext",
        "loop",
        "wrongtool",
        "prematurecommit",
    ]
    assert all(manifest.is_file() for manifest, _ in evo.train)
    assert evo.out == Path.cwd() / "runs" / "evolved_set.yaml"


def test_load_evolution_config_resolves_relative_references(tmp_path):
    path = write_yaml(
        tmp_path / "evolve.yaml",
        """\
registry: registry
policy: {policy_id: p, behavior: family}
base_set: base.yaml
budget: 7
seed: 3
train:
  - {tasks: pool.yaml, family: loop}
  - {tasks: pkg:suites/gridhouse_pool.yaml}
out: /tmp/evolved.yaml
""",
    )
    evo = cfg.load_evolution_config(path)
    assert evo.registry == tmp_path / "registry"
    assert evo.base_set == tmp_path / "base.yaml"
    assert (evo.seed, evo.budget) == (3, 7)
    assert evo.train == (
        (tmp_path / "pool.yaml", "loop"),
        (PKG_DATA / "suites" / "gridhouse_pool.yaml", ""),
    )
    assert evo.out == Path("/tmp/evolved.yaml")
