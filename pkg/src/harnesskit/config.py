"""Run configuration: YAML configs, task manifests, packaged resources.

Resource references in configs and manifests resolve three ways: a `pkg:`
prefix points inside the installed package's data directory, absolute paths
are taken as-is, and anything else is relative to the file that mentioned
it.  Bare world ids in manifests resolve to packaged world documents.
"""

from __future__ import annotations

import importlib.resources
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

from harnesskit.envs import DEFAULT_BUDGETS, ENVIRONMENT_IDS
from harnesskit.policies import PolicyHandle, handle_from_dict
from harnesskit.runtime import TaskSpec

PKG_SCHEME = "pkg:"

SPLITS = ("train", "test", "all")


def resolve_resource(ref: str, base_dir: Path | None = None) -> Path:
    if ref.startswith(PKG_SCHEME):
        root = importlib.resources.files("harnesskit").joinpath("data")
        return Path(str(root.joinpath(ref[len(PKG_SCHEME) :])))
    path = Path(ref)
    if path.is_absolute() or base_dir is None:
        return path
    return base_dir / path


def load_yaml(path: Path) -> Any:
    return yaml.safe_load(path.read_text(encoding="utf-8"))


@dataclass(frozen=True)
class TaskUnit:
    """One manifest row: a task plus where it runs and how it is grouped."""

    task: TaskSpec
    world_path: Path
    split: str
    family: str = ""
    budget: int | None = None


def _world_path(ref: str, base_dir: Path) -> Path:
    if ref.startswith(PKG_SCHEME) or "/" in ref or ref.endswith(".yaml"):
        return resolve_resource(ref, base_dir)
    return resolve_resource(f"{PKG_SCHEME}worlds/{ref}.yaml", base_dir)


def load_manifest(path: str | Path, split: str = "all") -> list[TaskUnit]:
    """Load a task manifest, optionally filtered to one split."""
    if split not in SPLITS:
        raise ValueError(f"split must be one of {SPLITS}, got '{split}'")
    path = Path(path)
    doc = load_yaml(path)
    environment_id = doc["environment_id"]
    if environment_id not in ENVIRONMENT_IDS:
        raise ValueError(f"manifest names unknown environment '{environment_id}'")
    units = []
    seen: set[str] = set()
    for row in doc["tasks"]:
        task_id = str(row["task_id"])
        if task_id in seen:
            raise ValueError(f"duplicate task_id '{task_id}' in manifest {path.name}")
        seen.add(task_id)
        row_split = str(row.get("split", "train"))
        if split != "all" and row_split != split:
            continue
        if environment_id == "gridhouse":
            success_spec: dict[str, Any] = {"goal": dict(row["goal"])}
        else:
            success_spec = {
                "kind": str(row["kind"]),
                "answer": str(row.get("answer", "")),
                "reference_sql": str(row.get("reference_sql", "")),
            }
        task = TaskSpec(
            task_id=task_id,
            environment_id=environment_id,
            instruction=str(row["instruction"]),
            success_spec=success_spec,
        )
        units.append(
            TaskUnit(
                task=task,
                world_path=_world_path(str(row["world"]), path.parent),
                split=row_split,
                family=str(row.get("family", "")),
                budget=int(row["budget"]) if "budget" in row else None,
            )
        )
    return units


def split_hygiene_check(manifest_path: str | Path) -> None:
    """Train and test ids in one manifest must be disjoint (duplicate ids are
    already rejected at load, so this guards cross-listed duplicates)."""
    train = {u.task.task_id for u in load_manifest(manifest_path, "train")}
    test = {u.task.task_id for u in load_manifest(manifest_path, "test")}
    overlap = train & test
    if overlap:
        raise ValueError(f"train/test overlap in {manifest_path}: {sorted(overlap)}")


def default_budget(environment_id: str) -> int:
    return DEFAULT_BUDGETS[environment_id]


@dataclass(frozen=True)
class SuiteConfig:
    """Everything `run` needs: tasks, policy, harness, budgets, outputs."""

    tasks: Path
    policy: PolicyHandle
    intervention_set: Path | None  # None means the pass-through set
    split: str = "all"
    runs: int = 1
    seed: int = 0
    budget: int | None = None
    workers: int = 4
    out: Path = field(default_factory=lambda: Path("runs/episodes.jsonl"))
    disable_layers: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.split not in SPLITS:
            raise ValueError(f"split must be one of {SPLITS}")
        if self.runs < 1:
            raise ValueError("runs must be >= 1")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")


def load_suite_config(path: str | Path) -> SuiteConfig:
    path = Path(path)
    doc = load_yaml(path)
    base = path.parent
    iset_ref = doc.get("intervention_set", "none")
    iset_path = None if iset_ref in (None, "none", "") else resolve_resource(str(iset_ref), base)
    out_ref = doc.get("out", "runs/episodes.jsonl")
    return SuiteConfig(
        tasks=resolve_resource(str(doc["tasks"]), base),
        policy=handle_from_dict(doc["policy"]),
        intervention_set=iset_path,
        split=str(doc.get("split", "all")),
        runs=int(doc.get("runs", 1)),
        seed=int(doc.get("seed", 0)),
        budget=int(doc["budget"]) if doc.get("budget") is not None else None,
        workers=int(doc.get("workers", 4)),
        out=resolve_resource(str(out_ref), Path.cwd()),
        disable_layers=tuple(doc.get("disable_layers", ())),
    )


@dataclass(frozen=True)
class EvolutionConfig:
    registry: Path
    policy: PolicyHandle
    train: tuple[tuple[Path, str], ...]  # (manifest path, fault family)
    base_set: Path | None = None
    seed: int = 0
    budget: int | None = None
    out: Path = field(default_factory=lambda: Path("runs/evolved_set.yaml"))


def load_evolution_config(path: str | Path) -> EvolutionConfig:
    path = Path(path)
    doc = load_yaml(path)
    base = path.parent
    base_ref = doc.get("base_set", "none")
    train = tuple(
        (resolve_resource(str(entry["tasks"]), base), str(entry.get("family", "")))
        for entry in doc["train"]
    )
    return EvolutionConfig(
        registry=resolve_resource(str(doc["registry"]), base),
        policy=handle_from_dict(doc["policy"]),
        train=train,
        base_set=None if base_ref in (None, "none", "") else resolve_resource(str(base_ref), base),
        seed=int(doc.get("seed", 0)),
        budget=int(doc["budget"]) if doc.get("budget") is not None else None,
        out=resolve_resource(str(doc.get("out", "runs/evolved_set.yaml")), Path.cwd()),
    )
