from __future__ import annotations

import pytest
from hypothesis import HealthCheck, settings

from harnesskit.envs import base_contract, gridhouse, minidb

settings.register_profile(
    "suite",
    deadline=None,
    max_examples=60,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("suite")


# Minimal one-room-plus-kitchen world; small enough that unit tests can
# reason about exact admissible sets and shortest plans.
TINY_WORLD = {
    "world_id": "tiny",
    "environment_id": "gridhouse",
    "agent_room": "kitchen",
    "rooms": [
        {"name": "kitchen", "receptacles": ["cabinet 1", "sink 1", "microwave 1", "fridge 1", "countertop 1"]},
        {"name": "livingroom", "receptacles": ["table 1", "shelf 1"]},
    ],
    "closed": ["cabinet 1"],
    "objects": [
        {"name": "mug 1", "location": "countertop 1"},
        {"name": "apple 1", "location": "shelf 1"},
    ],
}

TINY_DB = {
    "world_id": "tinydb",
    "environment_id": "minidb",
    "tables": [
        {
            "name": "pets",
            "columns": [
                {"name": "id", "type": "integer"},
                {"name": "name", "type": "text"},
                {"name": "weight", "type": "real"},
            ],
            "rows": [
                [1, "rex", 12.5],
                [2, "milo", 4.0],
                [3, "bella", 21.0],
            ],
        }
    ],
}


def make_gridhouse(goal=None, seed=0):
    goal = goal or {"object_type": "mug", "receptacle_type": "cabinet"}
    return gridhouse.build_env(TINY_WORLD, {"goal": goal}, seed)


def make_minidb(kind="count", answer="3", reference_sql="SELECT COUNT(*) FROM pets", seed=0):
    spec = {"kind": kind, "answer": answer, "reference_sql": reference_sql}
    return minidb.build_env(TINY_DB, spec, seed)


@pytest.fixture
def gh_env():
    return make_gridhouse()


@pytest.fixture
def db_env():
    return make_minidb()


@pytest.fixture
def gh_contract():
    return base_contract("gridhouse")


@pytest.fixture
def db_contract():
    return base_contract("minidb")
