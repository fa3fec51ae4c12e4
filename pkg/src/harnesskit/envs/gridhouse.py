"""Household command environment: rooms, receptacles, portable objects.

Canonical commands (anything else is a no-op observed as "Nothing happens."):

    go to <room|receptacle>      open <receptacle>      close <receptacle>
    take <object> from <receptacle>
    put <object> in|on <receptacle>
    clean <object> with <sink>   heat <object> with <microwave>
    cool <object> with <fridge>
    look    inventory    examine <receptacle|held object>

Tasks ask for an object of some type (optionally clean/hot/cold) to end up
inside a receptacle of some type.  The admissible-action set is enumerated
exhaustively from the current state, which is what makes gate rules and
recovery suggestions checkable.
"""

from __future__ import annotations

import copy
import random
import re
from collections import deque
from dataclasses import dataclass
from typing import Any

from harnesskit.envs.base import Environment, EnvironmentEvidence

ENVIRONMENT_ID = "gridhouse"

NO_OP_OBSERVATION = "Nothing happens."

OPENABLE_TYPES = frozenset(["cabinet", "fridge", "microwave", "drawer"])
# receptacles you put things "in" rather than "on"
CONTAINER_TYPES = OPENABLE_TYPES | frozenset(["sink", "garbagecan", "box"])

APPLIANCE_VERBS = {"clean": "sink", "heat": "microwave", "cool": "fridge"}
ATTRIBUTE_OF_VERB = {"clean": "clean", "heat": "hot", "cool": "cold"}

TASK_CRITICAL_VERBS = ("put", "clean", "heat", "cool")


def base_type(name: str) -> str:
    """'cabinet 1' -> 'cabinet'; trailing index digits are presentation only."""
    return name.rsplit(" ", 1)[0] if name and name.split()[-1].isdigit() else name


def put_preposition(receptacle_name: str) -> str:
    return "in" if base_type(receptacle_name) in CONTAINER_TYPES else "on"


@dataclass
class Receptacle:
    name: str
    room: str
    openable: bool
    is_open: bool


@dataclass
class WorldObject:
    name: str
    location: str  # receptacle name, or "agent" when held
    clean: bool = False
    hot: bool = False
    cold: bool = False

    @property
    def otype(self) -> str:
        return base_type(self.name)


@dataclass
class GridHouseEnv(Environment):
    rooms: dict[str, list[str]]  # room -> receptacle names, in listing order
    receptacles: dict[str, Receptacle]
    objects: dict[str, WorldObject]
    agent_room: str
    goal: dict[str, Any]  # object_type, receptacle_type, optional attribute
    agent_at: str | None = None
    holding: str | None = None

    environment_id = ENVIRONMENT_ID

    def __post_init__(self) -> None:
        self.initial_observation = self._arrival_text()

    # --- state queries ---------------------------------------------------

    def _room_listing(self, room: str) -> str:
        return ", ".join(self.rooms[room])

    def _arrival_text(self) -> str:
        others = [r for r in self.rooms if r != self.agent_room]
        text = f"You are in the {self.agent_room}. You see: {self._room_listing(self.agent_room)}."
        if others:
            text += f" Other rooms: {', '.join(others)}."
        return text

    def _objects_at(self, receptacle_name: str) -> list[str]:
        return [o.name for o in self.objects.values() if o.location == receptacle_name]

    def _visible_here(self) -> list[str]:
        if self.agent_at is None:
            return []
        recep = self.receptacles[self.agent_at]
        if recep.openable and not recep.is_open:
            return []
        return self._objects_at(recep.name)

    def _contents_text(self, recep: Receptacle) -> str:
        contents = self._objects_at(recep.name)
        prep = "In" if put_preposition(recep.name) == "in" else "On"
        if not contents:
            return f"The {recep.name} is empty."
        return f"{prep} the {recep.name}, you see: {', '.join(contents)}."

    def goal_satisfied(self) -> bool:
        attribute = self.goal.get("attribute")
        for obj in self.objects.values():
            if obj.otype != self.goal["object_type"]:
                continue
            if obj.location in ("agent",) or obj.location not in self.receptacles:
                continue
            if base_type(obj.location) != self.goal["receptacle_type"]:
                continue
            if attribute and not getattr(obj, attribute):
                continue
            return True
        return False

    # --- admissibility -----------------------------------------------------

    def admissible_actions(self) -> tuple[str, ...]:
        actions: list[str] = []
        for room in self.rooms:
            if room != self.agent_room:
                actions.append(f"go to {room}")
        for name in self.rooms[self.agent_room]:
            if name != self.agent_at:
                actions.append(f"go to {name}")
        if self.agent_at is not None:
            recep = self.receptacles[self.agent_at]
            if recep.openable and not recep.is_open:
                actions.append(f"open {recep.name}")
            if recep.openable and recep.is_open:
                actions.append(f"close {recep.name}")
            if self.holding is None:
                for obj_name in self._visible_here():
                    actions.append(f"take {obj_name} from {recep.name}")
            if self.holding is not None and (not recep.openable or recep.is_open):
                actions.append(f"put {self.holding} {put_preposition(recep.name)} {recep.name}")
            if self.holding is not None:
                rtype = base_type(recep.name)
                for verb, appliance in APPLIANCE_VERBS.items():
                    if rtype == appliance:
                        actions.append(f"{verb} {self.holding} with {recep.name}")
        actions.append("look")
        actions.append("inventory")
        if self.agent_at is not None:
            actions.append(f"examine {self.agent_at}")
        if self.holding is not None:
            actions.append(f"examine {self.holding}")
        return tuple(actions)

    # --- dynamics ------------------------------------------------------------

    def step(self, action: str) -> str:
        action = " ".join((action or "").split())
        if action not in self.admissible_actions():
            return NO_OP_OBSERVATION

        if action == "look":
            at_part = f" You are at the {self.agent_at}." if self.agent_at else ""
            return (
                f"You are in the {self.agent_room}.{at_part} "
                f"You see: {self._room_listing(self.agent_room)}."
            )
        if action == "inventory":
            if self.holding is None:
                return "You are not carrying anything."
            return f"You are carrying: {self.holding}."
        verb, rest = action.split(" ", 1)
        if verb == "examine":
            if self.holding == rest:
                obj = self.objects[rest]
                traits = [t for t in ("clean", "hot", "cold") if getattr(obj, t)]
                detail = ", ".join(traits) if traits else "nothing special"
                return f"It is {obj.name} ({detail})."
            return self._contents_text(self.receptacles[rest])
        if verb == "go":
            target = rest[3:]  # strip "to "
            if target in self.rooms:
                self.agent_room = target
                self.agent_at = None
                return f"You move to the {target}. You see: {self._room_listing(target)}."
            self.agent_at = target
            recep = self.receptacles[target]
            if recep.openable and not recep.is_open:
                return f"You arrive at {target}. The {target} is closed."
            return f"You arrive at {target}. {self._contents_text(recep)}"
        if verb == "open":
            self.receptacles[rest].is_open = True
            contents = self._objects_at(rest)
            inside = ", ".join(contents) if contents else "nothing"
            return f"You open the {rest}. Inside you see: {inside}."
        if verb == "close":
            self.receptacles[rest].is_open = False
            return f"You close the {rest}."
        if verb == "take":
            obj_name, recep_name = rest.split(" from ")
            self.objects[obj_name].location = "agent"
            self.holding = obj_name
            return f"You take {obj_name} from the {recep_name}."
        if verb == "put":
            prep = f" {put_preposition(self.agent_at)} "
            obj_name, recep_name = rest.split(prep)
            self.objects[obj_name].location = recep_name
            self.holding = None
            return f"You put {obj_name} {prep.strip()} the {recep_name}."
        # clean / heat / cool
        obj_name, recep_name = rest.split(" with ")
        obj = self.objects[obj_name]
        setattr(obj, ATTRIBUTE_OF_VERB[verb], True)
        if verb == "heat":
            obj.cold = False
        elif verb == "cool":
            obj.hot = False
        return f"You {verb} {obj_name} using the {recep_name}."

    def is_end(self, observation: str = "") -> bool:
        return self.goal_satisfied()

    def evaluate(self, task: Any) -> float:
        return 1.0 if self.goal_satisfied() else 0.0

    # --- evidence ------------------------------------------------------------

    def evidence(self) -> EnvironmentEvidence:
        location = self.agent_room if self.agent_at is None else f"{self.agent_room}/{self.agent_at}"
        completing = ""
        if self.holding is not None and self.agent_at is not None:
            obj = self.objects[self.holding]
            recep = self.receptacles[self.agent_at]
            attribute = self.goal.get("attribute")
            if (
                obj.otype == self.goal["object_type"]
                and base_type(recep.name) == self.goal["receptacle_type"]
                and (not attribute or getattr(obj, attribute))
                and (not recep.openable or recep.is_open)
            ):
                completing = f"put {obj.name} {put_preposition(recep.name)} {recep.name}"
        locations = tuple(self.rooms[self.agent_room]) + tuple(self.rooms)
        facts: dict[str, Any] = {
            "location": location,
            "holding": self.holding or "",
            "locations": locations,
            "completing_action": completing,
            "task_critical_verbs": TASK_CRITICAL_VERBS,
            "task_kind": self.goal.get("attribute") or "place",
        }
        return EnvironmentEvidence(
            admissible_actions=self.admissible_actions(),
            no_op_phrases=(NO_OP_OBSERVATION,),
            progress_facts=facts,
        )

    def clone(self) -> GridHouseEnv:
        return GridHouseEnv(
            rooms={room: list(names) for room, names in self.rooms.items()},
            receptacles=copy.deepcopy(self.receptacles),
            objects=copy.deepcopy(self.objects),
            agent_room=self.agent_room,
            goal=dict(self.goal),
            agent_at=self.agent_at,
            holding=self.holding,
        )

    def state_fingerprint(self) -> str:
        receps = tuple(
            (r.name, r.is_open) for r in sorted(self.receptacles.values(), key=lambda r: r.name)
        )
        objs = tuple(
            (o.name, o.location, o.clean, o.hot, o.cold)
            for o in sorted(self.objects.values(), key=lambda o: o.name)
        )
        return repr((self.agent_room, self.agent_at, self.holding, receps, objs))


# --- construction --------------------------------------------------------------


def build_env(world_doc: dict[str, Any], success_spec: dict[str, Any], seed: int) -> GridHouseEnv:
    """Instantiate a task environment from a world document.

    The seed shuffles each room's receptacle listing and relocates objects;
    goal-type objects never land in goal-type receptacles, so no variant
    starts in a satisfied state.
    """
    goal = dict(success_spec["goal"])
    rng = random.Random(seed)

    rooms: dict[str, list[str]] = {}
    receptacles: dict[str, Receptacle] = {}
    closed = set(world_doc.get("closed", []))
    for room_doc in world_doc["rooms"]:
        names = list(room_doc["receptacles"])
        rng.shuffle(names)
        rooms[room_doc["name"]] = names
        for name in names:
            openable = base_type(name) in OPENABLE_TYPES
            receptacles[name] = Receptacle(
                name=name,
                room=room_doc["name"],
                openable=openable,
                is_open=openable and name not in closed,
            )

    all_receps = sorted(receptacles)
    non_goal_receps = [
        n for n in all_receps if base_type(n) != goal["receptacle_type"]
    ]
    objects: dict[str, WorldObject] = {}
    for obj_doc in world_doc.get("objects", []):
        name = obj_doc["name"]
        obj = WorldObject(
            name=name,
            location=obj_doc["location"],
            clean=bool(obj_doc.get("clean", False)),
            hot=bool(obj_doc.get("hot", False)),
            cold=bool(obj_doc.get("cold", False)),
        )
        if base_type(name) == goal["object_type"]:
            pool = non_goal_receps or all_receps
        else:
            pool = all_receps
        obj.location = rng.choice(pool)
        objects[name] = obj

    return GridHouseEnv(
        rooms=rooms,
        receptacles=receptacles,
        objects=objects,
        agent_room=world_doc["agent_room"],
        goal=goal,
    )


def solve_plan(env: GridHouseEnv, success_spec: dict[str, Any]) -> list[str]:
    """Breadth-first search over cloned transitions; returns a shortest plan.

    The search is restricted to moves an optimal plan can contain: it never
    inspects state (look/inventory/examine), never closes anything, only
    picks up goal-type objects, only sets them down at goal-type receptacles,
    and only applies the appliance verb that grants the goal attribute.
    Every optimal plan obeys these restrictions, so the result is still a
    shortest plan for the unrestricted environment.
    """
    goal = env.goal
    pruned_verbs = ("look", "inventory", "examine", "close")
    wanted_verb = {a: v for v, a in ATTRIBUTE_OF_VERB.items()}.get(goal.get("attribute"))

    def keep(action: str) -> bool:
        verb = action.split(" ", 1)[0]
        if verb in pruned_verbs:
            return False
        if verb == "take":
            obj_name = action[5:].split(" from ")[0]
            return base_type(obj_name) == goal["object_type"]
        if verb == "put":
            parts = re.split(r" (?:in|on) ", action[4:], maxsplit=1)
            return len(parts) == 2 and base_type(parts[1]) == goal["receptacle_type"]
        if verb in APPLIANCE_VERBS:
            return verb == wanted_verb
        return True

    start = env.clone()
    if start.goal_satisfied():
        return []
    seen = {start.state_fingerprint()}
    frontier: deque[tuple[GridHouseEnv, list[str]]] = deque([(start, [])])
    while frontier:
        state, path = frontier.popleft()
        for action in state.admissible_actions():
            if not keep(action):
                continue
            succ = state.clone()
            succ.step(action)
            if succ.goal_satisfied():
                return path + [action]
            fp = succ.state_fingerprint()
            if fp in seen:
                continue
            seen.add(fp)
            frontier.append((succ, path + [action]))
    raise ValueError(f"no plan found for goal {success_spec.get('goal')}")
