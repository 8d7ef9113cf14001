"""Desk-scale household task library: specs, seeded scenes, success checks.

Three parameterized tasks stand in for a large household suite, each with
color variations and a scripted plan over primitive actions:

* stack_cups      stack two cups into a third (base) cup
* bring_object    carry a bottle to a handover pose, past a flat mat that
                  high-level avoid commands can route around
* place_on_shelf  put two tabletop items onto an elevated shelf board

Scenes are sampled with NumPy's PCG64 generator, so (task, variation,
seed) fully determines the scene; graspable objects are rejection-sampled
in per-task table regions with a 0.12 m center spacing (1000 attempts,
then PlacementError). Object ids are "item-K" for graspables and "zone-K"
for fixtures, in synthetic-label order: the plan's by-label references
("object #1", ...) are valid by construction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .labels import TargetRef
from .scene import (
    CameraModel,
    GripperState,
    ObjectRecord,
    Quat,
    SceneState,
    Vec3,
)

MIN_SPACING = 0.12
MAX_PLACEMENT_ATTEMPTS = 1000

HOME_POSITION = Vec3(0.0, 0.34, 0.30)
HANDOVER_POSE = Vec3(0.0, -0.5, 0.18)

SHELF_CENTER = Vec3(0.34, 0.0, 0.20)
SHELF_HALF = Vec3(0.10, 0.14, 0.02)
SHELF_BAY_HEIGHT = 0.20

MAT_CENTER = Vec3(0.0, -0.12, 0.01)
MAT_HALF = Vec3(0.08, 0.06, 0.01)

ACTION_KINDS = ("move_to", "grasp", "lift", "place_on", "release", "detour_via")


class UnknownTask(Exception):
    pass


class UnknownVariation(Exception):
    pass


class PlacementError(Exception):
    """Rejection sampling could not satisfy the spacing constraint."""


@dataclass(frozen=True)
class Variation:
    variation_id: str
    bindings: dict  # role -> (color, shape)
    subtask_order: tuple[str, ...]


@dataclass(frozen=True)
class TaskSpec:
    task_id: str
    description: str
    variations: tuple[Variation, ...]
    subtasks: tuple[str, ...]

    def variation(self, variation_id: str) -> Variation:
        for v in self.variations:
            if v.variation_id == variation_id:
                return v
        raise UnknownVariation(f"{self.task_id} has no variation {variation_id!r}")


@dataclass(frozen=True)
class PrimitiveAction:
    """One executable step of a plan; exactly one payload field per kind."""

    kind: str
    subtask: str
    target: TargetRef | None = None   # grasp / place_on
    pose: Vec3 | None = None          # move_to
    height: float | None = None      # lift, relative to position at action start
    via: Vec3 | None = None           # detour_via
    speed_scale: float = 1.0

    def __post_init__(self):
        if self.kind not in ACTION_KINDS:
            raise ValueError(f"unknown action kind {self.kind!r}")
        if not 0.0 < self.speed_scale <= 1.0:
            raise ValueError("speed_scale must be in (0, 1]")
        needs_target = self.kind in ("grasp", "place_on")
        if needs_target != (self.target is not None):
            raise ValueError(f"{self.kind} target mismatch")
        if (self.kind == "move_to") != (self.pose is not None):
            raise ValueError("move_to needs a pose")
        if (self.kind == "lift") != (self.height is not None):
            raise ValueError("lift needs a height")
        if (self.kind == "detour_via") != (self.via is not None):
            raise ValueError("detour_via needs a via point")

    def to_json(self) -> dict:
        out: dict = {"kind": self.kind, "subtask": self.subtask, "speed_scale": self.speed_scale}
        if self.target is not None:
            out["target"] = self.target.to_json()
        if self.pose is not None:
            out["pose"] = list(self.pose.as_tuple())
        if self.height is not None:
            out["height"] = self.height
        if self.via is not None:
            out["via"] = list(self.via.as_tuple())
        return out


@dataclass(frozen=True)
class TaskPlan:
    """Ordered actions plus the execution cursor and modulation metadata.

    Subtasks are contiguous action runs; modulation_points are the indices
    where dataset scripts prefer to inject (subtask boundaries).
    """

    actions: tuple[PrimitiveAction, ...]
    cursor: int = 0
    modulation_points: tuple[int, ...] = ()
    skipped_subtasks: tuple[str, ...] = ()

    def __post_init__(self):
        if not 0 <= self.cursor <= len(self.actions):
            raise ValueError("cursor out of range")
        pts = self.modulation_points
        if any(b <= a for a, b in zip(pts, pts[1:])):
            raise ValueError("modulation_points must be strictly increasing")
        if any(p < 0 or p >= len(self.actions) for p in pts):
            raise ValueError("modulation_points must index into the plan")
        seen: dict[str, int] = {}
        prev = None
        for i, a in enumerate(self.actions):
            if a.subtask != prev and a.subtask in seen:
                raise ValueError(f"subtask {a.subtask!r} is not contiguous")
            seen.setdefault(a.subtask, i)
            prev = a.subtask
        for name, start, end in self.subtask_blocks():
            first_grasp = None
            for i in range(start, end):
                if self.actions[i].kind == "grasp" and first_grasp is None:
                    first_grasp = i
                if self.actions[i].kind == "place_on" and first_grasp is None:
                    raise ValueError(f"place_on before grasp in subtask {name!r}")

    def subtask_blocks(self) -> list[tuple[str, int, int]]:
        """Contiguous (name, start, end_exclusive) runs of actions."""
        blocks = []
        for i, a in enumerate(self.actions):
            if blocks and blocks[-1][0] == a.subtask:
                blocks[-1] = (a.subtask, blocks[-1][1], i + 1)
            else:
                blocks.append((a.subtask, i, i + 1))
        return blocks

    def pending_subtasks(self) -> list[str]:
        return [n for n, start, end in self.subtask_blocks() if end > self.cursor]


def _cup(i: int, color: str, x: float, y: float) -> ObjectRecord:
    return ObjectRecord(
        f"item-{i}", "cup", color,
        Vec3(x, y, 0.05), Quat.identity(), Vec3(0.04, 0.04, 0.05),
    )


def _default_cameras() -> tuple[CameraModel, ...]:
    center = Vec3(0.0, 0.0, 0.05)
    return (
        CameraModel.look_at("front", Vec3(0.0, -1.1, 0.45), center),
        CameraModel.look_at("left", Vec3(-1.1, 0.0, 0.45), center),
        CameraModel.look_at(
            "overhead", Vec3(0.0, 0.0, 1.4), Vec3(0.0, 0.0, 0.0), up=Vec3(0.0, 1.0, 0.0)
        ),
    )


def _sample_xy(
    rng: np.random.Generator,
    n: int,
    region: tuple[float, float, float, float],
    occupied: list[tuple[float, float]],
) -> list[tuple[float, float]]:
    """Rejection-sample n table positions with the minimum center spacing."""
    x0, x1, y0, y1 = region
    placed = list(occupied)
    out = []
    for _ in range(n):
        for _attempt in range(MAX_PLACEMENT_ATTEMPTS):
            x = float(rng.uniform(x0, x1))
            y = float(rng.uniform(y0, y1))
            if all((x - px) ** 2 + (y - py) ** 2 >= MIN_SPACING**2 for px, py in placed):
                break
        else:
            raise PlacementError(f"no valid placement after {MAX_PLACEMENT_ATTEMPTS} attempts")
        placed.append((x, y))
        out.append((x, y))
    return out


def _home_gripper() -> GripperState:
    return GripperState(HOME_POSITION, Quat.identity())


def _label_ref(k: int) -> TargetRef:
    return TargetRef.by_label(f"object #{k}")


# --- stack_cups ---------------------------------------------------------------

_STACK_SPEC = TaskSpec(
    task_id="stack_cups",
    description="stack the {cup_1} and {cup_2} cups into the {base} cup",
    variations=(
        Variation("v0", {"cup_1": ("red", "cup"), "cup_2": ("blue", "cup"), "base": ("green", "cup")},
                  ("stack_first_cup", "stack_second_cup")),
        Variation("v1", {"cup_1": ("white", "cup"), "cup_2": ("yellow", "cup"), "base": ("brown", "cup")},
                  ("stack_first_cup", "stack_second_cup")),
    ),
    subtasks=("stack_first_cup", "stack_second_cup"),
)


def _stack_instantiate(var: Variation, rng: np.random.Generator) -> tuple[SceneState, TaskPlan]:
    pts = _sample_xy(rng, 3, (-0.28, 0.28, 0.02, 0.26), [])
    objects = tuple(
        _cup(i + 1, var.bindings[role][0], *pts[i])
        for i, role in enumerate(("cup_1", "cup_2", "base"))
    )
    scene = SceneState(0.0, objects, _home_gripper(), _default_cameras())
    actions = []
    for sub, k in (("stack_first_cup", 1), ("stack_second_cup", 2)):
        actions += [
            PrimitiveAction("grasp", sub, target=_label_ref(k)),
            PrimitiveAction("lift", sub, height=0.12),
            PrimitiveAction("place_on", sub, target=_label_ref(3)),
        ]
    plan = TaskPlan(tuple(actions), 0, (0, 3))
    return scene, plan


def _stack_success(scene: SceneState) -> dict[str, bool]:
    base = scene.object_by_id("item-3")
    out = {}
    for sub, oid in (("stack_first_cup", "item-1"), ("stack_second_cup", "item-2")):
        cup = scene.object_by_id(oid)
        out[sub] = (
            abs(cup.position.x - base.position.x) <= base.half_extents.x
            and abs(cup.position.y - base.position.y) <= base.half_extents.y
            and cup.position.z > base.position.z
        )
    return out


# --- bring_object -------------------------------------------------------------

_BRING_SPEC = TaskSpec(
    task_id="bring_object",
    description="bring the {target_bottle} bottle to the handover pose",
    variations=(
        Variation("v0", {"target_bottle": ("brown", "bottle"), "other_bottle": ("white", "bottle"),
                         "mat": ("green", "plate")}, ("bring_bottle",)),
        Variation("v1", {"target_bottle": ("red", "bottle"), "other_bottle": ("white", "bottle"),
                         "mat": ("green", "plate")}, ("bring_bottle",)),
    ),
    subtasks=("bring_bottle",),
)


def _bring_instantiate(var: Variation, rng: np.random.Generator) -> tuple[SceneState, TaskPlan]:
    # the narrow x range keeps the straight handover leg near the mat, so
    # "avoid the plate" always has a crossing to fix
    pts = _sample_xy(rng, 2, (-0.12, 0.12, 0.12, 0.26), [(MAT_CENTER.x, MAT_CENTER.y)])
    bottle_half = Vec3(0.03, 0.03, 0.09)
    objects = (
        ObjectRecord("item-1", "bottle", var.bindings["target_bottle"][0],
                     Vec3(pts[0][0], pts[0][1], 0.09), Quat.identity(), bottle_half),
        ObjectRecord("item-2", "bottle", var.bindings["other_bottle"][0],
                     Vec3(pts[1][0], pts[1][1], 0.09), Quat.identity(), bottle_half),
        ObjectRecord("zone-1", "plate", var.bindings["mat"][0],
                     MAT_CENTER, Quat.identity(), MAT_HALF, graspable=False),
    )
    scene = SceneState(0.0, objects, _home_gripper(), _default_cameras())
    sub = "bring_bottle"
    actions = (
        PrimitiveAction("grasp", sub, target=_label_ref(1)),
        PrimitiveAction("lift", sub, height=0.05),
        PrimitiveAction("move_to", sub, pose=HANDOVER_POSE),
        PrimitiveAction("release", sub),
    )
    plan = TaskPlan(actions, 0, (0, 2))
    return scene, plan


def _bring_success(scene: SceneState) -> dict[str, bool]:
    delivered = any(
        o.shape == "bottle" and o.position.distance_to(HANDOVER_POSE) <= 0.1
        for o in scene.objects
    )
    return {"bring_bottle": delivered}


# --- place_on_shelf -----------------------------------------------------------

_SHELF_SPEC = TaskSpec(
    task_id="place_on_shelf",
    description="place the {first_item} and the {second_item} on the shelf",
    variations=(
        Variation("v0", {"first_item": ("blue", "book"), "second_item": ("red", "box"),
                         "shelf": ("brown", "box")}, ("shelve_first", "shelve_second")),
        Variation("v1", {"first_item": ("green", "box"), "second_item": ("yellow", "book"),
                         "shelf": ("brown", "box")}, ("shelve_first", "shelve_second")),
    ),
    subtasks=("shelve_first", "shelve_second"),
)

_ITEM_HALVES = {"book": Vec3(0.055, 0.04, 0.02), "box": Vec3(0.04, 0.04, 0.04)}


def _shelf_instantiate(var: Variation, rng: np.random.Generator) -> tuple[SceneState, TaskPlan]:
    pts = _sample_xy(rng, 2, (-0.28, 0.04, 0.02, 0.26), [])
    items = []
    for i, role in enumerate(("first_item", "second_item")):
        color, shape = var.bindings[role]
        half = _ITEM_HALVES[shape]
        items.append(ObjectRecord(
            f"item-{i + 1}", shape, color,
            Vec3(pts[i][0], pts[i][1], half.z), Quat.identity(), half,
        ))
    shelf = ObjectRecord("zone-1", "box", var.bindings["shelf"][0],
                         SHELF_CENTER, Quat.identity(), SHELF_HALF, graspable=False)
    scene = SceneState(0.0, tuple(items) + (shelf,), _home_gripper(), _default_cameras())
    actions = []
    for sub, k in (("shelve_first", 1), ("shelve_second", 2)):
        actions += [
            PrimitiveAction("grasp", sub, target=_label_ref(k)),
            PrimitiveAction("lift", sub, height=0.15),
            PrimitiveAction("place_on", sub, target=_label_ref(3)),
        ]
    plan = TaskPlan(tuple(actions), 0, (0, 3))
    return scene, plan


def _shelf_success(scene: SceneState) -> dict[str, bool]:
    top = SHELF_CENTER.z + SHELF_HALF.z
    out = {}
    for sub, oid in (("shelve_first", "item-1"), ("shelve_second", "item-2")):
        item = scene.object_by_id(oid)
        out[sub] = (
            abs(item.position.x - SHELF_CENTER.x) <= SHELF_HALF.x
            and abs(item.position.y - SHELF_CENTER.y) <= SHELF_HALF.y
            and top <= item.position.z <= top + SHELF_BAY_HEIGHT
        )
    return out


# --- public API ---------------------------------------------------------------

_TASKS: dict[str, tuple[TaskSpec, object, object]] = {
    "stack_cups": (_STACK_SPEC, _stack_instantiate, _stack_success),
    "bring_object": (_BRING_SPEC, _bring_instantiate, _bring_success),
    "place_on_shelf": (_SHELF_SPEC, _shelf_instantiate, _shelf_success),
}


def list_tasks() -> list[TaskSpec]:
    """All task specs, in a stable order."""
    return [_TASKS[name][0] for name in ("stack_cups", "bring_object", "place_on_shelf")]


def get_task(task_id: str) -> TaskSpec:
    if task_id not in _TASKS:
        raise UnknownTask(f"unknown task {task_id!r}")
    return _TASKS[task_id][0]


def instantiate(task_id: str, variation_id: str, seed: int) -> tuple[SceneState, TaskPlan]:
    """Deterministic scene + plan for (task, variation, seed)."""
    spec = get_task(task_id)
    var = spec.variation(variation_id)
    rng = np.random.Generator(np.random.PCG64(seed))
    build = _TASKS[task_id][1]
    return build(var, rng)


def success(task_id: str, scene: SceneState) -> tuple[bool, dict[str, bool]]:
    """Overall and per-subtask goal satisfaction for the given scene."""
    if task_id not in _TASKS:
        raise UnknownTask(f"unknown task {task_id!r}")
    check = _TASKS[task_id][2]
    statuses = check(scene)
    return all(statuses.values()), statuses
