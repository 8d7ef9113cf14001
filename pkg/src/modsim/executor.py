"""Fixed-timestep deterministic executor for task plans.

The executor advances a scene at dt = 0.05 s (20 Hz). Each step moves the
gripper straight toward the current action's waypoint by at most
v_max * speed_scale * dt; an action completes when the gripper is within
1 mm of its waypoint. Grasped objects are kinematically attached (their
offset from the gripper is frozen); there is no other physics.

Time is always step_count * dt, recomputed rather than accumulated, so a
trace is a pure function of (task, variation, seed, modulation script) and
two runs compare bit-equal.

Modulations are applied between steps: any moment between two step() calls
is a step boundary. run_to_completion injects a script entry (f, ir) after
frame f has been captured and before the step to frame f+1, which makes
modulated traces prefix-equal to their baselines through frame f.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from . import labels, modulate, tasks
from .labels import LabelRegistry
from .modlang import ModulationIR, OP_ABORT
from .scene import (
    APERTURE_CLOSED,
    APERTURE_OPEN,
    ImageBBox,
    SceneState,
    Vec3,
    project_point,
    visible_objects,
)
from .tasks import TaskPlan

DT = 0.05
DEFAULT_V_MAX = 1.0
GRASP_RADIUS = 0.05
WAYPOINT_TOL = 1e-3
STEP_CAP = 20_000

RUNNING = "running"
PAUSED = "paused"
AWAITING_MODULATION = "awaiting_modulation"
DONE = "done"
FAILED = "failed"


class InvalidState(Exception):
    pass


class StepCapExceeded(Exception):
    pass


class InvalidScript(Exception):
    pass


@dataclass(frozen=True)
class ModulationPointMark:
    """Where a modulation took effect: the last pre-modulation frame index
    and the plan cursor at that boundary."""

    frame_index: int
    cursor: int

    def to_json(self) -> dict:
        return {"frame_index": self.frame_index, "cursor": self.cursor}


@dataclass(frozen=True)
class Event:
    t: float
    frame_index: int
    kind: str
    payload: dict

    def to_json(self) -> dict:
        return {"t": self.t, "frame_index": self.frame_index, "kind": self.kind,
                "payload": self.payload}


@dataclass(frozen=True)
class ViewOverlay:
    camera_id: str
    items: tuple[tuple[str, ImageBBox, str], ...]  # (label text, bbox, object_id)
    gripper_px: tuple[float, float] | None = None  # projected gripper marker


def _pose7(p: Vec3, q) -> list[float]:
    # wire/file convention: poses are 7-tuples [x, y, z, qw, qx, qy, qz]
    return [p.x, p.y, p.z, q.w, q.x, q.y, q.z]


@dataclass(frozen=True)
class Frame:
    """One snapshot of the streamed state; what clients and records see."""

    index: int
    t: float
    status: str
    gripper_position: Vec3
    gripper_orientation: object
    gripper_aperture: str
    gripper_held: str | None
    objects: tuple[tuple[str, Vec3, object], ...]  # (object_id, position, orientation)
    views: tuple[ViewOverlay, ...]
    marks: tuple[ModulationPointMark, ...]

    def object_position(self, object_id: str) -> Vec3:
        for oid, pos, _ in self.objects:
            if oid == object_id:
                return pos
        raise KeyError(object_id)

    def to_json(self) -> dict:
        return {
            "index": self.index,
            "t": self.t,
            "status": self.status,
            "gripper": {
                "pose": _pose7(self.gripper_position, self.gripper_orientation),
                "aperture": self.gripper_aperture,
                "held": self.gripper_held,
            },
            "objects": [
                {"object_id": oid, "pose": _pose7(p, q)} for oid, p, q in self.objects
            ],
            "views": [
                {
                    "camera_id": v.camera_id,
                    "overlays": [
                        {"label": label, "object_id": oid, "bbox": bbox.as_list()}
                        for label, bbox, oid in v.items
                    ],
                    "gripper_px": list(v.gripper_px) if v.gripper_px else None,
                }
                for v in self.views
            ],
            "marks": [m.to_json() for m in self.marks],
        }


@dataclass(frozen=True)
class ModulationRecord:
    """Bookkeeping for one applied modulation (consumed by the dataset layer)."""

    frame_index: int
    ir: ModulationIR
    context_id: str | None
    scene_before: SceneState


@dataclass
class ExecState:
    """Mutable execution state; owned by exactly one session or run."""

    task_id: str
    variation_id: str
    seed: int
    scene: SceneState
    plan: TaskPlan
    registry: LabelRegistry
    status: str = RUNNING
    step_count: int = 0
    v_max: float = DEFAULT_V_MAX
    events: list[Event] = field(default_factory=list)
    marks: list[ModulationPointMark] = field(default_factory=list)
    modulations: list[ModulationRecord] = field(default_factory=list)
    pause_at_modulation_points: bool = False
    success: bool | None = None
    subtask_status: dict | None = None
    failure_reason: str | None = None
    _action_started: bool = False
    _lift_anchor: Vec3 | None = None
    _held_offset: Vec3 | None = None

    @property
    def t(self) -> float:
        return self.step_count * DT


def start_episode(
    task_id: str,
    variation_id: str,
    seed: int,
    v_max: float = DEFAULT_V_MAX,
    pause_at_modulation_points: bool = False,
) -> ExecState:
    """Instantiate the task and label every object; status starts running."""
    scene, plan = tasks.instantiate(task_id, variation_id, seed)
    episode_id = f"{task_id}-{variation_id}-s{seed}"
    registry = labels.assign_labels(scene, LabelRegistry(episode_id))
    return ExecState(
        task_id=task_id,
        variation_id=variation_id,
        seed=seed,
        scene=scene,
        plan=plan,
        registry=registry,
        v_max=v_max,
        pause_at_modulation_points=pause_at_modulation_points,
    )


def capture(ex: ExecState) -> Frame:
    """Freeze the current state into a frame, including per-camera overlays."""
    scene = ex.scene
    views = tuple(
        ViewOverlay(
            cam.camera_id,
            tuple(
                (ex.registry.by_object[oid], bbox, oid)
                for oid, bbox in visible_objects(cam, scene)
            ),
            project_point(cam, scene.gripper.position),
        )
        for cam in scene.cameras
    )
    return Frame(
        index=ex.step_count,
        t=ex.t,
        status=ex.status,
        gripper_position=scene.gripper.position,
        gripper_orientation=scene.gripper.orientation,
        gripper_aperture=scene.gripper.aperture,
        gripper_held=scene.gripper.held,
        objects=tuple((o.object_id, o.position, o.orientation) for o in scene.objects),
        views=views,
        marks=tuple(ex.marks),
    )


def _emit(ex: ExecState, out: list[Event], kind: str, payload: dict) -> Event:
    ev = Event(ex.t, ex.step_count, kind, payload)
    ex.events.append(ev)
    out.append(ev)
    return ev


def _waypoint(ex: ExecState, action: tasks.PrimitiveAction) -> Vec3:
    if action.kind == "move_to":
        return action.pose
    if action.kind == "detour_via":
        return action.via
    if action.kind == "lift":
        anchor = ex._lift_anchor if ex._lift_anchor is not None else ex.scene.gripper.position
        return anchor + Vec3(0.0, 0.0, action.height)
    if action.kind == "release":
        return ex.scene.gripper.position
    # grasp / place_on resolve their reference every step, so an in-flight
    # target substitution retargets the motion immediately
    oid = labels.resolve(action.target, ex.scene, ex.registry, None)
    obj = ex.scene.object_by_id(oid)
    if action.kind == "grasp":
        return obj.position
    top = obj.world_aabb()[1].z
    held = ex.scene.gripper.held
    half_z = ex.scene.object_by_id(held).half_extents.z if held else 0.05
    return Vec3(obj.position.x, obj.position.y, top + half_z)


def _move_gripper(ex: ExecState, new_pos: Vec3):
    scene = ex.scene
    gripper = replace(scene.gripper, position=new_pos)
    scene = replace(scene, gripper=gripper, time=ex.t)
    if gripper.held is not None and ex._held_offset is not None:
        obj = scene.object_by_id(gripper.held)
        scene = scene.with_object(replace(obj, position=new_pos + ex._held_offset))
    ex.scene = scene


def _detach(ex: ExecState, out: list[Event]):
    held = ex.scene.gripper.held
    if held is None:
        return
    obj = ex.scene.object_by_id(held)
    gripper = replace(ex.scene.gripper, aperture=APERTURE_OPEN, held=None)
    ex.scene = replace(ex.scene, gripper=gripper)
    ex._held_offset = None
    _emit(ex, out, "released", {
        "object_id": held,
        "label": ex.registry.by_object[held],
        "position": list(obj.position.as_tuple()),
    })


def _attach(ex: ExecState, oid: str, out: list[Event]):
    obj = ex.scene.object_by_id(oid)
    offset = obj.position - ex.scene.gripper.position
    gripper = replace(ex.scene.gripper, aperture=APERTURE_CLOSED, held=oid)
    ex.scene = replace(ex.scene, gripper=gripper)
    ex._held_offset = offset
    _emit(ex, out, "grasped", {"object_id": oid, "label": ex.registry.by_object[oid]})


def _subtask_grasp_label(ex: ExecState, name: str) -> str | None:
    for a in ex.plan.actions:
        if a.subtask == name and a.kind == "grasp" and a.target is not None:
            try:
                oid = labels.resolve(a.target, ex.scene, ex.registry, None)
                return ex.registry.by_object[oid]
            except labels.ResolutionError:
                return None
    return None


def _finalize(ex: ExecState, out: list[Event]):
    ok_all, statuses = tasks.success(ex.task_id, ex.scene)
    remaining = {k: v for k, v in statuses.items() if k not in ex.plan.skipped_subtasks}
    ok = all(remaining.values())
    ex.subtask_status = statuses
    ex.success = ok
    if ok:
        ex.status = DONE
        _emit(ex, out, "task_done", {"success": True, "subtasks": statuses})
    else:
        ex.status = FAILED
        ex.failure_reason = ex.failure_reason or "predicate_false"
        _emit(ex, out, "task_failed", {"reason": ex.failure_reason, "subtasks": statuses})


def _fail(ex: ExecState, out: list[Event], reason: str):
    _, statuses = tasks.success(ex.task_id, ex.scene)
    ex.subtask_status = statuses
    ex.success = False
    ex.failure_reason = reason
    ex.status = FAILED
    _emit(ex, out, "task_failed", {"reason": reason, "subtasks": statuses})


def fail_episode(ex: ExecState, reason: str) -> list[Event]:
    """Terminate an episode early (stop control); returns the new events."""
    out: list[Event] = []
    if ex.status not in (DONE, FAILED):
        _fail(ex, out, reason)
    return out


def step(ex: ExecState) -> tuple[ExecState, list[Event]]:
    """Advance the simulation by one dt; returns the events it produced."""
    if ex.status != RUNNING:
        raise InvalidState(f"cannot step while {ex.status}")
    out: list[Event] = []
    plan = ex.plan

    if plan.cursor >= len(plan.actions):
        ex.step_count += 1
        ex.scene = replace(ex.scene, time=ex.t)
        _finalize(ex, out)
        return ex, out

    action = plan.actions[plan.cursor]
    if not ex._action_started:
        if action.kind == "lift":
            ex._lift_anchor = ex.scene.gripper.position
        _emit(ex, out, "action_started", {
            "index": plan.cursor, "kind": action.kind, "subtask": action.subtask,
        })
        ex._action_started = True

    try:
        wp = _waypoint(ex, action)
    except labels.ResolutionError as exc:
        ex.step_count += 1
        ex.scene = replace(ex.scene, time=ex.t)
        _fail(ex, out, f"unresolvable plan reference: {exc}")
        return ex, out

    ex.step_count += 1
    pos = ex.scene.gripper.position
    delta = wp - pos
    dist = delta.norm()
    budget = ex.v_max * action.speed_scale * DT
    if dist <= budget:
        new_pos = wp
    else:
        new_pos = pos + delta.scaled(budget / dist)
    _move_gripper(ex, new_pos)

    if new_pos.distance_to(wp) > WAYPOINT_TOL:
        return ex, out

    # action complete
    if action.kind == "grasp":
        oid = labels.resolve(action.target, ex.scene, ex.registry, None)
        if ex.scene.gripper.held not in (None, oid):
            _detach(ex, out)
        if ex.scene.gripper.held is None:
            obj = ex.scene.object_by_id(oid)
            if obj.position.distance_to(ex.scene.gripper.position) <= GRASP_RADIUS:
                _attach(ex, oid, out)
            else:
                _fail(ex, out, f"grasp target {oid} out of reach")
                return ex, out
    elif action.kind in ("place_on", "release"):
        _detach(ex, out)

    _emit(ex, out, "action_completed", {
        "index": plan.cursor, "kind": action.kind, "subtask": action.subtask,
    })
    new_cursor = plan.cursor + 1
    last_of_subtask = (
        new_cursor >= len(plan.actions)
        or plan.actions[new_cursor].subtask != action.subtask
    )
    if last_of_subtask:
        _emit(ex, out, "subtask_completed", {
            "subtask": action.subtask,
            "target_label": _subtask_grasp_label(ex, action.subtask),
        })
    ex.plan = replace(plan, cursor=new_cursor)
    ex._action_started = False
    ex._lift_anchor = None

    if new_cursor >= len(ex.plan.actions):
        _finalize(ex, out)
    elif ex.pause_at_modulation_points and new_cursor in ex.plan.modulation_points:
        ex.status = AWAITING_MODULATION
    return ex, out


def inject(ex: ExecState, ir: ModulationIR) -> tuple[ExecState, Event]:
    """Apply a modulation at the current step boundary.

    Rejection is data, not an exception: the returned event is either
    modulation_applied (with its ModulationPointMark) or
    modulation_rejected (with a reason), and a rejected plan is untouched.
    """
    out: list[Event] = []
    if ex.status in (DONE, FAILED):
        ev = _emit(ex, out, "modulation_rejected", {
            "ir": ir.to_json(),
            "reason": modulate.TOO_LATE,
            "detail": "episode already ended",
        })
        return ex, ev

    context = modulate.context_target_id(ex.plan, ex.plan.cursor, ex.scene, ex.registry)
    old_current = (
        ex.plan.actions[ex.plan.cursor] if ex.plan.cursor < len(ex.plan.actions) else None
    )
    result = modulate.apply(ex.plan, ex.plan.cursor, ir, ex.scene, ex.registry)
    if isinstance(result, modulate.Rejection):
        ev = _emit(ex, out, "modulation_rejected", {
            "ir": ir.to_json(), "reason": result.reason, "detail": result.detail,
        })
        return ex, ev

    scene_before = ex.scene
    ex.plan = result
    mark = ModulationPointMark(frame_index=ex.step_count, cursor=ex.plan.cursor)
    ex.marks.append(mark)
    ex.modulations.append(ModulationRecord(ex.step_count, ir, context, scene_before))
    ev = _emit(ex, out, "modulation_applied", {"ir": ir.to_json(), "mark": mark.to_json()})

    new_current = (
        ex.plan.actions[ex.plan.cursor] if ex.plan.cursor < len(ex.plan.actions) else None
    )
    if (
        old_current is None
        or new_current is None
        or (old_current.kind, old_current.subtask) != (new_current.kind, new_current.subtask)
    ):
        ex._action_started = False
        ex._lift_anchor = None

    if ir.op == OP_ABORT:
        _fail(ex, out, "aborted")
    elif ex.plan.cursor >= len(ex.plan.actions):
        _finalize(ex, out)
    elif ex.status == AWAITING_MODULATION:
        ex.status = RUNNING
    return ex, ev


@dataclass
class EpisodeTrace:
    """Complete frame-by-frame record of one run."""

    task_id: str
    variation_id: str
    seed: int
    script: list[tuple[int, ModulationIR]]
    frames: list[Frame]
    events: list[Event]
    marks: list[ModulationPointMark]
    modulations: list[ModulationRecord]
    success: bool
    final_status: str
    failure_reason: str | None
    subtask_status: dict
    registry: LabelRegistry


def run_to_completion(
    ex: ExecState, script: list[tuple[int, ModulationIR]] | None = None
) -> EpisodeTrace:
    """Run an episode headless, injecting each scripted IR at its frame.

    Entry (f, ir) is injected after frame f is captured and before the step
    to frame f+1. Raises StepCapExceeded past 20000 frames and
    InvalidScript if an entry's frame is never reached.
    """
    script = list(script or [])
    if any(b[0] <= a[0] for a, b in zip(script, script[1:])):
        raise InvalidScript("script frames must be strictly ascending")
    queue = list(script)
    frames = [capture(ex)]
    while True:
        while queue and queue[0][0] == ex.step_count:
            _, ir = queue.pop(0)
            inject(ex, ir)
        if ex.status in (DONE, FAILED):
            break
        if ex.status == AWAITING_MODULATION:
            ex.status = RUNNING  # headless runs have no operator to wait for
        if ex.step_count >= STEP_CAP:
            raise StepCapExceeded(f"exceeded {STEP_CAP} frames")
        step(ex)
        frames.append(capture(ex))
    if queue:
        raise InvalidScript(
            f"script entry at frame {queue[0][0]} was never reached "
            f"(episode ended at frame {ex.step_count})"
        )
    return EpisodeTrace(
        task_id=ex.task_id,
        variation_id=ex.variation_id,
        seed=ex.seed,
        script=script,
        frames=frames,
        events=list(ex.events),
        marks=list(ex.marks),
        modulations=list(ex.modulations),
        success=bool(ex.success),
        final_status=ex.status,
        failure_reason=ex.failure_reason,
        subtask_status=dict(ex.subtask_status or {}),
        registry=ex.registry,
    )


def run_episode(
    task_id: str,
    variation_id: str,
    seed: int,
    script: list[tuple[int, ModulationIR]] | None = None,
    v_max: float = DEFAULT_V_MAX,
) -> EpisodeTrace:
    """Convenience wrapper: start_episode + run_to_completion."""
    ex = start_episode(task_id, variation_id, seed, v_max=v_max)
    return run_to_completion(ex, script)
