"""Rewrites an in-flight plan according to a parsed modulation command.

apply() is a pure transformation: it returns a new TaskPlan or a typed
Rejection and never mutates its inputs. Completed actions (index < cursor)
are preserved bit-identically; only the pending tail is rewritten.

Rejection reasons:
    TooLate         the modulation's subject already started/finished
    NotFound        a reference resolves to nothing (or a context is missing)
    Ambiguous       a reference matches several objects
    NoPendingMatch  nothing pending is affected
    AlreadyApplied  the requested effect is already in place
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from . import labels, modlang
from .labels import Ambiguous, LabelRegistry, NoContext, NotFound, TargetRef
from .scene import ObjectRecord, SceneState, Vec3
from .tasks import PrimitiveAction, TaskPlan

AVOID_CLEARANCE = 0.15   # legs passing closer than this to the obstacle get a detour
DETOUR_HEIGHT = 0.30     # detour waypoint height above the obstacle top

TOO_LATE = "TooLate"
NOT_FOUND = "NotFound"
AMBIGUOUS = "Ambiguous"
NO_PENDING_MATCH = "NoPendingMatch"
ALREADY_APPLIED = "AlreadyApplied"


@dataclass(frozen=True)
class Rejection:
    reason: str
    detail: str = ""

    def to_json(self) -> dict:
        return {"reason": self.reason, "detail": self.detail}


def apply(
    plan: TaskPlan,
    cursor: int,
    ir: modlang.ModulationIR,
    scene: SceneState,
    registry: LabelRegistry,
) -> TaskPlan | Rejection:
    """Apply one modulation at a step boundary; see module docstring."""
    if not 0 <= cursor <= len(plan.actions):
        raise ValueError("cursor out of range")
    try:
        if ir.op == modlang.OP_SET_SPEED:
            return _set_speed(plan, cursor, ir.scale)
        if ir.op == modlang.OP_SUBSTITUTE:
            return _substitute(plan, cursor, ir, scene, registry)
        if ir.op == modlang.OP_REORDER:
            return _reorder(plan, cursor, ir, scene, registry)
        if ir.op == modlang.OP_SKIP:
            return _skip(plan, cursor, ir, scene, registry)
        if ir.op == modlang.OP_AVOID:
            return _add_avoid(plan, cursor, ir, scene, registry)
        if ir.op == modlang.OP_ABORT:
            return _abort(plan, cursor)
        raise ValueError(f"unknown op {ir.op!r}")
    except Ambiguous as exc:
        return Rejection(AMBIGUOUS, str(exc))
    except (NotFound, NoContext) as exc:
        return Rejection(NOT_FOUND, str(exc))


def context_target_id(
    plan: TaskPlan, cursor: int, scene: SceneState, registry: LabelRegistry
) -> str | None:
    """Object id of the nearest pending action's target, if resolvable.

    This is the resolution context: it supplies the elided shape in
    "the white one" and the exclusion for "the other cup".
    """
    for i in range(cursor, len(plan.actions)):
        ref = plan.actions[i].target
        if ref is None:
            continue
        try:
            return labels.resolve(ref, scene, registry, None)
        except labels.ResolutionError:
            return None
    return None


def _block_starts(actions: tuple[PrimitiveAction, ...]) -> tuple[int, ...]:
    starts = []
    prev = None
    for i, a in enumerate(actions):
        if a.subtask != prev:
            starts.append(i)
            prev = a.subtask
    return tuple(starts)


def _rebuild(plan: TaskPlan, actions: list[PrimitiveAction], cursor: int) -> TaskPlan:
    acts = tuple(actions)
    return replace(
        plan,
        actions=acts,
        cursor=cursor,
        modulation_points=_block_starts(acts),
    )


def _set_speed(plan: TaskPlan, cursor: int, scale: float) -> TaskPlan | Rejection:
    if cursor >= len(plan.actions):
        return Rejection(TOO_LATE, "no pending actions")
    actions = list(plan.actions)
    for i in range(cursor, len(actions)):
        actions[i] = replace(actions[i], speed_scale=scale)
    # deliberately idempotent: re-applying the same scale is a success
    return replace(plan, actions=tuple(actions), cursor=cursor)


def _resolve_with_context(
    ref: TargetRef, scene: SceneState, registry: LabelRegistry, context: str | None
) -> str:
    return labels.resolve(ref, scene, registry, context)


def _substitute(
    plan: TaskPlan,
    cursor: int,
    ir: modlang.ModulationIR,
    scene: SceneState,
    registry: LabelRegistry,
) -> TaskPlan | Rejection:
    context = context_target_id(plan, cursor, scene, registry)
    new_id = _resolve_with_context(ir.new, scene, registry, context)
    if ir.old is not None:
        old_id = _resolve_with_context(ir.old, scene, registry, context)
    else:
        if context is None:
            return Rejection(NOT_FOUND, "no current target to substitute away from")
        old_id = context
    if old_id == new_id:
        return Rejection(ALREADY_APPLIED, "old and new targets are the same object")

    def resolves_to_old(ref: TargetRef | None) -> bool:
        if ref is None:
            return False
        try:
            return labels.resolve(ref, scene, registry, context) == old_id
        except labels.ResolutionError:
            return False

    new_ref = TargetRef.by_label(registry.label_of(new_id).text)
    actions = list(plan.actions)
    rewritten = 0
    for i in range(cursor, len(actions)):
        if resolves_to_old(actions[i].target):
            actions[i] = replace(actions[i], target=new_ref)
            rewritten += 1
    if rewritten == 0:
        if any(resolves_to_old(a.target) for a in actions[:cursor]):
            return Rejection(TOO_LATE, "the old target's actions already ran")
        return Rejection(NO_PENDING_MATCH, "no pending action references the old target")
    return replace(plan, actions=tuple(actions), cursor=cursor)


def _grasp_target_block(
    plan: TaskPlan,
    target_id: str,
    scene: SceneState,
    registry: LabelRegistry,
    context: str | None,
) -> tuple[str, int, int] | None:
    """Find the subtask block whose grasp action targets the resolved object."""
    for name, start, end in plan.subtask_blocks():
        for i in range(start, end):
            a = plan.actions[i]
            if a.kind == "grasp" and a.target is not None:
                try:
                    if labels.resolve(a.target, scene, registry, context) == target_id:
                        return name, start, end
                except labels.ResolutionError:
                    continue
    return None


def _reorder(
    plan: TaskPlan,
    cursor: int,
    ir: modlang.ModulationIR,
    scene: SceneState,
    registry: LabelRegistry,
) -> TaskPlan | Rejection:
    context = context_target_id(plan, cursor, scene, registry)
    target_id = _resolve_with_context(ir.target, scene, registry, context)
    block = _grasp_target_block(plan, target_id, scene, registry, context)
    if block is None:
        return Rejection(NO_PENDING_MATCH, f"no subtask grasps {target_id!r}")
    name, start, end = block
    if start < cursor:
        return Rejection(TOO_LATE, f"subtask {name!r} already started")

    prefix = list(plan.actions[:cursor])
    # remaining actions of a subtask that is mid-flight stay at the front;
    # whole pending blocks are reordered behind them
    blocks = [b for b in plan.subtask_blocks() if b[1] >= cursor]
    head_start = cursor
    head_end = blocks[0][1] if blocks else len(plan.actions)
    head = list(plan.actions[cursor:head_end]) if head_end > cursor else []
    moved = list(plan.actions[start:end])
    others = [
        list(plan.actions[s:e])
        for n, s, e in blocks
        if s != start
    ]
    if ir.position == "first":
        ordered = [moved] + others
    else:
        ordered = others + [moved]
    actions = prefix + head + [a for block in ordered for a in block]
    if actions == list(plan.actions):
        return Rejection(ALREADY_APPLIED, f"subtask {name!r} is already {ir.position}")
    return _rebuild(plan, actions, cursor)


def _skip(
    plan: TaskPlan,
    cursor: int,
    ir: modlang.ModulationIR,
    scene: SceneState,
    registry: LabelRegistry,
) -> TaskPlan | Rejection:
    if ir.subtask is not None:
        if ir.subtask in plan.skipped_subtasks:
            return Rejection(ALREADY_APPLIED, f"subtask {ir.subtask!r} already skipped")
        match = [b for b in plan.subtask_blocks() if b[0] == ir.subtask]
        if not match:
            return Rejection(NOT_FOUND, f"no subtask named {ir.subtask!r}")
        name, start, end = match[0]
    else:
        context = context_target_id(plan, cursor, scene, registry)
        target_id = _resolve_with_context(ir.target, scene, registry, context)
        block = _grasp_target_block(plan, target_id, scene, registry, context)
        if block is None:
            return Rejection(NO_PENDING_MATCH, f"no subtask grasps {target_id!r}")
        name, start, end = block
    if end <= cursor:
        return Rejection(TOO_LATE, f"subtask {name!r} already completed")
    cut = max(start, cursor)
    actions = list(plan.actions[:cut]) + list(plan.actions[end:])
    new = _rebuild(plan, actions, cursor)
    return replace(new, skipped_subtasks=plan.skipped_subtasks + (name,))


def _abort(plan: TaskPlan, cursor: int) -> TaskPlan | Rejection:
    if cursor >= len(plan.actions):
        return Rejection(TOO_LATE, "nothing left to abort")
    actions = list(plan.actions[:cursor])
    pts = tuple(p for p in plan.modulation_points if p < cursor)
    return replace(plan, actions=tuple(actions), cursor=cursor, modulation_points=pts)


# --- obstacle avoidance -------------------------------------------------------

def _point_aabb_distance(p: Vec3, lo: Vec3, hi: Vec3) -> float:
    dx = max(lo.x - p.x, 0.0, p.x - hi.x)
    dy = max(lo.y - p.y, 0.0, p.y - hi.y)
    dz = max(lo.z - p.z, 0.0, p.z - hi.z)
    return (dx * dx + dy * dy + dz * dz) ** 0.5


def segment_aabb_distance(a: Vec3, b: Vec3, lo: Vec3, hi: Vec3) -> float:
    """Minimum distance from segment [a, b] to an axis-aligned box.

    Distance to a convex set is convex along the segment, so a ternary
    search converges to the global minimum.
    """

    def f(t: float) -> float:
        return _point_aabb_distance(a + (b - a).scaled(t), lo, hi)

    left, right = 0.0, 1.0
    for _ in range(120):
        m1 = left + (right - left) / 3.0
        m2 = right - (right - left) / 3.0
        if f(m1) <= f(m2):
            right = m2
        else:
            left = m1
    return min(f(0.0), f(1.0), f(0.5 * (left + right)))


def _preview_legs(
    plan: TaskPlan,
    cursor: int,
    scene: SceneState,
    registry: LabelRegistry,
) -> list[tuple[int, Vec3, Vec3]]:
    """(action_index, start, end) motion legs the pending plan will execute.

    Uses current object poses; obstacles are fixtures, so the preview of
    the legs that matter for avoidance is exact.
    """
    pos = scene.gripper.position
    held = scene.gripper.held
    legs = []
    for i in range(cursor, len(plan.actions)):
        a = plan.actions[i]
        wp = None
        if a.kind == "move_to":
            wp = a.pose
        elif a.kind == "detour_via":
            wp = a.via
        elif a.kind == "lift":
            wp = pos + Vec3(0.0, 0.0, a.height)
        elif a.kind == "grasp":
            obj = scene.object_by_id(labels.resolve(a.target, scene, registry, None))
            wp = obj.position
            held = obj.object_id
        elif a.kind == "place_on":
            obj = scene.object_by_id(labels.resolve(a.target, scene, registry, None))
            top = obj.world_aabb()[1].z
            half_z = scene.object_by_id(held).half_extents.z if held else 0.05
            wp = Vec3(obj.position.x, obj.position.y, top + half_z)
            held = None
        elif a.kind == "release":
            held = None
        if wp is not None:
            legs.append((i, pos, wp))
            pos = wp
    return legs


def _add_avoid(
    plan: TaskPlan,
    cursor: int,
    ir: modlang.ModulationIR,
    scene: SceneState,
    registry: LabelRegistry,
) -> TaskPlan | Rejection:
    context = context_target_id(plan, cursor, scene, registry)
    obstacle_id = _resolve_with_context(ir.target, scene, registry, context)
    obstacle: ObjectRecord = scene.object_by_id(obstacle_id)
    lo, hi = obstacle.world_aabb()
    detour_point = Vec3(obstacle.position.x, obstacle.position.y, hi.z + DETOUR_HEIGHT)

    crossing = [
        i
        for i, start, end in _preview_legs(plan, cursor, scene, registry)
        if segment_aabb_distance(start, end, lo, hi) < AVOID_CLEARANCE
    ]
    if not crossing:
        already = any(
            a.kind == "detour_via" and a.via is not None
            and a.via.x == detour_point.x and a.via.y == detour_point.y
            for a in plan.actions[cursor:]
        )
        if already:
            return Rejection(ALREADY_APPLIED, "a detour around this obstacle is already planned")
        return Rejection(NO_PENDING_MATCH, "no pending leg passes near the obstacle")

    actions = []
    for i, a in enumerate(plan.actions):
        if i in crossing:
            actions.append(PrimitiveAction(
                "detour_via", a.subtask, via=detour_point, speed_scale=a.speed_scale
            ))
        actions.append(a)
    return _rebuild(plan, actions, cursor)
