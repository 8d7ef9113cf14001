"""Synthetic object labels shared between the operator and the robot.

Labels have the exact surface form ``object #K`` (single space, lowercase)
and are assigned once per episode: the same object keeps the same label in
every frame and in every camera view, and numbers are never recycled even
if an object leaves the scene.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .scene import COLORS, SHAPES, CameraModel, ImageBBox, SceneState, visible_objects

LABEL_RE = re.compile(r"^object #([1-9][0-9]*)$")


class ResolutionError(Exception):
    """Base class for reference-resolution failures."""


class NotFound(ResolutionError):
    """No object matches the reference."""


class Ambiguous(ResolutionError):
    """Two or more objects match; a synthetic label is required."""


class NoContext(ResolutionError):
    """The reference needs execution context (current target / held object)."""


@dataclass(frozen=True)
class SyntheticLabel:
    text: str

    def __post_init__(self):
        if not LABEL_RE.match(self.text):
            raise ValueError(f"malformed label {self.text!r}")

    @property
    def k(self) -> int:
        return int(self.text.split("#", 1)[1])

    @staticmethod
    def from_k(k: int) -> "SyntheticLabel":
        return SyntheticLabel(f"object #{k}")


@dataclass(frozen=True)
class TargetRef:
    """Unresolved reference to an object, as produced by the command parser.

    kind is one of:
      by_label       label text ("object #2")
      by_attributes  color and/or shape; shape=None means "fill the shape
                     from the current action's target" ("the white one")
      other_of       the object of the given shape that is neither the
                     current target nor held ("the other cup")
      held_target    whatever the gripper currently holds
    """

    kind: str
    label: str | None = None
    color: str | None = None
    shape: str | None = None

    def __post_init__(self):
        if self.kind not in ("by_label", "by_attributes", "other_of", "held_target"):
            raise ValueError(f"bad ref kind {self.kind!r}")
        if self.kind == "by_label" and not (self.label and LABEL_RE.match(self.label)):
            raise ValueError(f"by_label needs a well-formed label, got {self.label!r}")
        if self.kind == "by_attributes" and self.color is None and self.shape is None:
            raise ValueError("by_attributes needs a color or a shape")
        if self.kind == "other_of" and self.shape is None:
            raise ValueError("other_of needs a shape")
        if self.color is not None and self.color not in COLORS:
            raise ValueError(f"unknown color {self.color!r}")
        if self.shape is not None and self.shape not in SHAPES:
            raise ValueError(f"unknown shape {self.shape!r}")

    @staticmethod
    def by_label(text: str) -> "TargetRef":
        return TargetRef("by_label", label=text)

    @staticmethod
    def by_attributes(color: str | None = None, shape: str | None = None) -> "TargetRef":
        return TargetRef("by_attributes", color=color, shape=shape)

    @staticmethod
    def other_of(shape: str) -> "TargetRef":
        return TargetRef("other_of", shape=shape)

    @staticmethod
    def held() -> "TargetRef":
        return TargetRef("held_target")

    def to_json(self) -> dict:
        out: dict = {"kind": self.kind}
        for key in ("label", "color", "shape"):
            val = getattr(self, key)
            if val is not None:
                out[key] = val
        return out

    @staticmethod
    def from_json(data: dict) -> "TargetRef":
        return TargetRef(
            data["kind"],
            label=data.get("label"),
            color=data.get("color"),
            shape=data.get("shape"),
        )


@dataclass(frozen=True)
class LabelRegistry:
    """Bijective object_id <-> synthetic label map for one episode."""

    episode_id: str
    by_object: dict[str, str] = field(default_factory=dict)
    next_k: int = 1

    def label_of(self, object_id: str) -> SyntheticLabel:
        return SyntheticLabel(self.by_object[object_id])

    def object_of(self, label_text: str) -> str:
        for oid, text in self.by_object.items():
            if text == label_text:
                return oid
        raise KeyError(label_text)

    def covers(self, scene: SceneState) -> bool:
        return all(o.object_id in self.by_object for o in scene.objects)


def assign_labels(scene: SceneState, reg: LabelRegistry) -> LabelRegistry:
    """Return a registry in which every scene object has a label.

    Previously assigned labels are kept verbatim; new objects are numbered
    in ascending object_id order starting at the registry's next_k.
    Idempotent for an already-covered scene.
    """
    mapping = dict(reg.by_object)
    k = reg.next_k
    for obj in sorted(scene.objects, key=lambda o: o.object_id):
        if obj.object_id not in mapping:
            mapping[obj.object_id] = SyntheticLabel.from_k(k).text
            k += 1
    if mapping == reg.by_object:
        return reg
    return LabelRegistry(reg.episode_id, mapping, k)


def resolve(
    ref: TargetRef,
    scene: SceneState,
    reg: LabelRegistry,
    context: str | None = None,
) -> str:
    """Resolve a TargetRef to an object_id against the ground-truth scene.

    ``context`` is the object_id of the current action's target; it supplies
    the elided shape for "the white one" and the exclusion set for
    "the other cup".

    Raises NotFound, Ambiguous, or NoContext.
    """
    if ref.kind == "by_label":
        try:
            oid = reg.object_of(ref.label)
        except KeyError:
            raise NotFound(f"no object labeled {ref.label!r}") from None
        try:
            scene.object_by_id(oid)
        except KeyError:
            raise NotFound(f"{ref.label!r} maps to an object no longer in the scene") from None
        return oid

    if ref.kind == "held_target":
        if scene.gripper.held is None:
            raise NoContext("nothing is held")
        return scene.gripper.held

    if ref.kind == "other_of":
        if context is None:
            raise NoContext("'the other ...' needs a current target")
        candidates = [
            o.object_id
            for o in sorted(scene.objects, key=lambda o: o.object_id)
            if o.shape == ref.shape
            and o.object_id != context
            and o.object_id != scene.gripper.held
        ]
        if not candidates:
            raise NotFound(f"no other {ref.shape}")
        if len(candidates) > 1:
            raise Ambiguous(f"{len(candidates)} other {ref.shape}s; use a synthetic label")
        return candidates[0]

    # by_attributes
    shape = ref.shape
    if shape is None and context is not None:
        try:
            shape = scene.object_by_id(context).shape
        except KeyError:
            shape = None
    candidates = [
        o.object_id
        for o in sorted(scene.objects, key=lambda o: o.object_id)
        if (ref.color is None or o.color == ref.color)
        and (shape is None or o.shape == shape)
    ]
    if not candidates:
        raise NotFound(f"no object matching {ref.to_json()}")
    if len(candidates) > 1:
        raise Ambiguous(
            f"{len(candidates)} objects match {ref.to_json()}; use a synthetic label"
        )
    return candidates[0]


def overlay(
    scene: SceneState, camera: CameraModel, reg: LabelRegistry
) -> list[tuple[SyntheticLabel, ImageBBox]]:
    """Labeled boxes for every object visible in this camera.

    Label texts are taken straight from the registry, so simultaneous calls
    for different cameras agree by construction.
    """
    if not reg.covers(scene):
        raise KeyError("registry does not cover the scene; call assign_labels first")
    return [
        (reg.label_of(oid), bbox) for oid, bbox in visible_objects(camera, scene)
    ]
