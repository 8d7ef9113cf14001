"""Text and visual augmentation of referential commands.

A command that mentions an object has the mention's surface span replaced
by the literal token ``TARGET`` while the referenced object is highlighted
in every camera that sees it. For a substitution ("not the brown, but the
white one") the new, actionable reference becomes TARGET; the old mention
stays verbatim so downstream consumers can still read it from raw text.

Highlights come in two modes: ``bbox`` is the projected axis-aligned box;
``mask`` additionally carries a run-length-encoded fill of the convex hull
of the 8 projected box corners, a stand-in for a segmentation boundary.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from . import modlang
from .labels import LabelRegistry, resolve
from .scene import ImageBBox, SceneState, project_object_bbox, project_point

TARGET_TOKEN = "TARGET"

MODE_BBOX = "bbox"
MODE_MASK = "mask"


class NoReference(Exception):
    """The command has no object reference (e.g. "be gentle")."""


class TargetInvisible(Exception):
    """No camera sees the referenced object; it cannot be grounded visually."""


@dataclass(frozen=True)
class Highlight:
    camera_id: str
    bbox: ImageBBox
    mode: str
    mask_runs: tuple[tuple[int, int, int], ...] | None = None  # (row, x0, length)

    def to_json(self) -> dict:
        out: dict = {"camera_id": self.camera_id, "bbox": self.bbox.as_list(), "mode": self.mode}
        if self.mask_runs is not None:
            out["mask_runs"] = [list(r) for r in self.mask_runs]
        return out


@dataclass(frozen=True)
class AugmentedObservation:
    original_text: str
    augmented_text: str
    target_object_id: str | None
    highlights: tuple[Highlight, ...]
    augmented: bool
    replaced_span: tuple[int, int] | None = None

    def to_json(self) -> dict:
        return {
            "original_text": self.original_text,
            "augmented_text": self.augmented_text,
            "target_object_id": self.target_object_id,
            "highlights": [h.to_json() for h in self.highlights],
            "augmented": self.augmented,
            "replaced_span": list(self.replaced_span) if self.replaced_span else None,
        }


def _convex_hull(points: list[tuple[float, float]]) -> list[tuple[float, float]]:
    """Monotone-chain convex hull, counter-clockwise; handles collinear sets."""
    pts = sorted(set(points))
    if len(pts) <= 2:
        return pts

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower: list[tuple[float, float]] = []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper: list[tuple[float, float]] = []
    for p in reversed(pts):
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    return lower[:-1] + upper[:-1]


def rasterize_hull(
    points: list[tuple[float, float]], width: int, height: int
) -> tuple[tuple[int, int, int], ...]:
    """Conservative scanline fill of the convex hull, as (row, x0, length) runs.

    Each image row intersecting the hull contributes one run covering every
    pixel the hull's slice through that row band touches; the fill is a
    superset of the exact silhouette, clamped to the image.
    """
    if not points:
        return ()
    hull = _convex_hull(points)
    if not hull:
        return ()
    vmin = min(p[1] for p in hull)
    vmax = max(p[1] for p in hull)
    row_lo = max(0, math.floor(vmin))
    row_hi = min(height - 1, math.floor(vmax))
    edges = list(zip(hull, hull[1:] + hull[:1])) if len(hull) > 1 else []
    runs = []
    for row in range(row_lo, row_hi + 1):
        band_lo, band_hi = float(row), float(row + 1)
        xs = []
        for p in hull:
            if band_lo <= p[1] <= band_hi:
                xs.append(p[0])
        for (x1, y1), (x2, y2) in edges:
            if y1 == y2:
                continue
            for yb in (band_lo, band_hi):
                t = (yb - y1) / (y2 - y1)
                if 0.0 <= t <= 1.0:
                    xs.append(x1 + t * (x2 - x1))
        if not xs:
            continue
        x0 = max(0, math.floor(min(xs)))
        x1_ = min(width - 1, math.floor(max(xs)))
        if x1_ >= x0:
            runs.append((row, x0, x1_ - x0 + 1))
    return tuple(runs)


def mask_contains(runs: tuple[tuple[int, int, int], ...], px: int, py: int) -> bool:
    return any(row == py and x0 <= px < x0 + length for row, x0, length in runs)


def augment_text(
    text: str,
    scene: SceneState,
    registry: LabelRegistry,
    context: str | None = None,
) -> tuple[str, str, tuple[int, int]]:
    """Replace the actionable reference span with TARGET.

    Returns (augmented_text, target_object_id, replaced_span). Raises
    NoReference for commands without a target; resolution errors propagate.
    """
    ir = modlang.parse(text)
    actionable = ir.actionable_ref()
    if actionable is None:
        raise NoReference(f"command {text!r} has no object reference")
    ref, span = actionable
    if span is None:
        raise NoReference("reference has no surface span")
    oid = resolve(ref, scene, registry, context)
    start, end = span
    augmented = text[:start] + TARGET_TOKEN + text[end:]
    return augmented, oid, span


def augment_views(
    scene: SceneState,
    registry: LabelRegistry,
    target_object_id: str,
    mode: str = MODE_BBOX,
    camera_id: str | None = None,
) -> list[Highlight]:
    """One highlight per camera in which the target projects on screen.

    ``camera_id`` restricts the augmentation to a single view (a single
    angle can be enough to ground a reference); the default highlights
    every camera that sees the target.
    """
    if mode not in (MODE_BBOX, MODE_MASK):
        raise ValueError(f"unknown highlight mode {mode!r}")
    obj = scene.object_by_id(target_object_id)
    cameras = [c for c in scene.cameras if camera_id is None or c.camera_id == camera_id]
    if camera_id is not None and not cameras:
        raise KeyError(f"no camera {camera_id!r}")
    highlights = []
    for cam in cameras:
        bbox = project_object_bbox(cam, obj)
        if bbox is None or bbox.area() < 1.0:
            continue
        runs = None
        if mode == MODE_MASK:
            pts = []
            for corner in obj.corners():
                uv = project_point(cam, corner)
                if uv is not None:
                    pts.append(uv)
            runs = rasterize_hull(pts, cam.image_size[0], cam.image_size[1])
        highlights.append(Highlight(cam.camera_id, bbox, mode, runs))
    if not highlights:
        raise TargetInvisible(f"{target_object_id} is not visible in any camera")
    return highlights


def augment(
    text: str,
    scene: SceneState,
    registry: LabelRegistry,
    context: str | None = None,
    mode: str = MODE_BBOX,
) -> AugmentedObservation:
    """Full augmentation; non-referential commands come back unaugmented."""
    try:
        augmented_text, oid, span = augment_text(text, scene, registry, context)
    except NoReference:
        return AugmentedObservation(
            original_text=text,
            augmented_text=text,
            target_object_id=None,
            highlights=(),
            augmented=False,
        )
    highlights = augment_views(scene, registry, oid, mode)
    return AugmentedObservation(
        original_text=text,
        augmented_text=augmented_text,
        target_object_id=oid,
        highlights=tuple(highlights),
        augmented=True,
        replaced_span=span,
    )
