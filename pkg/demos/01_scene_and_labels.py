#!/usr/bin/env python3
"""Walkthrough: ground-truth scenes, camera projection, synthetic labels.

Instantiates the cup-stacking scene, shows how each camera sees it, and
prints the labeled overlays that a user interface would render. Finishes
with a tiny ASCII rendering of the front camera so you can eyeball the
geometry without a browser.
"""

from modsim import tasks
from modsim.labels import LabelRegistry, TargetRef, assign_labels, overlay, resolve
from modsim.scene import project_point

scene, plan = tasks.instantiate("stack_cups", "v0", seed=7)

print("=== scene ===")
for obj in scene.objects:
    p = obj.position
    print(f"  {obj.object_id:8s} {obj.color:6s} {obj.shape:6s} at "
          f"({p.x:+.3f}, {p.y:+.3f}, {p.z:+.3f})")
print(f"  gripper at {scene.gripper.position.as_tuple()}")

print("\n=== synthetic labels (stable, shared across every camera) ===")
registry = assign_labels(scene, LabelRegistry("demo"))
for object_id, label in registry.by_object.items():
    print(f"  {object_id} -> {label!r}")

print("\n=== per-camera overlays ===")
for camera in scene.cameras:
    print(f"  [{camera.camera_id}]")
    for label, bbox in overlay(scene, camera, registry):
        print(f"    {label.text:10s} bbox=({bbox.x_min:6.1f}, {bbox.y_min:6.1f}, "
              f"{bbox.x_max:6.1f}, {bbox.y_max:6.1f})")

print("\n=== resolving user references against the scene ===")
print("  'object #2'        ->", resolve(TargetRef.by_label("object #2"), scene, registry))
try:
    resolve(TargetRef.by_attributes(shape="cup"), scene, registry)
except Exception as exc:
    print("  'the cup'          -> ambiguous, as it should be:", exc)
print("  'the other cup' (while working on item-1, holding nothing) ->",
      "needs context:", end=" ")
try:
    resolve(TargetRef.other_of("cup"), scene, registry)
except Exception as exc:
    print(type(exc).__name__)

print("\n=== ASCII front camera (o = object center, G = gripper) ===")
front = scene.cameras[0]
cols, rows = 64, 20
grid = [[" "] * cols for _ in range(rows)]
for obj in scene.objects:
    uv = project_point(front, obj.position)
    if uv:
        c = int(uv[0] / front.image_size[0] * cols)
        r = int(uv[1] / front.image_size[1] * rows)
        if 0 <= r < rows and 0 <= c < cols:
            grid[r][c] = registry.by_object[obj.object_id][-1]  # digit of the label
uv = project_point(front, scene.gripper.position)
if uv:
    c = int(uv[0] / front.image_size[0] * cols)
    r = int(uv[1] / front.image_size[1] * rows)
    if 0 <= r < rows and 0 <= c < cols:
        grid[r][c] = "G"
print("  +" + "-" * cols + "+")
for row in grid:
    print("  |" + "".join(row) + "|")
print("  +" + "-" * cols + "+")
