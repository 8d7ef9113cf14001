"""TARGET-token augmentation and per-camera highlights."""

import math

import numpy as np
import pytest
from matplotlib.path import Path as MplPath

from conftest import random_box, random_camera
from modsim import tasks
from modsim.augment import (
    MODE_BBOX,
    MODE_MASK,
    NoReference,
    TargetInvisible,
    augment,
    augment_text,
    augment_views,
    mask_contains,
    rasterize_hull,
)
from modsim.labels import LabelRegistry, assign_labels
from modsim.scene import (
    CameraModel,
    ObjectRecord,
    Quat,
    SceneState,
    Vec3,
    project_object_bbox,
    project_point,
)


def labeled_scene(task="stack_cups", variation="v0", seed=7):
    scene, _ = tasks.instantiate(task, variation, seed)
    reg = assign_labels(scene, LabelRegistry("ep"))
    return scene, reg


def test_reorder_command_becomes_stack_target_first():
    scene, reg = labeled_scene()
    text, oid, span = augment_text("stack object #2 first", scene, reg)
    assert text == "stack TARGET first"
    assert oid == "item-2"
    assert "stack object #2 first"[slice(*span)] == "object #2"


def test_non_referential_command_raises_no_reference():
    scene, reg = labeled_scene()
    with pytest.raises(NoReference):
        augment_text("be gentle", scene, reg)


def test_substitute_replaces_new_span_old_left_verbatim():
    scene, reg = labeled_scene("bring_object", "v0", 3)
    original = "not the brown, but the white one"
    text, oid, span = augment_text(original, scene, reg, context="item-1")
    assert text == "not the brown, but TARGET"
    assert oid == "item-2"
    # reversal reproduces the original byte-exactly
    start, end = span
    assert text.replace("TARGET", original[start:end], 1) == original


def test_augment_views_highlights_every_camera_seeing_the_target():
    scene, reg = labeled_scene()
    highlights = augment_views(scene, reg, "item-2", MODE_BBOX)
    assert {h.camera_id for h in highlights} == {"front", "left", "overhead"}
    for h in highlights:
        expected = project_object_bbox(
            next(c for c in scene.cameras if c.camera_id == h.camera_id),
            scene.object_by_id("item-2"),
        )
        assert h.bbox == expected


def test_target_invisible_when_no_camera_sees_it():
    cam = CameraModel("only", Quat.identity(), Vec3(0.0, 0.0, 0.0), 100.0, (200, 200))
    behind = ObjectRecord(
        "item-1", "cup", "red", Vec3(0.0, 0.0, -1.0), Quat.identity(), Vec3(0.04, 0.04, 0.05)
    )
    gripper = tasks._home_gripper()
    scene = SceneState(0.0, (behind,), gripper, (cam,))
    reg = assign_labels(scene, LabelRegistry("ep"))
    with pytest.raises(TargetInvisible):
        augment_views(scene, reg, "item-1", MODE_BBOX)


def test_augment_composition_referential():
    scene, reg = labeled_scene()
    obs = augment("stack object #2 first", scene, reg)
    assert obs.augmented
    assert obs.augmented_text.count("TARGET") == 1
    assert obs.target_object_id == "item-2"
    assert len(obs.highlights) == 3
    # consistency: every highlight is of the object whose span became TARGET
    for h in obs.highlights:
        cam = next(c for c in scene.cameras if c.camera_id == h.camera_id)
        assert h.bbox == project_object_bbox(cam, scene.object_by_id("item-2"))


def test_augment_composition_non_referential():
    scene, reg = labeled_scene()
    obs = augment("be gentle to move it", scene, reg)
    assert not obs.augmented
    assert obs.augmented_text == obs.original_text
    assert obs.augmented_text.count("TARGET") == 0
    assert obs.highlights == () and obs.target_object_id is None


def test_exactly_one_target_token_for_all_referential_grammar_forms():
    scene, reg = labeled_scene("bring_object", "v0", 3)
    for text, ctx in (
        ("stack object #1 first", None),
        ("avoid the plate", None),
        ("skip object #1", None),
        ("not the brown, but the white one", "item-1"),
        ("grasp the other bottle first", "item-1"),
    ):
        obs = augment(text, scene, reg, context=ctx)
        assert obs.augmented
        assert obs.augmented_text.count("TARGET") == 1
        start, end = obs.replaced_span
        assert obs.augmented_text.replace("TARGET", text[start:end], 1) == text


def test_mask_mode_rle_is_valid_and_within_image():
    scene, reg = labeled_scene()
    highlights = augment_views(scene, reg, "item-1", MODE_MASK)
    for h in highlights:
        cam = next(c for c in scene.cameras if c.camera_id == h.camera_id)
        w, hgt = cam.image_size
        assert h.mask_runs
        rows = [r for r, _, _ in h.mask_runs]
        assert rows == sorted(rows)
        for row, x0, length in h.mask_runs:
            assert 0 <= row < hgt
            assert 0 <= x0 and x0 + length <= w
            assert length >= 1


def test_mask_contains_bbox_center_pixel_when_unclipped(rng):
    """Rasterization oracle: the center pixel of an unclipped bbox is filled."""
    done = 0
    while done < 60:
        cam = random_camera(rng)
        obj = random_box(rng)
        uvs = [project_point(cam, c) for c in obj.corners()]
        if any(uv is None for uv in uvs):
            continue
        us = [uv[0] for uv in uvs]
        vs = [uv[1] for uv in uvs]
        if min(us) < 0 or max(us) > 320 or min(vs) < 0 or max(vs) > 240:
            continue
        runs = rasterize_hull(uvs, 320, 240)
        cx = 0.5 * (min(us) + max(us))
        cy = 0.5 * (min(vs) + max(vs))
        assert mask_contains(runs, math.floor(cx), math.floor(cy))
        done += 1


def test_mask_covers_interior_points_hull_oracle(rng):
    """Every pixel whose center lies strictly inside the hull is in the mask."""
    done = 0
    while done < 25:
        cam = random_camera(rng)
        obj = random_box(rng)
        uvs = [project_point(cam, c) for c in obj.corners()]
        if any(uv is None for uv in uvs):
            continue
        us = [uv[0] for uv in uvs]
        vs = [uv[1] for uv in uvs]
        if min(us) < 1 or max(us) > 319 or min(vs) < 1 or max(vs) > 239:
            continue
        runs = rasterize_hull(uvs, 320, 240)
        arr = np.array(uvs)
        centroid = arr.mean(axis=0)
        order = np.argsort(np.arctan2(arr[:, 1] - centroid[1], arr[:, 0] - centroid[0]))
        path = MplPath(arr[order])
        xs = np.arange(math.floor(min(us)), math.ceil(max(us)) + 1)
        ys = np.arange(math.floor(min(vs)), math.ceil(max(vs)) + 1)
        gx, gy = np.meshgrid(xs, ys)
        centers = np.stack([gx.ravel() + 0.5, gy.ravel() + 0.5], axis=1)
        inside = path.contains_points(centers, radius=-1e-9)
        misses = [
            (int(px - 0.5), int(py - 0.5))
            for (px, py), isin in zip(centers, inside)
            if isin and not mask_contains(runs, int(px - 0.5), int(py - 0.5))
        ]
        assert not misses
        done += 1


def test_augmentation_is_non_destructive_byte_exact():
    scene, reg = labeled_scene()
    original = "Stack Object #2 First!"
    obs = augment(original, scene, reg)
    start, end = obs.replaced_span
    rebuilt = obs.augmented_text.replace("TARGET", original[start:end], 1)
    assert rebuilt == original


def test_resolution_errors_propagate():
    from modsim.labels import Ambiguous, NotFound

    scene, reg = labeled_scene()
    with pytest.raises(Ambiguous):
        augment_text("grasp the cup first", scene, reg)
    with pytest.raises(NotFound):
        augment_text("stack object #9 first", scene, reg)


def test_single_camera_augmentation_flag():
    scene, reg = labeled_scene()
    only_front = augment_views(scene, reg, "item-2", MODE_BBOX, camera_id="front")
    assert [h.camera_id for h in only_front] == ["front"]
    with pytest.raises(KeyError):
        augment_views(scene, reg, "item-2", MODE_BBOX, camera_id="rear")
