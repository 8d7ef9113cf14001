"""Shared fixtures and independent oracles for the test suite.

The oracles deliberately use a different computation path than the library
(scipy rotations + explicit homogeneous matrices, dense sampling) so the
two sides can check each other.
"""

from __future__ import annotations

import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from modsim.scene import CameraModel, ObjectRecord, Quat, Vec3

DEPTH_EPS = 1e-6


def oracle_rotation_matrix(q: Quat) -> np.ndarray:
    # scipy uses (x, y, z, w) ordering
    return Rotation.from_quat([q.x, q.y, q.z, q.w]).as_matrix()


def oracle_project(camera: CameraModel, p: Vec3):
    """Pinhole projection via an explicit 3x4 homogeneous matrix."""
    rot = oracle_rotation_matrix(camera.rotation)
    t = np.array(camera.translation.as_tuple())
    mat = np.hstack([rot, t.reshape(3, 1)])  # world -> camera, [R | t]
    hom = np.array([p.x, p.y, p.z, 1.0])
    cam = mat @ hom
    if cam[2] <= DEPTH_EPS:
        return None
    w, h = camera.image_size
    k = np.array([
        [camera.focal_px, 0.0, 0.5 * w],
        [0.0, camera.focal_px, 0.5 * h],
        [0.0, 0.0, 1.0],
    ])
    uvw = k @ cam
    return (uvw[0] / uvw[2], uvw[1] / uvw[2])


def oracle_box_surface_points(obj: ObjectRecord, grid: int = 13) -> list[Vec3]:
    """Grid sampling of all six box faces (grid^2 per face, ~1000 points).

    The grid includes the face borders, so the corners themselves are among
    the samples and the sampled hull is exact for convex boxes.
    """
    rot = oracle_rotation_matrix(obj.orientation)
    center = np.array(obj.position.as_tuple())
    h = np.array(obj.half_extents.as_tuple())
    ticks = np.linspace(-1.0, 1.0, grid)
    uu, vv = np.meshgrid(ticks, ticks)
    uv = np.stack([uu.ravel(), vv.ravel()], axis=1)
    points = []
    for axis in range(3):
        for sign in (-1.0, 1.0):
            local = np.zeros((len(uv), 3))
            local[:, axis] = sign
            other = [i for i in range(3) if i != axis]
            local[:, other[0]] = uv[:, 0]
            local[:, other[1]] = uv[:, 1]
            world = center + (rot @ (local * h).T).T
            points.extend(Vec3(*row) for row in world)
    return points


def random_unit_quat(rng: np.random.Generator) -> Quat:
    w, x, y, z = rng.normal(size=4)
    return Quat.from_unnormalized(w, x, y, z)


def random_camera(rng: np.random.Generator, camera_id: str = "cam") -> CameraModel:
    eye = Vec3(*(rng.uniform(-2.0, 2.0, size=2)), rng.uniform(0.3, 2.0))
    target = Vec3(*(rng.uniform(-0.3, 0.3, size=2)), rng.uniform(0.0, 0.3))
    if (target - eye).norm() < 0.5:
        eye = eye + Vec3(0.0, 0.0, 1.0)
    return CameraModel.look_at(
        camera_id, eye, target,
        focal_px=float(rng.uniform(120.0, 500.0)),
        image_size=(320, 240),
    )


def random_box(rng: np.random.Generator, object_id: str = "item-1") -> ObjectRecord:
    return ObjectRecord(
        object_id, "box", "red",
        position=Vec3(*(rng.uniform(-0.4, 0.4, size=2)), rng.uniform(0.0, 0.4)),
        orientation=random_unit_quat(rng),
        half_extents=Vec3(*rng.uniform(0.02, 0.12, size=3)),
    )


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(90210)
