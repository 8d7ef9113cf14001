"""Ground-truth world model and multi-camera pinhole projection.

Conventions used throughout the package:

* world frame: right-handed, z up, units in meters
* camera frame: +z forward (depth), +x right, +y down; a camera pose is
  stored as the world-to-camera transform ``p_cam = R(q) * p_world + t``
* image frame: pixels, origin at the top-left corner, principal point at
  the image center, single focal length, no distortion

Everything here is a pure function over frozen snapshots, so scenes can be
shared freely across threads and serialized without copying.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

SHAPES = ("cup", "bottle", "box", "cane", "book", "plate")
COLORS = ("red", "white", "brown", "blue", "green", "yellow")

APERTURE_OPEN = "open"
APERTURE_CLOSED = "closed"

_DEPTH_EPS = 1e-6
_UNIT_NORM_TOL = 1e-9


@dataclass(frozen=True)
class Vec3:
    """3D vector / point in meters."""

    x: float
    y: float
    z: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y) and math.isfinite(self.z)):
            raise ValueError(f"non-finite vector component: {self}")

    def __add__(self, other: "Vec3") -> "Vec3":
        return Vec3(self.x + other.x, self.y + other.y, self.z + other.z)

    def __sub__(self, other: "Vec3") -> "Vec3":
        return Vec3(self.x - other.x, self.y - other.y, self.z - other.z)

    def scaled(self, s: float) -> "Vec3":
        return Vec3(self.x * s, self.y * s, self.z * s)

    def dot(self, other: "Vec3") -> float:
        return self.x * other.x + self.y * other.y + self.z * other.z

    def cross(self, other: "Vec3") -> "Vec3":
        return Vec3(
            self.y * other.z - self.z * other.y,
            self.z * other.x - self.x * other.z,
            self.x * other.y - self.y * other.x,
        )

    def norm(self) -> float:
        return math.sqrt(self.dot(self))

    def normalized(self) -> "Vec3":
        n = self.norm()
        if n == 0.0:
            raise ValueError("cannot normalize zero vector")
        return self.scaled(1.0 / n)

    def distance_to(self, other: "Vec3") -> float:
        return (self - other).norm()

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.x, self.y, self.z)


@dataclass(frozen=True)
class Quat:
    """Unit quaternion (w, x, y, z).

    Constructed values are checked against the unit-norm invariant
    (|norm - 1| <= 1e-9) and renormalized, so downstream rotation math can
    assume unit quaternions.
    """

    w: float
    x: float
    y: float
    z: float

    def __post_init__(self):
        n = math.sqrt(self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z)
        if n == 0.0 or not math.isfinite(n):
            raise ValueError("quaternion norm must be finite and nonzero")
        if abs(n - 1.0) > 1e-6:
            raise ValueError(f"quaternion far from unit norm ({n})")
        if abs(n - 1.0) > _UNIT_NORM_TOL:
            object.__setattr__(self, "w", self.w / n)
            object.__setattr__(self, "x", self.x / n)
            object.__setattr__(self, "y", self.y / n)
            object.__setattr__(self, "z", self.z / n)

    @staticmethod
    def identity() -> "Quat":
        return Quat(1.0, 0.0, 0.0, 0.0)

    @staticmethod
    def from_unnormalized(w: float, x: float, y: float, z: float) -> "Quat":
        n = math.sqrt(w * w + x * x + y * y + z * z)
        if n == 0.0:
            raise ValueError("zero quaternion")
        return Quat(w / n, x / n, y / n, z / n)

    def rotate(self, v: Vec3) -> Vec3:
        # q v q* expanded to avoid constructing intermediate quaternions
        w, x, y, z = self.w, self.x, self.y, self.z
        tx = 2.0 * (y * v.z - z * v.y)
        ty = 2.0 * (z * v.x - x * v.z)
        tz = 2.0 * (x * v.y - y * v.x)
        return Vec3(
            v.x + w * tx + (y * tz - z * ty),
            v.y + w * ty + (z * tx - x * tz),
            v.z + w * tz + (x * ty - y * tx),
        )

    def conjugate(self) -> "Quat":
        return Quat(self.w, -self.x, -self.y, -self.z)

    def as_matrix(self) -> list[list[float]]:
        """3x3 rotation matrix equivalent of this quaternion."""
        w, x, y, z = self.w, self.x, self.y, self.z
        return [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]

    @staticmethod
    def from_matrix(m: list[list[float]]) -> "Quat":
        """Quaternion from a 3x3 rotation matrix (Shepperd's method)."""
        tr = m[0][0] + m[1][1] + m[2][2]
        if tr > 0:
            s = math.sqrt(tr + 1.0) * 2.0
            return Quat.from_unnormalized(
                0.25 * s,
                (m[2][1] - m[1][2]) / s,
                (m[0][2] - m[2][0]) / s,
                (m[1][0] - m[0][1]) / s,
            )
        if m[0][0] > m[1][1] and m[0][0] > m[2][2]:
            s = math.sqrt(1.0 + m[0][0] - m[1][1] - m[2][2]) * 2.0
            return Quat.from_unnormalized(
                (m[2][1] - m[1][2]) / s, 0.25 * s,
                (m[0][1] + m[1][0]) / s, (m[0][2] + m[2][0]) / s,
            )
        if m[1][1] > m[2][2]:
            s = math.sqrt(1.0 + m[1][1] - m[0][0] - m[2][2]) * 2.0
            return Quat.from_unnormalized(
                (m[0][2] - m[2][0]) / s, (m[0][1] + m[1][0]) / s,
                0.25 * s, (m[1][2] + m[2][1]) / s,
            )
        s = math.sqrt(1.0 + m[2][2] - m[0][0] - m[1][1]) * 2.0
        return Quat.from_unnormalized(
            (m[1][0] - m[0][1]) / s, (m[0][2] + m[2][0]) / s,
            (m[1][2] + m[2][1]) / s, 0.25 * s,
        )


@dataclass(frozen=True)
class ObjectRecord:
    """One rigid object: oriented box with a shape/color tag."""

    object_id: str
    shape: str
    color: str
    position: Vec3
    orientation: Quat
    half_extents: Vec3
    graspable: bool = True

    def __post_init__(self):
        if self.shape not in SHAPES:
            raise ValueError(f"unknown shape {self.shape!r}")
        if self.color not in COLORS:
            raise ValueError(f"unknown color {self.color!r}")
        h = self.half_extents
        if not (h.x > 0 and h.y > 0 and h.z > 0):
            raise ValueError("half_extents must be strictly positive")

    def corners(self) -> list[Vec3]:
        """The 8 corners of the oriented bounding box, in world frame."""
        h = self.half_extents
        out = []
        for sx in (-1.0, 1.0):
            for sy in (-1.0, 1.0):
                for sz in (-1.0, 1.0):
                    local = Vec3(sx * h.x, sy * h.y, sz * h.z)
                    out.append(self.position + self.orientation.rotate(local))
        return out

    def world_aabb(self) -> tuple[Vec3, Vec3]:
        """Axis-aligned bounds of the oriented box in world frame."""
        cs = self.corners()
        lo = Vec3(min(c.x for c in cs), min(c.y for c in cs), min(c.z for c in cs))
        hi = Vec3(max(c.x for c in cs), max(c.y for c in cs), max(c.z for c in cs))
        return lo, hi


@dataclass(frozen=True)
class GripperState:
    position: Vec3
    orientation: Quat
    aperture: str = APERTURE_OPEN
    held: str | None = None

    def __post_init__(self):
        if self.aperture not in (APERTURE_OPEN, APERTURE_CLOSED):
            raise ValueError(f"bad aperture {self.aperture!r}")
        # held is set iff the gripper is closed around a successful grasp
        if (self.held is not None) != (self.aperture == APERTURE_CLOSED):
            raise ValueError("held must be set exactly when aperture is closed")


@dataclass(frozen=True)
class CameraModel:
    """Pinhole camera; rotation/translation are the world-to-camera transform."""

    camera_id: str
    rotation: Quat
    translation: Vec3
    focal_px: float
    image_size: tuple[int, int]

    def __post_init__(self):
        if self.focal_px <= 0:
            raise ValueError("focal_px must be positive")
        w, h = self.image_size
        if w <= 0 or h <= 0:
            raise ValueError("image_size must be positive")

    @staticmethod
    def look_at(
        camera_id: str,
        eye: Vec3,
        target: Vec3,
        up: Vec3 = Vec3(0.0, 0.0, 1.0),
        focal_px: float = 260.0,
        image_size: tuple[int, int] = (320, 240),
    ) -> "CameraModel":
        """Build a camera at ``eye`` looking toward ``target``.

        ``up`` must not be parallel to the viewing direction (pass a lateral
        hint for straight-down cameras).
        """
        forward = (target - eye).normalized()  # camera +z in world coords
        right = forward.cross(up)
        if right.norm() < 1e-9:
            raise ValueError("up vector parallel to view direction")
        right = right.normalized()            # camera +x
        down = forward.cross(right)           # camera +y, z cross x
        m = [
            [right.x, right.y, right.z],
            [down.x, down.y, down.z],
            [forward.x, forward.y, forward.z],
        ]
        q = Quat.from_matrix(m)
        t = q.rotate(eye).scaled(-1.0)
        return CameraModel(camera_id, q, t, focal_px, image_size)

    def to_camera(self, p: Vec3) -> Vec3:
        return self.rotation.rotate(p) + self.translation


@dataclass(frozen=True)
class SceneState:
    """Ground-truth snapshot of the whole workspace at one instant."""

    time: float
    objects: tuple[ObjectRecord, ...]
    gripper: GripperState
    cameras: tuple[CameraModel, ...]

    def __post_init__(self):
        if self.time < 0:
            raise ValueError("time must be >= 0")
        ids = [o.object_id for o in self.objects]
        if len(set(ids)) != len(ids):
            raise ValueError("object ids must be pairwise distinct")

    def object_by_id(self, object_id: str) -> ObjectRecord:
        for o in self.objects:
            if o.object_id == object_id:
                return o
        raise KeyError(object_id)

    def with_object(self, obj: ObjectRecord) -> "SceneState":
        objs = tuple(obj if o.object_id == obj.object_id else o for o in self.objects)
        return replace(self, objects=objs)


@dataclass(frozen=True)
class ImageBBox:
    """Axis-aligned pixel box, clamped to image bounds."""

    camera_id: str
    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self):
        if self.x_min > self.x_max or self.y_min > self.y_max:
            raise ValueError("degenerate bbox ordering")

    def area(self) -> float:
        return (self.x_max - self.x_min) * (self.y_max - self.y_min)

    def center(self) -> tuple[float, float]:
        return (0.5 * (self.x_min + self.x_max), 0.5 * (self.y_min + self.y_max))

    def as_list(self) -> list[float]:
        return [self.x_min, self.y_min, self.x_max, self.y_max]


def project_point(camera: CameraModel, p: Vec3) -> tuple[float, float] | None:
    """Pinhole-project a world point; None when at or behind the camera plane.

    The returned pixel coordinates are NOT clamped to the image.
    """
    pc = camera.to_camera(p)
    if pc.z <= _DEPTH_EPS:
        return None
    w, h = camera.image_size
    u = 0.5 * w + camera.focal_px * pc.x / pc.z
    v = 0.5 * h + camera.focal_px * pc.y / pc.z
    return (u, v)


def project_object_bbox(camera: CameraModel, obj: ObjectRecord) -> ImageBBox | None:
    """Project the 8 box corners and return the clamped axis-aligned hull.

    Corners behind the camera are dropped (no frustum clipping); None when
    nothing projects or the hull lies entirely outside the image.
    """
    us: list[float] = []
    vs: list[float] = []
    for corner in obj.corners():
        uv = project_point(camera, corner)
        if uv is not None:
            us.append(uv[0])
            vs.append(uv[1])
    if not us:
        return None
    w, h = camera.image_size
    x_min, x_max = min(us), max(us)
    y_min, y_max = min(vs), max(vs)
    if x_max < 0 or x_min > w or y_max < 0 or y_min > h:
        return None
    return ImageBBox(
        camera.camera_id,
        max(0.0, x_min),
        max(0.0, y_min),
        min(float(w), x_max),
        min(float(h), y_max),
    )


def visible_objects(camera: CameraModel, scene: SceneState) -> list[tuple[str, ImageBBox]]:
    """Objects with an on-screen bbox of at least 1 px^2, ascending object_id."""
    out = []
    for obj in sorted(scene.objects, key=lambda o: o.object_id):
        bbox = project_object_bbox(camera, obj)
        if bbox is not None and bbox.area() >= 1.0:
            out.append((obj.object_id, bbox))
    return out
