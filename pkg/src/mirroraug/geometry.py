"""Coordinate frames, rigid transforms, planes and mirror reflections.

Conventions
-----------
A :class:`RigidTransform` with ``source=A`` and ``target=B`` maps the
coordinates of a point expressed in frame ``A`` to its coordinates in frame
``B``::

    p_B = R @ p_A + t

``compose(a, b)`` is ``a ∘ b`` (apply ``b`` first) and requires
``a.source == b.target``.  All lengths are meters.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.transform import Rotation

from .errors import FrameChainError, ValidationError

ORTHO_TOL = 1e-9
UNIT_TOL = 1e-12


class FrameId(enum.Enum):
    WORLD = "World"
    RENDER_CAM = "RenderCam"
    HMD_RGB = "HmdRgb"
    DEPTH_CAM = "DepthCam"
    TRACKER_RGB = "TrackerRgb"
    REFLECTION_SPACE = "ReflectionSpace"
    MARKER_BOARD = "MarkerBoard"
    OBJECT = "Object"


def _vec3(v, name="vector"):
    a = np.array(v, dtype=float).reshape(-1)
    if a.shape != (3,):
        raise ValidationError(f"{name} must have 3 components, got shape {np.shape(v)}")
    if not np.all(np.isfinite(a)):
        raise ValidationError(f"{name} must be finite")
    return a


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


def orthonormality_error(R):
    """Max abs deviation of ``R.T @ R`` from identity."""
    return float(np.max(np.abs(R.T @ R - np.eye(3))))


def project_to_rotation(M):
    """Closest proper rotation to ``M`` in the Frobenius sense."""
    U, _, Vt = np.linalg.svd(M)
    D = np.diag([1.0, 1.0, np.sign(np.linalg.det(U @ Vt))])
    return U @ D @ Vt


def rotation_from_axis_angle(axis, angle):
    """Rotation matrix for a right-handed rotation of ``angle`` rad about ``axis``."""
    axis = _vec3(axis, "axis")
    n = np.linalg.norm(axis)
    if n == 0.0:
        raise ValidationError("rotation axis must be nonzero")
    return Rotation.from_rotvec(axis / n * angle).as_matrix()


def rotation_from_quaternion(q):
    """Rotation matrix from a unit quaternion given as ``(w, x, y, z)``."""
    q = np.asarray(q, dtype=float)
    if q.shape != (4,):
        raise ValidationError("quaternion must have 4 components (w, x, y, z)")
    if abs(np.linalg.norm(q) - 1.0) > 1e-9:
        raise ValidationError(f"quaternion must be unit length, |q|={np.linalg.norm(q)}")
    w, x, y, z = q
    return Rotation.from_quat([x, y, z, w]).as_matrix()


def rotation_from_rotvec(rotvec):
    return Rotation.from_rotvec(_vec3(rotvec, "rotation vector")).as_matrix()


def rotation_angle(R):
    """Geodesic angle of rotation ``R`` in radians, in ``[0, pi]``.

    Equals ``arccos((trace(R) - 1) / 2)``; evaluated with ``atan2`` so small
    angles keep full precision.
    """
    R = np.asarray(R, dtype=float)
    c = (np.trace(R) - 1.0) / 2.0
    w = np.array([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]])
    s = np.linalg.norm(w) / 2.0
    return float(np.arctan2(s, c))


def rotation_between(R_a, R_b):
    """Geodesic angle in radians of ``R_a.T @ R_b``."""
    return rotation_angle(np.asarray(R_a).T @ np.asarray(R_b))


@dataclass(frozen=True, eq=False)
class RigidTransform:
    """Proper rigid motion mapping ``source`` coordinates into ``target``."""

    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))
    source: FrameId = FrameId.OBJECT
    target: FrameId = FrameId.OBJECT

    def __post_init__(self):
        R = np.array(self.rotation, dtype=float)
        if R.shape != (3, 3) or not np.all(np.isfinite(R)):
            raise ValidationError("rotation must be a finite 3x3 matrix")
        if orthonormality_error(R) > ORTHO_TOL:
            raise ValidationError(
                f"rotation is not orthonormal (max |RtR - I| = {orthonormality_error(R):.3e})"
            )
        if abs(np.linalg.det(R) - 1.0) > ORTHO_TOL:
            raise ValidationError(f"rotation determinant must be +1, got {np.linalg.det(R):.12f}")
        object.__setattr__(self, "rotation", _frozen(R))
        object.__setattr__(self, "translation", _frozen(_vec3(self.translation, "translation")))
        object.__setattr__(self, "source", FrameId(self.source))
        object.__setattr__(self, "target", FrameId(self.target))

    @classmethod
    def identity(cls, source=FrameId.OBJECT, target=None):
        return cls(np.eye(3), np.zeros(3), source, source if target is None else target)

    @classmethod
    def from_matrix(cls, M, source=FrameId.OBJECT, target=FrameId.OBJECT):
        M = np.asarray(M, dtype=float)
        if M.shape != (4, 4):
            raise ValidationError("homogeneous matrix must be 4x4")
        return cls(M[:3, :3], M[:3, 3], source, target)

    @classmethod
    def from_rotvec(cls, rotvec, translation=(0.0, 0.0, 0.0), source=FrameId.OBJECT,
                    target=FrameId.OBJECT):
        return cls(rotation_from_rotvec(rotvec), translation, source, target)

    def as_matrix(self):
        M = np.eye(4)
        M[:3, :3] = self.rotation
        M[:3, 3] = self.translation
        return M

    def with_frames(self, source, target):
        return RigidTransform(self.rotation, self.translation, source, target)

    def apply(self, p):
        return apply_point(self, p)

    def __matmul__(self, other):
        return compose(self, other)

    def to_dict(self):
        return {
            "rotation": [float(x) for x in self.rotation.reshape(-1)],
            "translation": [float(x) for x in self.translation],
            "from": self.source.value,
            "to": self.target.value,
        }

    @classmethod
    def from_dict(cls, d):
        R = np.asarray(d["rotation"], dtype=float)
        if R.size != 9:
            raise ValidationError("rotation must have 9 row-major entries")
        return cls(R.reshape(3, 3), d["translation"], FrameId(d["from"]), FrameId(d["to"]))

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))

    def __repr__(self):
        return (f"RigidTransform({self.source.value}->{self.target.value}, "
                f"t={np.round(self.translation, 6).tolist()})")


@dataclass(frozen=True, eq=False)
class MirrorPlane:
    """Plane ``{x : normal . x = offset}`` in ``frame``."""

    normal: np.ndarray
    offset: float
    frame: FrameId = FrameId.WORLD

    def __post_init__(self):
        n = _vec3(self.normal, "normal")
        if abs(np.linalg.norm(n) - 1.0) > UNIT_TOL:
            raise ValidationError(f"plane normal must be unit length, |n|={np.linalg.norm(n)!r}")
        object.__setattr__(self, "normal", _frozen(n))
        object.__setattr__(self, "offset", float(self.offset))
        object.__setattr__(self, "frame", FrameId(self.frame))

    @classmethod
    def from_point_normal(cls, point, normal, frame=FrameId.WORLD):
        n = _vec3(normal, "normal")
        n = n / np.linalg.norm(n)
        return cls(n, float(n @ _vec3(point, "point")), frame)

    def signed_distance(self, p):
        return np.asarray(p, dtype=float) @ self.normal - self.offset

    def to_dict(self):
        return {"normal": self.normal.tolist(), "offset": self.offset, "frame": self.frame.value}

    @classmethod
    def from_dict(cls, d):
        return cls(d["normal"], d["offset"], FrameId(d.get("frame", "World")))


@dataclass(frozen=True, eq=False)
class ReflectionTransform:
    """4x4 homogeneous reflection; an involutive improper isometry."""

    matrix: np.ndarray
    frame: FrameId = FrameId.WORLD

    def __post_init__(self):
        M = np.array(self.matrix, dtype=float)
        if M.shape != (4, 4):
            raise ValidationError("reflection matrix must be 4x4")
        object.__setattr__(self, "matrix", _frozen(M))
        object.__setattr__(self, "frame", FrameId(self.frame))

    @property
    def linear(self):
        return self.matrix[:3, :3]

    @property
    def translation(self):
        return self.matrix[:3, 3]

    def apply(self, p):
        return apply_point(self, p)


def compose(a, b):
    """Return ``a ∘ b``: maps ``b.source`` to ``a.target``."""
    if a.source != b.target:
        raise FrameChainError(a.source, b.target)
    R = a.rotation @ b.rotation
    if orthonormality_error(R) > ORTHO_TOL:
        R = project_to_rotation(R)
    t = a.rotation @ b.translation + a.translation
    return RigidTransform(R, t, b.source, a.target)


def invert(t):
    Rt = t.rotation.T
    return RigidTransform(Rt, -(Rt @ t.translation), t.target, t.source)


def reflection_about(plane):
    """Householder reflection across ``plane`` as a 4x4 homogeneous matrix.

    Linear part ``I - 2 n n^T``, translation ``2 d n``.
    """
    n = np.asarray(plane.normal, dtype=float)
    if abs(np.linalg.norm(n) - 1.0) > UNIT_TOL:
        raise ValidationError("plane normal must be unit length")
    M = np.eye(4)
    M[:3, :3] -= 2.0 * np.outer(n, n)
    M[:3, 3] = 2.0 * plane.offset * n
    return ReflectionTransform(M, plane.frame)


def apply_point(x, p):
    """Apply a rigid or reflection transform to one point ``(3,)`` or many ``(N, 3)``."""
    p = np.asarray(p, dtype=float)
    if isinstance(x, RigidTransform):
        R, t = x.rotation, x.translation
    elif isinstance(x, ReflectionTransform):
        R, t = x.linear, x.translation
    else:
        raise TypeError(f"expected RigidTransform or ReflectionTransform, got {type(x).__name__}")
    return p @ R.T + t


def apply_direction(x, v):
    """Apply only the linear part (for free vectors such as bone directions)."""
    v = np.asarray(v, dtype=float)
    R = x.rotation if isinstance(x, RigidTransform) else x.linear
    return v @ R.T


def transform_plane(plane, t):
    """Express ``plane`` (in ``t.source``) in frame ``t.target``."""
    if plane.frame != t.source:
        raise FrameChainError(t.source, plane.frame)
    n = t.rotation @ plane.normal
    n = n / np.linalg.norm(n)
    return MirrorPlane(n, plane.offset + float(n @ t.translation), t.target)


def random_rotation(rng):
    return Rotation.random(random_state=rng).as_matrix()


def random_transform(rng, source=FrameId.OBJECT, target=FrameId.OBJECT, scale=1.0):
    t = rng.uniform(-scale, scale, size=3)
    return RigidTransform(random_rotation(rng), t, source, target)


def random_plane(rng, frame=FrameId.WORLD, max_offset=5.0):
    n = rng.normal(size=3)
    n /= np.linalg.norm(n)
    return MirrorPlane(n, rng.uniform(-max_offset, max_offset), frame)
