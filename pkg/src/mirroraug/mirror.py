"""Mirror detection and plane estimation from the visor marker.

The marker is fixed to the HMD, so whenever the HMD camera detects it the
camera is looking at its own reflection.  The estimated mirror plane is the
perpendicular bisector of the segment between the marker's true location
(the camera center by default) and its observed virtual image.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, replace

import numpy as np

from .errors import ChiralityError, UnreliableEstimateError, ValidationError
from .geometry import (
    FrameId,
    MirrorPlane,
    ReflectionTransform,
    apply_point,
    reflection_about,
    transform_plane,
)
from .skeleton import Chirality, swap_chirality

MIN_MARKER_RANGE_M = 0.2
STALENESS_MS = 500.0


@dataclass(frozen=True, eq=False)
class MirrorEstimate:
    plane: MirrorPlane
    reflection: ReflectionTransform
    source_observation: object = None

    @classmethod
    def from_plane(cls, plane, source_observation=None):
        return cls(plane, reflection_about(plane), source_observation)

    def in_frame(self, t):
        """Re-express the estimate through rigid transform ``t`` (plane frame -> t.target)."""
        return MirrorEstimate.from_plane(transform_plane(self.plane, t), self.source_observation)

    @property
    def timestamp_ms(self):
        obs = self.source_observation
        return None if obs is None else obs.timestamp_ms

    def to_dict(self):
        return {
            "normal": self.plane.normal.tolist(),
            "offset": self.plane.offset,
            "frame": self.plane.frame.value,
            "reflection": self.reflection.matrix.tolist(),
            "source_timestamp_ms": self.timestamp_ms,
        }

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)


class SceneKind(enum.Enum):
    REAL_SCENE = "RealScene"
    REFLECTED_SCENE = "ReflectedScene"


@dataclass(frozen=True)
class SceneClassification:
    kind: SceneKind
    evidence: MirrorEstimate | None = None

    def __post_init__(self):
        if (self.kind is SceneKind.REFLECTED_SCENE) != (self.evidence is not None):
            raise ValidationError("ReflectedScene requires evidence and RealScene forbids it")

    @property
    def reflected(self):
        return self.kind is SceneKind.REFLECTED_SCENE


def estimate_mirror(marker_center, *, marker_offset=(0.0, 0.0, 0.0), frame=FrameId.HMD_RGB,
                    source_observation=None, min_range=MIN_MARKER_RANGE_M):
    """Mirror plane from the observed 3D center of the (reflected) visor marker.

    ``marker_offset`` is the marker's true position in the camera frame; the
    plane bisects the segment from it to the observed center and is normal
    to that segment.
    """
    c = np.asarray(marker_center, dtype=float)
    o = np.asarray(marker_offset, dtype=float)
    v = c - o
    dist = np.linalg.norm(v)
    if not np.isfinite(dist) or dist < min_range:
        raise UnreliableEstimateError(
            f"marker at {dist:.3f} m is closer than the minimum range {min_range} m")
    n = v / dist
    plane = MirrorPlane(n, float(n @ (o + c)) / 2.0, frame)
    return MirrorEstimate.from_plane(plane, source_observation)


def classify_scene(detections, now_ms=None, *, staleness_ms=STALENESS_MS, marker_offset=(0, 0, 0)):
    """Decide whether the camera currently looks at a reflection.

    Uses the most recent detection no later than ``now_ms`` (default: the
    newest detection's time) that is at most ``staleness_ms`` old.
    """
    if not detections:
        return SceneClassification(SceneKind.REAL_SCENE)
    if now_ms is None:
        now_ms = max(d.timestamp_ms for d in detections)
    usable = [d for d in detections if d.timestamp_ms <= now_ms and now_ms - d.timestamp_ms <= staleness_ms]
    if not usable:
        return SceneClassification(SceneKind.REAL_SCENE)
    latest = max(usable, key=lambda d: d.timestamp_ms)
    est = estimate_mirror(latest.position, marker_offset=marker_offset, frame=latest.camera,
                          source_observation=latest)
    return SceneClassification(SceneKind.REFLECTED_SCENE, est)


def reflect_skeleton(s, reflection):
    """Forward model of tracking through a mirror: mirror every joint and
    relabel left/right, as a tracker sees the virtual image."""
    if reflection.frame != s.frame:
        raise ValidationError(
            f"reflection is in {reflection.frame.value}, skeleton in {s.frame.value}")
    return swap_chirality(replace(s, positions=apply_point(reflection, s.positions)))


def to_real_space(s, m):
    """Map a skeleton tracked in the reflection back onto the user's body."""
    if s.chirality is not Chirality.REFLECTED:
        raise ChiralityError("to_real_space expects a skeleton flagged Reflected")
    if m.plane.frame != s.frame:
        raise ValidationError(
            f"mirror estimate is in {m.plane.frame.value}, skeleton in {s.frame.value}")
    return reflect_skeleton(s, m.reflection)
