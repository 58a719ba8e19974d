"""20-joint skeleton model, chirality handling and synthetic pose generation.

Body-frame convention used by :func:`synth_skeleton` and by the default rig:
``x`` points to the subject's anatomical left, ``y`` up, ``z`` forward (the
direction the subject faces).  This frame is right-handed.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DegeneratePoseError, ValidationError
from .geometry import FrameId, apply_point, rotation_from_axis_angle

DEGENERACY_SIN = 1e-3


class JointId(enum.Enum):
    HIP_CENTER = "HipCenter"
    SPINE = "Spine"
    SHOULDER_CENTER = "ShoulderCenter"
    HEAD = "Head"
    SHOULDER_LEFT = "ShoulderLeft"
    ELBOW_LEFT = "ElbowLeft"
    WRIST_LEFT = "WristLeft"
    HAND_LEFT = "HandLeft"
    SHOULDER_RIGHT = "ShoulderRight"
    ELBOW_RIGHT = "ElbowRight"
    WRIST_RIGHT = "WristRight"
    HAND_RIGHT = "HandRight"
    HIP_LEFT = "HipLeft"
    KNEE_LEFT = "KneeLeft"
    ANKLE_LEFT = "AnkleLeft"
    FOOT_LEFT = "FootLeft"
    HIP_RIGHT = "HipRight"
    KNEE_RIGHT = "KneeRight"
    ANKLE_RIGHT = "AnkleRight"
    FOOT_RIGHT = "FootRight"


JOINTS = tuple(JointId)
JOINT_INDEX = {j: i for i, j in enumerate(JOINTS)}
CENTRAL_JOINTS = (JointId.HIP_CENTER, JointId.SPINE, JointId.SHOULDER_CENTER, JointId.HEAD)
LEFT_RIGHT_PAIRS = tuple(
    (JointId(j.value), JointId(j.value.replace("Left", "Right")))
    for j in JOINTS if j.value.endswith("Left")
)


def _mirror_permutation():
    perm = np.arange(len(JOINTS))
    for left, right in LEFT_RIGHT_PAIRS:
        i, k = JOINT_INDEX[left], JOINT_INDEX[right]
        perm[i], perm[k] = k, i
    return perm


MIRROR_PERMUTATION = _mirror_permutation()


class Chirality(enum.Enum):
    REAL = "Real"
    REFLECTED = "Reflected"

    def toggled(self):
        return Chirality.REFLECTED if self is Chirality.REAL else Chirality.REAL


@dataclass(frozen=True, eq=False)
class Skeleton:
    """Joint positions in ``frame``, one row per :data:`JOINTS` entry.

    ``head_occluded`` marks frames where the head joint should not be trusted
    (IR saturation from the emitter's own reflection).
    """

    positions: np.ndarray
    timestamp_ms: float = 0.0
    chirality: Chirality = Chirality.REAL
    frame: FrameId = FrameId.WORLD
    head_occluded: bool = False

    def __post_init__(self):
        P = np.array(self.positions, dtype=float)
        if P.shape != (len(JOINTS), 3):
            raise ValidationError(f"skeleton needs {len(JOINTS)}x3 positions, got {P.shape}")
        if not np.all(np.isfinite(P)):
            raise ValidationError("skeleton joint coordinates must be finite")
        P.setflags(write=False)
        object.__setattr__(self, "positions", P)
        object.__setattr__(self, "chirality", Chirality(self.chirality))
        object.__setattr__(self, "frame", FrameId(self.frame))
        object.__setattr__(self, "timestamp_ms", float(self.timestamp_ms))

    @classmethod
    def from_joints(cls, joints, **kw):
        missing = [j.value for j in JOINTS if j not in joints]
        if missing:
            raise ValidationError(f"skeleton is missing joints: {missing}")
        return cls(np.array([joints[j] for j in JOINTS]), **kw)

    def __getitem__(self, joint):
        return self.positions[JOINT_INDEX[JointId(joint)]]

    @property
    def joints(self):
        return {j: self.positions[i] for i, j in enumerate(JOINTS)}

    def with_positions(self, positions, **kw):
        return replace(self, positions=positions, **kw)

    def transformed(self, t):
        """Apply a rigid transform to every joint; ``t.source`` must match."""
        if t.source != self.frame:
            raise ValidationError(
                f"transform starts in {t.source.value}, skeleton is in {self.frame.value}")
        return replace(self, positions=apply_point(t, self.positions), frame=t.target)

    def to_dict(self):
        return {
            "joints": {j.value: [float(c) for c in self.positions[i]] for i, j in enumerate(JOINTS)},
            "timestamp_ms": self.timestamp_ms,
            "chirality": self.chirality.value,
            "frame": self.frame.value,
            "head_occluded": self.head_occluded,
        }

    @classmethod
    def from_dict(cls, d):
        joints = {JointId(k): v for k, v in d["joints"].items()}
        return cls.from_joints(
            joints,
            timestamp_ms=d.get("timestamp_ms", 0.0),
            chirality=Chirality(d.get("chirality", "Real")),
            frame=FrameId(d.get("frame", "World")),
            head_occluded=bool(d.get("head_occluded", False)),
        )

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True, eq=False)
class BoneFrame:
    origin: JointId
    direction: np.ndarray
    roll_axis: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.direction, dtype=float)
        r = np.asarray(self.roll_axis, dtype=float)
        if abs(np.linalg.norm(d) - 1) > 1e-9 or abs(np.linalg.norm(r) - 1) > 1e-9:
            raise ValidationError("bone frame axes must be unit vectors")
        if abs(d @ r) > 1e-9:
            raise ValidationError("bone roll axis must be orthogonal to its direction")


def swap_chirality(s):
    """Exchange every Left joint with its Right counterpart and toggle the flag."""
    return replace(s, positions=s.positions[MIRROR_PERMUTATION], chirality=s.chirality.toggled())


def arm_roll_axis(upper_arm, forearm, torso_dir):
    """Facing axis of an arm: normalized ``upper_arm x forearm``, oriented toward the torso.

    Raises
    ------
    DegeneratePoseError
        If the two bones are (nearly) parallel, i.e. the arm is straight.
    """
    u = np.asarray(upper_arm, dtype=float)
    f = np.asarray(forearm, dtype=float)
    nu, nf = np.linalg.norm(u), np.linalg.norm(f)
    if nu == 0.0 or nf == 0.0:
        raise DegeneratePoseError("arm bone vectors must be nonzero")
    c = np.cross(u, f)
    sin_angle = np.linalg.norm(c) / (nu * nf)
    if sin_angle < DEGENERACY_SIN:
        raise DegeneratePoseError(f"straight arm: sin(angle)={sin_angle:.2e} below {DEGENERACY_SIN}")
    c = c / np.linalg.norm(c)
    if c @ np.asarray(torso_dir, dtype=float) < 0:
        c = -c
    return c


def torso_direction(s):
    """Unit vector from ShoulderCenter toward HipCenter."""
    v = s[JointId.HIP_CENTER] - s[JointId.SHOULDER_CENTER]
    n = np.linalg.norm(v)
    if n == 0:
        raise DegeneratePoseError("ShoulderCenter coincides with HipCenter")
    return v / n


ARM_CHAINS = {
    "left": (JointId.SHOULDER_LEFT, JointId.ELBOW_LEFT, JointId.WRIST_LEFT),
    "right": (JointId.SHOULDER_RIGHT, JointId.ELBOW_RIGHT, JointId.WRIST_RIGHT),
}


class RollTracker:
    """Per-arm roll axes with hold-last-valid behaviour for straight arms.

    Before any valid axis has been seen, a straight arm falls back to the torso
    direction projected orthogonal to the upper arm.
    """

    def __init__(self):
        self.last = {}

    def update(self, s):
        torso = torso_direction(s)
        rolls = {}
        for side, (sh, el, wr) in ARM_CHAINS.items():
            upper = s[el] - s[sh]
            fore = s[wr] - s[el]
            try:
                axis = arm_roll_axis(upper, fore, torso)
            except DegeneratePoseError:
                axis = self.last.get(side)
                if axis is None:
                    axis = _orthogonal_fallback(torso, upper)
                else:
                    axis = _orthogonal_fallback(axis, upper)
            self.last[side] = axis
            rolls[side] = axis
        return rolls


def _orthogonal_fallback(ref, bone):
    b = bone / np.linalg.norm(bone)
    v = ref - (ref @ b) * b
    n = np.linalg.norm(v)
    if n < 1e-9:
        v = np.cross(b, [1.0, 0.0, 0.0])
        if np.linalg.norm(v) < 1e-6:
            v = np.cross(b, [0.0, 1.0, 0.0])
        n = np.linalg.norm(v)
    return v / n


@dataclass(frozen=True)
class BodyMeasurements:
    shoulder_distance: float
    torso_height: float


def measure_body(s):
    return BodyMeasurements(
        float(np.linalg.norm(s[JointId.SHOULDER_LEFT] - s[JointId.SHOULDER_RIGHT])),
        float(np.linalg.norm(s[JointId.SHOULDER_CENTER] - s[JointId.HIP_CENTER])),
    )


# --- synthetic skeletons -----------------------------------------------------


@dataclass(frozen=True)
class BodyDimensions:
    """Segment lengths in meters."""

    shoulder_width: float = 0.40
    torso_height: float = 0.50
    spine_fraction: float = 0.45
    neck_head: float = 0.25
    upper_arm: float = 0.30
    forearm: float = 0.27
    hand: float = 0.08
    hip_width: float = 0.24
    thigh: float = 0.45
    shin: float = 0.43
    foot: float = 0.15

    def __post_init__(self):
        for name, value in self.__dict__.items():
            if not (math.isfinite(value) and value > 0):
                raise ValidationError(f"body dimension {name} must be positive, got {value!r}")
        if self.spine_fraction >= 1:
            raise ValidationError("spine_fraction must be in (0, 1)")


@dataclass(frozen=True)
class ArmPose:
    """Arm angles in degrees.

    ``raise_deg``: elevation of the upper arm above horizontal (0 is T-pose,
    -90 hangs down).  ``forward_deg``: horizontal swing toward the front.
    ``elbow_deg``: elbow flexion, bending the forearm forward/up.
    ``*_amp_deg`` and ``freq_hz`` add a sinusoidal motion on top.
    """

    raise_deg: float = 0.0
    forward_deg: float = 0.0
    elbow_deg: float = 0.0
    raise_amp_deg: float = 0.0
    elbow_amp_deg: float = 0.0
    freq_hz: float = 0.0
    phase: float = 0.0

    def at(self, t_ms):
        s = math.sin(2 * math.pi * self.freq_hz * t_ms / 1000.0 + self.phase)
        return (self.raise_deg + self.raise_amp_deg * s, self.forward_deg,
                self.elbow_deg + self.elbow_amp_deg * s)


@dataclass(frozen=True)
class PoseParams:
    body: BodyDimensions = field(default_factory=BodyDimensions)
    root: tuple = (0.0, 0.95, 0.0)
    yaw_deg: float = 0.0
    lean_deg: float = 0.0
    left_arm: ArmPose = field(default_factory=ArmPose)
    right_arm: ArmPose = field(default_factory=ArmPose)
    sway: tuple = (0.0, 0.0, 0.0)
    sway_freq_hz: float = 0.0

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        if "body" in d:
            d["body"] = BodyDimensions(**d["body"])
        for k in ("left_arm", "right_arm"):
            if k in d:
                d[k] = ArmPose(**d[k])
        for k in ("root", "sway"):
            if k in d:
                d[k] = tuple(float(x) for x in d[k])
        return cls(**d)


def body_axes(params):
    """World-frame (left, up, forward) unit vectors of the synthetic subject."""
    yaw = rotation_from_axis_angle([0, 1, 0], math.radians(params.yaw_deg))
    left = yaw @ np.array([1.0, 0.0, 0.0])
    fwd0 = yaw @ np.array([0.0, 0.0, 1.0])
    lean = rotation_from_axis_angle(left, math.radians(params.lean_deg))
    up = lean @ np.array([0.0, 1.0, 0.0])
    return left, up, fwd0, lean @ fwd0


def _arm_directions(side_sign, pose, t_ms, left, up, fwd):
    raise_deg, fwd_deg, elbow_deg = pose.at(t_ms)
    phi, psi, beta = (math.radians(a) for a in (raise_deg, fwd_deg, elbow_deg))
    u = (side_sign * math.cos(phi) * math.cos(psi) * left + math.sin(phi) * up
         + math.cos(phi) * math.sin(psi) * fwd)
    u /= np.linalg.norm(u)
    w = fwd - (fwd @ u) * u
    if np.linalg.norm(w) < 1e-9:
        w = up - (up @ u) * u
    w /= np.linalg.norm(w)
    f = math.cos(beta) * u + math.sin(beta) * w
    return u, f / np.linalg.norm(f)


def synth_skeleton(pose_params, t_ms=0.0, frame=FrameId.WORLD):
    """Kinematically consistent skeleton for ``pose_params`` at time ``t_ms``."""
    p = pose_params
    b = p.body
    if not isinstance(b, BodyDimensions):
        raise ValidationError("pose_params.body must be BodyDimensions")
    left, up, fwd_floor, fwd = body_axes(p)
    sway = math.sin(2 * math.pi * p.sway_freq_hz * t_ms / 1000.0)
    root = np.asarray(p.root, dtype=float) + sway * np.asarray(p.sway, dtype=float)

    J = {}
    J[JointId.HIP_CENTER] = root
    J[JointId.SPINE] = root + b.spine_fraction * b.torso_height * up
    sc = root + b.torso_height * up
    J[JointId.SHOULDER_CENTER] = sc
    J[JointId.HEAD] = sc + b.neck_head * up

    world_up = np.array([0.0, 1.0, 0.0])
    for side, sign, pose in (("Left", 1.0, p.left_arm), ("Right", -1.0, p.right_arm)):
        shoulder = sc + sign * 0.5 * b.shoulder_width * left
        u, f = _arm_directions(sign, pose, t_ms, left, up, fwd)
        elbow = shoulder + b.upper_arm * u
        wrist = elbow + b.forearm * f
        J[JointId(f"Shoulder{side}")] = shoulder
        J[JointId(f"Elbow{side}")] = elbow
        J[JointId(f"Wrist{side}")] = wrist
        J[JointId(f"Hand{side}")] = wrist + b.hand * f

        hip = root + sign * 0.5 * b.hip_width * left
        knee = hip - b.thigh * world_up
        ankle = knee - b.shin * world_up
        J[JointId(f"Hip{side}")] = hip
        J[JointId(f"Knee{side}")] = knee
        J[JointId(f"Ankle{side}")] = ankle
        J[JointId(f"Foot{side}")] = ankle + b.foot * fwd_floor

    return Skeleton.from_joints(J, timestamp_ms=t_ms, chirality=Chirality.REAL, frame=frame)


SEGMENTS = (
    (JointId.HIP_CENTER, JointId.SPINE),
    (JointId.SPINE, JointId.SHOULDER_CENTER),
    (JointId.SHOULDER_CENTER, JointId.HEAD),
    (JointId.SHOULDER_CENTER, JointId.SHOULDER_LEFT),
    (JointId.SHOULDER_LEFT, JointId.ELBOW_LEFT),
    (JointId.ELBOW_LEFT, JointId.WRIST_LEFT),
    (JointId.WRIST_LEFT, JointId.HAND_LEFT),
    (JointId.SHOULDER_CENTER, JointId.SHOULDER_RIGHT),
    (JointId.SHOULDER_RIGHT, JointId.ELBOW_RIGHT),
    (JointId.ELBOW_RIGHT, JointId.WRIST_RIGHT),
    (JointId.WRIST_RIGHT, JointId.HAND_RIGHT),
    (JointId.HIP_CENTER, JointId.HIP_LEFT),
    (JointId.HIP_LEFT, JointId.KNEE_LEFT),
    (JointId.KNEE_LEFT, JointId.ANKLE_LEFT),
    (JointId.ANKLE_LEFT, JointId.FOOT_LEFT),
    (JointId.HIP_CENTER, JointId.HIP_RIGHT),
    (JointId.HIP_RIGHT, JointId.KNEE_RIGHT),
    (JointId.KNEE_RIGHT, JointId.ANKLE_RIGHT),
    (JointId.ANKLE_RIGHT, JointId.FOOT_RIGHT),
)


def segment_lengths(s):
    idx = np.array([[JOINT_INDEX[a], JOINT_INDEX[b]] for a, b in SEGMENTS])
    return np.linalg.norm(s.positions[idx[:, 1]] - s.positions[idx[:, 0]], axis=1)
