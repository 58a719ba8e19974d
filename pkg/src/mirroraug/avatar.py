"""Rigged avatar: armature, skinned mesh, personalization, retargeting to a
tracked skeleton, anchoring and linear blend skinning.

Rig coordinates follow the skeleton body frame: ``x`` toward the model's
anatomical left, ``y`` up, ``z`` forward.  Personalization scales along these
axes, so bind poses are expected to have the shoulder line along ``x`` and
the torso along ``y``.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, replace

import numpy as np
from plyfile import PlyData, PlyElement

from .errors import AnchoringError, RetargetError, RigError, ValidationError
from .geometry import FrameId, RigidTransform, apply_point
from .skeleton import (
    ArmPose,
    BodyDimensions,
    JointId,
    PoseParams,
    RollTracker,
    synth_skeleton,
)

TWIST_KINDS = (None, "lateral", "torso", "arm_left", "arm_right")


@dataclass(frozen=True, eq=False)
class Bone:
    """One armature bone in bind pose.

    ``joints`` is the ``(start, end)`` skeleton joint pair it follows, or
    ``None`` for extra bones driven by explicit pose input.  ``twist`` names
    how rotation about the bone is fixed: by the shoulder line (``lateral``),
    by the torso axis (``torso``), by an arm roll axis (``arm_left`` /
    ``arm_right``, with ``roll`` the bind-pose roll vector) or not at all.
    """

    id: str
    parent: str | None
    head: np.ndarray
    tail: np.ndarray
    joints: tuple | None = None
    twist: str | None = None
    roll: np.ndarray | None = None

    def __post_init__(self):
        head = np.array(self.head, dtype=float)
        tail = np.array(self.tail, dtype=float)
        if head.shape != (3,) or tail.shape != (3,):
            raise RigError(f"bone {self.id}: head/tail must be 3-vectors")
        if np.linalg.norm(tail - head) <= 1e-12:
            raise RigError(f"bone {self.id}: head and tail coincide")
        object.__setattr__(self, "head", head)
        object.__setattr__(self, "tail", tail)
        if self.joints is not None:
            object.__setattr__(self, "joints", tuple(JointId(j) for j in self.joints))
        if self.twist not in TWIST_KINDS:
            raise RigError(f"bone {self.id}: unknown twist kind {self.twist!r}")
        if self.roll is not None:
            object.__setattr__(self, "roll", np.array(self.roll, dtype=float))

    @property
    def direction(self):
        v = self.tail - self.head
        return v / np.linalg.norm(v)

    def to_dict(self):
        return {
            "id": self.id,
            "parent": self.parent,
            "head": self.head.tolist(),
            "tail": self.tail.tolist(),
            "joints": None if self.joints is None else [j.value for j in self.joints],
            "twist": self.twist,
            "roll": None if self.roll is None else self.roll.tolist(),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(d["id"], d.get("parent"), d["head"], d["tail"], d.get("joints"),
                   d.get("twist"), d.get("roll"))


class Armature:
    """Bone hierarchy with a single root, plus the anchor joint."""

    def __init__(self, bones, anchor_joint=JointId.SHOULDER_CENTER):
        self.bones = {}
        for b in bones:
            if b.id in self.bones:
                raise RigError(f"duplicate bone id {b.id!r}")
            self.bones[b.id] = b
        self.anchor_joint = JointId(anchor_joint)
        roots = [b.id for b in bones if b.parent is None]
        if len(roots) != 1:
            raise RigError(f"armature needs exactly one root bone, found {roots}")
        for b in bones:
            if b.parent is not None and b.parent not in self.bones:
                raise RigError(f"bone {b.id!r} has unknown parent {b.parent!r}")
        self.order = self._topological_order(roots[0])
        self.joint_points = self._joint_points()

    def _topological_order(self, root):
        children = {}
        for b in self.bones.values():
            if b.parent is not None:
                children.setdefault(b.parent, []).append(b.id)
        order, stack = [], [root]
        while stack:
            bid = stack.pop()
            order.append(bid)
            stack.extend(reversed(children.get(bid, [])))
        if len(order) != len(self.bones):
            missing = sorted(set(self.bones) - set(order))
            raise RigError(f"armature has a cycle or detached bones: {missing}")
        return order

    def _joint_points(self):
        points = {}
        for bid in self.order:
            b = self.bones[bid]
            if b.joints is None:
                continue
            j0, j1 = b.joints
            points.setdefault(j0, (bid, "head"))
            points.setdefault(j1, (bid, "tail"))
        return points

    def bind_joint(self, joint):
        bid, end = self.joint_points[JointId(joint)]
        b = self.bones[bid]
        return b.head if end == "head" else b.tail

    def has_joint(self, joint):
        return JointId(joint) in self.joint_points

    def measure(self):
        """Shoulder distance and torso height of the bind pose."""
        needed = (JointId.SHOULDER_LEFT, JointId.SHOULDER_RIGHT, JointId.SHOULDER_CENTER,
                  JointId.HIP_CENTER)
        missing = [j.value for j in needed if not self.has_joint(j)]
        if missing:
            raise RigError(f"armature does not map joints needed for measuring: {missing}")
        sd = np.linalg.norm(self.bind_joint(JointId.SHOULDER_LEFT) - self.bind_joint(JointId.SHOULDER_RIGHT))
        th = np.linalg.norm(self.bind_joint(JointId.SHOULDER_CENTER) - self.bind_joint(JointId.HIP_CENTER))
        return float(sd), float(th)

    def scaled(self, scale, pivot):
        S = np.asarray(scale, dtype=float)
        bones = [replace(b, head=pivot + (b.head - pivot) * S, tail=pivot + (b.tail - pivot) * S)
                 for b in self.bones.values()]
        return Armature(bones, self.anchor_joint)

    def to_dict(self):
        return {"anchor_joint": self.anchor_joint.value,
                "bones": [self.bones[b].to_dict() for b in self.order]}


class SkinnedMesh:
    """Bind-pose vertices, triangles and per-vertex bone weights.

    ``weights`` is a list (one entry per vertex) of ``(bone_id, weight)``
    pairs; it is stored densely as :attr:`weight_matrix` over
    :attr:`bone_ids`.
    """

    def __init__(self, vertices, triangles, weights, bone_ids=None):
        V = np.array(vertices, dtype=float)
        if V.ndim != 2 or V.shape[1] != 3:
            raise RigError(f"vertices must be (N, 3), got {V.shape}")
        F = np.array(triangles, dtype=np.int64).reshape(-1, 3)
        if F.size and (F.min() < 0 or F.max() >= len(V)):
            raise RigError("triangle index out of range")
        if len(weights) != len(V):
            raise RigError(f"{len(weights)} weight lists for {len(V)} vertices")
        if bone_ids is None:
            bone_ids = sorted({bid for ws in weights for bid, _ in ws})
        self.bone_ids = list(bone_ids)
        col = {b: i for i, b in enumerate(self.bone_ids)}
        W = np.zeros((len(V), len(self.bone_ids)))
        for v, ws in enumerate(weights):
            for bid, w in ws:
                if bid not in col:
                    raise RigError(f"vertex {v} references unknown bone {bid!r}")
                W[v, col[bid]] += w
        self.vertices = V
        self.triangles = F
        self.weight_matrix = W
        self.validate_weights()

    @classmethod
    def from_weight_matrix(cls, vertices, triangles, weight_matrix, bone_ids):
        obj = cls.__new__(cls)
        obj.vertices = np.array(vertices, dtype=float)
        obj.triangles = np.array(triangles, dtype=np.int64).reshape(-1, 3)
        obj.weight_matrix = np.array(weight_matrix, dtype=float)
        obj.bone_ids = list(bone_ids)
        if obj.weight_matrix.shape != (len(obj.vertices), len(obj.bone_ids)):
            raise RigError("weight matrix shape does not match vertices x bones")
        obj.validate_weights()
        return obj

    def validate_weights(self):
        W = self.weight_matrix
        if np.any(W < 0):
            raise ValidationError("vertex weights must be nonnegative")
        err = np.abs(W.sum(axis=1) - 1.0)
        if err.size and err.max() > 1e-6:
            v = int(np.argmax(err))
            raise ValidationError(f"weights of vertex {v} sum to {W[v].sum():.8f}, expected 1")

    def check_armature(self, armature):
        unknown = [b for b in self.bone_ids if b not in armature.bones]
        if unknown:
            raise RigError(f"mesh weights reference bones missing from the armature: {unknown}")

    def weights(self):
        out = []
        for row in self.weight_matrix:
            nz = np.flatnonzero(row)
            out.append([(self.bone_ids[i], float(row[i])) for i in nz])
        return out

    def scaled(self, scale, pivot):
        V = pivot + (self.vertices - pivot) * np.asarray(scale, dtype=float)
        return SkinnedMesh.from_weight_matrix(V, self.triangles, self.weight_matrix, self.bone_ids)


@dataclass(frozen=True, eq=False)
class PosedArmature:
    """Per-bone transforms from bind pose to the current pose."""

    transforms: dict
    order: tuple = ()

    def __getitem__(self, bone_id):
        return self.transforms[bone_id]

    def premultiplied(self, t):
        """Apply a global rigid motion after every bone transform."""
        return PosedArmature({k: _compose_free(t, v) for k, v in self.transforms.items()}, self.order)


def _compose_free(a, b):
    return RigidTransform(a.rotation @ b.rotation, a.rotation @ b.translation + a.translation,
                          b.source, b.source)


def identity_pose(armature):
    return PosedArmature({b: RigidTransform.identity() for b in armature.order}, tuple(armature.order))


# --- personalization ---------------------------------------------------------


def personalize(armature, mesh, body):
    """Scale rig and mesh about the anchor joint to the measured body.

    Lateral (``x``) scale is the shoulder-distance ratio, longitudinal (``y``)
    the torso-height ratio and depth (``z``) their geometric mean.
    """
    sd, th = body.shoulder_distance, body.torso_height
    if not (sd > 0 and th > 0 and math.isfinite(sd) and math.isfinite(th)):
        raise ValidationError(f"body measurements must be positive, got {sd!r}, {th!r}")
    model_sd, model_th = armature.measure()
    if model_sd <= 0 or model_th <= 0:
        raise RigError("model shoulder distance and torso height must be nonzero")
    if not armature.has_joint(armature.anchor_joint):
        raise RigError(f"anchor joint {armature.anchor_joint.value} is not mapped")
    sx, sy = sd / model_sd, th / model_th
    scale = np.array([sx, sy, math.sqrt(sx * sy)])
    pivot = armature.bind_joint(armature.anchor_joint).copy()
    return armature.scaled(scale, pivot), mesh.scaled(scale, pivot)


# --- retargeting -------------------------------------------------------------


def _frame(direction, secondary):
    d = direction / np.linalg.norm(direction)
    if secondary is None:
        return None
    s = secondary - (secondary @ d) * d
    n = np.linalg.norm(s)
    if n < 1e-9:
        return None
    s = s / n
    return np.column_stack((d, s, np.cross(d, s)))


def _shortest_arc(a, b):
    a = a / np.linalg.norm(a)
    b = b / np.linalg.norm(b)
    v = np.cross(a, b)
    c = float(a @ b)
    if c < -1 + 1e-12:
        axis = np.cross(a, [1.0, 0.0, 0.0])
        if np.linalg.norm(axis) < 1e-6:
            axis = np.cross(a, [0.0, 1.0, 0.0])
        axis /= np.linalg.norm(axis)
        return 2 * np.outer(axis, axis) - np.eye(3)
    K = np.array([[0, -v[2], v[1]], [v[2], 0, -v[0]], [-v[1], v[0], 0]])
    return np.eye(3) + K + K @ K / (1 + c)


def _bind_secondary(armature, bone):
    if bone.twist in ("arm_left", "arm_right"):
        return bone.roll if bone.roll is not None else np.array([0.0, -1.0, 0.0])
    if bone.twist == "lateral":
        return armature.bind_joint(JointId.SHOULDER_LEFT) - armature.bind_joint(JointId.SHOULDER_RIGHT)
    if bone.twist == "torso":
        return armature.bind_joint(JointId.SHOULDER_CENTER) - armature.bind_joint(JointId.HIP_CENTER)
    return None


def _target_secondary(bone, s, rolls):
    if bone.twist == "arm_left":
        return rolls["left"]
    if bone.twist == "arm_right":
        return rolls["right"]
    if bone.twist == "lateral":
        return s[JointId.SHOULDER_LEFT] - s[JointId.SHOULDER_RIGHT]
    if bone.twist == "torso":
        return s[JointId.SHOULDER_CENTER] - s[JointId.HIP_CENTER]
    return None


def _unavailable_joints(s):
    return {JointId.HEAD} if getattr(s, "head_occluded", False) else set()


def retarget(armature, s, rolls=None, *, extra_pose=None, on_missing="raise"):
    """Pose the armature so every mapped bone points along its skeleton bone.

    ``rolls`` maps ``"left"``/``"right"`` to arm roll axes (see
    :func:`mirroraug.skeleton.arm_roll_axis`); when omitted they are computed
    from ``s``.  ``extra_pose`` gives local rotations (3x3) for unmapped bones.
    With ``on_missing="inherit"``, bones whose joints are unavailable inherit
    their parent's rotation instead of raising.
    """
    unavailable = _unavailable_joints(s)
    needed = {j for b in armature.bones.values() if b.joints for j in b.joints}
    missing = sorted(j.value for j in needed & unavailable)
    if missing and on_missing == "raise":
        raise RetargetError(f"skeleton lacks joints required by the armature: {missing}")
    if rolls is None:
        rolls = RollTracker().update(s)
    extra_pose = extra_pose or {}

    rot, head_posed, transforms = {}, {}, {}
    for bid in armature.order:
        b = armature.bones[bid]
        parent_R = rot[b.parent] if b.parent is not None else np.eye(3)
        if b.joints is not None and not (set(b.joints) & unavailable):
            target = s[b.joints[1]] - s[b.joints[0]]
            if np.linalg.norm(target) < 1e-12:
                raise RetargetError(f"bone {bid}: joints {b.joints[0].value} and {b.joints[1].value} coincide")
            B = _frame(b.direction, _bind_secondary(armature, b))
            F = _frame(target, _target_secondary(b, s, rolls))
            if B is None or F is None:
                R = _shortest_arc(b.direction, target)
            else:
                R = F @ B.T
        else:
            R = parent_R @ np.asarray(extra_pose.get(bid, np.eye(3)), dtype=float)
        if b.parent is None:
            h = b.head.copy()
        else:
            h = apply_point(transforms[b.parent], b.head)
        rot[bid] = R
        head_posed[bid] = h
        transforms[bid] = RigidTransform(R, h - R @ b.head)
    return PosedArmature(transforms, tuple(armature.order))


def posed_joint(posed, armature, joint):
    bid, end = armature.joint_points[JointId(joint)]
    b = armature.bones[bid]
    return apply_point(posed[bid], b.head if end == "head" else b.tail)


def anchor(posed, armature, s):
    """Translation placing the posed anchor joint on the tracked one."""
    j = armature.anchor_joint
    if not armature.has_joint(j):
        raise AnchoringError(f"anchor joint {j.value} is not mapped on the armature")
    if j in _unavailable_joints(s):
        raise AnchoringError(f"anchor joint {j.value} is not tracked in this frame")
    delta = s[j] - posed_joint(posed, armature, j)
    return RigidTransform(np.eye(3), delta, FrameId.OBJECT, s.frame)


# --- skinning ----------------------------------------------------------------


def skin(mesh, posed):
    """Linear blend skinning: ``v' = sum_b w_vb (R_b v + t_b)``."""
    try:
        T = np.stack([np.hstack((posed[b].rotation, posed[b].translation[:, None]))
                      for b in mesh.bone_ids])
    except KeyError as exc:
        raise RigError(f"posed armature has no transform for bone {exc.args[0]!r}") from None
    blended = (mesh.weight_matrix @ T.reshape(len(mesh.bone_ids), 12)).reshape(-1, 3, 4)
    V = mesh.vertices
    return np.einsum("vij,vj->vi", blended[:, :, :3], V) + blended[:, :, 3]


# --- assets ------------------------------------------------------------------


def write_ply(path, vertices, triangles):
    V = np.asarray(vertices, dtype=float)
    vert = np.empty(len(V), dtype=[("x", "f8"), ("y", "f8"), ("z", "f8")])
    vert["x"], vert["y"], vert["z"] = V[:, 0], V[:, 1], V[:, 2]
    F = np.asarray(triangles, dtype=np.int32).reshape(-1, 3)
    face = np.empty(len(F), dtype=[("vertex_indices", "i4", (3,))])
    face["vertex_indices"] = F
    PlyData([PlyElement.describe(vert, "vertex"), PlyElement.describe(face, "face")],
            text=True).write(str(path))


def read_ply(path):
    data = PlyData.read(str(path))
    v = data["vertex"]
    V = np.column_stack((v["x"], v["y"], v["z"])).astype(float)
    if "face" in data:
        F = np.array([list(f) for f in data["face"]["vertex_indices"]], dtype=np.int64).reshape(-1, 3)
    else:
        F = np.zeros((0, 3), dtype=np.int64)
    return V, F


def save_rig(json_path, armature, mesh, ply_name=None):
    """Write the mesh as PLY and the rig sidecar as JSON next to it."""
    json_path = os.fspath(json_path)
    ply_name = ply_name or os.path.splitext(os.path.basename(json_path))[0] + ".ply"
    write_ply(os.path.join(os.path.dirname(json_path), ply_name), mesh.vertices, mesh.triangles)
    doc = {
        "mesh": ply_name,
        **armature.to_dict(),
        "weights": [[[b, w] for b, w in ws] for ws in mesh.weights()],
    }
    with open(json_path, "w") as fh:
        json.dump(doc, fh, indent=1)


def load_rig(json_path):
    json_path = os.fspath(json_path)
    try:
        with open(json_path) as fh:
            doc = json.load(fh)
        V, F = read_ply(os.path.join(os.path.dirname(json_path), doc["mesh"]))
    except (OSError, KeyError, json.JSONDecodeError) as exc:
        raise RigError(f"cannot load rig {json_path}: {exc}") from exc
    armature = Armature([Bone.from_dict(b) for b in doc["bones"]],
                        JointId(doc.get("anchor_joint", "ShoulderCenter")))
    mesh = SkinnedMesh(V, F, [[(b, float(w)) for b, w in ws] for ws in doc["weights"]])
    mesh.check_armature(armature)
    return armature, mesh


# --- procedural default rig --------------------------------------------------

MODEL_BODY = BodyDimensions(shoulder_width=0.46, torso_height=0.55, spine_fraction=0.45,
                            neck_head=0.27, upper_arm=0.31, forearm=0.27, hand=0.09)

_BONE_LAYOUT = (
    # id, parent, joints, twist, radius
    ("pelvis", None, (JointId.HIP_CENTER, JointId.SPINE), "lateral", 0.15),
    ("chest", "pelvis", (JointId.SPINE, JointId.SHOULDER_CENTER), "lateral", 0.17),
    ("neck", "chest", (JointId.SHOULDER_CENTER, JointId.HEAD), "lateral", 0.06),
    ("clavicle_l", "chest", (JointId.SHOULDER_CENTER, JointId.SHOULDER_LEFT), "torso", 0.06),
    ("upper_arm_l", "clavicle_l", (JointId.SHOULDER_LEFT, JointId.ELBOW_LEFT), "arm_left", 0.05),
    ("forearm_l", "upper_arm_l", (JointId.ELBOW_LEFT, JointId.WRIST_LEFT), "arm_left", 0.04),
    ("hand_l", "forearm_l", (JointId.WRIST_LEFT, JointId.HAND_LEFT), "arm_left", 0.03),
    ("clavicle_r", "chest", (JointId.SHOULDER_CENTER, JointId.SHOULDER_RIGHT), "torso", 0.06),
    ("upper_arm_r", "clavicle_r", (JointId.SHOULDER_RIGHT, JointId.ELBOW_RIGHT), "arm_right", 0.05),
    ("forearm_r", "upper_arm_r", (JointId.ELBOW_RIGHT, JointId.WRIST_RIGHT), "arm_right", 0.04),
    ("hand_r", "forearm_r", (JointId.WRIST_RIGHT, JointId.HAND_RIGHT), "arm_right", 0.03),
)


def _perpendicular_basis(d):
    a = np.array([0.0, 0.0, 1.0]) if abs(d[2]) < 0.9 else np.array([1.0, 0.0, 0.0])
    e1 = np.cross(d, a)
    e1 /= np.linalg.norm(e1)
    return e1, np.cross(d, e1)


def _tube(head, tail, radius, rings, around):
    d = tail - head
    length = np.linalg.norm(d)
    e1, e2 = _perpendicular_basis(d / length)
    us = np.linspace(0.0, 1.0, rings)
    ang = np.linspace(0.0, 2 * np.pi, around, endpoint=False)
    pts = (head + us[:, None, None] * d
           + radius * (np.cos(ang)[None, :, None] * e1 + np.sin(ang)[None, :, None] * e2))
    tris = []
    for i in range(rings - 1):
        for k in range(around):
            a, b = i * around + k, i * around + (k + 1) % around
            c, e = a + around, b + around
            tris += [(a, b, c), (b, e, c)]
    return pts.reshape(-1, 3), np.array(tris), np.repeat(us, around)


def default_rig(body=MODEL_BODY, rings=8, around=12, blend=0.25):
    """Upper-torso-and-head avatar rigged to the 20-joint skeleton.

    Includes one extra bone (``visor``) that is not driven by tracking.
    """
    bind = synth_skeleton(PoseParams(body=body, root=(0.0, 0.0, 0.0),
                                     left_arm=ArmPose(), right_arm=ArmPose()))
    bones = []
    for bid, parent, joints, twist, _ in _BONE_LAYOUT:
        roll = [0.0, -1.0, 0.0] if twist and twist.startswith("arm") else None
        bones.append(Bone(bid, parent, bind[joints[0]], bind[joints[1]], joints, twist, roll))
    head = bind[JointId.HEAD]
    bones.append(Bone("visor", "neck", head, head + np.array([0.0, 0.0, 0.12])))
    armature = Armature(bones, JointId.SHOULDER_CENTER)

    verts, tris, weights = [], [], []
    base = 0
    for bid, parent, joints, _, radius in _BONE_LAYOUT:
        b = armature.bones[bid]
        P, T, us = _tube(b.head, b.tail, radius, rings, around)
        verts.append(P)
        tris.append(T + base)
        base += len(P)
        for u in us:
            if parent is not None and u < blend:
                wp = 0.5 * (1.0 - u / blend)
                weights.append([(bid, 1.0 - wp), (parent, wp)])
            else:
                weights.append([(bid, 1.0)])
    # head sphere on the neck bone, visor plate on the visor bone
    sph_u, sph_v = np.meshgrid(np.linspace(0.15, np.pi - 0.15, 6), np.linspace(0, 2 * np.pi, around, endpoint=False))
    sph = head + 0.1 * np.column_stack((np.sin(sph_u.ravel()) * np.cos(sph_v.ravel()),
                                        np.cos(sph_u.ravel()), np.sin(sph_u.ravel()) * np.sin(sph_v.ravel())))
    verts.append(sph)
    weights += [[("neck", 1.0)]] * len(sph)
    base += len(sph)
    plate = head + np.array([[x, y, 0.11] for x in (-0.08, 0.08) for y in (-0.02, 0.04)])
    verts.append(plate)
    tris.append(np.array([[0, 1, 2], [1, 3, 2]]) + base)
    weights += [[("visor", 1.0)]] * len(plate)
    mesh = SkinnedMesh(np.vstack(verts), np.vstack(tris), weights)
    mesh.check_armature(armature)
    return armature, mesh


def posed_mesh(armature, mesh, s, rolls=None, extra_pose=None, on_missing="raise"):
    """Retarget, anchor and skin in one call; returns vertices in ``s.frame``."""
    posed = retarget(armature, s, rolls, extra_pose=extra_pose, on_missing=on_missing)
    t = anchor(posed, armature, s)
    return apply_point(t, skin(mesh, posed)), posed, t

