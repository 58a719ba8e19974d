import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mirroraug.errors import FrameChainError, ValidationError
from mirroraug.geometry import (
    FrameId,
    MirrorPlane,
    RigidTransform,
    apply_point,
    compose,
    invert,
    random_plane,
    random_transform,
    reflection_about,
    rotation_angle,
    rotation_from_axis_angle,
    rotation_from_quaternion,
    transform_plane,
)

W, C, H, T = FrameId.WORLD, FrameId.RENDER_CAM, FrameId.HMD_RGB, FrameId.TRACKER_RGB
seeds = st.integers(0, 2**32 - 1)


def Rz(deg):
    a = math.radians(deg)
    return np.array([[math.cos(a), -math.sin(a), 0], [math.sin(a), math.cos(a), 0], [0, 0, 1]])


def test_frame_labels_distinct():
    assert len({f.value for f in FrameId}) == len(FrameId) == 8


def test_compose_identity_left():
    t = random_transform(np.random.default_rng(1), H, W)
    out = compose(RigidTransform.identity(W), t)
    assert np.allclose(out.as_matrix(), t.as_matrix(), atol=1e-15)
    assert (out.source, out.target) == (H, W)


def test_compose_with_inverse_is_identity():
    t = random_transform(np.random.default_rng(2), H, W)
    out = compose(t, invert(t))
    assert np.allclose(out.as_matrix(), np.eye(4), atol=1e-12)
    assert out.source == out.target == W


def test_compose_rz90_example_matches_matrix_product():
    a = RigidTransform(Rz(90), [1, 0, 0], H, W)
    b = RigidTransform(Rz(90), [0, 1, 0], T, H)
    out = compose(a, b)
    assert np.allclose(out.rotation, Rz(180), atol=1e-15)
    assert np.allclose(out.translation, [0, 0, 0], atol=1e-15)
    assert np.allclose(out.as_matrix(), a.as_matrix() @ b.as_matrix(), atol=1e-15)
    assert (out.source, out.target) == (T, W)


def test_compose_frame_mismatch_names_frames():
    a = RigidTransform.identity(H, W)
    b = RigidTransform.identity(W, C)
    with pytest.raises(FrameChainError, match="HmdRgb.*RenderCam|RenderCam.*HmdRgb"):
        compose(a, b)


def test_invert_examples():
    i = invert(RigidTransform.identity(W))
    assert np.array_equal(i.as_matrix(), np.eye(4))
    t = invert(RigidTransform(np.eye(3), [0, 0, 2], H, W))
    assert np.allclose(t.translation, [0, 0, -2])
    assert (t.source, t.target) == (W, H)


@given(seeds)
def test_invert_roundtrip(seed):
    t = random_transform(np.random.default_rng(seed), H, W, scale=5)
    assert np.allclose(compose(t, invert(t)).as_matrix(), np.eye(4), atol=1e-12)
    assert np.allclose(compose(invert(t), t).as_matrix(), np.eye(4), atol=1e-12)


@given(seeds)
def test_compose_associative(seed):
    rng = np.random.default_rng(seed)
    a = random_transform(rng, H, W, 3)
    b = random_transform(rng, T, H, 3)
    c = random_transform(rng, FrameId.DEPTH_CAM, T, 3)
    lhs = compose(compose(a, b), c).as_matrix()
    rhs = compose(a, compose(b, c)).as_matrix()
    assert np.max(np.abs(lhs - rhs)) < 1e-12


def test_long_compose_chain_stays_orthonormal():
    rng = np.random.default_rng(3)
    acc = RigidTransform.identity(W)
    for _ in range(10_000):
        acc = compose(random_transform(rng, W, W, 0.01), acc)
    R = acc.rotation
    assert np.max(np.abs(R.T @ R - np.eye(3))) < 1e-9
    assert abs(np.linalg.det(R) - 1) < 1e-9


def test_rigid_transform_rejects_improper_and_nonorthonormal():
    with pytest.raises(ValidationError):
        RigidTransform(np.diag([1.0, 1.0, -1.0]), [0, 0, 0])
    with pytest.raises(ValidationError):
        RigidTransform(np.eye(3) * 1.001, [0, 0, 0])


def test_rotation_constructors_agree():
    R1 = rotation_from_axis_angle([0, 0, 1], math.pi / 2)
    R2 = rotation_from_quaternion([math.cos(math.pi / 4), 0, 0, math.sin(math.pi / 4)])
    assert np.allclose(R1, Rz(90), atol=1e-15)
    assert np.allclose(R2, Rz(90), atol=1e-15)
    with pytest.raises(ValidationError):
        rotation_from_quaternion([1, 1, 0, 0])


def test_rotation_angle_small_angles_keep_precision():
    for a in (1e-10, 1e-7, 0.3, math.pi - 1e-6):
        assert rotation_angle(rotation_from_axis_angle([1, 2, 3], a)) == pytest.approx(a, rel=1e-9)


def test_reflection_axis_mirror():
    H_ = reflection_about(MirrorPlane([1, 0, 0], 0.0))
    assert np.allclose(apply_point(H_, [3, 1, 2]), [-3, 1, 2])


def test_reflection_offset_plane_doubles_distance():
    H_ = reflection_about(MirrorPlane([0, 0, 1], 1.0))
    assert np.allclose(apply_point(H_, [0, 0, 0]), [0, 0, 2])
    assert np.allclose(apply_point(H_, [5, 5, 1]), [5, 5, 1])


def test_reflection_rejects_non_unit_normal():
    with pytest.raises(ValidationError):
        MirrorPlane([0, 0, 2], 1.0)

    class Loose:
        normal = np.array([0.0, 0.0, 1.001])
        offset = 0.0
        frame = W

    with pytest.raises(ValidationError):
        reflection_about(Loose())


def test_normal_sign_does_not_change_reflection():
    p = MirrorPlane([0.6, 0.0, 0.8], 1.5)
    q = MirrorPlane([-0.6, 0.0, -0.8], -1.5)
    assert np.allclose(reflection_about(p).matrix, reflection_about(q).matrix, atol=1e-15)


@given(seeds)
def test_reflection_involution_and_determinant(seed):
    M = reflection_about(random_plane(np.random.default_rng(seed))).matrix
    assert np.max(np.abs(M @ M - np.eye(4))) < 1e-9
    assert abs(np.linalg.det(M[:3, :3]) + 1) < 1e-9
    assert np.max(np.abs(M[:3, :3].T @ M[:3, :3] - np.eye(3))) < 1e-9


@given(seeds)
def test_plane_points_are_fixed(seed):
    rng = np.random.default_rng(seed)
    plane = random_plane(rng)
    p = rng.uniform(-5, 5, (20, 3))
    on = p - np.outer(plane.signed_distance(p), plane.normal)
    assert np.max(np.abs(apply_point(reflection_about(plane), on) - on)) < 1e-9


@given(seeds)
def test_isometry_of_rigid_and_reflection(seed):
    rng = np.random.default_rng(seed)
    p = rng.uniform(-5, 5, (30, 3))
    d0 = np.linalg.norm(p[:, None] - p[None], axis=-1)
    for x in (random_transform(rng, scale=5), reflection_about(random_plane(rng))):
        q = apply_point(x, p)
        assert np.max(np.abs(np.linalg.norm(q[:, None] - q[None], axis=-1) - d0)) < 1e-9


def test_apply_point_identity_and_shapes():
    I = RigidTransform.identity()
    assert np.array_equal(apply_point(I, [1, 2, 3]), [1, 2, 3])
    assert apply_point(I, np.zeros((5, 3))).shape == (5, 3)


def test_transform_plane_keeps_reflection_consistent(rng):
    plane = random_plane(rng, W)
    t = random_transform(rng, W, H, 2)
    moved = transform_plane(plane, t)
    p = rng.uniform(-2, 2, (10, 3))
    lhs = apply_point(reflection_about(moved), apply_point(t, p))
    rhs = apply_point(t, apply_point(reflection_about(plane), p))
    assert np.allclose(lhs, rhs, atol=1e-12)
    assert moved.frame == H


def test_transform_json_roundtrip(rng):
    t = random_transform(rng, T, H, 3)
    d = t.to_dict()
    assert len(d["rotation"]) == 9 and len(d["translation"]) == 3
    assert (d["from"], d["to"]) == ("TrackerRgb", "HmdRgb")
    back = RigidTransform.from_json(t.to_json())
    assert np.array_equal(back.as_matrix(), t.as_matrix())
    assert (back.source, back.target) == (T, H)
