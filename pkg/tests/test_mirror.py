import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mirroraug.calibration import MarkerPoseObservation
from mirroraug.errors import ChiralityError, UnreliableEstimateError, ValidationError
from mirroraug.geometry import (
    FrameId,
    MirrorPlane,
    RigidTransform,
    apply_point,
    random_plane,
    reflection_about,
)
from mirroraug.mirror import (
    MirrorEstimate,
    SceneClassification,
    SceneKind,
    classify_scene,
    estimate_mirror,
    reflect_skeleton,
    to_real_space,
)
from mirroraug.skeleton import Chirality, JointId, PoseParams, Skeleton, synth_skeleton

H = FrameId.HMD_RGB
seeds = st.integers(0, 2**32 - 1)


def obs(center, t):
    return MarkerPoseObservation(RigidTransform(np.eye(3), center, FrameId.MARKER_BOARD, H), t, H)


def test_estimate_marker_straight_ahead():
    m = estimate_mirror([0, 0, 2])
    assert np.allclose(m.plane.normal, [0, 0, 1]) and m.plane.offset == pytest.approx(1.0)
    assert m.plane.frame == H


def test_estimate_marker_diagonal():
    m = estimate_mirror([1, 0, 1])
    assert np.allclose(m.plane.normal, np.array([1, 0, 1]) / math.sqrt(2), atol=1e-15)
    assert m.plane.offset == pytest.approx(math.sqrt(2) / 2, abs=1e-15)


@given(seeds)
def test_marker_reflects_to_camera_origin(seed):
    rng = np.random.default_rng(seed)
    d = rng.normal(size=3)
    c = d / np.linalg.norm(d) * rng.uniform(0.2, 5.0)
    m = estimate_mirror(c)
    assert np.max(np.abs(apply_point(m.reflection, c))) < 1e-12
    M = m.reflection.matrix
    assert np.max(np.abs(M @ M - np.eye(4))) < 1e-9
    assert abs(np.linalg.det(M[:3, :3]) + 1) < 1e-9
    assert np.allclose(M, reflection_about(m.plane).matrix, atol=1e-12)


def test_marker_offset_reflects_to_marker():
    o = np.array([0.03, 0.05, 0.0])
    true_plane = MirrorPlane([0, 0, 1], 1.0, H)
    seen = apply_point(reflection_about(true_plane), o)
    m = estimate_mirror(seen, marker_offset=o)
    assert np.allclose(m.plane.normal, [0, 0, 1], atol=1e-12)
    assert m.plane.offset == pytest.approx(1.0, abs=1e-12)


def test_marker_too_close():
    with pytest.raises(UnreliableEstimateError):
        estimate_mirror([0, 0, 0.19])
    estimate_mirror([0, 0, 0.2])


def test_classify_empty_is_real():
    c = classify_scene([])
    assert c.kind is SceneKind.REAL_SCENE and c.evidence is None


def test_classify_single_detection():
    c = classify_scene([obs([0, 0, 2], 100.0)])
    assert c.reflected and c.evidence.plane.offset == pytest.approx(1.0)
    assert c.evidence.timestamp_ms == 100.0


def test_classify_staleness():
    d = [obs([0, 0, 2], 0.0)]
    assert classify_scene(d, now_ms=500.0).reflected
    assert not classify_scene(d, now_ms=501.0).reflected
    assert classify_scene(d, now_ms=900.0, staleness_ms=1000.0).reflected


def test_classify_uses_most_recent_and_ignores_future():
    d = [obs([0, 0, 2], 0.0), obs([0, 0, 3], 100.0), obs([0, 0, 4], 300.0)]
    c = classify_scene(d, now_ms=200.0)
    assert c.evidence.plane.offset == pytest.approx(1.5)


def test_reflected_requires_evidence():
    with pytest.raises(ValidationError):
        SceneClassification(SceneKind.REFLECTED_SCENE)
    with pytest.raises(ValidationError):
        SceneClassification(SceneKind.REAL_SCENE, estimate_mirror([0, 0, 2]))


def random_world_skeleton(rng):
    return Skeleton(rng.uniform(-2, 2, (20, 3)), timestamp_ms=5.0, frame=FrameId.WORLD)


@given(seeds)
def test_to_real_space_recovers_ground_truth(seed):
    rng = np.random.default_rng(seed)
    plane = random_plane(rng, FrameId.WORLD)
    m = MirrorEstimate.from_plane(plane)
    truth = random_world_skeleton(rng)
    seen = reflect_skeleton(truth, m.reflection)
    assert seen.chirality is Chirality.REFLECTED
    back = to_real_space(seen, m)
    assert np.max(np.abs(back.positions - truth.positions)) < 1e-9
    assert back.chirality is Chirality.REAL
    again = reflect_skeleton(back, m.reflection)
    assert np.max(np.abs(again.positions - seen.positions)) < 1e-9


def test_reflected_synthetic_body_keeps_anatomical_sides():
    truth = synth_skeleton(PoseParams())
    H_ = reflection_about(MirrorPlane([0, 0, 1], 1.0))
    seen = reflect_skeleton(truth, H_)
    # tracker labels the image's left side from its own viewpoint
    assert np.allclose(seen[JointId.SHOULDER_LEFT], apply_point(H_, truth[JointId.SHOULDER_RIGHT]))


def test_joint_on_plane_is_fixed():
    plane = MirrorPlane([0, 0, 1], 1.0)
    P = np.tile([0.3, 1.2, 1.0], (20, 1))
    s = Skeleton(P, chirality=Chirality.REFLECTED)
    out = to_real_space(s, estimate_mirror([0, 0, 2], frame=FrameId.WORLD))
    assert np.allclose(out.positions, P, atol=1e-12)
    assert plane.signed_distance(out.positions[0]) == pytest.approx(0.0)


def test_to_real_space_misuse():
    m = estimate_mirror([0, 0, 2], frame=FrameId.WORLD)
    with pytest.raises(ChiralityError):
        to_real_space(Skeleton(np.zeros((20, 3))), m)
    with pytest.raises(ValidationError):
        to_real_space(Skeleton(np.zeros((20, 3)), chirality=Chirality.REFLECTED, frame=H), m)


def test_estimate_export_json():
    m = estimate_mirror([0, 0, 2], source_observation=obs([0, 0, 2], 7.0))
    d = json.loads(m.to_json())
    assert d["normal"] == [0.0, 0.0, 1.0] and d["offset"] == 1.0
    assert np.array(d["reflection"]).shape == (4, 4)
    assert d["source_timestamp_ms"] == 7.0
