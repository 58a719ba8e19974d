"""Acceptance criteria, one test each; every test prints a PASS/FAIL line."""

import math
import time
from dataclasses import replace

import numpy as np

from mirroraug.avatar import PosedArmature, SkinnedMesh, default_rig, identity_pose, skin
from mirroraug.calibration import (
    Checkerboard,
    PinholeCamera,
    board_facing_camera,
    fit_calibration_noise,
    reprojection_error,
    rigid_register,
    simulate_repeatability,
)
from mirroraug.geometry import (
    FrameId,
    RigidTransform,
    apply_point,
    random_plane,
    random_transform,
    reflection_about,
    rotation_between,
)
from mirroraug.mirror import estimate_mirror, reflect_skeleton, to_real_space
from mirroraug.pipeline import Scenario, report, run_pipeline
from mirroraug.sensing import DEFAULT_IR, fit_ir_model, max_tracking_distance, synthetic_ir_samples
from mirroraug.skeleton import (
    CENTRAL_JOINTS,
    LEFT_RIGHT_PAIRS,
    ArmPose,
    Chirality,
    PoseParams,
    Skeleton,
    swap_chirality,
    synth_skeleton,
)

# reported co-calibration repeatability used as the surrogate's target
TARGET = {"t_mean": 0.0278, "t_median": 0.0217, "r_mean": 1.35, "r_median": 1.15}


def test_01_reflection_algebra(verdict):
    rng = np.random.default_rng(1)
    t0 = time.perf_counter()
    worst_inv = worst_det = 0.0
    for _ in range(10_000):
        M = reflection_about(random_plane(rng)).matrix
        worst_inv = max(worst_inv, float(np.max(np.abs(M @ M - np.eye(4)))))
        worst_det = max(worst_det, abs(float(np.linalg.det(M[:3, :3])) + 1))
    dt = time.perf_counter() - t0
    ok = worst_inv < 1e-9 and worst_det < 1e-9 and dt < 1.0
    verdict("1 reflection algebra", ok,
            f"max|M^2-I|={worst_inv:.1e}, max|det+1|={worst_det:.1e}, {dt:.2f} s (< 1 s)")


def test_02_mirror_plane_estimation(verdict):
    rng = np.random.default_rng(2)
    worst_origin = worst_skel = 0.0
    for _ in range(1000):
        d = rng.normal(size=3)
        c = d / np.linalg.norm(d) * rng.uniform(0.2, 5.0)
        m = estimate_mirror(c, frame=FrameId.WORLD)
        worst_origin = max(worst_origin, float(np.max(np.abs(apply_point(m.reflection, c)))))
        truth = synth_skeleton(PoseParams(root=tuple(rng.uniform(-1, 1, 3)),
                                          yaw_deg=rng.uniform(-180, 180),
                                          left_arm=ArmPose(*rng.uniform(-60, 60, 3)),
                                          right_arm=ArmPose(*rng.uniform(-60, 60, 3))))
        back = to_real_space(reflect_skeleton(truth, m.reflection), m)
        worst_skel = max(worst_skel, float(np.max(np.abs(back.positions - truth.positions))))
    ok = worst_origin < 1e-12 and worst_skel < 1e-9
    verdict("2 mirror-plane estimation", ok,
            f"marker->origin max {worst_origin:.1e} (< 1e-12), skeleton recovery max {worst_skel:.1e} (< 1e-9)")


def test_03_chirality(verdict):
    rng = np.random.default_rng(3)
    bad = 0
    for _ in range(1000):
        s = Skeleton(rng.uniform(-2, 2, (20, 3)), chirality=rng.choice(list(Chirality)))
        t = swap_chirality(s)
        ok = (np.array_equal(swap_chirality(t).positions, s.positions)
              and swap_chirality(t).chirality is s.chirality
              and t.chirality is not s.chirality
              and all(np.array_equal(t[a], s[b]) and np.array_equal(t[b], s[a]) for a, b in LEFT_RIGHT_PAIRS)
              and all(np.array_equal(t[j], s[j]) for j in CENTRAL_JOINTS))
        bad += not ok
    verdict("3 chirality", bad == 0, f"{1000 - bad}/1000 skeletons satisfy involution and label exchange")


def test_04_registration_oracle(verdict):
    rng = np.random.default_rng(4)
    worst_r = worst_t = 0.0
    for _ in range(1000):
        truth = random_transform(rng, scale=2)
        P = rng.uniform(-1, 1, (int(rng.integers(3, 30)), 3))
        est = rigid_register(P, apply_point(truth, P))
        worst_r = max(worst_r, rotation_between(est.rotation, truth.rotation))
        worst_t = max(worst_t, float(np.linalg.norm(est.translation - truth.translation)))

    src = np.array([[0.0, 0.0, 0.0], [0.8, 0.1, 0.0], [0.2, 0.6, 0.0]])
    th = math.radians(-112.0)
    Rz = lambda a: np.array([[math.cos(a), -math.sin(a), 0], [math.sin(a), math.cos(a), 0], [0, 0, 1]])  # noqa: E731
    dst = src @ Rz(th).T + [0.5, 0.25, 0.0]
    dst[:, :2] += [[0.02, -0.01], [-0.01, 0.015], [0.0, -0.02]]
    step = math.radians(0.01)
    grid = np.arange(0.0, 2 * math.pi, step)
    costs = []
    for a in grid:
        R = Rz(a)
        t = dst.mean(0) - R @ src.mean(0)
        costs.append(np.sum((src @ R.T + t - dst) ** 2))
    best = grid[int(np.argmin(costs))]
    est = rigid_register(src, dst)
    got = math.atan2(est.rotation[1, 0], est.rotation[0, 0]) % (2 * math.pi)
    gap = abs((got - best + math.pi) % (2 * math.pi) - math.pi)
    ok = worst_r < 1e-9 and worst_t < 1e-9 and gap <= step
    verdict("4 registration oracle", ok,
            f"1000 transforms: max rot {worst_r:.1e} rad, max trans {worst_t:.1e} m (< 1e-9); "
            f"grid oracle gap {math.degrees(gap):.4f} deg (<= {math.degrees(step):.2f} deg)")


def test_05_calibration_statistics(verdict):
    # surrogate only: the measured device noise is not reproducible here
    noise = fit_calibration_noise(TARGET["t_mean"], TARGET["t_median"], TARGET["r_mean"],
                                  TARGET["r_median"])
    rep = simulate_repeatability(RigidTransform.identity(), noise, seed=0)
    got = {"t_mean": rep.translation_stats["mean"], "t_median": rep.translation_stats["median"],
           "r_mean": rep.rotation_stats["mean"], "r_median": rep.rotation_stats["median"]}
    rel = {k: got[k] / TARGET[k] - 1 for k in TARGET}
    ok = all(abs(v) <= 0.25 for v in rel.values())
    verdict("5 calibration statistics (surrogate)", ok,
            f"5x30 samples: translation mean {got['t_mean'] * 100:.2f} cm ({rel['t_mean']:+.0%}), "
            f"median {got['t_median'] * 100:.2f} cm ({rel['t_median']:+.0%}); "
            f"rotation mean {got['r_mean']:.2f} deg ({rel['r_mean']:+.0%}), "
            f"median {got['r_median']:.2f} deg ({rel['r_median']:+.0%}); limit 25%")


def test_06_reprojection(verdict):
    cam = PinholeCamera(600.0, 600.0, 320.0, 240.0, 640, 480)
    board = Checkerboard(12, 7, 0.045)
    pose = board_facing_camera(1.0, board)
    X = board.corners()
    x = cam.project(apply_point(pose, X))
    zero = reprojection_error(cam, pose, X, x).rms
    five = reprojection_error(cam, pose, X, x + [3.0, 4.0]).rms
    ok = zero < 1e-9 and abs(five - 5.0) < 1e-12
    verdict("6 reprojection", ok, f"noiseless rms {zero:.1e} px (< 1e-9), (3,4) offset rms {five!r} px")


def test_07_ir_model(verdict):
    t0 = time.perf_counter()
    fit = fit_ir_model(synthetic_ir_samples(), DEFAULT_IR.threshold)
    _, mirror = max_tracking_distance(fit, reflected=True)
    dt = time.perf_counter() - t0
    rel = max(abs(getattr(fit, k) / getattr(DEFAULT_IR, k) - 1) for k in ("a", "b", "r"))
    ok = rel < 1e-6 and mirror >= 1.0 and dt < 1.0
    verdict("7 IR model", ok, f"noiseless max rel err {rel:.1e} (< 1e-6), "
            f"reflected working mirror distance {mirror:.3f} m (>= 1.0), {dt * 1000:.1f} ms")


def test_08_skinning(verdict):
    armature, mesh = default_rig()
    ident = float(np.max(np.abs(skin(mesh, identity_pose(armature)) - mesh.vertices)))
    T = random_transform(np.random.default_rng(8), scale=2)
    shared = PosedArmature({b: T for b in armature.order})
    rigid = float(np.max(np.abs(skin(mesh, shared) - apply_point(T, mesh.vertices))))
    half = SkinnedMesh([[0.0, 0.0, 0.0]], [], [[("a", 0.5), ("b", 0.5)]])
    blend = skin(half, PosedArmature({"a": RigidTransform.identity(),
                                      "b": RigidTransform(np.eye(3), [2.0, 0.0, 0.0])}))[0]

    rng = np.random.default_rng(9)
    n, k = 100_000, len(mesh.bone_ids)
    W = rng.random((n, k)) * (rng.random((n, k)) < 0.2) + np.eye(k)[rng.integers(0, k, n)] * 1e-3
    big = SkinnedMesh.from_weight_matrix(rng.uniform(-1, 1, (n, 3)), [], W / W.sum(1, keepdims=True),
                                         mesh.bone_ids)
    posed = PosedArmature({b: random_transform(rng) for b in mesh.bone_ids})
    times = []
    for _ in range(5):
        t0 = time.perf_counter()
        skin(big, posed)
        times.append(time.perf_counter() - t0)
    best = min(times)
    ok = ident < 1e-12 and rigid < 1e-9 and np.allclose(blend, [1.0, 0.0, 0.0], atol=1e-15) and best < 0.1
    verdict("8 skinning", ok, f"identity {ident:.1e}, rigid {rigid:.1e}, blend {blend.tolist()}, "
            f"1e5 vertices {best * 1000:.1f} ms best of 5 (< 100 ms)")


def test_09_end_to_end(verdict, tmp_path):
    sc = Scenario(frame_rate_hz=30.0, duration_s=10.0, latency_ms=0.0)
    t0 = time.perf_counter()
    m = run_pipeline(sc)
    dt = time.perf_counter() - t0
    anchor = float(m.column("anchor_error_m").max())

    noisy = replace(sc, joint_sigma=0.01, marker_sigma=0.003, calibration_sigma=0.005,
                    calibration_sigma_deg=0.3, latency_ms=20.0, jitter_ms=5.0, seed=123,
                    snapshot_times_ms=(5000.0,))
    files = ("frames.csv", "summary.json", "snapshot_5000ms.ply")
    outputs = []
    for name in ("a", "b"):
        report(run_pipeline(noisy), tmp_path / name)
        outputs.append([(tmp_path / name / f).read_bytes() for f in files])
    same = outputs[0] == outputs[1]
    ok = len(m.frames) == 300 and dt < 10.0 and anchor < 1e-6 and same
    verdict("9 end-to-end", ok, f"{len(m.frames)} frames in {dt:.2f} s (< 10 s), max anchor error "
            f"{anchor:.1e} m (< 1e-6), seeded reruns bitwise identical: {same}")


def test_10_latency(verdict):
    m = run_pipeline(Scenario(latency_ms=20.0, jitter_ms=0.0))
    age = m.column("frame_age_ms")
    ok = len(age) == 300 and bool(np.all(age == 20.0))
    verdict("10 latency", ok, f"frame age == 20 ms exactly in {int(np.sum(age == 20.0))}/{len(age)} frames")
