"""End-to-end simulation of mirror-based self-augmentation.

A :class:`Scenario` describes synthetic ground truth: a moving subject in
front of a mirror, the head-mounted device pose, how the depth tracker is
mounted on it, and all noise and latency parameters.  From it we synthesize
what the devices would observe, push skeleton frames through a modeled
network link, run the full augmentation chain and score the overlay
against ground truth.

Frames used below:

* ``World``: floor-fixed, ``y`` up.
* ``RenderCam`` / ``HmdRgb``: HMD cameras, ``z`` forward, ``y`` down.
* ``TrackerRgb`` / ``DepthCam``: the depth tracker's color and depth cameras.

All randomness is derived from ``Scenario.seed``; nothing depends on wall
clock time.
"""

from __future__ import annotations

import bisect
import csv
import json
import logging
import math
import os
from dataclasses import asdict, dataclass, field, replace

import numpy as np
from scipy.optimize import brentq

from .avatar import default_rig, personalize, posed_mesh, posed_joint, write_ply
from .calibration import (
    Checkerboard,
    MarkerPoseObservation,
    PinholeCamera,
    extrinsic_from_observations,
    mean_transform,
    rigid_register,
)
from .errors import MirrorAugError, ValidationError
from .geometry import (
    FrameId,
    MirrorPlane,
    RigidTransform,
    apply_point,
    compose,
    invert,
    reflection_about,
    rotation_between,
    rotation_from_axis_angle,
    rotation_from_rotvec,
)
from .mirror import classify_scene, reflect_skeleton, to_real_space
from .sensing import DEFAULT_IR, DepthSensorSpec, IrModel, max_tracking_distance, perturb_skeleton
from .skeleton import (
    JOINT_INDEX,
    JointId,
    BodyMeasurements,
    PoseParams,
    RollTracker,
    ArmPose,
    body_axes,
    measure_body,
    synth_skeleton,
)

log = logging.getLogger(__name__)

MIRROR_POLICIES = ("per-detection", "hold-first")

# random stream ids, combined with the top-level seed
_STREAM_JOINTS, _STREAM_MARKER, _STREAM_CALIB, _STREAM_BOARD, _STREAM_JITTER = range(1, 6)


def _rigid(rotvec_deg, translation, source, target):
    return RigidTransform(rotation_from_rotvec(np.radians(rotvec_deg)), translation, source, target)


def _default_pose():
    return PoseParams(
        root=(0.0, 0.95, 0.0),
        left_arm=ArmPose(raise_deg=-30.0, forward_deg=20.0, elbow_deg=60.0, raise_amp_deg=25.0,
                         elbow_amp_deg=20.0, freq_hz=0.5),
        right_arm=ArmPose(raise_deg=-55.0, forward_deg=30.0, elbow_deg=90.0, raise_amp_deg=15.0,
                          elbow_amp_deg=25.0, freq_hz=0.3, phase=1.0),
        sway=(0.03, 0.0, 0.05),
        sway_freq_hz=0.2,
    )


def default_render_camera():
    return PinholeCamera(fx=1000.0, fy=1000.0, cx=640.0, cy=360.0, width=1280, height=720)


@dataclass(frozen=True)
class Scenario:
    """Synthetic ground truth and simulation settings.

    Noise parameters: ``joint_sigma`` (m, per axis, tracked joints),
    ``marker_sigma`` (m, per axis, observed visor-marker center),
    ``calibration_sigma``/``calibration_sigma_deg`` (per-axis noise of each
    co-calibration board observation, applied in the observing camera's
    frame) and
    ``checkerboard_sigma`` (m, 3D corner noise for the depth-to-color
    registration).
    """

    pose: PoseParams = field(default_factory=_default_pose)
    mirror: MirrorPlane = field(default_factory=lambda: MirrorPlane([0.0, 0.0, 1.0], 1.0, FrameId.WORLD))
    tracker_to_hmd: RigidTransform = field(default_factory=lambda: _rigid(
        [4.0, 0.5, 0.0], [0.01, -0.09, -0.02], FrameId.TRACKER_RGB, FrameId.HMD_RGB))
    depth_to_tracker: RigidTransform = field(default_factory=lambda: _rigid(
        [0.2, -0.3, 0.1], [0.025, 0.0, 0.0], FrameId.DEPTH_CAM, FrameId.TRACKER_RGB))
    hmd_to_render: RigidTransform = field(default_factory=lambda: _rigid(
        [-0.8, 0.3, 0.0], [0.0, 0.02, 0.01], FrameId.HMD_RGB, FrameId.RENDER_CAM))
    render_camera: PinholeCamera = field(default_factory=default_render_camera)
    head_offset: tuple = (0.0, -0.02, 0.09)
    head_pitch_deg: float = -5.0
    head_yaw_amp_deg: float = 6.0
    head_pitch_amp_deg: float = 3.0
    head_freq_hz: float = 0.25

    joint_sigma: float = 0.0
    marker_sigma: float = 0.0
    calibration_sigma: float = 0.0
    calibration_sigma_deg: float = 0.0
    checkerboard_sigma: float = 0.0
    calibration_pairs: int = 1
    board_distance: float = 1.0

    latency_ms: float = 20.0
    jitter_ms: float = 0.0
    mirror_policy: str = "per-detection"
    frame_rate_hz: float = 30.0
    duration_s: float = 10.0
    seed: int = 0

    marker_visible: bool = True
    marker_offset: tuple = (0.0, 0.0, 0.0)
    assumed_marker_offset: tuple = (0.0, 0.0, 0.0)
    staleness_ms: float = 500.0
    ir_model: IrModel = DEFAULT_IR
    occlude_head: bool = False
    personalize_frames: int = 10
    snapshot_times_ms: tuple = ()

    def __post_init__(self):
        if not self.duration_s > 0:
            raise ValidationError("duration must be positive")
        if self.latency_ms < 0 or self.jitter_ms < 0:
            raise ValidationError("latency and jitter must be nonnegative")
        if self.frame_rate_hz <= 0:
            raise ValidationError("frame rate must be positive")
        if self.mirror_policy not in MIRROR_POLICIES:
            raise ValidationError(f"mirror_policy must be one of {MIRROR_POLICIES}")
        if self.calibration_pairs < 1 or self.personalize_frames < 1:
            raise ValidationError("calibration_pairs and personalize_frames must be >= 1")
        for name, src, dst in (("tracker_to_hmd", FrameId.TRACKER_RGB, FrameId.HMD_RGB),
                               ("depth_to_tracker", FrameId.DEPTH_CAM, FrameId.TRACKER_RGB),
                               ("hmd_to_render", FrameId.HMD_RGB, FrameId.RENDER_CAM)):
            t = getattr(self, name)
            if (t.source, t.target) != (src, dst):
                raise ValidationError(f"{name} must map {src.value} to {dst.value}")
        if self.mirror.frame != FrameId.WORLD:
            raise ValidationError("scenario mirror plane must be given in the World frame")

    # --- ground truth kinematics ------------------------------------------

    def ticks_ms(self):
        n = int(math.floor(self.duration_s * self.frame_rate_hz + 1e-9))
        return [float(round(k * 1000.0 / self.frame_rate_hz)) for k in range(n)]

    def truth(self, t_ms):
        return synth_skeleton(self.pose, t_ms)

    def hmd_to_world(self, t_ms):
        """Pose of the HMD color camera in the world at ``t_ms``."""
        s = self.truth(t_ms)
        left, up, _, fwd = body_axes(self.pose)
        phase = 2 * math.pi * self.head_freq_hz * t_ms / 1000.0
        yaw = rotation_from_axis_angle(up, math.radians(self.head_yaw_amp_deg * math.sin(phase)))
        pitch = rotation_from_axis_angle(
            left, -math.radians(self.head_pitch_deg + self.head_pitch_amp_deg * math.sin(0.7 * phase)))
        Rh = yaw @ pitch
        right, down, forward = Rh @ -left, Rh @ -up, Rh @ fwd
        R = np.column_stack((right, down, forward))
        center = s[JointId.HEAD] + R @ np.asarray(self.head_offset, dtype=float)
        return RigidTransform(R, center, FrameId.HMD_RGB, FrameId.WORLD)

    def world_to_render(self, t_ms):
        return compose(self.hmd_to_render, invert(self.hmd_to_world(t_ms)))

    def world_to_depth(self, t_ms):
        depth_to_world = compose(self.hmd_to_world(t_ms), compose(self.tracker_to_hmd, self.depth_to_tracker))
        return invert(depth_to_world)

    # --- serialization ------------------------------------------------------

    def to_dict(self):
        d = {}
        for k in self.__dataclass_fields__:
            v = getattr(self, k)
            if isinstance(v, (RigidTransform, MirrorPlane, IrModel)):
                v = v.to_dict()
            elif isinstance(v, PoseParams):
                v = asdict(v)
            elif isinstance(v, PinholeCamera):
                v = asdict(v)
            elif isinstance(v, tuple):
                v = list(v)
            d[k] = v
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValidationError(f"unknown scenario fields: {sorted(unknown)}")
        conv = {
            "pose": PoseParams.from_dict,
            "mirror": MirrorPlane.from_dict,
            "tracker_to_hmd": RigidTransform.from_dict,
            "depth_to_tracker": RigidTransform.from_dict,
            "hmd_to_render": RigidTransform.from_dict,
            "render_camera": PinholeCamera.from_dict,
            "ir_model": IrModel.from_dict,
        }
        for k, f in conv.items():
            if k in d:
                d[k] = f(d[k])
        for k in ("head_offset", "marker_offset", "assumed_marker_offset", "snapshot_times_ms"):
            if k in d:
                d[k] = tuple(float(x) for x in d[k])
        try:
            return cls(**d)
        except (TypeError, KeyError) as exc:
            raise ValidationError(f"invalid scenario: {exc}") from exc

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


# --- observation synthesis ---------------------------------------------------


@dataclass
class CalibrationData:
    board_pairs: list
    checker_depth: np.ndarray
    checker_rgb: np.ndarray


@dataclass
class Observations:
    ticks_ms: list
    skeletons: list
    markers: list
    world_to_render: list
    hmd_to_world: list
    calibration: CalibrationData
    tracking_range: float


def _rng(sc, stream, k=0):
    return np.random.default_rng([int(sc.seed), stream, int(k)])


def _perturb_board(pose, rng, sigma, sigma_deg):
    """Detector noise on a board->camera pose, expressed in the camera frame."""
    if sigma == 0 and sigma_deg == 0:
        return pose
    dR = rotation_from_rotvec(np.radians(rng.normal(0.0, sigma_deg, 3)))
    dt = rng.normal(0.0, sigma, 3)
    delta = RigidTransform(dR, dt, pose.target, pose.target)
    return compose(delta, pose)


def board_pose_in_hmd(sc):
    board = Checkerboard()
    R = rotation_from_rotvec(np.radians([10.0, -8.0, 2.0]))
    center = np.array([0.0, 0.05, sc.board_distance])
    return RigidTransform(R, center - R @ board.center(), FrameId.MARKER_BOARD, FrameId.HMD_RGB)


def synthesize_calibration(sc):
    hmd_board = board_pose_in_hmd(sc)
    tracker_board = compose(invert(sc.tracker_to_hmd), hmd_board)
    pairs = []
    for k in range(sc.calibration_pairs):
        rng = _rng(sc, _STREAM_CALIB, k)
        t = -1000.0 * (sc.calibration_pairs - k)
        pairs.append((
            MarkerPoseObservation(_perturb_board(hmd_board, rng, sc.calibration_sigma, sc.calibration_sigma_deg), t, FrameId.HMD_RGB),
            MarkerPoseObservation(_perturb_board(tracker_board, rng, sc.calibration_sigma, sc.calibration_sigma_deg), t, FrameId.TRACKER_RGB),
        ))
    corners = Checkerboard().corners()
    rgb_board = RigidTransform(rotation_from_rotvec(np.radians([-5.0, 12.0, 0.0])),
                               [-0.25, -0.15, 1.0], FrameId.MARKER_BOARD, FrameId.TRACKER_RGB)
    rgb = apply_point(rgb_board, corners)
    depth = apply_point(invert(sc.depth_to_tracker), rgb)
    rng = _rng(sc, _STREAM_BOARD)
    if sc.checkerboard_sigma > 0:
        rgb = rgb + rng.normal(0.0, sc.checkerboard_sigma, rgb.shape)
        depth = depth + rng.normal(0.0, sc.checkerboard_sigma, depth.shape)
    return CalibrationData(pairs, depth, rgb)


def _marker_observation(sc, k, t, hmd_to_world, reflection_world):
    o = np.asarray(sc.marker_offset, dtype=float)
    world_to_hmd = invert(hmd_to_world)
    center = apply_point(world_to_hmd, apply_point(reflection_world, apply_point(hmd_to_world, o)))
    if sc.marker_sigma > 0:
        center = center + _rng(sc, _STREAM_MARKER, k).normal(0.0, sc.marker_sigma, 3)
    H = world_to_hmd.rotation @ reflection_world.linear @ hmd_to_world.rotation
    R = H @ np.diag([-1.0, 1.0, 1.0])
    return MarkerPoseObservation(RigidTransform(R, center, FrameId.MARKER_BOARD, FrameId.HMD_RGB),
                                 t, FrameId.HMD_RGB)


def synthesize_observations(sc):
    """Everything the devices would observe over the scenario.

    Skeletons are tracked in the reflection (flagged Reflected, expressed in
    the depth camera frame); frames where the virtual image is out of the
    tracker's IR range are ``None``.
    """
    reflection_world = reflection_about(sc.mirror)
    tracking_range, _ = max_tracking_distance(sc.ir_model, reflected=True)
    spec = DepthSensorSpec(frame_rate_hz=sc.frame_rate_hz, joint_sigma=sc.joint_sigma)
    ticks = sc.ticks_ms()
    skeletons, markers, w2r, h2w = [], [], [], []
    for k, t in enumerate(ticks):
        hw = sc.hmd_to_world(t)
        h2w.append(hw)
        w2r.append(compose(sc.hmd_to_render, invert(hw)))
        seen = reflect_skeleton(sc.truth(t), reflection_world)
        tracked = seen.transformed(sc.world_to_depth(t))
        if np.linalg.norm(tracked[JointId.SHOULDER_CENTER]) > tracking_range:
            skeletons.append(None)
        else:
            skeletons.append(perturb_skeleton(tracked, spec, [int(sc.seed), _STREAM_JOINTS, k],
                                              occlude_head=sc.occlude_head))
        if sc.marker_visible:
            markers.append(_marker_observation(sc, k, t, hw, reflection_world))
    return Observations(ticks, skeletons, markers, w2r, h2w, synthesize_calibration(sc), tracking_range)


# --- transport ---------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class FrameMessage:
    skeleton: object
    send_ms: float
    arrival_ms: float

    def __post_init__(self):
        if self.arrival_ms < self.send_ms:
            raise ValidationError("message cannot arrive before it was sent")

    @property
    def age_ms(self):
        return self.arrival_ms - self.send_ms


def transport(frames, latency_ms=20.0, jitter_ms=0.0, seed=0):
    """Model the tracker-to-HMD link; arrivals never reorder frames.

    ``frames`` are skeletons (their ``timestamp_ms`` is the send time).
    """
    if latency_ms < 0 or jitter_ms < 0:
        raise ValidationError("latency and jitter must be nonnegative")
    rng = np.random.default_rng(seed)
    out, last = [], -math.inf
    for s in frames:
        delay = latency_ms + (rng.normal(0.0, jitter_ms) if jitter_ms > 0 else 0.0)
        arrival = max(s.timestamp_ms + max(0.0, delay), last)
        last = arrival
        out.append(FrameMessage(s, s.timestamp_ms, arrival))
    return out


# --- calibration of the mounting -------------------------------------------


def calibrate_mounting(cal, sync_tolerance_ms=33.0):
    """Depth camera -> HMD color camera from both calibration stages."""
    depth_to_tracker = rigid_register(cal.checker_depth, cal.checker_rgb, FrameId.DEPTH_CAM,
                                      FrameId.TRACKER_RGB)
    tracker_to_hmd = mean_transform([extrinsic_from_observations(h, t, sync_tolerance_ms)
                                     for h, t in cal.board_pairs])
    return compose(tracker_to_hmd, depth_to_tracker), tracker_to_hmd, depth_to_tracker


def mounting_error(sc, tracker_to_hmd):
    dt = float(np.linalg.norm(tracker_to_hmd.translation - sc.tracker_to_hmd.translation))
    dr = math.degrees(rotation_between(sc.tracker_to_hmd.rotation, tracker_to_hmd.rotation))
    return dt, dr


def fit_board_noise(sc, mean_translation_m, mean_rotation_deg, seeds=range(200)):
    """Board observation noise reproducing given mean co-calibration errors.

    The rotation sigma follows from the error model of ``n`` averaged pairs
    (angle ~ sqrt(2/n) sigma chi(3)); the translation sigma is then solved
    for by Monte Carlo with common random numbers, since rotation noise also
    moves the estimate through the tracker-to-HMD lever arm.
    """
    from scipy import stats

    n = sc.calibration_pairs
    sigma_deg = mean_rotation_deg / (math.sqrt(2.0 / n) * stats.chi(3).mean())

    def excess(sigma):
        trial = replace(sc, calibration_sigma=sigma, calibration_sigma_deg=sigma_deg)
        errs = [mounting_error(sc, calibrate_mounting(
            synthesize_calibration(replace(trial, seed=s)))[1])[0] for s in seeds]
        return float(np.mean(errs)) - mean_translation_m

    if excess(0.0) > 0:
        raise ValidationError("rotation noise alone exceeds the requested translation error")
    hi = mean_translation_m
    while excess(hi) < 0:
        hi *= 2
    return brentq(excess, 0.0, hi, xtol=1e-7), sigma_deg


# --- metrics -----------------------------------------------------------------


@dataclass(frozen=True)
class FrameRecord:
    send_ms: float
    use_ms: float
    frame_age_ms: float
    anchor_error_m: float
    real_anchor_error_m: float
    joint_rms_m: float
    image_rms_px: float
    mirror_nx: float
    mirror_ny: float
    mirror_nz: float
    mirror_offset: float


FRAME_FIELDS = tuple(FrameRecord.__dataclass_fields__)


@dataclass
class OverlayMetrics:
    frames: list = field(default_factory=list)
    status: str = "ok"
    ticks: int = 0
    tracking_lost: int = 0
    real_scene: int = 0
    calibration_translation_error_m: float | None = None
    calibration_rotation_error_deg: float | None = None
    body: dict | None = None
    snapshots: dict = field(default_factory=dict)
    snapshot_triangles: np.ndarray | None = None

    def column(self, name):
        return np.array([getattr(f, name) for f in self.frames], dtype=float)

    def summary(self):
        aug = len(self.frames)
        out = {
            "status": self.status,
            "frames_total": self.ticks,
            "frames_augmented": aug,
            "frames_tracking_lost": self.tracking_lost,
            "frames_real_scene": self.real_scene,
            "calibration_translation_error_m": self.calibration_translation_error_m,
            "calibration_rotation_error_deg": self.calibration_rotation_error_deg,
            "body": self.body,
        }
        for name in ("anchor_error_m", "real_anchor_error_m", "joint_rms_m", "image_rms_px",
                     "frame_age_ms"):
            col = self.column(name)
            out[name] = ({"mean": float(np.mean(col)), "median": float(np.median(col)),
                          "max": float(np.max(col))} if aug else None)
        return out


class _MirrorState:
    def __init__(self, sc, detections, hmd_poses):
        self.sc = sc
        self.detections = detections
        self.times = [d.timestamp_ms for d in detections]
        self.hmd_poses = hmd_poses
        self.held = None

    def estimate(self, now_ms):
        lo = bisect.bisect_left(self.times, now_ms - self.sc.staleness_ms)
        hi = bisect.bisect_right(self.times, now_ms)
        c = classify_scene(self.detections[lo:hi], now_ms, staleness_ms=self.sc.staleness_ms,
                           marker_offset=self.sc.assumed_marker_offset)
        if not c.reflected:
            return None
        if self.sc.mirror_policy == "hold-first" and self.held is not None:
            return self.held
        obs = c.evidence.source_observation
        est = c.evidence.in_frame(self.hmd_poses[obs.timestamp_ms])
        if self.held is None:
            self.held = est
        return est


def run_pipeline(sc, rig=None, observations=None):
    """Run the full augmentation chain over a scenario and score the overlay."""
    armature, mesh = rig if rig is not None else default_rig()
    obs = observations if observations is not None else synthesize_observations(sc)
    metrics = OverlayMetrics(ticks=len(obs.ticks_ms), snapshot_triangles=mesh.triangles)

    try:
        depth_to_hmd, tracker_to_hmd, _ = calibrate_mounting(obs.calibration)
    except MirrorAugError as exc:
        raise MirrorAugError(f"calibration failed: {exc}") from exc
    (metrics.calibration_translation_error_m,
     metrics.calibration_rotation_error_deg) = mounting_error(sc, tracker_to_hmd)

    hmd_poses = dict(zip(obs.ticks_ms, obs.hmd_to_world))
    mirror_state = _MirrorState(sc, obs.markers, hmd_poses)
    frames = [s for s in obs.skeletons if s is not None]
    metrics.tracking_lost = len(obs.skeletons) - len(frames)
    messages = transport(frames, sc.latency_ms, sc.jitter_ms, [int(sc.seed), _STREAM_JITTER])

    true_reflection = reflection_about(sc.mirror)
    cam = sc.render_camera
    rolls = RollTracker()
    measurements = []
    personalized = False
    anchor_idx = JOINT_INDEX[armature.anchor_joint]
    snap_wanted = {float(t): None for t in sc.snapshot_times_ms}

    for msg in messages:
        t_use = msg.arrival_ms
        m_world = mirror_state.estimate(t_use)
        if m_world is None:
            metrics.real_scene += 1
            continue
        s_world = msg.skeleton.transformed(depth_to_hmd).transformed(hmd_poses[msg.send_ms])
        real = to_real_space(s_world, m_world)

        if not personalized:
            measurements.append(measure_body(real))
            if len(measurements) >= sc.personalize_frames:
                body = BodyMeasurements(float(np.mean([b.shoulder_distance for b in measurements])),
                                        float(np.mean([b.torso_height for b in measurements])))
                armature, mesh = personalize(armature, mesh, body)
                metrics.body = asdict(body)
                personalized = True

        verts, posed, t_anchor = posed_mesh(armature, mesh, real, rolls.update(real),
                                            on_missing="inherit")
        model_anchor = apply_point(t_anchor, posed_joint(posed, armature, armature.anchor_joint))
        H = m_world.reflection
        anchor_refl = apply_point(H, model_anchor)
        est_refl = apply_point(H, real.positions)

        truth_real = sc.truth(t_use).positions
        truth_refl = apply_point(true_reflection, truth_real)
        w2r = sc.world_to_render(t_use)
        keep = np.ones(len(truth_refl), dtype=bool)
        if real.head_occluded:
            keep[JOINT_INDEX[JointId.HEAD]] = False
        joint_err = np.linalg.norm(est_refl - truth_refl, axis=1)[keep]
        px = cam.project(apply_point(w2r, est_refl[keep])) - cam.project(apply_point(w2r, truth_refl[keep]))

        n = m_world.plane.normal
        metrics.frames.append(FrameRecord(
            send_ms=msg.send_ms,
            use_ms=t_use,
            frame_age_ms=msg.age_ms,
            anchor_error_m=float(np.linalg.norm(anchor_refl - truth_refl[anchor_idx])),
            real_anchor_error_m=float(np.linalg.norm(model_anchor - truth_real[anchor_idx])),
            joint_rms_m=float(np.sqrt(np.mean(joint_err ** 2))),
            image_rms_px=float(np.sqrt(np.mean(np.sum(px ** 2, axis=1)))),
            mirror_nx=float(n[0]), mirror_ny=float(n[1]), mirror_nz=float(n[2]),
            mirror_offset=m_world.plane.offset,
        ))
        if msg.send_ms in snap_wanted and snap_wanted[msg.send_ms] is None:
            snap_wanted[msg.send_ms] = apply_point(H, verts)

    metrics.snapshots = {t: v for t, v in snap_wanted.items() if v is not None}
    if metrics.frames:
        metrics.status = "ok"
    elif not obs.markers:
        metrics.status = "no mirror"
    elif not frames:
        metrics.status = "tracking lost"
    else:
        metrics.status = "no mirror"
    return metrics


# --- reporting ---------------------------------------------------------------


def report(metrics, out_dir):
    """Write ``frames.csv``, ``summary.json`` and ``snapshot_<t>ms.ply`` files.

    Returns the list of written paths.
    """
    try:
        os.makedirs(out_dir, exist_ok=True)
        paths = []
        csv_path = os.path.join(out_dir, "frames.csv")
        with open(csv_path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(FRAME_FIELDS)
            for f in metrics.frames:
                w.writerow([repr(float(getattr(f, k))) for k in FRAME_FIELDS])
        paths.append(csv_path)
        summary_path = os.path.join(out_dir, "summary.json")
        with open(summary_path, "w") as fh:
            json.dump(metrics.summary(), fh, indent=2, sort_keys=True)
            fh.write("\n")
        paths.append(summary_path)
        for t, verts in sorted(metrics.snapshots.items()):
            p = os.path.join(out_dir, f"snapshot_{int(round(t))}ms.ply")
            write_ply(p, verts, metrics.snapshot_triangles)
            paths.append(p)
    except OSError as exc:
        raise MirrorAugError(f"cannot write report to {exc.filename or out_dir}: {exc.strerror}") from exc
    return paths
