"""Extrinsic calibration: point-set registration, marker-based co-calibration,
pinhole reprojection error and repeatability statistics."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares

from .errors import (
    DegenerateConfigurationError,
    DesynchronizationError,
    ProjectionError,
    ValidationError,
)
from .geometry import (
    FrameId,
    RigidTransform,
    compose,
    invert,
    project_to_rotation,
    rotation_between,
    rotation_from_rotvec,
)

SYNC_TOLERANCE_MS = 33.0


@dataclass(frozen=True)
class PinholeCamera:
    """Ideal pinhole camera (no distortion), ``z`` forward, ``y`` down."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ValidationError("focal lengths must be positive")
        if self.width <= 0 or self.height <= 0:
            raise ValidationError("resolution must be positive")
        if not (0 <= self.cx <= self.width and 0 <= self.cy <= self.height):
            raise ValidationError("principal point must lie within the image")

    @property
    def K(self):
        return np.array([[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]])

    def project(self, points_cam):
        """Project camera-frame points ``(N, 3)`` to pixels ``(N, 2)``."""
        P = np.atleast_2d(np.asarray(points_cam, dtype=float))
        z = P[:, 2]
        if np.any(z <= 0):
            bad = np.flatnonzero(z <= 0).tolist()
            raise ProjectionError(f"points at or behind the camera plane: indices {bad}")
        return np.column_stack((self.fx * P[:, 0] / z + self.cx, self.fy * P[:, 1] / z + self.cy))

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


@dataclass(frozen=True)
class Checkerboard:
    """Inner-corner grid ``columns x rows`` with square side in meters."""

    columns: int = 12
    rows: int = 7
    square: float = 0.045

    def __post_init__(self):
        if self.columns < 2 or self.rows < 2:
            raise ValidationError("checkerboard needs at least 2x2 inner corners")
        if not self.square > 0:
            raise ValidationError("square side must be positive")

    def corners(self):
        """Corner coordinates in the board frame (``z = 0`` plane), row-major."""
        xs, ys = np.meshgrid(np.arange(self.columns), np.arange(self.rows))
        return np.column_stack((xs.ravel() * self.square, ys.ravel() * self.square,
                                np.zeros(xs.size)))

    def center(self):
        return np.array([(self.columns - 1) * self.square / 2, (self.rows - 1) * self.square / 2, 0.0])


@dataclass(frozen=True)
class MarkerPoseObservation:
    """Detected pose of a marker: ``pose`` maps marker-board coordinates into
    the observing camera's frame."""

    pose: RigidTransform
    timestamp_ms: float
    camera: FrameId

    def to_dict(self):
        return {"pose": self.pose.to_dict(), "timestamp_ms": self.timestamp_ms,
                "camera": self.camera.value}

    @classmethod
    def from_dict(cls, d):
        return cls(RigidTransform.from_dict(d["pose"]), float(d["timestamp_ms"]),
                   FrameId(d["camera"]))

    @property
    def position(self):
        return self.pose.translation


# --- registration ------------------------------------------------------------


def rigid_register(source, target, source_frame=FrameId.OBJECT, target_frame=FrameId.OBJECT):
    """Least-squares proper rigid transform with ``target_i ~ R source_i + t``.

    Closed-form SVD solution of the orthogonal Procrustes problem with a
    reflection guard so that ``det(R) = +1``.
    """
    S = np.asarray(source, dtype=float)
    T = np.asarray(target, dtype=float)
    if S.ndim != 2 or S.shape[1] != 3 or S.shape != T.shape:
        raise ValidationError(f"need matching (N, 3) point lists, got {S.shape} and {T.shape}")
    if len(S) < 3:
        raise DegenerateConfigurationError(f"need at least 3 correspondences, got {len(S)}")
    cs, ct = S.mean(axis=0), T.mean(axis=0)
    dS, dT = S - cs, T - ct
    sv = np.linalg.svd(dS, compute_uv=False)
    if sv[1] <= 1e-9 * max(sv[0], 1e-300):
        raise DegenerateConfigurationError("source points are collinear or coincident")
    H = dS.T @ dT
    U, _, Vt = np.linalg.svd(H)
    D = np.diag([1.0, 1.0, np.sign(np.linalg.det(Vt.T @ U.T))])
    R = Vt.T @ D @ U.T
    return RigidTransform(R, ct - R @ cs, source_frame, target_frame)


def registration_residuals(t, source, target):
    return np.linalg.norm(np.asarray(source) @ t.rotation.T + t.translation - np.asarray(target),
                          axis=1)


def mean_transform(transforms):
    """Chordal mean of rigid transforms sharing frames."""
    if not transforms:
        raise ValidationError("mean of an empty transform list")
    R = project_to_rotation(np.mean([t.rotation for t in transforms], axis=0))
    tr = np.mean([t.translation for t in transforms], axis=0)
    return RigidTransform(R, tr, transforms[0].source, transforms[0].target)


# --- marker co-calibration ---------------------------------------------------


def marker_extrinsic(t_hmd_board, t_tracker_board, *, hmd_time_ms=None, tracker_time_ms=None,
                     sync_tolerance_ms=SYNC_TOLERANCE_MS):
    """Tracker-camera to HMD-camera extrinsic from one shared board.

    Both arguments map their camera's coordinates into the board frame; the
    result is ``invert(t_hmd_board) ∘ t_tracker_board``.
    """
    if hmd_time_ms is not None and tracker_time_ms is not None:
        gap = abs(hmd_time_ms - tracker_time_ms)
        if gap > sync_tolerance_ms:
            raise DesynchronizationError(
                f"board observations are {gap:.1f} ms apart (tolerance {sync_tolerance_ms} ms)")
    return compose(invert(t_hmd_board), t_tracker_board)


def extrinsic_from_observations(hmd_obs, tracker_obs, sync_tolerance_ms=SYNC_TOLERANCE_MS):
    """Same as :func:`marker_extrinsic` for detector-style observations
    (board -> camera poses)."""
    return marker_extrinsic(
        invert(hmd_obs.pose).with_frames(hmd_obs.camera, FrameId.MARKER_BOARD),
        invert(tracker_obs.pose).with_frames(tracker_obs.camera, FrameId.MARKER_BOARD),
        hmd_time_ms=hmd_obs.timestamp_ms,
        tracker_time_ms=tracker_obs.timestamp_ms,
        sync_tolerance_ms=sync_tolerance_ms,
    )


# --- reprojection ------------------------------------------------------------


@dataclass(frozen=True)
class ReprojectionResult:
    rms: float
    per_point: np.ndarray


def reprojection_error(cam, extrinsic, points3d, points2d):
    """Pixel distances between observed corners and projected 3D points.

    ``extrinsic`` maps the 3D points' frame into the camera frame.
    """
    X = np.atleast_2d(np.asarray(points3d, dtype=float))
    x = np.atleast_2d(np.asarray(points2d, dtype=float))
    if len(X) != len(x) or len(X) == 0:
        raise ValidationError(f"need matched non-empty lists, got {len(X)} and {len(x)}")
    proj = cam.project(X @ extrinsic.rotation.T + extrinsic.translation)
    d = np.linalg.norm(proj - x, axis=1)
    return ReprojectionResult(float(np.sqrt(np.mean(d ** 2))), d)


def refine_extrinsic(cam, initial, points3d, points2d):
    """Minimize reprojection error over the 6-DoF extrinsic, starting at ``initial``."""
    X = np.asarray(points3d, dtype=float)
    x = np.asarray(points2d, dtype=float)
    R0 = initial.rotation

    def residuals(p):
        R = rotation_from_rotvec(p[:3]) @ R0
        P = X @ R.T + p[3:]
        z = P[:, 2]
        u = cam.fx * P[:, 0] / z + cam.cx
        v = cam.fy * P[:, 1] / z + cam.cy
        return np.concatenate((u - x[:, 0], v - x[:, 1]))

    p0 = np.concatenate((np.zeros(3), initial.translation))
    sol = least_squares(residuals, p0, method="lm", xtol=1e-14, ftol=1e-14)
    R = project_to_rotation(rotation_from_rotvec(sol.x[:3]) @ R0)
    return RigidTransform(R, sol.x[3:], initial.source, initial.target)


def board_facing_camera(distance, board=None, source=FrameId.MARKER_BOARD,
                        target=FrameId.HMD_RGB):
    """Fronto-parallel board pose with its center on the optical axis."""
    board = board or Checkerboard()
    return RigidTransform(np.eye(3), np.array([0.0, 0.0, distance]) - board.center(), source,
                          target)


# --- repeatability -----------------------------------------------------------


def _summary(values):
    a = np.asarray(values, dtype=float)
    return {
        "mean": float(np.mean(a)),
        "median": float(np.median(a)),
        "stddev": float(np.std(a, ddof=1)) if len(a) > 1 else 0.0,
    }


@dataclass(frozen=True)
class CalibrationReport:
    """Repeatability of an extrinsic against its initial estimate.

    Translation errors in meters, rotation errors in degrees; ``stddev`` is
    the sample standard deviation.
    """

    extrinsic: RigidTransform
    translation_errors: tuple
    rotation_errors: tuple
    translation_stats: dict = field(default_factory=dict)
    rotation_stats: dict = field(default_factory=dict)

    @classmethod
    def build(cls, extrinsic, translation_errors, rotation_errors):
        te = tuple(float(x) for x in translation_errors)
        re = tuple(float(x) for x in rotation_errors)
        return cls(extrinsic, te, re, _summary(te), _summary(re))

    def to_dict(self):
        return {
            "extrinsic": self.extrinsic.to_dict(),
            "translation_errors_m": list(self.translation_errors),
            "rotation_errors_deg": list(self.rotation_errors),
            "translation_m": dict(self.translation_stats),
            "rotation_deg": dict(self.rotation_stats),
        }

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)

    CSV_FIELDS = ("translation_mean_m", "translation_median_m", "translation_stddev_m",
                  "rotation_mean_deg", "rotation_median_deg", "rotation_stddev_deg")

    def csv_row(self):
        t, r = self.translation_stats, self.rotation_stats
        return dict(zip(self.CSV_FIELDS, (t["mean"], t["median"], t["stddev"],
                                          r["mean"], r["median"], r["stddev"])))

    def to_csv(self):
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=self.CSV_FIELDS, lineterminator="\n")
        w.writeheader()
        w.writerow(self.csv_row())
        return buf.getvalue()


def repeatability(initial, samples):
    if not samples:
        raise ValidationError("repeatability needs at least one sample")
    te = [float(np.linalg.norm(s.translation - initial.translation)) for s in samples]
    re = [math.degrees(rotation_between(initial.rotation, s.rotation)) for s in samples]
    return CalibrationReport.build(initial, te, re)


def repeatability_protocol(sessions):
    """Pool several ``(initial, samples)`` sessions into one report.

    Each session's samples are compared to its own initial calibration; the
    report's extrinsic is the first session's initial estimate.
    """
    if not sessions:
        raise ValidationError("no calibration sessions")
    te, re = [], []
    for initial, samples in sessions:
        r = repeatability(initial, samples)
        te.extend(r.translation_errors)
        re.extend(r.rotation_errors)
    return CalibrationReport.build(sessions[0][0], te, re)


# --- repeatability noise model -----------------------------------------------


def _unit_protocol_stats(anisotropy, sessions, samples_per_session, replicates, seed=12345):
    """Mean and median of repeatability errors for per-axis unit-scale
    Gaussian errors ``(k, k, 1)``, one row per simulated protocol run.

    Each session shares one noisy initial estimate, as in the real protocol.
    Fixed seed, so the fit below is deterministic.
    """
    rng = np.random.default_rng(seed)
    scale = np.array([anisotropy, anisotropy, 1.0])
    init = rng.standard_normal((replicates, sessions, 1, 3))
    samp = rng.standard_normal((replicates, sessions, samples_per_session, 3))
    err = np.linalg.norm((samp - init) * scale, axis=-1).reshape(replicates, -1)
    return err.mean(axis=1), np.median(err, axis=1)


def fit_axis_sigma(target_mean, target_median, anisotropies=np.linspace(0.0, 1.0, 21),
                   sessions=5, samples_per_session=30, replicates=400):
    """Per-axis stddev ``sigma * (k, k, 1)`` of one calibration estimate's
    Gaussian error, chosen so that the repeatability protocol reports
    ``target_mean`` and ``target_median``.

    The loss is the squared relative error of both statistics averaged over
    simulated protocol runs. Errors scale linearly with ``sigma``, so for each
    anisotropy ``k`` the best ``sigma`` has a closed form; ``k`` is picked by
    grid search (``k = 1`` isotropic, ``k = 0`` a single dominant axis).
    """
    best = None
    for k in anisotropies:
        mean, med = _unit_protocol_stats(k, sessions, samples_per_session, replicates)
        a, b = mean / target_mean, med / target_median
        sigma = (a.sum() + b.sum()) / (a @ a + b @ b)
        loss = np.mean((sigma * a - 1.0) ** 2 + (sigma * b - 1.0) ** 2)
        if best is None or loss < best[0]:
            best = (loss, sigma, k)
    _, sigma, k = best
    return sigma * np.array([k, k, 1.0])


def predicted_repeatability(sigma_axes):
    """Large-sample mean/median/stddev of repeatability errors for per-axis sigmas."""
    s = np.asarray(sigma_axes, dtype=float)
    z = np.random.default_rng(12345).standard_normal((200_000, 3)) * np.sqrt(2.0)
    m = np.linalg.norm(z * s, axis=1)
    return {"mean": float(np.mean(m)), "median": float(np.median(m)), "stddev": float(np.std(m))}


@dataclass(frozen=True, eq=False)
class CalibrationNoise:
    """Gaussian perturbation of an extrinsic estimate.

    Per-axis translation stddev (meters) and per-axis rotation-vector stddev
    (degrees), both 3-vectors in the target camera frame; scalars broadcast.
    """

    translation_sigma: np.ndarray
    rotation_sigma_deg: np.ndarray

    def __post_init__(self):
        for name in ("translation_sigma", "rotation_sigma_deg"):
            v = np.broadcast_to(np.asarray(getattr(self, name), dtype=float), (3,)).copy()
            if np.any(v < 0):
                raise ValidationError(f"{name} must be nonnegative")
            object.__setattr__(self, name, v)

    def perturb(self, t, rng):
        dR = rotation_from_rotvec(np.radians(rng.normal(0.0, 1.0, 3) * self.rotation_sigma_deg))
        dt = rng.normal(0.0, 1.0, 3) * self.translation_sigma
        return RigidTransform(dR @ t.rotation, t.translation + dt, t.source, t.target)


def fit_calibration_noise(translation_mean, translation_median, rotation_mean_deg,
                          rotation_median_deg):
    return CalibrationNoise(fit_axis_sigma(translation_mean, translation_median),
                            fit_axis_sigma(rotation_mean_deg, rotation_median_deg))


def simulate_repeatability(true_extrinsic, noise, seed, sessions=5, samples_per_session=30):
    """Repeatability protocol on simulated estimates: each session draws a new
    initial calibration and ``samples_per_session`` re-estimates."""
    root = np.random.SeedSequence(seed)
    out = []
    for child in root.spawn(sessions):
        rng = np.random.default_rng(child)
        initial = noise.perturb(true_extrinsic, rng)
        out.append((initial, [noise.perturb(true_extrinsic, rng) for _ in range(samples_per_session)]))
    return repeatability_protocol(out)


def load_observation_log(path_or_obj):
    """Read a co-calibration log.

    Schema::

        {"sync_tolerance_ms": 33,
         "sessions": [{"initial": {"hmd": OBS, "tracker": OBS},
                       "samples": [{"hmd": OBS, "tracker": OBS}, ...]}, ...]}

    where ``OBS`` is a serialized :class:`MarkerPoseObservation`.
    """
    if isinstance(path_or_obj, dict):
        d = path_or_obj
    else:
        with open(path_or_obj) as fh:
            d = json.load(fh)
    tol = float(d.get("sync_tolerance_ms", SYNC_TOLERANCE_MS))

    def pair(p):
        return extrinsic_from_observations(MarkerPoseObservation.from_dict(p["hmd"]),
                                           MarkerPoseObservation.from_dict(p["tracker"]), tol)

    sessions = []
    for s in d["sessions"]:
        sessions.append((pair(s["initial"]), [pair(p) for p in s["samples"]]))
    return sessions
