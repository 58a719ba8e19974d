"""Depth-sensor realism: IR pattern falloff with mirror attenuation, effective
tracking range, and joint noise injection.

Intensities are in arbitrary units; only ratios and thresholds matter.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import DomainError, UnboundedRangeError, ValidationError


@dataclass(frozen=True)
class IrModel:
    """``I(d) = a / d**2 + b`` for a direct view, ``r * a / d**2 + b`` in a mirror.

    ``d`` is the sensor-to-target distance; for reflections it is the
    distance to the virtual image, i.e. twice the mirror distance.
    """

    a: float
    b: float
    r: float
    threshold: float
    residual_rms: float | None = None

    def __post_init__(self):
        if not self.a > 0:
            raise ValidationError(f"IR falloff coefficient must be positive, got {self.a!r}")
        if not 0 < self.r <= 1:
            raise ValidationError(f"mirror reflectivity must be in (0, 1], got {self.r!r}")

    def to_dict(self):
        return {"a": self.a, "b": self.b, "r": self.r, "threshold": self.threshold,
                "residual_rms": self.residual_rms}

    @classmethod
    def from_dict(cls, d):
        return cls(float(d["a"]), float(d["b"]), float(d["r"]), float(d["threshold"]),
                   d.get("residual_rms"))

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)


# Illustrative model for a structured-light tracker: 4 m direct range, a
# mirror returning half the IR of the direct path (1.41 m mirror distance).
DEFAULT_IR = IrModel(a=400.0, b=150.0, r=0.5, threshold=175.0)


@dataclass(frozen=True)
class DepthSensorSpec:
    resolution: tuple = (320, 240)
    frame_rate_hz: float = 30.0
    joint_sigma: float = 0.0

    def __post_init__(self):
        if min(self.resolution) <= 0 or self.frame_rate_hz <= 0:
            raise ValidationError("sensor resolution and frame rate must be positive")
        if self.joint_sigma < 0:
            raise ValidationError("joint noise sigma must be nonnegative")


def ir_intensity(m, d, reflected=False):
    d = np.asarray(d, dtype=float)
    if np.any(d <= 0):
        raise DomainError("distance must be positive")
    gain = m.r if reflected else 1.0
    out = gain * m.a / d ** 2 + m.b
    return float(out) if out.ndim == 0 else out


def fit_ir_model(samples, threshold):
    """Least-squares fit of ``(a, b, r)`` to ``(distance, intensity, reflected)`` samples.

    The model is linear in ``(a, r*a, b)``, so the fit is a single linear
    least-squares solve; ``r`` is recovered as the ratio of the two falloff
    coefficients.
    """
    S = [(float(d), float(i), bool(f)) for d, i, f in samples]
    direct = {d for d, _, f in S if not f}
    refl = {d for d, _, f in S if f}
    if len(direct) < 3 or len(refl) < 3:
        raise ValidationError(
            "IR fit needs at least 3 direct and 3 reflected samples at distinct distances "
            f"(got {len(direct)} and {len(refl)})")
    if any(d <= 0 for d, _, _ in S):
        raise DomainError("sample distances must be positive")
    A = np.array([[0.0 if f else 1 / d ** 2, 1 / d ** 2 if f else 0.0, 1.0] for d, _, f in S])
    y = np.array([i for _, i, _ in S])
    (a, ra, b), *_ = np.linalg.lstsq(A, y, rcond=None)
    if a <= 0:
        raise ValidationError(f"fitted falloff coefficient is not positive ({a:.4g})")
    r = ra / a
    if not r > 0:
        raise ValidationError(f"fitted reflectivity is not positive ({r:.4g})")
    r = min(r, 1.0)
    resid = y - A @ np.array([a, r * a, b])
    return IrModel(float(a), float(b), float(r), float(threshold),
                   float(np.sqrt(np.mean(resid ** 2))))


def max_tracking_distance(m, reflected=False):
    """Largest sensor-to-target distance with intensity above threshold.

    Returns ``(distance, mirror_distance)``; ``mirror_distance`` is half the
    virtual-image distance for reflections and ``None`` otherwise.
    """
    if m.threshold <= m.b:
        raise UnboundedRangeError(
            f"threshold {m.threshold} does not exceed the noise floor {m.b}; range is unbounded")
    gain = m.r if reflected else 1.0
    d = math.sqrt(gain * m.a / (m.threshold - m.b))
    return d, (d / 2 if reflected else None)


def synthetic_ir_samples(model=DEFAULT_IR, distances=None, noise_frac=0.0, seed=0):
    """Synthetic measurement curves for both viewing conditions.

    ``noise_frac`` is Gaussian noise stddev as a fraction of the peak
    direct-view intensity.
    """
    if distances is None:
        distances = np.linspace(0.8, 4.0, 33)
    distances = np.asarray(distances, dtype=float)
    rng = np.random.default_rng(seed)
    peak = ir_intensity(model, distances.min())
    out = []
    for reflected in (False, True):
        I = ir_intensity(model, distances, reflected) + rng.normal(0.0, noise_frac * peak, len(distances))
        out += [(float(d), float(i), reflected) for d, i in zip(distances, I)]
    return out


def read_ir_csv(path):
    """Read ``distance_m,intensity,reflected`` rows (header required)."""
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            flag = str(row["reflected"]).strip().lower() in ("1", "true", "yes", "y")
            out.append((float(row["distance_m"]), float(row["intensity"]), flag))
    return out


def write_ir_csv(path, samples):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["distance_m", "intensity", "reflected"])
        for d, i, f in samples:
            w.writerow([repr(float(d)), repr(float(i)), int(bool(f))])


def perturb_skeleton(s, spec, seed, occlude_head=False):
    """Add isotropic zero-mean Gaussian noise of stddev ``spec.joint_sigma`` per joint."""
    if spec.joint_sigma < 0:
        raise ValidationError("joint noise sigma must be nonnegative")
    if spec.joint_sigma == 0:
        P = s.positions
    else:
        rng = np.random.default_rng(seed)
        P = s.positions + rng.normal(0.0, spec.joint_sigma, s.positions.shape)
    return replace(s, positions=P, head_occluded=s.head_occluded or occlude_head)
