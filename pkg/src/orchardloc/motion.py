"""Odometry motion models: per-step (translation, rotation) increments from
raw sensor values, plus noisy particle propagation.

Four odometry sources produce the same MotionIncrement shape:

* wheel      -- encoder distance and encoder heading change
* wheel_imu  -- encoder distance, rotation replaced by heading differences
                from an absolute orientation sensor
* visual     -- camera-derived forward translation, orientation-sensor
                rotation
* gnss       -- translation from consecutive position fixes projected onto
                the sensed heading (constant fix bias cancels in the
                difference), orientation-sensor rotation
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .geom import Pose2D, Vec2, angular_displacement, project_onto_heading, wrap_angle

MODES = ("wheel", "wheel_imu", "visual", "gnss")


class MotionIncrement(NamedTuple):
    forward: float  # meters, signed
    dtheta: float   # radians, signed, in (-pi, pi]


@dataclass(frozen=True)
class MotionNoise:
    """Per-step Gaussian noise: magnitude-proportional term plus a floor.

    The floor keeps particle diversity alive when the vehicle is nearly
    stationary; the proportional term scales with motion.
    """

    sigma_forward_per_meter: float = 0.05
    sigma_forward_floor: float = 0.002
    sigma_dtheta_per_rad: float = 0.05
    sigma_dtheta_floor: float = 0.002

    def __post_init__(self):
        for name in ("sigma_forward_per_meter", "sigma_forward_floor",
                     "sigma_dtheta_per_rad", "sigma_dtheta_floor"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")

    def forward_sigma(self, forward: float) -> float:
        return max(self.sigma_forward_floor,
                   self.sigma_forward_per_meter * abs(forward))

    def dtheta_sigma(self, dtheta: float) -> float:
        return max(self.sigma_dtheta_floor,
                   self.sigma_dtheta_per_rad * abs(dtheta))


def default_noise(mode: str) -> MotionNoise:
    """Evaluation-tuned noise for each odometry source.

    The floors track how jittery each source's per-step increments are
    (differenced position fixes are much noisier per step than encoder
    counts) while staying wide enough for resampling to keep refining
    particle positions between tree sightings. Plain wheel odometry gets a
    deliberately pessimistic model: encoder increments on loose ground
    deserve less trust than sensor-anchored sources.
    """
    if mode not in MODES:
        raise ValueError(f"unknown odometry mode {mode!r}")
    if mode == "gnss":
        return MotionNoise(0.10, 0.020, 0.10, 0.005)
    if mode == "wheel":
        return MotionNoise(0.15, 0.015, 0.15, 0.030)
    return MotionNoise(0.10, 0.012, 0.10, 0.005)


@dataclass(frozen=True)
class OdometryConfig:
    mode: str
    noise: MotionNoise = field(default_factory=MotionNoise)

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown odometry mode {self.mode!r}")


def wheel_increment(dist: float, wheel_dtheta: float) -> MotionIncrement:
    """Plain wheel odometry: encoder distance and encoder heading change."""
    return MotionIncrement(float(dist), wrap_angle(wheel_dtheta))


def wheel_imu_increment(dist: float, prev_heading: float,
                        curr_heading: float) -> MotionIncrement:
    """Wheel translation with rotation from absolute-heading differences."""
    return MotionIncrement(float(dist),
                           angular_displacement(prev_heading, curr_heading))


def visual_increment(forward: float, prev_heading: float,
                     curr_heading: float) -> MotionIncrement:
    """Camera-derived forward translation (already projected onto the
    camera's forward axis), rotation from absolute-heading differences."""
    return MotionIncrement(float(forward),
                           angular_displacement(prev_heading, curr_heading))


def gnss_increment(prev_fix: Vec2, curr_fix: Vec2, heading: float,
                   prev_heading: float) -> MotionIncrement:
    """Translation between consecutive position fixes, keeping only the
    component parallel to the sensed heading.

    Any bias constant across the two fixes cancels in the difference, and
    jitter perpendicular to travel is discarded by the projection.
    """
    disp = (curr_fix - prev_fix) if isinstance(curr_fix, Vec2) else Vec2(
        curr_fix[0] - prev_fix[0], curr_fix[1] - prev_fix[1])
    forward = project_onto_heading(disp, heading)
    return MotionIncrement(forward, angular_displacement(prev_heading, heading))


def propagate(pose: Pose2D, inc: MotionIncrement, noise: MotionNoise,
              rng: np.random.Generator) -> Pose2D:
    """Advance one pose by a noisy increment: rotate first, then translate
    along the new heading."""
    f = rng.normal(inc.forward, noise.forward_sigma(inc.forward))
    d = rng.normal(inc.dtheta, noise.dtheta_sigma(inc.dtheta))
    theta = wrap_angle(pose.theta + d)
    return Pose2D(pose.x + f * math.cos(theta),
                  pose.y + f * math.sin(theta), theta)


def propagate_arrays(xs: np.ndarray, ys: np.ndarray, thetas: np.ndarray,
                     inc: MotionIncrement, noise: MotionNoise,
                     rng: np.random.Generator) -> None:
    """In-place vectorized propagate for a whole particle set.

    Draws forward samples first, then rotation samples (fixed order keeps
    runs bit-reproducible for a given seeded generator).
    """
    n = len(xs)
    f = rng.normal(inc.forward, noise.forward_sigma(inc.forward), n)
    d = rng.normal(inc.dtheta, noise.dtheta_sigma(inc.dtheta), n)
    thetas += d
    np.copyto(thetas, math.pi - np.mod(math.pi - thetas, 2.0 * math.pi))
    xs += f * np.cos(thetas)
    ys += f * np.sin(thetas)


class OdometryTracker:
    """Turns a per-step sensor bundle into MotionIncrements for one mode.

    Call update() once per log step in order; the first call primes the
    previous-heading/fix state and returns a zero increment.
    """

    def __init__(self, mode: str):
        if mode not in MODES:
            raise ValueError(f"unknown odometry mode {mode!r}")
        self.mode = mode
        self._prev_heading = None
        self._prev_fix = None

    def update(self, wheel_dist: float, wheel_dtheta: float,
               imu_heading: float, gnss_fix, visual_forward: float) -> MotionIncrement:
        first = self._prev_heading is None
        if first:
            inc = MotionIncrement(0.0, 0.0)
        elif self.mode == "wheel":
            inc = wheel_increment(wheel_dist, wheel_dtheta)
        elif self.mode == "wheel_imu":
            inc = wheel_imu_increment(wheel_dist, self._prev_heading, imu_heading)
        elif self.mode == "visual":
            inc = visual_increment(visual_forward, self._prev_heading, imu_heading)
        else:
            inc = gnss_increment(self._prev_fix, gnss_fix, imu_heading,
                                 self._prev_heading)
        self._prev_heading = imu_heading
        self._prev_fix = gnss_fix
        return inc
