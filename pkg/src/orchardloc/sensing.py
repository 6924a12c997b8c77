"""Synthetic sensor models and observation likelihoods.

Sensors: trunk range/bearing/width detections through a sector field of
view, an absolute orientation sensor, and position fixes with a slowly
drifting bias (the uncorrected receiver) plus a low-noise reference (the
corrected receiver).

Likelihoods: per-observation gated nearest-neighbor association against
the map followed by a product of Gaussian densities on the range, bearing
and width residuals; headings are weighted with a deliberately lenient
Gaussian so small errors never annihilate particles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import NamedTuple, Sequence

import numpy as np

from .geom import Pose2D, Vec2, angular_displacement, wrap_angle
from .orchard import OrchardMap, landmarks_in_fov

_SQRT_TAU = math.sqrt(2.0 * math.pi)


class TrunkObservation(NamedTuple):
    range: float    # meters from the sensor
    bearing: float  # radians relative to the view axis
    width: float    # meters


@dataclass(frozen=True)
class SensorConfig:
    """Sensor simulation parameters plus the weighting parameters the
    filter uses to score observations against the map."""

    # Field of view (view axis is vehicle heading + view_bearing_offset)
    fov_half_angle: float = math.pi / 6
    max_range: float = 4.0
    view_bearing_offset: float = math.pi / 2  # camera faces left

    # Trunk detection noise
    sigma_range: float = 0.05
    sigma_bearing: float = 0.02
    sigma_width: float = 0.008
    detect_prob: float = 0.95
    min_observed_width: float = 0.005

    # Orientation sensor noise (distinct from the weighting sigma below)
    orientation_sigma: float = 0.02

    # Position-fix sensors
    gnss_sigma: float = 0.03
    gnss_bias_step_sigma: float = 0.005
    gnss_bias_clamp: float = 1.0
    gnss_bias_init: tuple | None = None  # None: drawn in a half-clamp disc
    gnss_corrected_sigma: float = 0.01

    # Wheel odometry corruption. Heading is where skid-steer encoders are
    # weak: a straight-line drift stands in for unmodeled slip, per-step
    # noise reflects rotation-from-encoders being far cruder than an
    # absolute orientation sensor, and a per-run rotation scale error
    # (drawn once per simulated log) models how badly encoders misjudge
    # actual turning on loose ground.
    wheel_sigma_dist: float = 0.002
    wheel_sigma_dtheta: float = 0.006
    wheel_drift_per_meter: float = 0.0087  # ~0.5 deg/m
    wheel_dtheta_scale_sigma: float = 0.08
    wheel_dist_scale_sigma: float = 0.06

    # Visual odometry corruption
    visual_sigma_forward: float = 0.005

    # Weighting parameters. The sigmas are deliberately wider than the
    # sensor noise: each sighting should nudge the posterior, with tree
    # identity pinned down by evidence accumulated across several trunks,
    # not decided by a single lucky match.
    sigma_range_w: float = 0.80
    sigma_bearing_w: float = 0.45
    sigma_width_w: float = 0.02
    sigma_heading_w: float = 0.4
    association_gate: float = 9.0  # on (dr/sr)^2 + (db/sb)^2
    floor_density: float = 1e-6
    # The association region is wider than the detection sector, so a
    # particle slightly off the true pose still matches a trunk that has
    # just entered or left the camera's view and takes a smooth Gaussian
    # penalty instead of falling off a field-of-view cliff.
    assoc_fov_margin: float = 0.35   # radians beyond fov_half_angle
    assoc_range_margin: float = 1.5  # meters beyond max_range

    def __post_init__(self):
        for name in ("sigma_range", "sigma_bearing", "sigma_width",
                     "orientation_sigma", "gnss_sigma", "gnss_bias_step_sigma",
                     "gnss_corrected_sigma", "wheel_sigma_dist",
                     "wheel_sigma_dtheta", "visual_sigma_forward"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if not 0.0 <= self.detect_prob <= 1.0:
            raise ValueError("detect_prob must be in [0, 1]")
        if self.gnss_bias_clamp <= 0:
            raise ValueError("gnss_bias_clamp must be positive")
        for name in ("sigma_range_w", "sigma_bearing_w", "sigma_width_w",
                     "sigma_heading_w"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


def zero_noise_config(**overrides) -> SensorConfig:
    """A perfect-sensor configuration: no noise, no drift, no fix bias."""
    cfg = SensorConfig(
        sigma_range=0.0, sigma_bearing=0.0, sigma_width=0.0, detect_prob=1.0,
        orientation_sigma=0.0, gnss_sigma=0.0, gnss_bias_step_sigma=0.0,
        gnss_bias_init=(0.0, 0.0), gnss_corrected_sigma=0.0,
        wheel_sigma_dist=0.0, wheel_sigma_dtheta=0.0, wheel_drift_per_meter=0.0,
        wheel_dtheta_scale_sigma=0.0, wheel_dist_scale_sigma=0.0,
        visual_sigma_forward=0.0)
    return replace(cfg, **overrides) if overrides else cfg


@dataclass(frozen=True)
class GnssBiasState:
    """Slowly wandering offset of the uncorrected receiver, kept inside a
    clamp disc so simulated offsets stay in a realistic sub-meter band."""

    bias: Vec2

    def magnitude(self) -> float:
        return self.bias.norm()


def initial_gnss_bias(cfg: SensorConfig, rng: np.random.Generator) -> GnssBiasState:
    if cfg.gnss_bias_init is not None:
        bx, by = cfg.gnss_bias_init
        return GnssBiasState(Vec2(float(bx), float(by)))
    # Uniform over a disc of half the clamp radius.
    r = cfg.gnss_bias_clamp / 2 * math.sqrt(rng.uniform())
    phi = rng.uniform(0.0, 2.0 * math.pi)
    return GnssBiasState(Vec2(r * math.cos(phi), r * math.sin(phi)))


def step_gnss_bias(state: GnssBiasState, cfg: SensorConfig,
                   rng: np.random.Generator) -> GnssBiasState:
    """Random-walk the bias and project it back onto the clamp disc."""
    step = rng.normal(0.0, cfg.gnss_bias_step_sigma, 2)
    bx = state.bias.dx + step[0]
    by = state.bias.dy + step[1]
    mag = math.hypot(bx, by)
    if mag > cfg.gnss_bias_clamp:
        scale = cfg.gnss_bias_clamp / mag
        bx *= scale
        by *= scale
    return GnssBiasState(Vec2(bx, by))


def observe_gnss(true_pose: Pose2D, state: GnssBiasState, cfg: SensorConfig,
                 rng: np.random.Generator) -> Vec2:
    noise = rng.normal(0.0, cfg.gnss_sigma, 2)
    return Vec2(true_pose.x + state.bias.dx + noise[0],
                true_pose.y + state.bias.dy + noise[1])


def observe_orientation(true_heading: float, cfg: SensorConfig,
                        rng: np.random.Generator) -> float:
    return wrap_angle(true_heading + rng.normal(0.0, cfg.orientation_sigma))


def observe_trunks(true_pose: Pose2D, omap: OrchardMap, cfg: SensorConfig,
                   rng: np.random.Generator) -> list[TrunkObservation]:
    """Noisy detections of the landmarks visible from the true pose.

    Each visible landmark is detected independently with detect_prob;
    detections carry Gaussian noise on range, bearing and width.
    """
    out = []
    for lm, rng_m, bearing in landmarks_in_fov(
            omap, true_pose, cfg.fov_half_angle, cfg.max_range,
            cfg.view_bearing_offset):
        if rng.uniform() >= cfg.detect_prob:
            continue
        r = rng_m + rng.normal(0.0, cfg.sigma_range)
        b = bearing + rng.normal(0.0, cfg.sigma_bearing)
        w = lm.width + rng.normal(0.0, cfg.sigma_width)
        out.append(TrunkObservation(max(r, 1e-6), b,
                                    max(w, cfg.min_observed_width)))
    return out


# ---------------------------------------------------------------------------
# Likelihoods

def orientation_likelihood(particle_heading: float, observed_heading: float,
                           sigma: float = 0.4) -> float:
    """Gaussian density of the heading error under the lenient weighting
    sigma (default 0.4 rad)."""
    err = angular_displacement(particle_heading, observed_heading)
    return math.exp(-0.5 * (err / sigma) ** 2) / (sigma * _SQRT_TAU)


def orientation_likelihoods_batch(thetas: np.ndarray, observed_heading: float,
                                  sigma: float = 0.4) -> np.ndarray:
    err = math.pi - np.mod(math.pi - (observed_heading - thetas), 2.0 * math.pi)
    return np.exp(-0.5 * (err / sigma) ** 2) / (sigma * _SQRT_TAU)


class _FovView(NamedTuple):
    """Per-particle candidate geometry shared by all observations of a step."""

    ranges: np.ndarray    # (N, K)
    bearings: np.ndarray  # (N, K)
    widths: np.ndarray    # (N, K)
    in_fov: np.ndarray    # (N, K) bool


def fov_view(xs: np.ndarray, ys: np.ndarray, thetas: np.ndarray,
             omap: OrchardMap, cfg: SensorConfig) -> _FovView:
    """Candidate geometry for association: the detection sector widened by
    the association margins.

    Range, bearing and sqrt are only evaluated on the candidates that pass
    the cheap squared-range test; everything else stays masked out.
    """
    reach = cfg.max_range + cfg.assoc_range_margin
    idx = omap.candidate_indices(xs, ys, reach)
    k = idx.shape[1]
    dx = omap.x_padded[idx]
    dy = omap.y_padded[idx]
    dx -= xs.astype(np.float32)[:, None]
    dy -= ys.astype(np.float32)[:, None]
    rng2 = dx * dx + dy * dy
    in_range = (rng2 <= np.float32(reach * reach)) & (rng2 > 0.0)
    flat = np.flatnonzero(in_range.ravel())
    bearings = np.zeros(rng2.shape, dtype=np.float32)
    ranges = np.full(rng2.shape, 1e12, dtype=np.float32)
    if flat.size:
        view_axis = (thetas + cfg.view_bearing_offset).astype(np.float32)
        b = np.arctan2(dy.ravel()[flat], dx.ravel()[flat]) - view_axis[flat // k]
        bearings.ravel()[flat] = np.float32(math.pi) - np.mod(
            np.float32(math.pi) - b, np.float32(2.0 * math.pi))
        ranges.ravel()[flat] = np.sqrt(rng2.ravel()[flat])
    half = np.float32(cfg.fov_half_angle + cfg.assoc_fov_margin)
    in_fov = in_range & (np.abs(bearings) <= half)
    # Landmarks exactly on a particle make the bearing undefined; the range
    # test above already dropped them (rng2 > 0).
    return _FovView(ranges, bearings, omap.widths_padded[idx], in_fov)


def trunk_likelihoods_batch(xs: np.ndarray, ys: np.ndarray, thetas: np.ndarray,
                            observations: Sequence[TrunkObservation],
                            omap: OrchardMap, cfg: SensorConfig) -> np.ndarray:
    """Per-particle product of observation likelihoods.

    For each observation, the candidate landmark inside the particle's
    field of view minimizing the (range, bearing) Mahalanobis distance is
    associated; matches beyond the gate, or particles with an empty field
    of view, score the floor density.
    """
    n = len(xs)
    out = np.ones(n)
    if not observations:
        return out
    view = fov_view(xs, ys, thetas, omap, cfg)
    coef = 1.0 / (cfg.sigma_range_w * cfg.sigma_bearing_w * cfg.sigma_width_w
                  * _SQRT_TAU ** 3)
    rows = np.arange(n)
    inv_fov = ~view.in_fov
    for obs in observations:
        dr = (view.ranges - np.float32(obs.range)) / np.float32(cfg.sigma_range_w)
        db = (view.bearings - np.float32(obs.bearing)) / np.float32(cfg.sigma_bearing_w)
        maha = dr * dr + db * db
        maha[inv_fov] = np.inf
        best = np.argmin(maha, axis=1)
        m = maha[rows, best].astype(np.float64)
        dw = (view.widths[rows, best].astype(np.float64) - obs.width) \
            / cfg.sigma_width_w
        with np.errstate(invalid="ignore", over="ignore"):
            dens = coef * np.exp(-0.5 * (m + dw * dw))
        dens = np.where(m <= cfg.association_gate, dens, cfg.floor_density)
        out *= dens
    return out


def trunk_likelihood(particle_pose: Pose2D, obs: TrunkObservation,
                     omap: OrchardMap, cfg: SensorConfig) -> float:
    """Single-particle observation likelihood (same path as the batch)."""
    return float(trunk_likelihoods_batch(
        np.array([particle_pose.x]), np.array([particle_pose.y]),
        np.array([particle_pose.theta]), [obs], omap, cfg)[0])
