"""Particle filter core: initialization, predict/weight/resample, grouping,
convergence detection and pose estimation.

Particles are stored as parallel numpy arrays; Particle objects are a
convenience view for callers that want one hypothesis at a time.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from .geom import Pose2D, Vec2, wrap_angle
from .motion import MotionIncrement, MotionNoise, propagate_arrays
from .orchard import OrchardMap
from .sensing import (SensorConfig, TrunkObservation,
                      orientation_likelihoods_batch, trunk_likelihoods_batch)

log = logging.getLogger(__name__)

DEGENERATE_TOTAL = 1e-300


@dataclass(frozen=True)
class Particle:
    pose: Pose2D
    weight: float

    def __post_init__(self):
        if not (math.isfinite(self.weight) and self.weight >= 0):
            raise ValueError(f"particle weight must be finite and >= 0, got "
                             f"{self.weight}")


@dataclass
class ParticleSet:
    """Weighted pose hypotheses as parallel arrays of fixed count N >= 2."""

    xs: np.ndarray
    ys: np.ndarray
    thetas: np.ndarray
    weights: np.ndarray
    normalized: bool = False
    degenerate: bool = False  # set when a weight update had to reset to uniform

    def __post_init__(self):
        if len(self.xs) < 2:
            raise ValueError("a particle set needs at least 2 particles")
        if self.normalized and abs(self.weights.sum() - 1.0) > 1e-9:
            raise ValueError("normalized flag set but weights do not sum to 1")

    @property
    def n(self) -> int:
        return len(self.xs)

    def copy(self) -> "ParticleSet":
        return ParticleSet(self.xs.copy(), self.ys.copy(), self.thetas.copy(),
                           self.weights.copy(), self.normalized, self.degenerate)

    def particles(self) -> list[Particle]:
        return [Particle(Pose2D(x, y, t), w) for x, y, t, w in
                zip(self.xs, self.ys, self.thetas, self.weights)]

    @classmethod
    def from_particles(cls, particles: Sequence[Particle],
                       normalized: bool = False) -> "ParticleSet":
        return cls(np.array([p.pose.x for p in particles]),
                   np.array([p.pose.y for p in particles]),
                   np.array([p.pose.theta for p in particles]),
                   np.array([p.weight for p in particles]),
                   normalized=normalized)


@dataclass(frozen=True)
class FilterParams:
    particle_count: int = 3000
    group_link_distance: float = 1.0
    convergence_weight_fraction: float = 0.95
    resample_ess_fraction: float = 0.5

    def __post_init__(self):
        if self.particle_count < 2:
            raise ValueError("particle_count must be >= 2")
        if self.group_link_distance <= 0:
            raise ValueError("group_link_distance must be positive")
        for name in ("convergence_weight_fraction", "resample_ess_fraction"):
            v = getattr(self, name)
            if not 0.0 < v <= 1.0:
                raise ValueError(f"{name} must be in (0, 1]")


@dataclass(frozen=True)
class ParticleGroup:
    indices: np.ndarray
    weight: float  # fraction of total weight
    centroid: Pose2D


@dataclass(frozen=True)
class GroupReport:
    groups: tuple
    converged: bool

    @property
    def group_count(self) -> int:
        return len(self.groups)

    def heaviest(self) -> ParticleGroup:
        return self.groups[0]


# ---------------------------------------------------------------------------
# Initialization

def init_area(area_center: Vec2, side: float, row_heading: float,
              heading_halfwidth: float, n: int,
              rng: np.random.Generator) -> ParticleSet:
    """Uniformly spread particles over the axis-aligned square of the given
    side, headings uniform within +/- heading_halfwidth of the row
    direction, equal weights.

    Positions are stratified (one jittered sample per grid cell, remainder
    drawn plainly) so the square has no sampling voids: a void the size of
    a likelihood basin silently removes the true hypothesis from the
    filter, which no amount of later evidence can repair.
    """
    if side <= 0:
        raise ValueError("side must be positive")
    if n < 2:
        raise ValueError("n must be >= 2")
    m = int(math.floor(math.sqrt(n)))
    gi, gj = np.meshgrid(np.arange(m), np.arange(m), indexing="ij")
    gx = (gi.ravel() + rng.uniform(size=m * m)) / m
    gy = (gj.ravel() + rng.uniform(size=m * m)) / m
    rest = n - m * m
    if rest:
        gx = np.concatenate([gx, rng.uniform(size=rest)])
        gy = np.concatenate([gy, rng.uniform(size=rest)])
    xs = area_center.dx + side * (gx - 0.5)
    ys = area_center.dy + side * (gy - 0.5)
    thetas = wrap_angle(row_heading
                        + heading_halfwidth * (2.0 * rng.uniform(size=n) - 1.0))
    return ParticleSet(xs, ys, np.asarray(thetas), np.full(n, 1.0 / n),
                       normalized=True)


def init_cluster(pose: Pose2D, pos_sigma: float, heading_sigma: float, n: int,
                 rng: np.random.Generator) -> ParticleSet:
    """Gaussian cluster around a known pose, equal weights."""
    if n < 2:
        raise ValueError("n must be >= 2")
    xs = rng.normal(pose.x, pos_sigma, n)
    ys = rng.normal(pose.y, pos_sigma, n)
    thetas = wrap_angle(rng.normal(pose.theta, heading_sigma, n))
    return ParticleSet(xs, ys, np.asarray(thetas), np.full(n, 1.0 / n),
                       normalized=True)


# ---------------------------------------------------------------------------
# Predict / weight / resample

def predict(pset: ParticleSet, inc: MotionIncrement, noise: MotionNoise,
            rng: np.random.Generator) -> ParticleSet:
    """Propagate every particle independently; weights unchanged."""
    out = pset.copy()
    propagate_arrays(out.xs, out.ys, out.thetas, inc, noise, rng)
    return out

def update_weights(pset: ParticleSet, observations: Sequence[TrunkObservation],
                   observed_heading: float | None, omap: OrchardMap,
                   cfg: SensorConfig) -> ParticleSet:
    """Multiply weights by the trunk-observation likelihood product and,
    when a heading reading is present, the orientation likelihood; then
    normalize.

    With nothing to weigh on (headland traversal) the set is returned
    unchanged. A degenerate total weight resets to uniform and flags the
    returned set instead of crashing the run.
    """
    if not observations and observed_heading is None:
        return pset
    mult = np.ones(pset.n)
    if observations:
        mult = trunk_likelihoods_batch(pset.xs, pset.ys, pset.thetas,
                                       observations, omap, cfg)
    if observed_heading is not None:
        mult = mult * orientation_likelihoods_batch(pset.thetas, observed_heading,
                                                    cfg.sigma_heading_w)
    w = pset.weights * mult
    total = w.sum()
    degenerate = not np.isfinite(total) or total <= DEGENERATE_TOTAL
    if degenerate:
        log.warning("degenerate particle weights (total=%.3g); reset to uniform",
                    total)
        w = np.full(pset.n, 1.0 / pset.n)
    else:
        w = w / total
    return ParticleSet(pset.xs.copy(), pset.ys.copy(), pset.thetas.copy(), w,
                       normalized=True, degenerate=degenerate)


def effective_sample_size(weights: np.ndarray) -> float:
    return 1.0 / float(np.sum(np.square(weights)))


def systematic_resample(weights: np.ndarray, n: int,
                        rng: np.random.Generator) -> np.ndarray:
    """Low-variance resampling: one uniform draw, n evenly spaced picks.

    Returns the selected source indices (len n, non-decreasing).
    """
    positions = (rng.uniform() + np.arange(n)) / n
    cumulative = np.cumsum(weights)
    cumulative[-1] = 1.0  # guard against round-off at the top end
    return np.searchsorted(cumulative, positions, side="right")


def resample(pset: ParticleSet, params: FilterParams,
             rng: np.random.Generator) -> ParticleSet:
    """Systematic resampling, triggered only when the effective sample size
    drops below resample_ess_fraction * N."""
    if not pset.normalized:
        raise ValueError("resample requires a normalized particle set")
    n = pset.n
    if effective_sample_size(pset.weights) >= params.resample_ess_fraction * n:
        return pset
    idx = systematic_resample(pset.weights, n, rng)
    return ParticleSet(pset.xs[idx], pset.ys[idx], pset.thetas[idx],
                       np.full(n, 1.0 / n), normalized=True)


# ---------------------------------------------------------------------------
# Grouping / convergence / estimate

def _single_linkage_labels(points: np.ndarray, link: float) -> np.ndarray:
    """Exact single-linkage threshold clustering labels.

    Clusters are the connected components of the graph joining every pair
    of particles within the link distance.
    """
    n = len(points)
    span = points.max(axis=0) - points.min(axis=0)
    if span[0] ** 2 + span[1] ** 2 <= link * link:
        return np.zeros(n, dtype=np.int64)
    pairs = cKDTree(points).query_pairs(link, output_type="ndarray")
    if len(pairs) == 0:
        return np.arange(n, dtype=np.int64)
    ones = np.ones(len(pairs), dtype=np.int8)
    graph = coo_matrix((ones, (pairs[:, 0], pairs[:, 1])), shape=(n, n))
    _, labels = connected_components(graph, directed=False)
    return labels


def check_converged(pset: ParticleSet, params: FilterParams) -> bool:
    """Whether a single hypothesis cluster dominates the posterior.

    Converged means at least convergence_weight_fraction of the weight
    lies within one group_link_distance of the heaviest particle. This is
    a deliberately strict reading of "one particle group remained": a
    single-linkage group can chain a whole ambiguous strip of hypotheses
    into one nominal cluster, which says nothing about the filter having
    decided. Weight concentrated around the leading particle does.
    """
    link = params.group_link_distance
    total = pset.weights.sum()
    w = pset.weights / total if total > 0 else np.full(pset.n, 1.0 / pset.n)
    top = int(np.argmax(w))
    d2 = (pset.xs - pset.xs[top]) ** 2 + (pset.ys - pset.ys[top]) ** 2
    return float(w[d2 <= link * link].sum()) >= params.convergence_weight_fraction


def group_particles(pset: ParticleSet, params: FilterParams) -> GroupReport:
    """Single-linkage position clusters; converged when the heaviest group
    carries at least convergence_weight_fraction of the total weight."""
    points = np.column_stack([pset.xs, pset.ys])
    labels = _single_linkage_labels(points, params.group_link_distance)
    total = pset.weights.sum()
    wnorm = pset.weights / total if total > 0 else np.full(pset.n, 1.0 / pset.n)

    groups = []
    for lab in np.unique(labels):
        idx = np.flatnonzero(labels == lab)
        gw = float(wnorm[idx].sum())
        inner = wnorm[idx] / gw if gw > 0 else np.full(len(idx), 1.0 / len(idx))
        cx = float(np.dot(inner, pset.xs[idx]))
        cy = float(np.dot(inner, pset.ys[idx]))
        ct = math.atan2(float(np.dot(inner, np.sin(pset.thetas[idx]))),
                        float(np.dot(inner, np.cos(pset.thetas[idx]))))
        groups.append(ParticleGroup(idx, gw, Pose2D(cx, cy, ct)))
    groups.sort(key=lambda g: (-g.weight, g.indices[0]))
    converged = groups[0].weight >= params.convergence_weight_fraction
    return GroupReport(tuple(groups), converged)


def estimate(pset: ParticleSet) -> Pose2D:
    """Pose of the highest-weighted particle (ties: lowest index)."""
    i = int(np.argmax(pset.weights))
    return Pose2D(float(pset.xs[i]), float(pset.ys[i]), float(pset.thetas[i]))
