"""Evaluation protocols: in-row convergence trials from large and small
start areas, turn-tracking trials, suite aggregation, and the drift
analysis comparing the biased position fixes against the reference
receiver.
"""

from __future__ import annotations

import json
import math
import multiprocessing
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .config import Params, fingerprint
from .geom import Pose2D, Vec2
from .motion import MODES, OdometryTracker, default_noise, propagate_arrays
from .orchard import OrchardMap
from .particle_filter import (DEGENERATE_TOTAL, FilterParams, GroupReport,
                              ParticleSet, check_converged, estimate,
                              group_particles, init_area, init_cluster,
                              predict, resample, update_weights)
from .sensing import (SensorConfig, orientation_likelihoods_batch,
                      trunk_likelihoods_batch)
from .simulate import Campaign, SimLog, derive_seed

SUCCESS_RADIUS = 0.5          # meters between estimate and truth
LARGE_AREA_SIDE = 30.0        # 900 m^2 initialization square
SMALL_AREA_SIDE = 10.0        # 100 m^2 square around the first fix
HEADING_HALFWIDTH = math.radians(5.0)
TURN_CLUSTER_POS_SIGMA = 0.3
TURN_CLUSTER_HEADING_SIGMA = 0.03
START_RUNWAY = 20.0           # row meters reserved so a trial can converge
RESAMPLE_INTERVAL = 10        # steps between resampling opportunities
FIRST_RESAMPLE_DELAY = 20     # steps before the first cull may happen
ROUGHENING_FRACTION = 0.02    # of the posterior position spread, per axis
ROUGHENING_MIN = 0.02         # meters; keeps copies from being clones
ROUGHENING_MAX = 0.20         # meters; never blur faster than odometry
ROUGHENING_HEADING = 0.01     # post-resample jitter, radians
ROW_PROTOCOLS = ("rows-large", "rows-small")
PROTOCOLS = ROW_PROTOCOLS + ("turns",)

_TAG_STARTS = 11
_TAG_TRIAL = 13
_TAG_INIT = 17


@dataclass(frozen=True)
class TrialResult:
    odometry_mode: str
    start_id: int
    trial_index: int
    converged: bool
    success: bool
    distance_traveled: float
    final_error: float

    def __post_init__(self):
        if self.success and not self.converged:
            raise ValueError("success implies converged")
        if self.distance_traveled < 0:
            raise ValueError("distance_traveled must be >= 0")

    def to_dict(self) -> dict:
        return {"odometry_mode": self.odometry_mode, "start_id": self.start_id,
                "trial_index": self.trial_index, "converged": self.converged,
                "success": self.success,
                "distance_traveled": self.distance_traveled,
                "final_error": self.final_error}


@dataclass(frozen=True)
class SuiteSummary:
    odometry_mode: str
    protocol: str
    accuracy: float
    mean_distance: float
    std_distance: float
    trial_count: int

    def to_dict(self) -> dict:
        return {"odometry_mode": self.odometry_mode, "protocol": self.protocol,
                "accuracy": self.accuracy, "mean_distance": self.mean_distance,
                "std_distance": self.std_distance,
                "trial_count": self.trial_count}


class FilterReplay:
    """Steps a particle filter through one log from a start index.

    Each advance() applies any pending resample, consumes the next step's
    odometry, propagates, and reweights with that step's observations and
    heading. The post-update set is exposed for estimation and grouping.

    Plain wheel mode models the original encoder-only platform: it carries
    no orientation sensor, so its particles are weighted on trunk
    observations alone. The other modes weight on the sensed heading too.

    Resampling is offered to the ESS rule only every RESAMPLE_INTERVAL
    steps. Culling on every step turns thin-but-correct hypotheses into a
    critical branching process that randomly goes extinct before its
    evidence can accumulate across a trunk sighting.
    """

    def __init__(self, log: SimLog, omap: OrchardMap, cfg: SensorConfig,
                 fparams: FilterParams, mode: str, noise,
                 rng: np.random.Generator, start_step: int = 0):
        if not 0 <= start_step < log.n_steps:
            raise ValueError(f"start step {start_step} outside the log span "
                             f"(0..{log.n_steps - 1})")
        self.log = log
        self.omap = omap
        self.cfg = cfg
        self.fparams = fparams
        self.mode = mode
        self.noise = noise
        self.rng = rng
        self.start_step = start_step
        self.step_index = start_step
        self.pset: ParticleSet | None = None
        self._report: GroupReport | None = None
        self._steps_since_resample = RESAMPLE_INTERVAL - FIRST_RESAMPLE_DELAY
        self._saw_trunks = False
        self.tracker = OdometryTracker(mode)
        self._feed_tracker(start_step)

    def _feed_tracker(self, i: int):
        log = self.log
        return self.tracker.update(
            float(log.wheel[i, 0]), float(log.wheel[i, 1]), float(log.imu[i]),
            Vec2(float(log.gnss[i, 0]), float(log.gnss[i, 1])),
            float(log.visual[i]))

    @property
    def exhausted(self) -> bool:
        return self.step_index + 1 >= self.log.n_steps

    def advance(self) -> bool:
        """Run one filter step; False when the log is exhausted.

        Equivalent to resample -> predict -> update_weights on the public
        operations, but mutates the particle arrays in place; per-step
        copies dominate the runtime otherwise.
        """
        if self.exhausted:
            return False
        if self._steps_since_resample >= RESAMPLE_INTERVAL:
            before = self.pset
            self.pset = resample(self.pset, self.fparams, self.rng)
            if self.pset is not before:
                self._roughen()
                self._steps_since_resample = 0
        i = self.step_index + 1
        inc = self._feed_tracker(i)
        ps = self.pset
        propagate_arrays(ps.xs, ps.ys, ps.thetas, inc, self.noise, self.rng)
        observations = self.log.trunks[i]
        mult = None
        if observations:
            mult = trunk_likelihoods_batch(ps.xs, ps.ys, ps.thetas,
                                           observations, self.omap, self.cfg)
            self._saw_trunks = True
        if self.mode != "wheel":
            ori = orientation_likelihoods_batch(ps.thetas, float(self.log.imu[i]),
                                                self.cfg.sigma_heading_w)
            mult = ori if mult is None else mult * ori
        if mult is not None:
            w = ps.weights * mult
            total = w.sum()
            if not np.isfinite(total) or total <= DEGENERATE_TOTAL:
                ps.weights = np.full(ps.n, 1.0 / ps.n)
                ps.degenerate = True
            else:
                ps.weights = w / total
            ps.normalized = True
        self._steps_since_resample += 1
        self._report = None
        self.step_index = i
        return True

    def _roughen(self):
        # Regularized resampling: spread fresh copies so a surviving
        # hypothesis can climb to the center of its likelihood basin. The
        # jitter scales with the posterior spread: generous while multiple
        # areas are still in play, shrinking once the cloud has formed so
        # it does not wash out the tree-spacing evidence that odometry
        # makes usable.
        n = self.pset.n
        spread = math.sqrt(np.var(self.pset.xs) + np.var(self.pset.ys))
        sigma = min(ROUGHENING_MAX,
                    max(ROUGHENING_MIN, ROUGHENING_FRACTION * spread))
        self.pset.xs += self.rng.normal(0.0, sigma, n)
        self.pset.ys += self.rng.normal(0.0, sigma, n)
        self.pset.thetas += self.rng.normal(0.0, ROUGHENING_HEADING, n)

    def converged(self) -> bool:
        """One dominant surviving group, once trunk evidence has started
        discriminating hypotheses (before that the belief is still the
        initialization prior, where grouping says nothing)."""
        if not self._saw_trunks:
            return False
        return check_converged(self.pset, self.fparams)

    def group_report(self) -> GroupReport:
        if self._report is None:
            self._report = group_particles(self.pset, self.fparams)
        return self._report

    def estimate(self) -> Pose2D:
        return estimate(self.pset)

    def truth(self) -> Pose2D:
        return self.log.truth_pose(self.step_index)

    def error(self) -> float:
        est = self.estimate()
        tx, ty = self.log.truth[self.step_index, :2]
        return math.hypot(est.x - tx, est.y - ty)

    def distance_traveled(self) -> float:
        return float(self.log.cumdist[self.step_index]
                     - self.log.cumdist[self.start_step])


def _trial_rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([_TAG_TRIAL, int(seed)]))


def run_row_trial(log: SimLog, omap: OrchardMap, cfg: SensorConfig,
                  params: Params, mode: str, init: str, start_step: int,
                  seed: int, start_id: int = 0, trial_index: int = 0) -> TrialResult:
    """Replay a straight-row log from a start point until the particle
    groups collapse to one; success means the estimate landed within
    SUCCESS_RADIUS of the truth at that moment.
    """
    if init not in ("large", "small"):
        raise ValueError(f"init must be 'large' or 'small', got {init!r}")
    if not 0 <= start_step < log.n_steps:
        raise ValueError(f"start step {start_step} outside the log span "
                         f"(0..{log.n_steps - 1})")
    rng = _trial_rng(seed)
    noise = params.motion_noise or default_noise(mode)
    row_heading = float(log.truth[start_step, 2])
    if init == "large":
        center = Vec2(float(log.truth[start_step, 0]),
                      float(log.truth[start_step, 1]))
        side = LARGE_AREA_SIDE
    else:
        center = Vec2(float(log.gnss[start_step, 0]),
                      float(log.gnss[start_step, 1]))
        side = SMALL_AREA_SIDE
    replay = FilterReplay(log, omap, cfg, params.filter_params, mode, noise,
                          rng, start_step)
    replay.pset = init_area(center, side, row_heading, HEADING_HALFWIDTH,
                            params.filter_params.particle_count, rng)
    while replay.advance():
        if replay.converged():
            err = replay.error()
            return TrialResult(mode, start_id, trial_index, True,
                               err <= SUCCESS_RADIUS,
                               replay.distance_traveled(), err)
    return TrialResult(mode, start_id, trial_index, False, False,
                       replay.distance_traveled(), replay.error())


def run_turn_trial(log: SimLog, omap: OrchardMap, cfg: SensorConfig,
                   params: Params, mode: str, seed: int, start_id: int = 0,
                   trial_index: int = 0) -> TrialResult:
    """Track one row-change turn from a tight cluster at the true start;
    success requires the final estimate to match the final truth."""
    if log.spec.kind != "row_change":
        raise ValueError(f"turn trial needs a row_change log, got "
                         f"{log.spec.kind!r}")
    rng = _trial_rng(seed)
    noise = params.motion_noise or default_noise(mode)
    replay = FilterReplay(log, omap, cfg, params.filter_params, mode, noise,
                          rng, 0)
    replay.pset = init_cluster(log.truth_pose(0), TURN_CLUSTER_POS_SIGMA,
                               TURN_CLUSTER_HEADING_SIGMA,
                               params.filter_params.particle_count, rng)
    while replay.advance():
        pass
    err = replay.error()
    converged = replay.converged()
    return TrialResult(mode, start_id, trial_index, converged,
                       converged and err <= SUCCESS_RADIUS,
                       replay.distance_traveled(), err)


# ---------------------------------------------------------------------------
# Start selection and suite running

@dataclass(frozen=True)
class StartPoint:
    start_id: int
    log_index: int
    step_index: int


def select_row_starts(campaign: Campaign, n_starts: int,
                      master_seed: int) -> list[StartPoint]:
    """Stratified start sampling: the campaign's row mileage (minus an
    end-of-row runway) is split into equal arcs and one start is drawn
    uniformly inside each arc."""
    logs = [log for _, log in campaign.straight]
    if not logs:
        raise ValueError("campaign has no straight-row logs")
    usable = []
    for log in logs:
        total = float(log.cumdist[-1])
        usable.append(max(total - min(START_RUNWAY, 0.5 * total), 0.0))
    edges = np.concatenate([[0.0], np.cumsum(usable)])
    total = edges[-1]
    rng = np.random.default_rng(
        np.random.SeedSequence([_TAG_STARTS, int(master_seed)]))
    starts = []
    for k in range(n_starts):
        lo = total * k / n_starts
        hi = total * (k + 1) / n_starts
        s = rng.uniform(lo, hi)
        li = int(np.searchsorted(edges, s, side="right") - 1)
        li = min(li, len(logs) - 1)
        local = s - edges[li]
        step = int(np.searchsorted(logs[li].cumdist, local, side="right") - 1)
        step = min(step, logs[li].n_steps - 2)
        starts.append(StartPoint(k, li, step))
    return starts


_WORKER_CTX: dict = {}


def _run_task(task):
    kind, log_index, start_step, start_id, trial_index, seed = task
    ctx = _WORKER_CTX
    if kind == "turn":
        log = ctx["turn_logs"][log_index]
        return run_turn_trial(log, ctx["omap"], ctx["cfg"], ctx["params"],
                              ctx["mode"], seed, start_id, trial_index)
    log = ctx["row_logs"][log_index]
    return run_row_trial(log, ctx["omap"], ctx["cfg"], ctx["params"],
                         ctx["mode"], ctx["init"], start_step, seed,
                         start_id, trial_index)


def run_suite(campaign: Campaign, omap: OrchardMap, cfg: SensorConfig,
              params: Params, mode: str, protocol: str, starts: int = 40,
              trials_per_start: int = 20, seed: int = 0,
              jobs: int = 1) -> tuple[SuiteSummary, list[TrialResult]]:
    """Run the full trial grid for one odometry mode.

    Per-trial seeds are derived from (master seed, start id, trial index),
    so serial and parallel execution produce identical results.
    """
    if mode not in MODES:
        raise ValueError(f"unknown odometry mode {mode!r}")
    if protocol not in PROTOCOLS:
        raise ValueError(f"unknown protocol {protocol!r}")
    cfg = params.sensor_config(cfg)

    tasks = []
    if protocol == "turns":
        for start_id in range(len(campaign.turns)):
            for trial in range(trials_per_start):
                tasks.append(("turn", start_id, 0, start_id, trial,
                              derive_seed(seed, _TAG_TRIAL, start_id, trial)))
    else:
        init = "large" if protocol == "rows-large" else "small"
        points = select_row_starts(campaign, starts, seed)
        for sp in points:
            for trial in range(trials_per_start):
                tasks.append(("row", sp.log_index, sp.step_index, sp.start_id,
                              trial, derive_seed(seed, _TAG_TRIAL, sp.start_id,
                                                 trial)))

    ctx = {
        "row_logs": [log for _, log in campaign.straight],
        "turn_logs": [log for _, log in campaign.turns],
        "omap": omap, "cfg": cfg, "params": params, "mode": mode,
        "init": "large" if protocol == "rows-large" else "small",
    }
    global _WORKER_CTX
    _WORKER_CTX = ctx
    if jobs > 1:
        mp = multiprocessing.get_context("fork")
        chunk = max(1, len(tasks) // (jobs * 8))
        with mp.Pool(jobs) as pool:
            results = pool.map(_run_task, tasks, chunksize=chunk)
    else:
        results = [_run_task(t) for t in tasks]
    return summarize(results, mode, protocol), results


def summarize(results: Sequence[TrialResult], mode: str,
              protocol: str) -> SuiteSummary:
    n = len(results)
    successes = [r for r in results if r.success]
    accuracy = len(successes) / n if n else float("nan")
    if successes:
        d = np.array([r.distance_traveled for r in successes])
        mean = float(d.mean())
        std = float(d.std(ddof=1)) if len(d) > 1 else 0.0
    else:
        mean = float("nan")
        std = float("nan")
    return SuiteSummary(mode, protocol, accuracy, mean, std, n)


MODE_ORDER = ("wheel", "wheel_imu", "visual", "gnss")


def summarize_tables(summaries: Sequence[SuiteSummary]) -> tuple[list, str]:
    """Machine-readable rows plus an aligned text table, in the canonical
    mode order (wheel, wheel_imu, visual, gnss)."""
    if not summaries:
        raise ValueError("no summaries to format")
    ordered = sorted(summaries,
                     key=lambda s: (s.protocol, MODE_ORDER.index(s.odometry_mode)))
    rows = [s.to_dict() for s in ordered]
    lines = [f"{'Odometry':<12}{'Protocol':<12}{'Accuracy':>9}"
             f"{'Distance (m)':>14}{'Std. Dev. (m)':>15}{'Trials':>8}"]
    for s in ordered:
        lines.append(f"{s.odometry_mode:<12}{s.protocol:<12}{s.accuracy:>9.3f}"
                     f"{s.mean_distance:>14.2f}{s.std_distance:>15.2f}"
                     f"{s.trial_count:>8d}")
    return rows, "\n".join(lines)


def write_results(path, results: Sequence[TrialResult], fp: str) -> None:
    with open(path, "w") as f:
        for r in results:
            rec = r.to_dict()
            rec["params_fingerprint"] = fp
            f.write(json.dumps(rec, separators=(",", ":")) + "\n")


def write_summaries(path, summaries: Sequence[SuiteSummary], fp: str) -> None:
    with open(path, "w") as f:
        for s in summaries:
            rec = s.to_dict()
            rec["params_fingerprint"] = fp
            f.write(json.dumps(rec, separators=(",", ":")) + "\n")


# ---------------------------------------------------------------------------
# Drift analysis

@dataclass
class DriftStats:
    """Per-reading offsets between the biased and reference fixes, split
    along and across the sensed heading, plus how fast they change."""

    t: np.ndarray
    axial: np.ndarray
    transverse: np.ndarray
    euclidean: np.ndarray
    rate: np.ndarray  # |d euclidean / dt|, length n-1

    def quartiles(self) -> dict:
        out = {}
        for name in ("axial", "transverse", "euclidean", "rate"):
            v = getattr(self, name)
            q1, med, q3 = np.percentile(v, [25.0, 50.0, 75.0])
            out[name] = {"q1": float(q1), "median": float(med), "q3": float(q3)}
        return out

    def to_dict(self) -> dict:
        return {"n_readings": len(self.t), "quartiles": self.quartiles()}


def smooth_positions(ts: np.ndarray, values: np.ndarray) -> np.ndarray:
    """Windowed degree-1 least-squares smoothing.

    Each point is replaced by the value, at its own timestamp, of the line
    fit over itself and up to 5 neighbors on each side. Boundary points
    use the largest available symmetric window; the two end points fall
    back to the nearest 3 samples.
    """
    ts = np.asarray(ts, dtype=float)
    vals = np.asarray(values, dtype=float)
    n = len(ts)
    if n < 3:
        raise ValueError("need at least 3 readings to smooth")
    if np.any(np.diff(ts) <= 0):
        raise ValueError("timestamps must be strictly increasing")
    out = np.empty_like(vals, dtype=float)
    for i in range(n):
        k = min(5, i, n - 1 - i)
        if k == 0:
            lo, hi = (0, 3) if i == 0 else (n - 3, n)
        else:
            lo, hi = i - k, i + k + 1
        tw = ts[lo:hi]
        vw = vals[lo:hi]
        tc = tw - tw.mean()
        slope = (tc @ vw) / float(np.dot(tc, tc))
        out[i] = vw.mean(axis=0) + (ts[i] - tw.mean()) * slope
    return out


def gnss_offset_series(log: SimLog,
                       mounting_offset: tuple = (0.0, 0.0)) -> DriftStats:
    """Offset of the biased receiver from where the reference receiver says
    it should be, decomposed along (axial) and across (transverse,
    positive left) the sensed heading.
    """
    if log.n_steps < 3:
        raise ValueError("log too short for drift analysis")
    sm_gnss = smooth_positions(log.t, log.gnss)
    sm_ref = smooth_positions(log.t, log.gnss_corrected)
    heading = log.imu
    cos_h = np.cos(heading)
    sin_h = np.sin(heading)
    ox, oy = float(mounting_offset[0]), float(mounting_offset[1])
    expected_x = sm_ref[:, 0] + ox * cos_h - oy * sin_h
    expected_y = sm_ref[:, 1] + ox * sin_h + oy * cos_h
    dx = sm_gnss[:, 0] - expected_x
    dy = sm_gnss[:, 1] - expected_y
    axial = dx * cos_h + dy * sin_h
    transverse = -dx * sin_h + dy * cos_h
    euclidean = np.hypot(dx, dy)
    rate = np.abs(np.diff(euclidean)) / np.diff(log.t)
    return DriftStats(log.t.copy(), axial, transverse, euclidean, rate)
