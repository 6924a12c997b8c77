"""Trajectory and sensor-log synthesis.

Two trajectory kinds reproduce the data-collection drives: full straight
row passes at constant speed, and row-change turns that exit a row, cross
the headland on a constant-curvature arc, and re-enter the same or an
adjacent row in the opposite direction.

Every trajectory is driven through the sensor models into a replayable
log: per time step one record each of truth, wheel, imu, gnss,
gnss_corrected, visual and trunks. All sensors share one 5 Hz clock, so
the records of a step share its timestamp.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .geom import Pose2D, Vec2, project_onto_heading, wrap_angle
from .orchard import OrchardMap
from .sensing import (GnssBiasState, SensorConfig, TrunkObservation,
                      initial_gnss_bias, observe_gnss, observe_orientation,
                      observe_trunks, step_gnss_bias)

RECORD_KINDS = ("truth", "wheel", "imu", "gnss", "gnss_corrected", "visual",
                "trunks")
EXIT_EXTEND = 2.0       # straight run past the last tree before the arc
REENTRY_EXTEND = 2.0    # in-row meters after re-entering; a trunk or two
                        # may correct the estimate, but the turn ends here
DEFAULT_APPROACH = 6.0  # in-row meters before exiting on a turn
_LOG_SEED_TAG = 0x51AB
_STRAIGHT_COUNT = 12
_TURN_COUNT = 43


@dataclass(frozen=True)
class TrajectorySpec:
    kind: str  # "straight_row" or "row_change"
    row_id: int
    target_row_id: int | None = None
    speed: float = 0.4
    dt: float = 0.2
    start_offset: float = DEFAULT_APPROACH  # row_change approach length
    reverse: bool = False  # traverse the row end-to-start instead

    def __post_init__(self):
        if self.kind not in ("straight_row", "row_change"):
            raise ValueError(f"unknown trajectory kind {self.kind!r}")
        if self.speed <= 0 or self.dt <= 0:
            raise ValueError("speed and dt must be positive")
        if self.kind == "row_change":
            if self.target_row_id is None:
                raise ValueError("row_change needs target_row_id")
            if abs(self.target_row_id - self.row_id) > 1:
                raise ValueError("row_change target must be the same or an "
                                 "adjacent row")


@dataclass(frozen=True)
class SensorRecord:
    t: float
    kind: str
    data: dict

    def __post_init__(self):
        if self.kind not in RECORD_KINDS:
            raise ValueError(f"unknown record kind {self.kind!r}")


def _right_unit(theta: float) -> np.ndarray:
    return np.array([math.sin(theta), -math.cos(theta)])


def _dir_unit(theta: float) -> np.ndarray:
    return np.array([math.cos(theta), math.sin(theta)])


class _Line:
    def __init__(self, start: np.ndarray, theta: float, length: float):
        self.start = start
        self.theta = theta
        self.length = length

    def pose_at(self, s: float) -> tuple[float, float, float]:
        p = self.start + s * _dir_unit(self.theta)
        return p[0], p[1], self.theta


class _Arc:
    """Constant-curvature arc swept by arc length; sign +1 turns left."""

    def __init__(self, center: np.ndarray, radius: float, phi0: float,
                 sign: float, length: float):
        self.center = center
        self.radius = radius
        self.phi0 = phi0
        self.sign = sign
        self.length = length

    def pose_at(self, s: float) -> tuple[float, float, float]:
        phi = self.phi0 + self.sign * s / self.radius
        x = self.center[0] + self.radius * math.cos(phi)
        y = self.center[1] + self.radius * math.sin(phi)
        return x, y, wrap_angle(phi + self.sign * math.pi / 2)


def _row_path_anchor(omap: OrchardMap, row_id: int, reverse: bool):
    """Start point and heading of the drive path viewing the given row.

    The path runs parallel to the row, offset half a row spacing so the
    row sits on the camera side (the vehicle's left).
    """
    row = omap.row(row_id)
    theta = row.direction() if not reverse else wrap_angle(row.direction() + math.pi)
    anchor = row.start if not reverse else row.end
    start = anchor.as_array() + (omap.row_spacing / 2.0) * _right_unit(theta)
    return start, theta, row.length()


def _segments(omap: OrchardMap, spec: TrajectorySpec):
    if spec.kind == "straight_row":
        start, theta, length = _row_path_anchor(omap, spec.row_id, spec.reverse)
        return [_Line(start, theta, length)]

    # Row change: approach the row end, run past it, turn through a
    # semicircle, and come back down the target row's side.
    start, theta_in, length = _row_path_anchor(omap, spec.row_id, spec.reverse)
    approach = min(spec.start_offset, length)
    a0 = start + (length - approach) * _dir_unit(theta_in)
    entry = _Line(a0, theta_in, approach + EXIT_EXTEND)
    x0, y0, _ = entry.pose_at(entry.length)
    p0 = np.array([x0, y0])

    theta_out = wrap_angle(theta_in + math.pi)
    target = omap.row(spec.target_row_id)
    # The turn happens at whichever target-row end is nearer the exit.
    ends = [target.start.as_array(), target.end.as_array()]
    e_target = min(ends, key=lambda e: np.linalg.norm(e - p0))
    ret_anchor = e_target + (omap.row_spacing / 2.0) * _right_unit(theta_out) \
        + EXIT_EXTEND * _dir_unit(theta_in)
    left = -_right_unit(theta_in)
    d = float(np.dot(ret_anchor - p0, left))
    if abs(d) < 1.0:
        raise ValueError(
            f"degenerate turn geometry: row {spec.row_id} -> "
            f"{spec.target_row_id} ({'reverse' if spec.reverse else 'forward'}) "
            f"needs a {d:.2f} m lateral shift")
    radius = abs(d) / 2.0
    sign = 1.0 if d > 0 else -1.0
    center = p0 + (d / 2.0) * left
    phi0 = math.atan2(p0[1] - center[1], p0[0] - center[0])
    arc = _Arc(center, radius, phi0, sign, math.pi * radius)

    p1 = p0 + d * left
    comeback = _Line(p1, theta_out, EXIT_EXTEND + REENTRY_EXTEND)
    return [entry, arc, comeback]


def generate_trajectory(omap: OrchardMap, spec: TrajectorySpec) -> np.ndarray:
    """Sample the trajectory at speed*dt spacing; returns (n, 3) poses."""
    if spec.row_id not in {r.row_id for r in omap.rows}:
        raise ValueError(f"unknown row_id {spec.row_id}")
    if spec.kind == "row_change" and \
            spec.target_row_id not in {r.row_id for r in omap.rows}:
        raise ValueError(f"unknown target_row_id {spec.target_row_id}")
    segments = _segments(omap, spec)
    total = sum(seg.length for seg in segments)
    step = spec.speed * spec.dt
    n = int(math.floor(total / step + 1e-9)) + 1
    poses = np.empty((n, 3))
    seg_iter = iter(segments)
    seg = next(seg_iter)
    base = 0.0
    for i in range(n):
        s = i * step
        while s - base > seg.length + 1e-9:
            base += seg.length
            seg = next(seg_iter)
        poses[i] = seg.pose_at(min(s - base, seg.length))
    return poses


@dataclass
class SimLog:
    """One replayable run: truth plus every sensor stream, step-aligned.

    ``bias`` holds the simulated fix-bias walk when the log came from the
    simulator (it is not part of the on-disk format).
    """

    spec: TrajectorySpec
    seed: int
    map_label: str
    t: np.ndarray
    truth: np.ndarray          # (n, 3)
    wheel: np.ndarray          # (n, 2) dist, dtheta
    imu: np.ndarray            # (n,)
    gnss: np.ndarray           # (n, 2)
    gnss_corrected: np.ndarray  # (n, 2)
    visual: np.ndarray         # (n,)
    trunks: list
    bias: np.ndarray | None = None

    def __post_init__(self):
        self.cumdist = np.concatenate(
            [[0.0], np.cumsum(np.hypot(np.diff(self.truth[:, 0]),
                                       np.diff(self.truth[:, 1])))])

    @property
    def n_steps(self) -> int:
        return len(self.t)

    def truth_pose(self, i: int) -> Pose2D:
        x, y, th = self.truth[i]
        return Pose2D(float(x), float(y), float(th))


def simulate_log(omap: OrchardMap, spec: TrajectorySpec, cfg: SensorConfig,
                 seed: int, map_label: str = "synthetic") -> SimLog:
    """Drive a trajectory through the sensor models; deterministic per seed."""
    traj = generate_trajectory(omap, spec)
    rng = np.random.default_rng(np.random.SeedSequence([_LOG_SEED_TAG, int(seed)]))
    n = len(traj)
    t = np.round(np.arange(n) * spec.dt, 9)
    wheel = np.zeros((n, 2))
    imu = np.zeros(n)
    gnss = np.zeros((n, 2))
    corrected = np.zeros((n, 2))
    visual = np.zeros(n)
    bias_track = np.zeros((n, 2))
    trunks: list[list[TrunkObservation]] = []

    bias = initial_gnss_bias(cfg, rng)
    wheel_scale = 1.0 + rng.normal(0.0, cfg.wheel_dtheta_scale_sigma)
    wheel_dist_scale = 1.0 + rng.normal(0.0, cfg.wheel_dist_scale_sigma)
    for i in range(n):
        x, y, theta = traj[i]
        pose = Pose2D(float(x), float(y), float(theta))
        if i > 0:
            px, py, pth = traj[i - 1]
            dist = math.hypot(x - px, y - py)
            dtheta = wrap_angle(theta - pth)
            wheel[i, 0] = (wheel_dist_scale * dist
                           + rng.normal(0.0, cfg.wheel_sigma_dist))
            wheel[i, 1] = (wheel_scale * dtheta + cfg.wheel_drift_per_meter * dist
                           + rng.normal(0.0, cfg.wheel_sigma_dtheta))
            fwd = project_onto_heading((x - px, y - py), theta)
            visual[i] = fwd + rng.normal(0.0, cfg.visual_sigma_forward)
        imu[i] = observe_orientation(float(theta), cfg, rng)
        bias = step_gnss_bias(bias, cfg, rng)
        bias_track[i] = (bias.bias.dx, bias.bias.dy)
        fix = observe_gnss(pose, bias, cfg, rng)
        gnss[i] = (fix.dx, fix.dy)
        corrected[i] = (x + rng.normal(0.0, cfg.gnss_corrected_sigma),
                        y + rng.normal(0.0, cfg.gnss_corrected_sigma))
        trunks.append(observe_trunks(pose, omap, cfg, rng))

    return SimLog(spec=spec, seed=int(seed), map_label=map_label, t=t,
                  truth=traj, wheel=wheel, imu=imu, gnss=gnss,
                  gnss_corrected=corrected, visual=visual, trunks=trunks,
                  bias=bias_track)


def to_records(log: SimLog) -> list[SensorRecord]:
    """Flatten a SimLog into per-step records in the canonical kind order."""
    records = []
    for i in range(log.n_steps):
        ti = float(log.t[i])
        records.append(SensorRecord(ti, "truth", {
            "x": float(log.truth[i, 0]), "y": float(log.truth[i, 1]),
            "theta": float(log.truth[i, 2])}))
        records.append(SensorRecord(ti, "wheel", {
            "dist": float(log.wheel[i, 0]), "dtheta": float(log.wheel[i, 1])}))
        records.append(SensorRecord(ti, "imu", {"heading": float(log.imu[i])}))
        records.append(SensorRecord(ti, "gnss", {
            "x": float(log.gnss[i, 0]), "y": float(log.gnss[i, 1])}))
        records.append(SensorRecord(ti, "gnss_corrected", {
            "x": float(log.gnss_corrected[i, 0]),
            "y": float(log.gnss_corrected[i, 1])}))
        records.append(SensorRecord(ti, "visual", {"forward": float(log.visual[i])}))
        records.append(SensorRecord(ti, "trunks", {
            "obs": [{"range": float(o.range), "bearing": float(o.bearing),
                     "width": float(o.width)} for o in log.trunks[i]]}))
    return records


def _header_dict(log: SimLog) -> dict:
    traj = {"kind": log.spec.kind, "row_id": log.spec.row_id,
            "target_row_id": log.spec.target_row_id,
            "reverse": log.spec.reverse, "speed": log.spec.speed,
            "dt": log.spec.dt, "start_offset": log.spec.start_offset}
    return {"kind": "header", "units": "m,rad,s", "seed": log.seed,
            "map": log.map_label, "traj": traj}


def write_log(log: SimLog, path) -> None:
    with open(path, "w") as f:
        f.write(json.dumps(_header_dict(log), separators=(",", ":")) + "\n")
        for rec in to_records(log):
            f.write(json.dumps({"t": rec.t, "kind": rec.kind, "data": rec.data},
                               separators=(",", ":")) + "\n")


def read_log(path) -> SimLog:
    with open(path) as f:
        lines = [json.loads(line) for line in f if line.strip()]
    if not lines or lines[0].get("kind") != "header":
        raise ValueError(f"{path}: missing header line")
    header = lines[0]
    traj = header["traj"]
    spec = TrajectorySpec(kind=traj["kind"], row_id=traj["row_id"],
                          target_row_id=traj["target_row_id"],
                          speed=traj["speed"], dt=traj["dt"],
                          start_offset=traj["start_offset"],
                          reverse=traj["reverse"])
    by_step: dict[float, dict] = {}
    order: list[float] = []
    for rec in lines[1:]:
        t = rec["t"]
        if t not in by_step:
            by_step[t] = {}
            order.append(t)
        by_step[t][rec["kind"]] = rec["data"]
    n = len(order)
    truth = np.zeros((n, 3))
    wheel = np.zeros((n, 2))
    imu = np.zeros(n)
    gnss = np.zeros((n, 2))
    corrected = np.zeros((n, 2))
    visual = np.zeros(n)
    trunks = []
    for i, ti in enumerate(order):
        step = by_step[ti]
        missing = set(RECORD_KINDS) - set(step)
        if missing:
            raise ValueError(f"{path}: step t={ti} missing records {sorted(missing)}")
        tr = step["truth"]
        truth[i] = (tr["x"], tr["y"], tr["theta"])
        wheel[i] = (step["wheel"]["dist"], step["wheel"]["dtheta"])
        imu[i] = step["imu"]["heading"]
        gnss[i] = (step["gnss"]["x"], step["gnss"]["y"])
        corrected[i] = (step["gnss_corrected"]["x"], step["gnss_corrected"]["y"])
        visual[i] = step["visual"]["forward"]
        trunks.append([TrunkObservation(o["range"], o["bearing"], o["width"])
                       for o in step["trunks"]["obs"]])
    return SimLog(spec=spec, seed=header["seed"], map_label=header["map"],
                  t=np.array(order), truth=truth, wheel=wheel, imu=imu,
                  gnss=gnss, gnss_corrected=corrected, visual=visual,
                  trunks=trunks, bias=None)


# ---------------------------------------------------------------------------
# Campaign: 12 straight-row runs + 43 row-change turns

@dataclass
class Campaign:
    straight: list  # (name, SimLog)
    turns: list     # (name, SimLog)

    def all_logs(self):
        return list(self.straight) + list(self.turns)

    def write(self, directory) -> list[str]:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        written = []
        for name, log in self.all_logs():
            path = directory / f"{name}.jsonl"
            write_log(log, path)
            written.append(str(path))
        return written


def turn_pool(omap: OrchardMap) -> list[TrajectorySpec]:
    """All feasible distinct (row, target, direction) turn combinations."""
    row_ids = sorted(r.row_id for r in omap.rows)
    have = set(row_ids)
    pool = []
    for rid in row_ids:
        for reverse in (False, True):
            for target in (rid, rid + 1 if not reverse else rid - 1):
                if target not in have:
                    continue
                spec = TrajectorySpec("row_change", rid, target_row_id=target,
                                      reverse=reverse)
                try:
                    _segments(omap, spec)
                except ValueError:
                    continue
                pool.append(spec)
    return pool


def campaign_specs(omap: OrchardMap) -> tuple[list, list]:
    row_ids = sorted(r.row_id for r in omap.rows)
    if len(row_ids) < _STRAIGHT_COUNT:
        raise ValueError(f"campaign needs >= {_STRAIGHT_COUNT} rows, map has "
                         f"{len(row_ids)}")
    pick = np.unique(np.round(np.linspace(0, len(row_ids) - 1,
                                          _STRAIGHT_COUNT)).astype(int))
    if len(pick) < _STRAIGHT_COUNT:  # tight maps: fall back to the first rows
        pick = np.arange(_STRAIGHT_COUNT)
    straight = [TrajectorySpec("straight_row", row_ids[j], reverse=bool(i % 2))
                for i, j in enumerate(pick)]
    pool = turn_pool(omap)
    if len(pool) < _TURN_COUNT:
        raise ValueError(f"map supports only {len(pool)} distinct turns; "
                         f"{_TURN_COUNT} needed")
    idx = np.unique(np.round(np.linspace(0, len(pool) - 1,
                                         _TURN_COUNT)).astype(int))
    k = 0
    chosen = set(idx.tolist())
    while len(chosen) < _TURN_COUNT:  # top up after rounding collisions
        if k not in chosen:
            chosen.add(k)
        k += 1
    turns = [pool[i] for i in sorted(chosen)]
    return straight, turns


def build_campaign(omap: OrchardMap, cfg: SensorConfig, seed: int,
                   map_label: str = "synthetic") -> Campaign:
    """Simulate the full log campaign; deterministic per seed."""
    straight_specs, turn_specs = campaign_specs(omap)
    straight = []
    for i, spec in enumerate(straight_specs):
        log = simulate_log(omap, spec, cfg, seed=derive_seed(seed, 1, i),
                           map_label=map_label)
        straight.append((f"rows_{i:02d}", log))
    turns = []
    for i, spec in enumerate(turn_specs):
        log = simulate_log(omap, spec, cfg, seed=derive_seed(seed, 2, i),
                           map_label=map_label)
        turns.append((f"turns_{i:02d}", log))
    return Campaign(straight, turns)


def derive_seed(*keys: int) -> int:
    """Deterministically mix integer keys into an independent stream seed."""
    ss = np.random.SeedSequence([int(k) for k in keys])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def load_campaign(directory) -> Campaign:
    directory = Path(directory)
    straight = []
    turns = []
    for path in sorted(directory.glob("*.jsonl")):
        log = read_log(path)
        entry = (path.stem, log)
        if log.spec.kind == "straight_row":
            straight.append(entry)
        else:
            turns.append(entry)
    if not straight and not turns:
        raise FileNotFoundError(f"no .jsonl logs found in {directory}")
    return Campaign(straight, turns)
