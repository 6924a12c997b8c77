import json
import math

import numpy as np
import pytest

import orchardloc as ol
from orchardloc.geom import wrap_angle
from orchardloc.sensing import zero_noise_config
from orchardloc.simulate import (Campaign, SensorRecord, TrajectorySpec,
                                 campaign_specs, read_log, to_records,
                                 turn_pool, write_log)


@pytest.fixture(scope="module")
def ninety_map():
    # 51 trees at 1.8 m spacing span exactly 90 m
    return ol.generate_map(seed=1, rows=13, trees_per_row=51)


def test_trajectory_pose_count_90m_row(ninety_map):
    spec = TrajectorySpec("straight_row", 4, speed=0.4, dt=0.2)
    traj = ol.generate_trajectory(ninety_map, spec)
    assert ninety_map.row(4).length() == pytest.approx(90.0)
    assert len(traj) == 1126  # 90 / 0.4 / 0.2 + 1, both endpoints included


def test_trajectory_constant_spacing(ninety_map):
    spec = TrajectorySpec("straight_row", 2)
    traj = ol.generate_trajectory(ninety_map, spec)
    steps = np.hypot(np.diff(traj[:, 0]), np.diff(traj[:, 1]))
    assert steps == pytest.approx(np.full(len(steps), 0.08), abs=1e-9)


def test_trajectory_same_row_turn_reverses_heading(ninety_map):
    spec = TrajectorySpec("row_change", 4, target_row_id=4)
    traj = ol.generate_trajectory(ninety_map, spec)
    dh = wrap_angle(traj[-1, 2] - traj[0, 2])
    assert abs(dh) == pytest.approx(math.pi, abs=1e-6)


def test_trajectory_turn_ends_on_target_row_path(ninety_map):
    spec = TrajectorySpec("row_change", 4, target_row_id=5)
    traj = ol.generate_trajectory(ninety_map, spec)
    end_y = traj[-1, 1]
    # returning path views row 5 from the far side
    row_y = ninety_map.row(5).start.dy
    assert abs(abs(end_y - row_y) - 1.5) < 0.05


def test_trajectory_validates_rows(ninety_map):
    with pytest.raises(ValueError):
        ol.generate_trajectory(ninety_map, TrajectorySpec("straight_row", 99))
    with pytest.raises(ValueError):
        TrajectorySpec("row_change", 4, target_row_id=6)  # not adjacent
    with pytest.raises(ValueError):
        TrajectorySpec("straight_row", 1, speed=0.0)


def test_zero_noise_wheel_integrates_to_truth(small_map):
    cfg = zero_noise_config()
    log = ol.simulate_log(small_map, TrajectorySpec("straight_row", 3), cfg, 5)
    x, y, theta = log.truth[0]
    for i in range(1, log.n_steps):
        theta = theta + log.wheel[i, 1]
        x += log.wheel[i, 0] * math.cos(theta)
        y += log.wheel[i, 0] * math.sin(theta)
    assert x == pytest.approx(log.truth[-1, 0], abs=1e-9)
    assert y == pytest.approx(log.truth[-1, 1], abs=1e-9)
    assert wrap_angle(theta) == pytest.approx(log.truth[-1, 2], abs=1e-9)


def test_gnss_track_follows_bias_walk(small_map):
    cfg = ol.SensorConfig()
    log = ol.simulate_log(small_map, TrajectorySpec("straight_row", 3), cfg, 6)
    residual = log.gnss - log.truth[:, :2] - log.bias
    assert np.all(np.abs(residual) <= 4 * cfg.gnss_sigma)
    assert np.hypot(log.bias[:, 0], log.bias[:, 1]).max() <= cfg.gnss_bias_clamp


def test_simulated_log_deterministic_bytes(tmp_path, small_map):
    cfg = ol.SensorConfig()
    paths = []
    for name in ("a", "b"):
        log = ol.simulate_log(small_map, TrajectorySpec("straight_row", 2), cfg, 77)
        p = tmp_path / f"{name}.jsonl"
        write_log(log, p)
        paths.append(p)
    assert paths[0].read_bytes() == paths[1].read_bytes()
    other = ol.simulate_log(small_map, TrajectorySpec("straight_row", 2), cfg, 78)
    p3 = tmp_path / "c.jsonl"
    write_log(other, p3)
    assert p3.read_bytes() != paths[0].read_bytes()


def test_log_roundtrip(tmp_path, small_map):
    cfg = ol.SensorConfig()
    log = ol.simulate_log(small_map, TrajectorySpec("row_change", 3, target_row_id=4),
                          cfg, 9)
    path = tmp_path / "turn.jsonl"
    write_log(log, path)
    again = read_log(path)
    assert again.spec == log.spec
    assert again.t == pytest.approx(log.t)
    assert again.truth == pytest.approx(log.truth)
    assert again.wheel == pytest.approx(log.wheel)
    assert again.gnss == pytest.approx(log.gnss)
    assert again.visual == pytest.approx(log.visual)
    assert [len(o) for o in again.trunks] == [len(o) for o in log.trunks]


def test_log_schema_field_names(tmp_path, small_map):
    cfg = ol.SensorConfig()
    log = ol.simulate_log(small_map, TrajectorySpec("straight_row", 1), cfg, 3)
    path = tmp_path / "log.jsonl"
    write_log(log, path)
    lines = [json.loads(line) for line in path.read_text().splitlines()]
    header = lines[0]
    assert header["kind"] == "header"
    assert header["units"] == "m,rad,s"
    assert "seed" in header and "map" in header
    per_kind = {}
    for rec in lines[1:8]:
        assert set(rec) == {"t", "kind", "data"}
        per_kind[rec["kind"]] = rec["data"]
    assert set(per_kind) == {"truth", "wheel", "imu", "gnss", "gnss_corrected",
                             "visual", "trunks"}
    assert set(per_kind["truth"]) == {"x", "y", "theta"}
    assert set(per_kind["wheel"]) == {"dist", "dtheta"}
    assert set(per_kind["imu"]) == {"heading"}
    assert set(per_kind["gnss"]) == {"x", "y"}
    assert set(per_kind["gnss_corrected"]) == {"x", "y"}
    assert set(per_kind["visual"]) == {"forward"}
    obs = per_kind["trunks"]["obs"]
    assert all(set(o) == {"range", "bearing", "width"} for o in obs)


def test_record_timestamps_step_aligned(small_map):
    cfg = ol.SensorConfig()
    log = ol.simulate_log(small_map, TrajectorySpec("straight_row", 1), cfg, 3)
    records = to_records(log)
    assert len(records) == 7 * log.n_steps
    times = [r.t for r in records]
    assert times == sorted(times)  # non-decreasing; 7 kinds share each step
    truth_times = [r.t for r in records if r.kind == "truth"]
    assert len(truth_times) == len(set(truth_times)) == log.n_steps


def test_headland_has_empty_trunk_stretches(small_map):
    cfg = ol.SensorConfig()
    log = ol.simulate_log(small_map, TrajectorySpec("row_change", 3, target_row_id=4),
                          cfg, 11)
    counts = np.array([len(o) for o in log.trunks])
    longest_gap = max(len(s) for s in
                      "".join("x" if c == 0 else "." for c in counts).split("."))
    assert longest_gap >= 20  # several meters of headland with no trunks


def test_wheel_drift_accumulates_as_configured(small_map):
    from dataclasses import replace
    cfg = replace(zero_noise_config(), wheel_drift_per_meter=0.0087)
    log = ol.simulate_log(small_map, TrajectorySpec("straight_row", 3), cfg, 5)
    integrated = log.wheel[1:, 1].sum()
    true_change = wrap_angle(log.truth[-1, 2] - log.truth[0, 2])
    length = log.cumdist[-1]
    assert integrated - true_change == pytest.approx(0.0087 * length, rel=1e-6)


def test_campaign_counts_and_uniqueness(small_map):
    cfg = ol.SensorConfig()
    campaign = ol.build_campaign(small_map, cfg, seed=1)
    assert len(campaign.straight) == 12
    assert len(campaign.turns) == 43
    combos = {(log.spec.row_id, log.spec.target_row_id, log.spec.reverse)
              for _, log in campaign.turns}
    assert len(combos) == 43


def test_campaign_deterministic(small_map):
    cfg = ol.SensorConfig()
    a = ol.build_campaign(small_map, cfg, seed=4)
    b = ol.build_campaign(small_map, cfg, seed=4)
    for (na, la), (nb, lb) in zip(a.all_logs(), b.all_logs()):
        assert na == nb
        assert la.truth == pytest.approx(lb.truth)
        assert la.gnss == pytest.approx(lb.gnss)


def test_campaign_needs_enough_rows():
    tiny = ol.generate_map(seed=2, rows=5, trees_per_row=10)
    with pytest.raises(ValueError, match="rows"):
        campaign_specs(tiny)


def test_turn_pool_targets_adjacent(small_map):
    for spec in turn_pool(small_map):
        assert abs(spec.target_row_id - spec.row_id) <= 1


def test_campaign_write_and_load(tmp_path, small_map):
    cfg = ol.SensorConfig()
    campaign = ol.build_campaign(small_map, cfg, seed=2)
    campaign.write(tmp_path)
    loaded = ol.load_campaign(tmp_path)
    assert len(loaded.straight) == 12
    assert len(loaded.turns) == 43
    name, log = loaded.straight[0]
    assert log.spec.kind == "straight_row"


def test_sensor_record_kind_checked():
    with pytest.raises(ValueError):
        SensorRecord(0.0, "sonar", {})
