import json
import math

import numpy as np
import pytest

import orchardloc as ol
from orchardloc.geom import Pose2D, Vec2, wrap_angle
from orchardloc.orchard import (Landmark, MapFormatError, MapValidationError,
                                RowSpec, map_from_dict, map_to_dict)

MINIMAL = {
    "meta": {"row_spacing": 3.0, "headland_depth": 5.0, "units": "m"},
    "rows": [{"row_id": 0, "start": [0.0, 0.0], "end": [10.0, 0.0]}],
    "landmarks": [
        {"id": "a", "row_id": 0, "pos": [0.0, 0.0], "width": 0.08, "kind": "tree"},
        {"id": "b", "row_id": 0, "pos": [2.0, 0.1], "width": 0.09, "kind": "tree"},
    ],
}


def write_map(tmp_path, doc):
    path = tmp_path / "map.json"
    path.write_text(json.dumps(doc))
    return path


def test_load_minimal_map(tmp_path):
    omap = ol.load_map(write_map(tmp_path, MINIMAL))
    assert len(omap) == 2
    assert omap.row(0).landmark_ids == ("a", "b")


def test_duplicate_id_rejected(tmp_path):
    doc = json.loads(json.dumps(MINIMAL))
    doc["landmarks"][1]["id"] = "a"
    with pytest.raises(MapValidationError, match="'a'"):
        ol.load_map(write_map(tmp_path, doc))


def test_zero_width_rejected():
    with pytest.raises(MapValidationError, match="width"):
        Landmark("x", Vec2(0, 0), 0.0, "tree")


def test_unknown_field_rejected(tmp_path):
    doc = json.loads(json.dumps(MINIMAL))
    doc["landmarks"][0]["color"] = "brown"
    with pytest.raises(MapFormatError, match="color"):
        ol.load_map(write_map(tmp_path, doc))


def test_missing_field_rejected(tmp_path):
    doc = json.loads(json.dumps(MINIMAL))
    del doc["meta"]["units"]
    with pytest.raises(MapFormatError, match="units"):
        ol.load_map(write_map(tmp_path, doc))


def test_malformed_json(tmp_path):
    path = tmp_path / "map.json"
    path.write_text("{not json")
    with pytest.raises(MapFormatError):
        ol.load_map(path)


def test_landmark_far_from_row_rejected(tmp_path):
    doc = json.loads(json.dumps(MINIMAL))
    doc["landmarks"][0]["pos"] = [0.0, 2.0]
    with pytest.raises(MapValidationError, match="from row"):
        ol.load_map(write_map(tmp_path, doc))


def test_unknown_row_rejected(tmp_path):
    doc = json.loads(json.dumps(MINIMAL))
    doc["landmarks"][0]["row_id"] = 7
    with pytest.raises(MapValidationError, match="row_id 7"):
        ol.load_map(write_map(tmp_path, doc))


def test_default_generator_count(default_map):
    # 20 rows x 50 trees
    assert len(default_map) == 1000
    assert len(default_map.rows) == 20


def test_generator_posts_every_tenth(default_map):
    row = default_map.rows[0]
    kinds = [lm.kind for lm in default_map.landmarks[:50]]
    assert kinds.count("post") == 5
    assert all(default_map.landmarks[i].kind == "post" for i in (9, 19, 29, 39, 49))
    assert row.length() == pytest.approx(49 * 1.8)


def test_generator_deterministic():
    a = ol.generate_map(seed=5)
    b = ol.generate_map(seed=5)
    assert map_to_dict(a) == map_to_dict(b)
    c = ol.generate_map(seed=6)
    assert map_to_dict(a) != map_to_dict(c)


def test_save_load_roundtrip(tmp_path, small_map):
    path = tmp_path / "m.json"
    ol.save_map(small_map, path)
    again = ol.load_map(path)
    assert map_to_dict(again) == map_to_dict(small_map)


def test_inflate_identity(small_map):
    out = ol.inflate_widths(small_map, 0.0)
    assert map_to_dict(out) == map_to_dict(small_map)


def test_inflate_adds_exactly(small_map):
    out = ol.inflate_widths(small_map, 0.005)
    for before, after in zip(small_map.landmarks, out.landmarks):
        assert after.width == pytest.approx(before.width + 0.005, abs=1e-12)
        assert after.position == before.position
    assert len(out) == len(small_map)


def test_inflate_additive(small_map):
    twice = ol.inflate_widths(ol.inflate_widths(small_map, 0.002), 0.003)
    once = ol.inflate_widths(small_map, 0.005)
    for a, b in zip(twice.landmarks, once.landmarks):
        assert a.width == pytest.approx(b.width, abs=1e-12)


def test_inflate_range_checked(small_map):
    with pytest.raises(ValueError):
        ol.inflate_widths(small_map, -0.001)
    with pytest.raises(ValueError):
        ol.inflate_widths(small_map, 0.05)


def brute_force_fov(omap, pose, half, max_range, offset):
    """Independent oracle: scan every landmark."""
    out = []
    axis = pose.theta + offset
    for lm in omap.landmarks:
        dx = lm.position.dx - pose.x
        dy = lm.position.dy - pose.y
        rng = math.hypot(dx, dy)
        if rng <= 0 or rng > max_range:
            continue
        bearing = wrap_angle(math.atan2(dy, dx) - axis)
        if abs(bearing) <= half:
            out.append((lm.id, rng, bearing))
    return sorted(out)


def test_fov_dead_ahead_included(tmp_path):
    omap = ol.load_map(write_map(tmp_path, MINIMAL))
    pose = Pose2D(0.0, -2.0, math.pi / 2)  # looking straight at landmark "a"
    got = ol.landmarks_in_fov(omap, pose, math.pi / 6, 4.0, 0.0)
    assert [lm.id for lm, _, _ in got] == ["a"]
    assert got[0][1] == pytest.approx(2.0)
    assert got[0][2] == pytest.approx(0.0, abs=1e-12)


def test_fov_depth_threshold(tmp_path):
    omap = ol.load_map(write_map(tmp_path, MINIMAL))
    pose = Pose2D(0.0, -5.0, math.pi / 2)
    assert ol.landmarks_in_fov(omap, pose, math.pi / 6, 4.0, 0.0) == []


def test_fov_matches_brute_force_scan(default_map):
    cfg = ol.SensorConfig()
    rng = np.random.default_rng(99)
    for _ in range(40):
        pose = Pose2D(rng.uniform(-5, 95), rng.uniform(-5, 62),
                      rng.uniform(-math.pi, math.pi))
        got = sorted((lm.id, r, b) for lm, r, b in ol.landmarks_in_fov(
            default_map, pose, cfg.fov_half_angle, cfg.max_range,
            cfg.view_bearing_offset))
        want = brute_force_fov(default_map, pose, cfg.fov_half_angle,
                               cfg.max_range, cfg.view_bearing_offset)
        assert [g[0] for g in got] == [w[0] for w in want]
        for g, w in zip(got, want):
            assert g[1] == pytest.approx(w[1], abs=1e-9)
            assert g[2] == pytest.approx(w[2], abs=1e-9)


def test_row_requires_distinct_endpoints():
    with pytest.raises(MapValidationError):
        RowSpec(0, Vec2(1, 1), Vec2(1, 1))
