import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from orchardloc.geom import (Pose2D, Vec2, angular_displacement,
                             project_onto_heading, wrap_angle)

finite_angles = st.floats(min_value=-1e6, max_value=1e6,
                          allow_nan=False, allow_infinity=False)


def test_wrap_identity():
    assert wrap_angle(0.0) == 0.0


def test_wrap_boundary_maps_to_plus_pi():
    assert wrap_angle(3 * math.pi) == pytest.approx(math.pi, abs=1e-12)
    assert wrap_angle(math.pi) == math.pi
    assert wrap_angle(-math.pi) == math.pi


def test_wrap_negative_overflow():
    # independent arithmetic: -6.2 + 2*pi
    assert wrap_angle(-6.2) == pytest.approx(0.08318530717958605, abs=1e-12)


def test_wrap_rejects_non_finite():
    for bad in (math.inf, -math.inf, math.nan):
        with pytest.raises(ValueError):
            wrap_angle(bad)


def test_wrap_array():
    out = wrap_angle(np.array([0.0, 3 * math.pi, -6.2]))
    assert out == pytest.approx([0.0, math.pi, 0.08318530717958605])


@given(finite_angles)
def test_wrap_idempotent(raw):
    once = wrap_angle(raw)
    assert wrap_angle(once) == pytest.approx(once, abs=1e-9)
    assert -math.pi < once <= math.pi


def test_angular_displacement_small():
    assert angular_displacement(0.1, 0.3) == pytest.approx(0.2)


@given(finite_angles)
def test_angular_displacement_identity(theta):
    assert angular_displacement(theta, theta) == 0.0


def test_angular_displacement_crosses_boundary():
    # shortest signed arc from 3.1 to -3.1 goes forward through pi
    assert angular_displacement(3.1, -3.1) == pytest.approx(
        0.08318530717958605, abs=1e-12)


@given(finite_angles, finite_angles)
def test_angular_displacement_bounded_and_antisymmetric(a, b):
    d = angular_displacement(a, b)
    assert abs(d) <= math.pi
    if abs(abs(d) - math.pi) > 1e-9:  # antisymmetry breaks only at the boundary
        assert angular_displacement(b, a) == pytest.approx(-d, abs=1e-9)


def test_project_aligned():
    assert project_onto_heading(Vec2(1, 0), 0.0) == pytest.approx(1.0)


def test_project_perpendicular():
    assert project_onto_heading(Vec2(0, 1), 0.0) == pytest.approx(0.0, abs=1e-12)


def test_project_parallel_full_magnitude():
    assert project_onto_heading(Vec2(3, 4), math.atan2(4, 3)) == pytest.approx(5.0)


@given(st.floats(-100, 100), st.floats(-100, 100), finite_angles)
def test_project_cauchy_schwarz(dx, dy, heading):
    disp = Vec2(dx, dy)
    assert abs(project_onto_heading(disp, heading)) <= disp.norm() + 1e-9


def test_pose_normalizes_heading():
    assert Pose2D(0, 0, 3 * math.pi).theta == pytest.approx(math.pi)
    assert Pose2D(0, 0, -0.1).theta == pytest.approx(-0.1)


def test_pose_rejects_non_finite_position():
    with pytest.raises(ValueError):
        Pose2D(math.nan, 0, 0)
    with pytest.raises(ValueError):
        Vec2(math.inf, 0)
