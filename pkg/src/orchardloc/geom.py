"""Planar geometry primitives and the angle conventions shared by all modules.

Headings are radians, counter-clockwise from the +x axis, always normalized
to the half-open interval (-pi, pi] with +pi chosen at the boundary.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

TAU = 2.0 * math.pi


def wrap_angle(raw):
    """Normalize an angle (scalar or array) to (-pi, pi].

    The boundary maps to +pi, so every angle has exactly one representative.
    Non-finite input is a contract violation.
    """
    if np.isscalar(raw) or isinstance(raw, float):
        if not math.isfinite(raw):
            raise ValueError(f"angle must be finite, got {raw!r}")
        return math.pi - (math.pi - raw) % TAU
    arr = np.asarray(raw, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ValueError("angles must be finite")
    return math.pi - np.mod(math.pi - arr, TAU)


def angular_displacement(prev_heading, curr_heading):
    """Shortest signed arc from prev_heading to curr_heading, in (-pi, pi]."""
    return wrap_angle(curr_heading - prev_heading)


def project_onto_heading(disp, heading) -> float:
    """Signed component of a displacement along a heading direction.

    Negative means backward motion. ``disp`` may be a Vec2 or an (dx, dy)
    pair.
    """
    dx, dy = _components(disp)
    return dx * math.cos(heading) + dy * math.sin(heading)


def _components(disp):
    if isinstance(disp, Vec2):
        return disp.dx, disp.dy
    dx, dy = disp
    return float(dx), float(dy)


@dataclass(frozen=True)
class Vec2:
    """Planar displacement in meters (map frame)."""

    dx: float
    dy: float

    def __post_init__(self):
        if not (math.isfinite(self.dx) and math.isfinite(self.dy)):
            raise ValueError(f"Vec2 components must be finite, got {self}")

    def __add__(self, other: "Vec2") -> "Vec2":
        return Vec2(self.dx + other.dx, self.dy + other.dy)

    def __sub__(self, other: "Vec2") -> "Vec2":
        return Vec2(self.dx - other.dx, self.dy - other.dy)

    def norm(self) -> float:
        return math.hypot(self.dx, self.dy)

    def as_array(self) -> np.ndarray:
        return np.array([self.dx, self.dy])


@dataclass(frozen=True)
class Pose2D:
    """Planar pose: position in meters, heading in radians CCW from +x.

    The heading is normalized on construction; x and y must be finite.
    """

    x: float
    y: float
    theta: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"pose position must be finite, got {self}")
        object.__setattr__(self, "theta", wrap_angle(self.theta))

    def position(self) -> Vec2:
        return Vec2(self.x, self.y)

    def distance_to(self, other: "Pose2D") -> float:
        return math.hypot(self.x - other.x, self.y - other.y)
