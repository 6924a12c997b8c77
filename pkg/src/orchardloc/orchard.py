"""Orchard landmark maps: trunk/post positions, widths, row geometry.

A map is immutable after construction. It carries a uniform-grid spatial
index so field-of-view queries stay cheap for both the observation
generator and the per-particle weighting.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .geom import Pose2D, Vec2, wrap_angle

GRID_CELL_SIZE = 1.0
MAX_ROW_OFFSET = 1.5  # landmarks must sit this close to their row segment
DEFAULT_WIDTH_INFLATION = 0.003


class MapFormatError(ValueError):
    """Raised when a map file cannot be parsed or has unexpected structure."""


class MapValidationError(ValueError):
    """Raised when a parsed map violates an invariant (names the record)."""


@dataclass(frozen=True)
class Landmark:
    id: str
    position: Vec2
    width: float
    kind: str  # "tree" or "post"

    def __post_init__(self):
        if not 0.0 < self.width < 1.0:
            raise MapValidationError(
                f"landmark {self.id!r}: width must be in (0, 1) m, got {self.width}"
            )
        if self.kind not in ("tree", "post"):
            raise MapValidationError(f"landmark {self.id!r}: unknown kind {self.kind!r}")


@dataclass(frozen=True)
class RowSpec:
    row_id: int
    start: Vec2
    end: Vec2
    landmark_ids: tuple = ()

    def __post_init__(self):
        if (self.start.dx, self.start.dy) == (self.end.dx, self.end.dy):
            raise MapValidationError(f"row {self.row_id}: start equals end")

    def length(self) -> float:
        return (self.end - self.start).norm()

    def direction(self) -> float:
        return math.atan2(self.end.dy - self.start.dy, self.end.dx - self.start.dx)


class OrchardMap:
    """Validated landmark map with row geometry and a grid index.

    ``landmark_rows`` assigns each landmark (by position in ``landmarks``)
    to the row it belongs to; every landmark must belong to exactly one
    existing row and lie within MAX_ROW_OFFSET of that row's segment.
    """

    def __init__(self, landmarks: Iterable[Landmark], rows: Iterable[RowSpec],
                 row_spacing: float, headland_depth: float,
                 landmark_rows: Sequence[int]):
        self.landmarks = tuple(landmarks)
        self.row_spacing = float(row_spacing)
        self.headland_depth = float(headland_depth)
        if len(landmark_rows) != len(self.landmarks):
            raise MapValidationError("landmark_rows must match landmarks")
        self._row_of = {lm.id: int(rid)
                        for lm, rid in zip(self.landmarks, landmark_rows)}
        self._validate_and_link(rows)

        n = len(self.landmarks)
        self.positions = np.array(
            [[lm.position.dx, lm.position.dy] for lm in self.landmarks]
        ).reshape(n, 2)
        self.widths = np.array([lm.width for lm in self.landmarks])
        # Row n is a sentinel used by the grid gather; its far-away position
        # fails every range test.
        self.positions_padded = np.vstack([self.positions, [[1e12, 1e12]]])
        self.x_padded = np.ascontiguousarray(self.positions_padded[:, 0],
                                             dtype=np.float32)
        self.y_padded = np.ascontiguousarray(self.positions_padded[:, 1],
                                             dtype=np.float32)
        self.widths_padded = np.append(self.widths, 1e12).astype(np.float32)
        self._grid = _GridIndex(self.positions, GRID_CELL_SIZE)

    def _validate_and_link(self, rows):
        seen = set()
        for lm in self.landmarks:
            if lm.id in seen:
                raise MapValidationError(f"duplicate landmark id {lm.id!r}")
            seen.add(lm.id)
        if len(self._row_of) != len(self.landmarks):
            raise MapValidationError("duplicate landmark id")

        rows = list(rows)
        row_ids = [r.row_id for r in rows]
        if len(set(row_ids)) != len(row_ids):
            raise MapValidationError("duplicate row_id in rows")
        by_row: dict[int, list[Landmark]] = {r.row_id: [] for r in rows}
        for lm in self.landmarks:
            rid = self._row_of[lm.id]
            if rid not in by_row:
                raise MapValidationError(f"landmark {lm.id!r}: unknown row_id {rid}")
            by_row[rid].append(lm)
        linked = []
        for row in rows:
            members = by_row[row.row_id]
            for lm in members:
                d = _point_segment_distance(lm.position, row.start, row.end)
                if d > MAX_ROW_OFFSET:
                    raise MapValidationError(
                        f"landmark {lm.id!r}: {d:.2f} m from row {row.row_id} segment"
                    )
            members.sort(key=lambda lm: _along_fraction(lm.position, row.start, row.end))
            linked.append(RowSpec(row.row_id, row.start, row.end,
                                  tuple(lm.id for lm in members)))
        self.rows = tuple(linked)
        self._rows_by_id = {r.row_id: r for r in self.rows}

    def row(self, row_id: int) -> RowSpec:
        return self._rows_by_id[row_id]

    def landmark_row(self, landmark_id: str) -> int:
        return self._row_of[landmark_id]

    def __len__(self) -> int:
        return len(self.landmarks)

    def candidate_indices(self, xs: np.ndarray, ys: np.ndarray,
                          max_range: float) -> np.ndarray:
        """Grid-index candidate landmarks near each query point.

        Returns an (N, K) index array into the padded landmark arrays;
        entries equal to len(self) point at the sentinel. Every landmark
        within max_range of a query point is guaranteed to appear in its
        candidate row.
        """
        return self._grid.candidates(xs, ys, max_range, sentinel=len(self))


def _along_fraction(p: Vec2, a: Vec2, b: Vec2) -> float:
    ab = b - a
    denom = ab.dx * ab.dx + ab.dy * ab.dy
    return ((p.dx - a.dx) * ab.dx + (p.dy - a.dy) * ab.dy) / denom


def _point_segment_distance(p: Vec2, a: Vec2, b: Vec2) -> float:
    t = min(1.0, max(0.0, _along_fraction(p, a, b)))
    cx = a.dx + t * (b.dx - a.dx)
    cy = a.dy + t * (b.dy - a.dy)
    return math.hypot(p.dx - cx, p.dy - cy)


class _GridIndex:
    """Uniform grid with per-cell lists of reachable landmarks.

    For each query radius a padded table is built once: row c holds every
    landmark that any point inside cell c can reach. Queries then reduce
    to one row gather per point.
    """

    def __init__(self, positions: np.ndarray, cell_size: float):
        self.cell = float(cell_size)
        n = len(positions)
        if n == 0:
            raise MapValidationError("map has no landmarks")
        self.positions = positions
        self._sentinel = n
        self._tree = None
        self._tables: dict[float, tuple] = {}

    def _reach_table(self, reach: float) -> tuple:
        """(min_ij, shape, rows): the landmark grid extended by the reach,
        so any point within reach of some landmark falls inside it. Points
        clipping outside the extended grid cannot reach any landmark, and
        whatever candidates the border cell hands them fail the range test
        downstream anyway.
        """
        key = round(reach, 6)
        entry = self._tables.get(key)
        if entry is None:
            from scipy.spatial import cKDTree
            if self._tree is None:
                self._tree = cKDTree(self.positions)
            margin = int(math.ceil(reach / self.cell)) + 1
            ij = np.floor(self.positions / self.cell).astype(np.int64)
            min_ij = ij.min(axis=0) - margin
            shape = ij.max(axis=0) + margin + 1 - min_ij
            ni, nj = int(shape[0]), int(shape[1])
            ci, cj = np.meshgrid(np.arange(ni), np.arange(nj), indexing="ij")
            centers = (np.column_stack([ci.ravel(), cj.ravel()])
                       + min_ij + 0.5) * self.cell
            hits = self._tree.query_ball_point(
                centers, reach + self.cell * math.sqrt(0.5))
            width = max(1, max(len(h) for h in hits))
            table = np.full((ni * nj, width), self._sentinel, dtype=np.int32)
            for row, h in enumerate(hits):
                table[row, :len(h)] = h
            entry = (min_ij, shape, table)
            self._tables[key] = entry
        return entry

    def candidates(self, xs, ys, max_range, sentinel):
        min_ij, shape, table = self._reach_table(max_range)
        ci = np.floor(np.asarray(xs, dtype=float) / self.cell).astype(np.int64)
        cj = np.floor(np.asarray(ys, dtype=float) / self.cell).astype(np.int64)
        ci = np.clip(ci - min_ij[0], 0, shape[0] - 1)
        cj = np.clip(cj - min_ij[1], 0, shape[1] - 1)
        return table[ci * shape[1] + cj]


def landmarks_in_fov(omap: OrchardMap, pose: Pose2D, fov_half_angle: float,
                     max_range: float, view_bearing_offset: float = 0.0):
    """Landmarks visible from a pose through a sector field of view.

    The sector is centered on pose.theta + view_bearing_offset with the
    given half angle; bearings are reported relative to that view axis.
    Returns a list of (Landmark, range, bearing) tuples.
    """
    if not (0.0 < fov_half_angle <= math.pi / 2):
        raise ValueError("fov_half_angle must be in (0, pi/2]")
    if max_range <= 0:
        raise ValueError("max_range must be positive")
    idx = omap.candidate_indices(np.array([pose.x]), np.array([pose.y]), max_range)[0]
    idx = np.unique(idx[idx < len(omap)])
    if idx.size == 0:
        return []
    rel = omap.positions[idx] - [pose.x, pose.y]
    rng = np.hypot(rel[:, 0], rel[:, 1])
    view_axis = pose.theta + view_bearing_offset
    bearing = wrap_angle(np.arctan2(rel[:, 1], rel[:, 0]) - view_axis)
    keep = (rng <= max_range) & (np.abs(bearing) <= fov_half_angle) & (rng > 0)
    return [
        (omap.landmarks[i], float(r), float(b))
        for i, r, b in zip(idx[keep], rng[keep], bearing[keep])
    ]


def inflate_widths(omap: OrchardMap, delta: float) -> OrchardMap:
    """Return a copy of the map with every width increased by delta."""
    if not 0.0 <= delta < 0.05:
        raise ValueError(f"width inflation must be in [0, 0.05) m, got {delta}")
    landmarks = [Landmark(lm.id, lm.position, lm.width + delta, lm.kind)
                 for lm in omap.landmarks]
    rows = [RowSpec(r.row_id, r.start, r.end) for r in omap.rows]
    landmark_rows = [omap.landmark_row(lm.id) for lm in omap.landmarks]
    return OrchardMap(landmarks, rows, omap.row_spacing, omap.headland_depth,
                      landmark_rows)


# ---------------------------------------------------------------------------
# Synthetic map generation

DEFAULT_MAP_PARAMS = dict(
    rows=20,
    trees_per_row=50,
    tree_spacing=1.8,
    row_spacing=3.0,
    headland_depth=5.0,
    jitter_along=0.08,
    jitter_cross=0.04,
    width_median=0.080,
    width_sigma_log=0.25,
    post_every=10,
    post_width=0.10,
)


def generate_map(seed: int = 0, **overrides) -> OrchardMap:
    """Build the default synthetic orchard (20 rows x 50 trees unless
    overridden): jittered tree positions, log-normal trunk widths, and a
    post in place of every post_every-th tree.
    """
    p = dict(DEFAULT_MAP_PARAMS)
    unknown = set(overrides) - set(p)
    if unknown:
        raise ValueError(f"unknown map parameters: {sorted(unknown)}")
    p.update(overrides)
    rng = np.random.default_rng(np.random.SeedSequence([0x0A17, int(seed)]))

    landmarks = []
    landmark_rows = []
    rows = []
    length = (p["trees_per_row"] - 1) * p["tree_spacing"]
    for r in range(p["rows"]):
        y = r * p["row_spacing"]
        rows.append(RowSpec(r, Vec2(0.0, y), Vec2(length, y)))
        for k in range(p["trees_per_row"]):
            x = k * p["tree_spacing"] + rng.normal(0.0, p["jitter_along"])
            yy = y + rng.normal(0.0, p["jitter_cross"])
            is_post = (k + 1) % p["post_every"] == 0
            if is_post:
                width = p["post_width"]
            else:
                width = float(np.exp(np.log(p["width_median"])
                                     + rng.normal(0.0, p["width_sigma_log"])))
                width = min(width, 0.999)
            landmarks.append(Landmark(f"r{r:02d}t{k:02d}", Vec2(x, yy), width,
                                      "post" if is_post else "tree"))
            landmark_rows.append(r)
    return OrchardMap(landmarks, rows, p["row_spacing"], p["headland_depth"],
                      landmark_rows)


# ---------------------------------------------------------------------------
# Map file I/O (strict schema; unknown fields rejected)

_META_FIELDS = {"row_spacing", "headland_depth", "units"}
_ROW_FIELDS = {"row_id", "start", "end"}
_LANDMARK_FIELDS = {"id", "row_id", "pos", "width", "kind"}


def _check_fields(obj: dict, allowed: set, where: str):
    if not isinstance(obj, dict):
        raise MapFormatError(f"{where}: expected an object")
    extra = set(obj) - allowed
    if extra:
        raise MapFormatError(f"{where}: unknown fields {sorted(extra)}")
    missing = allowed - set(obj)
    if missing:
        raise MapFormatError(f"{where}: missing fields {sorted(missing)}")


def map_to_dict(omap: OrchardMap) -> dict:
    return {
        "meta": {
            "row_spacing": omap.row_spacing,
            "headland_depth": omap.headland_depth,
            "units": "m",
        },
        "rows": [
            {"row_id": r.row_id, "start": [r.start.dx, r.start.dy],
             "end": [r.end.dx, r.end.dy]}
            for r in omap.rows
        ],
        "landmarks": [
            {"id": lm.id, "row_id": omap.landmark_row(lm.id),
             "pos": [lm.position.dx, lm.position.dy],
             "width": lm.width, "kind": lm.kind}
            for lm in omap.landmarks
        ],
    }


def map_from_dict(doc: dict) -> OrchardMap:
    _check_fields(doc, {"meta", "rows", "landmarks"}, "map")
    _check_fields(doc["meta"], _META_FIELDS, "meta")
    if doc["meta"]["units"] != "m":
        raise MapFormatError(f"unsupported units {doc['meta']['units']!r}")
    rows = []
    for i, rd in enumerate(doc["rows"]):
        _check_fields(rd, _ROW_FIELDS, f"rows[{i}]")
        rows.append(RowSpec(int(rd["row_id"]),
                            Vec2(*map(float, rd["start"])),
                            Vec2(*map(float, rd["end"]))))
    landmarks = []
    landmark_rows = []
    for i, ld in enumerate(doc["landmarks"]):
        _check_fields(ld, _LANDMARK_FIELDS, f"landmarks[{i}]")
        landmarks.append(Landmark(str(ld["id"]), Vec2(*map(float, ld["pos"])),
                                  float(ld["width"]), str(ld["kind"])))
        landmark_rows.append(int(ld["row_id"]))
    return OrchardMap(landmarks, rows,
                      float(doc["meta"]["row_spacing"]),
                      float(doc["meta"]["headland_depth"]),
                      landmark_rows)


def load_map(path) -> OrchardMap:
    try:
        with open(path) as f:
            doc = json.load(f)
    except json.JSONDecodeError as e:
        raise MapFormatError(f"{path}: not valid JSON ({e})") from e
    return map_from_dict(doc)


def save_map(omap: OrchardMap, path) -> None:
    with open(path, "w") as f:
        json.dump(map_to_dict(omap), f, separators=(",", ":"))
        f.write("\n")
