"""Grid and world coordinate algebra shared by every other module.

Conventions used throughout the package:

- World frame: x right, y up, angles in radians measured CCW from +x,
  normalized into (-pi, pi].
- Cell (ix, iy) covers the half-open square
  [ox + ix*res, ox + (ix+1)*res) x [oy + iy*res, oy + (iy+1)*res).
  Occupancy is a property of the cell center; rays report hits at the
  boundary where they enter an occupied cell (half-cell convention).
- numpy grids are stored image-style, indexed [iy, ix].
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

TAU = 2.0 * math.pi


def wrap_angle(angle: float) -> float:
    """Normalize an angle into (-pi, pi]."""
    a = (angle + math.pi) % TAU - math.pi
    if a == -math.pi:
        return math.pi
    return a


@dataclass(frozen=True)
class Pose2D:
    """Planar pose; yaw is normalized into (-pi, pi] on construction."""

    x: float
    y: float
    yaw: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "yaw", wrap_angle(float(self.yaw)))

    @property
    def xy(self) -> np.ndarray:
        return np.array([self.x, self.y], dtype=float)

    @property
    def heading(self) -> np.ndarray:
        return np.array([math.cos(self.yaw), math.sin(self.yaw)])


@dataclass(frozen=True)
class GridSpec:
    """Uniform grid over a world rectangle; origin is the corner of cell (0, 0)."""

    resolution: float
    width: int
    height: int
    origin: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if self.resolution <= 0:
            raise ValueError("resolution must be > 0")
        if self.width < 1 or self.height < 1:
            raise ValueError("grid must be at least 1x1")

    @classmethod
    def from_bounds(cls, xmin: float, ymin: float, xmax: float, ymax: float,
                    resolution: float) -> "GridSpec":
        w = max(1, int(math.ceil((xmax - xmin) / resolution - 1e-9)))
        h = max(1, int(math.ceil((ymax - ymin) / resolution - 1e-9)))
        return cls(resolution=resolution, width=w, height=h, origin=(xmin, ymin))

    @property
    def xmax(self) -> float:
        return self.origin[0] + self.width * self.resolution

    @property
    def ymax(self) -> float:
        return self.origin[1] + self.height * self.resolution

    def world_to_cell(self, x: float, y: float) -> tuple[int, int]:
        ix = int(math.floor((x - self.origin[0]) / self.resolution))
        iy = int(math.floor((y - self.origin[1]) / self.resolution))
        return ix, iy

    def world_to_cells(self, pts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Vectorized world -> cell index mapping; pts has shape (..., 2)."""
        ix = np.floor((pts[..., 0] - self.origin[0]) / self.resolution).astype(np.int64)
        iy = np.floor((pts[..., 1] - self.origin[1]) / self.resolution).astype(np.int64)
        return ix, iy

    def cell_center(self, ix: int, iy: int) -> np.ndarray:
        return np.array([
            self.origin[0] + (ix + 0.5) * self.resolution,
            self.origin[1] + (iy + 0.5) * self.resolution,
        ])

    def contains_point(self, x: float, y: float) -> bool:
        return (self.origin[0] <= x < self.xmax) and (self.origin[1] <= y < self.ymax)

    def contains_cell(self, ix: int, iy: int) -> bool:
        return 0 <= ix < self.width and 0 <= iy < self.height


def raycast(spec: GridSpec, occupied, origin_xy, angle: float,
            max_range: float) -> float | None:
    """Cast a ray through the grid, returning the distance to the boundary of
    the first occupied cell, or None when nothing blocks within max_range.

    `occupied` is a predicate (ix, iy) -> bool, evaluated only for in-grid
    cells.  The origin must lie inside the grid.  If the origin cell itself is
    occupied the distance is 0.  No-hit is None, never max_range.
    """
    ox, oy = float(origin_xy[0]), float(origin_xy[1])
    if not spec.contains_point(ox, oy):
        raise ValueError("ray origin outside grid")
    ix, iy = spec.world_to_cell(ox, oy)
    if occupied(ix, iy):
        return 0.0

    dx, dy = math.cos(angle), math.sin(angle)
    res = spec.resolution
    step_x = 1 if dx > 0 else -1
    step_y = 1 if dy > 0 else -1
    # Parametric distance to the first x/y grid line, then per-cell increments.
    if dx != 0.0:
        nx = spec.origin[0] + (ix + (1 if dx > 0 else 0)) * res
        t_max_x = (nx - ox) / dx
        t_dx = res / abs(dx)
    else:
        t_max_x, t_dx = math.inf, math.inf
    if dy != 0.0:
        ny = spec.origin[1] + (iy + (1 if dy > 0 else 0)) * res
        t_max_y = (ny - oy) / dy
        t_dy = res / abs(dy)
    else:
        t_max_y, t_dy = math.inf, math.inf

    while True:
        if t_max_x <= t_max_y:
            t_cross = t_max_x
            t_max_x += t_dx
            ix += step_x
        else:
            t_cross = t_max_y
            t_max_y += t_dy
            iy += step_y
        if t_cross > max_range:
            return None
        if not spec.contains_cell(ix, iy):
            return None
        if occupied(ix, iy):
            return t_cross


def traverse_cells(spec: GridSpec, p0, p1) -> list[tuple[int, int]]:
    """All cells crossed by the segment p0 -> p1, in order, clipped to the grid."""
    x0, y0 = float(p0[0]), float(p0[1])
    x1, y1 = float(p1[0]), float(p1[1])
    length = math.hypot(x1 - x0, y1 - y0)
    cells: list[tuple[int, int]] = []
    ix, iy = spec.world_to_cell(x0, y0)
    if spec.contains_cell(ix, iy):
        cells.append((ix, iy))
    if length == 0.0:
        return cells
    dx, dy = (x1 - x0) / length, (y1 - y0) / length
    res = spec.resolution
    step_x = 1 if dx > 0 else -1
    step_y = 1 if dy > 0 else -1
    if dx != 0.0:
        nx = spec.origin[0] + (ix + (1 if dx > 0 else 0)) * res
        t_max_x = (nx - x0) / dx
        t_dx = res / abs(dx)
    else:
        t_max_x, t_dx = math.inf, math.inf
    if dy != 0.0:
        ny = spec.origin[1] + (iy + (1 if dy > 0 else 0)) * res
        t_max_y = (ny - y0) / dy
        t_dy = res / abs(dy)
    else:
        t_max_y, t_dy = math.inf, math.inf
    while True:
        if t_max_x <= t_max_y:
            t_cross = t_max_x
            t_max_x += t_dx
            ix += step_x
        else:
            t_cross = t_max_y
            t_max_y += t_dy
            iy += step_y
        if t_cross > length:
            return cells
        if spec.contains_cell(ix, iy):
            cells.append((ix, iy))


def distance_transform(occupied: np.ndarray, resolution: float) -> np.ndarray:
    """Exact Euclidean distance (meters) from each cell center to the nearest
    occupied cell center.  Occupied cells report 0; a grid with no occupied
    cell reports +inf everywhere.
    """
    occupied = np.asarray(occupied, dtype=bool)
    if not occupied.any():
        return np.full(occupied.shape, np.inf)
    return ndimage.distance_transform_edt(~occupied) * resolution


@dataclass(frozen=True)
class PolylineProjection:
    arc_length: float
    offset: float          # signed, left of the local tangent is positive
    point: np.ndarray      # closest point on the polyline


class Polyline:
    """Ordered list of world points with cumulative arc length per vertex."""

    def __init__(self, points):
        pts = np.asarray(points, dtype=float)
        if pts.ndim == 1:
            pts = pts.reshape(1, -1)
        if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 1:
            raise ValueError("polyline needs at least one (x, y) point")
        self.points = pts
        if len(pts) > 1:
            seg = np.diff(pts, axis=0)
            self.seg_lengths = np.hypot(seg[:, 0], seg[:, 1])
        else:
            self.seg_lengths = np.zeros(0)
        self.arc = np.concatenate([[0.0], np.cumsum(self.seg_lengths)])

    def __len__(self) -> int:
        return len(self.points)

    @property
    def total_length(self) -> float:
        return float(self.arc[-1])

    def _segment_index(self, s: float) -> int:
        i = int(np.searchsorted(self.arc, s, side="right")) - 1
        return min(max(i, 0), max(len(self.seg_lengths) - 1, 0))

    def point_at(self, s: float) -> np.ndarray:
        """Interpolated point at arc length s (clamped to [0, total])."""
        if len(self.points) == 1 or self.total_length == 0.0:
            return self.points[0].copy()
        s = min(max(s, 0.0), self.total_length)
        i = self._segment_index(s)
        if self.seg_lengths[i] == 0.0:
            return self.points[i].copy()
        t = (s - self.arc[i]) / self.seg_lengths[i]
        return self.points[i] + t * (self.points[i + 1] - self.points[i])

    def tangent_at(self, s: float) -> np.ndarray | None:
        """Unit tangent of the segment containing s; None if degenerate."""
        if len(self.seg_lengths) == 0:
            return None
        i = self._segment_index(s)
        # Skip zero-length segments (duplicate vertices).
        for j in list(range(i, len(self.seg_lengths))) + list(range(i - 1, -1, -1)):
            if self.seg_lengths[j] > 0.0:
                return (self.points[j + 1] - self.points[j]) / self.seg_lengths[j]
        return None

    def project_many(self, pts: np.ndarray) -> np.ndarray:
        """Arc lengths of the closest-point projections of pts (shape (m, 2)).

        Same math and tie-breaking as project(), vectorized over points.
        """
        pts = np.asarray(pts, dtype=float)
        if len(self.points) == 1:
            return np.zeros(len(pts))
        a = self.points[:-1]
        d = self.points[1:] - a
        len2 = self.seg_lengths ** 2
        safe = np.where(len2 > 0, len2, 1.0)
        rel = pts[:, None, :] - a[None, :, :]
        t = np.where(len2[None, :] > 0, (rel * d[None, :, :]).sum(axis=2) / safe[None, :], 0.0)
        t = np.clip(t, 0.0, 1.0)
        q = a[None, :, :] + t[..., None] * d[None, :, :]
        dist2 = ((pts[:, None, :] - q) ** 2).sum(axis=2)
        i = np.argmin(dist2, axis=1)
        rows = np.arange(len(pts))
        return self.arc[i] + t[rows, i] * self.seg_lengths[i]

    def project(self, p) -> PolylineProjection:
        """Closest-point projection of p; ties pick the smallest arc length."""
        p = np.asarray(p, dtype=float)
        if len(self.points) == 1:
            q = self.points[0]
            return PolylineProjection(0.0, float(np.hypot(*(p - q))), q.copy())
        a = self.points[:-1]
        d = self.points[1:] - a
        len2 = self.seg_lengths ** 2
        with np.errstate(invalid="ignore", divide="ignore"):
            t = np.where(len2 > 0.0, ((p - a) * d).sum(axis=1) / np.where(len2 > 0, len2, 1.0), 0.0)
        t = np.clip(t, 0.0, 1.0)
        q = a + t[:, None] * d
        dist2 = ((p - q) ** 2).sum(axis=1)
        i = int(np.argmin(dist2))
        s = float(self.arc[i] + t[i] * self.seg_lengths[i])
        dist = float(math.sqrt(dist2[i]))
        tangent = self.tangent_at(s)
        if tangent is None:
            offset = dist
        else:
            rel = p - q[i]
            cross = tangent[0] * rel[1] - tangent[1] * rel[0]
            offset = dist if cross >= 0 else -dist
        return PolylineProjection(s, offset, q[i])
