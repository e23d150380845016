"""Traversal-cost grids derived from occupancy via exponential inflation,
and the dual-source local costmap that overlays live scan returns.

Cost encoding (0-255):
  254 lethal (occupied cell), 253 inscribed (within the robot's inscribed
  radius of an obstacle), 1-252 exponentially inflated, 0 free, 255 unknown.
The inflated cost at distance d from the nearest obstacle is
round(gain * exp(-decay * (d - inscribed))), zero beyond the cutoff distance.
Cells exactly at the inscribed radius evaluate the exponential at 0 and get
the full gain (252 by default), keeping one unit of headroom below the
inscribed cost.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .geometry import GridSpec, Pose2D, distance_transform
from .world import LaserScan

COST_FREE = 0
COST_MAX_INFLATED = 252
COST_INSCRIBED = 253
COST_LETHAL = 254
COST_UNKNOWN = 255


@dataclass(frozen=True)
class CostParams:
    """Free parameters of the two exponential cost terms plus inflation geometry.

    obstacle_gain/obstacle_decay shape the obstacle-proximity term (and the
    costmap inflation); progress_gain/progress_decay shape the plan-progress
    term used by the local planner.
    """

    obstacle_gain: float = 252.0
    obstacle_decay: float = 2.5          # 1/m
    progress_gain: float = 100.0
    progress_decay: float = 0.4          # 1/m
    inscribed_radius: float = 0.30
    cost_cutoff: float = 2.2             # m beyond the inscribed radius

    def __post_init__(self):
        if not (0.0 < self.obstacle_gain < 253.0):
            raise ValueError("obstacle_gain must be in (0, 253)")
        if min(self.obstacle_decay, self.progress_gain, self.progress_decay) <= 0:
            raise ValueError("decay rates and progress_gain must be > 0")
        if self.inscribed_radius < 0 or self.cost_cutoff <= 0:
            raise ValueError("inscribed_radius >= 0 and cost_cutoff > 0 required")


@dataclass
class Costmap:
    """Immutable cost grid plus the distance field it was derived from."""

    spec: GridSpec
    cost: np.ndarray            # uint8, shape (h, w)
    dist: np.ndarray            # meters to nearest occupied cell center
    occupied: np.ndarray        # bool
    unknown: np.ndarray         # bool

    def __post_init__(self):
        for arr in (self.cost, self.dist, self.occupied, self.unknown):
            arr.setflags(write=False)

    @property
    def has_obstacles(self) -> bool:
        return bool(self.occupied.any())


def _inflation_values(dist: np.ndarray, occupied: np.ndarray,
                      params: CostParams) -> np.ndarray:
    # dist may be +inf (no obstacle anywhere): exp(-inf) = 0 falls out naturally.
    delta = dist - params.inscribed_radius
    exp_cost = np.round(
        params.obstacle_gain * np.exp(-params.obstacle_decay * np.maximum(delta, 0.0)))
    cost = exp_cost.astype(np.uint8)
    cost[delta > params.cost_cutoff] = COST_FREE
    cost[delta < 0.0] = COST_INSCRIBED
    cost[occupied] = COST_LETHAL
    return cost


def inflate(occupied: np.ndarray, unknown: np.ndarray, spec: GridSpec,
            params: CostParams) -> Costmap:
    """Build a costmap from an occupied mask and an unknown mask.

    Unknown cells keep the 255 marker unless inflation already classifies
    them as inscribed or lethal (safety near known obstacles wins over
    missing information).
    """
    occupied = np.asarray(occupied, dtype=bool)
    unknown = np.asarray(unknown, dtype=bool)
    dist = distance_transform(occupied, spec.resolution)
    cost = _inflation_values(dist, occupied, params)
    cost[unknown & (cost < COST_INSCRIBED)] = COST_UNKNOWN
    return Costmap(spec, cost, dist, occupied.copy(), unknown.copy())


def costmap_from_grid(occ_grid, params: CostParams) -> Costmap:
    """Convenience: inflate an OccupancyGrid's thresholded view."""
    return inflate(occ_grid.occupied_mask(), occ_grid.unknown_mask(), occ_grid.spec, params)


def compose_local_costmap(map_costmap: Costmap, scan: LaserScan, pose: Pose2D,
                          params: CostParams, *, corridor_length: float = 3.0) -> Costmap:
    """Overlay live scan returns on the map-derived costmap.

    Scan endpoints are rasterized as extra obstacles (same half-cell endpoint
    convention as the mapper), the distance field is recomputed from the
    union, and costs are re-inflated over a rolling square window of side
    2*(corridor_length + cost_cutoff) centered on the robot.  Within the
    window the result is the cell-wise max of the re-inflated values and the
    map costmap, so the local map always dominates the global one.
    """
    spec = map_costmap.spec
    res = spec.resolution
    occupied = map_costmap.occupied.copy()
    finite = np.isfinite(scan.ranges)
    if finite.any():
        ang = scan.angles[finite]
        r = scan.ranges[finite] + 0.5 * res
        ex = pose.x + r * np.cos(ang)
        ey = pose.y + r * np.sin(ang)
        ix = np.floor((ex - spec.origin[0]) / res).astype(np.int64)
        iy = np.floor((ey - spec.origin[1]) / res).astype(np.int64)
        ok = (ix >= 0) & (ix < spec.width) & (iy >= 0) & (iy < spec.height)
        occupied[iy[ok], ix[ok]] = True

    dist = distance_transform(occupied, res)
    half = corridor_length + params.cost_cutoff
    x0, y0 = spec.world_to_cell(pose.x - half, pose.y - half)
    x1, y1 = spec.world_to_cell(pose.x + half, pose.y + half)
    x0, y0 = max(x0, 0), max(y0, 0)
    x1, y1 = min(x1 + 1, spec.width), min(y1 + 1, spec.height)

    cost = map_costmap.cost.copy()
    win = np.s_[y0:y1, x0:x1]
    local = _inflation_values(dist[win], occupied[win], params)
    local[map_costmap.unknown[win] & (local < COST_INSCRIBED)] = COST_UNKNOWN
    cost[win] = np.maximum(cost[win], local)
    return Costmap(spec, cost, dist, occupied, map_costmap.unknown.copy())


def clearance_at(costmap: Costmap, point) -> float:
    """Distance-field value at a world point, bilinearly interpolated."""
    return float(clearance_at_many(costmap, np.asarray(point, dtype=float)[None, :])[0])


def clearance_at_many(costmap: Costmap, pts: np.ndarray) -> np.ndarray:
    """Vectorized clearance_at; raises if any point is outside the grid."""
    spec = costmap.spec
    if not np.all((pts[:, 0] >= spec.origin[0]) & (pts[:, 0] < spec.xmax)
                  & (pts[:, 1] >= spec.origin[1]) & (pts[:, 1] < spec.ymax)):
        raise ValueError("point outside grid")
    if not costmap.has_obstacles:
        return np.full(len(pts), np.inf)
    gx = (pts[:, 0] - spec.origin[0]) / spec.resolution - 0.5
    gy = (pts[:, 1] - spec.origin[1]) / spec.resolution - 0.5
    gx = np.clip(gx, 0.0, spec.width - 1.0)
    gy = np.clip(gy, 0.0, spec.height - 1.0)
    x0 = np.clip(np.floor(gx).astype(np.int64), 0, max(spec.width - 2, 0))
    y0 = np.clip(np.floor(gy).astype(np.int64), 0, max(spec.height - 2, 0))
    fx = gx - x0
    fy = gy - y0
    d = costmap.dist
    x1 = np.minimum(x0 + 1, spec.width - 1)
    y1 = np.minimum(y0 + 1, spec.height - 1)
    return ((1 - fx) * (1 - fy) * d[y0, x0] + fx * (1 - fy) * d[y0, x1]
            + (1 - fx) * fy * d[y1, x0] + fx * fy * d[y1, x1])


def cost_at_many(costmap: Costmap, pts: np.ndarray) -> np.ndarray:
    """Cost of the cell containing each point; 255 for out-of-grid points."""
    spec = costmap.spec
    ix, iy = spec.world_to_cells(pts)
    inside = (ix >= 0) & (ix < spec.width) & (iy >= 0) & (iy < spec.height)
    out = np.full(len(pts), COST_UNKNOWN, dtype=np.uint8)
    out[inside] = costmap.cost[iy[inside], ix[inside]]
    return out
