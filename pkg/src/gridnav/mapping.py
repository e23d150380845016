"""Occupancy-grid mapping from lidar scans at known pose, plus dimension
measurement on the finished map.

The map stores one log-odds value per cell, updated additively per beam:
cells traversed before a beam endpoint get the free decrement, the endpoint
cell of a finite beam gets the hit increment, and no-hit beams clear free
space out to max range.  Values are clamped to [-CLAMP, +CLAMP] after every
scan; occupied/free/unknown classes are a pure threshold function of the
log-odds.

Endpoint registration uses the half-cell convention: the hit is attributed to
the cell half a resolution past the measured surface along the beam, so that
an obstacle face aligned with a cell boundary rasterizes on its own side of
that boundary instead of bleeding into free space.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import GridSpec, Pose2D
from .world import LaserScan

try:
    from numba import njit
    _HAVE_NUMBA = True
except ImportError:          # pragma: no cover - numba is a normal install here
    _HAVE_NUMBA = False

HIT_DELTA = 0.85
MISS_DELTA = -0.4
CLAMP = 10.0
OCCUPIED_THRESHOLD = 2.0
FREE_THRESHOLD = -2.0

CLASS_FREE = 0
CLASS_OCCUPIED = 1
CLASS_UNKNOWN = 2


class OccupancyGrid:
    """Log-odds occupancy belief over a GridSpec."""

    def __init__(self, spec: GridSpec, *, hit_delta: float = HIT_DELTA,
                 miss_delta: float = MISS_DELTA, clamp: float = CLAMP,
                 occupied_threshold: float = OCCUPIED_THRESHOLD,
                 free_threshold: float = FREE_THRESHOLD):
        self.spec = spec
        self.log_odds = np.zeros((spec.height, spec.width))
        self.hit_delta = hit_delta
        self.miss_delta = miss_delta
        self.clamp = clamp
        self.occupied_threshold = occupied_threshold
        self.free_threshold = free_threshold

    def classes(self) -> np.ndarray:
        """Per-cell class (CLASS_FREE / CLASS_OCCUPIED / CLASS_UNKNOWN)."""
        out = np.full(self.log_odds.shape, CLASS_UNKNOWN, dtype=np.uint8)
        out[self.log_odds > self.occupied_threshold] = CLASS_OCCUPIED
        out[self.log_odds < self.free_threshold] = CLASS_FREE
        return out

    def occupied_mask(self) -> np.ndarray:
        return self.log_odds > self.occupied_threshold

    def free_mask(self) -> np.ndarray:
        return self.log_odds < self.free_threshold

    def unknown_mask(self) -> np.ndarray:
        return ~(self.occupied_mask() | self.free_mask())


if _HAVE_NUMBA:
    @njit(cache=True)
    def _mark_free_dda(log_odds, ox, oy, res, width, height,
                       px, py, dx, dy, lens, miss_delta):
        """Per-beam DDA: decrement every cell crossed before the endpoint."""
        ix0 = int(math.floor((px - ox) / res))
        iy0 = int(math.floor((py - oy) / res))
        for b in range(dx.shape[0]):
            remaining = lens[b]
            ix, iy = ix0, iy0
            if 0 <= ix < width and 0 <= iy < height:
                log_odds[iy, ix] += miss_delta
            if remaining <= 0.0:
                continue
            bdx, bdy = dx[b], dy[b]
            if bdx > 0.0:
                step_x = 1
                t_max_x = (ox + (ix + 1) * res - px) / bdx
                t_dx = res / bdx
            elif bdx < 0.0:
                step_x = -1
                t_max_x = (ox + ix * res - px) / bdx
                t_dx = -res / bdx
            else:
                step_x, t_max_x, t_dx = 0, 1e30, 1e30
            if bdy > 0.0:
                step_y = 1
                t_max_y = (oy + (iy + 1) * res - py) / bdy
                t_dy = res / bdy
            elif bdy < 0.0:
                step_y = -1
                t_max_y = (oy + iy * res - py) / bdy
                t_dy = -res / bdy
            else:
                step_y, t_max_y, t_dy = 0, 1e30, 1e30
            while True:
                if t_max_x <= t_max_y:
                    t = t_max_x
                    t_max_x += t_dx
                    ix += step_x
                else:
                    t = t_max_y
                    t_max_y += t_dy
                    iy += step_y
                if t > remaining:
                    break
                if 0 <= ix < width and 0 <= iy < height:
                    log_odds[iy, ix] += miss_delta


def _mark_free_sampled(grid: OccupancyGrid, pose: Pose2D, dirs_x, dirs_y, free_len) -> None:
    """Fallback free-space marking by sampling each beam at one-cell steps.

    May skip an occasional corner-clipped cell on diagonals; the DDA kernel is
    preferred when numba is importable.
    """
    spec = grid.spec
    res = spec.resolution
    n_steps = int(math.ceil(free_len.max() / res)) + 1
    t = np.arange(n_steps) * res
    tt = np.minimum(t[None, :], free_len[:, None])
    xs = pose.x + dirs_x[:, None] * tt
    ys = pose.y + dirs_y[:, None] * tt
    ix = np.floor((xs - spec.origin[0]) / res).astype(np.int64)
    iy = np.floor((ys - spec.origin[1]) / res).astype(np.int64)
    inside = (ix >= 0) & (ix < spec.width) & (iy >= 0) & (iy < spec.height)
    lin = np.where(inside, iy * spec.width + ix, -1)
    # Collapse consecutive duplicates: a straight beam never revisits a cell
    # non-consecutively, so this is an exact per-beam dedupe.
    keep = np.empty_like(inside)
    keep[:, 0] = True
    keep[:, 1:] = lin[:, 1:] != lin[:, :-1]
    keep &= lin >= 0
    visited = lin[keep]
    flat = grid.log_odds.ravel()
    if len(visited):
        flat += grid.miss_delta * np.bincount(visited, minlength=flat.size)


def integrate_scan(grid: OccupancyGrid, pose: Pose2D, scan: LaserScan) -> None:
    """Fuse one scan into the map using the pose the scan is attributed to.

    Degenerate in-collision scans carry no geometry and are skipped.
    """
    if scan.in_collision:
        return
    spec = grid.spec
    res = spec.resolution
    n = scan.beam_count
    if n == 0:
        return
    angles = scan.angles
    dirs_x = np.cos(angles)
    dirs_y = np.sin(angles)
    finite = np.isfinite(scan.ranges)
    # Free-space marking stops half a cell short of the surface so the hit
    # cell is not also decremented by its own beam (best effort on diagonals).
    free_len = np.where(finite, np.maximum(scan.ranges - 0.5 * res, 0.0), scan.max_range)

    if _HAVE_NUMBA:
        _mark_free_dda(grid.log_odds, spec.origin[0], spec.origin[1], res,
                       spec.width, spec.height, pose.x, pose.y,
                       dirs_x, dirs_y, free_len, grid.miss_delta)
    else:
        _mark_free_sampled(grid, pose, dirs_x, dirs_y, free_len)
    flat = grid.log_odds.ravel()

    if finite.any():
        r = scan.ranges[finite]
        hx = pose.x + dirs_x[finite] * (r + 0.5 * res)
        hy = pose.y + dirs_y[finite] * (r + 0.5 * res)
        hix = np.floor((hx - spec.origin[0]) / res).astype(np.int64)
        hiy = np.floor((hy - spec.origin[1]) / res).astype(np.int64)
        ok = (hix >= 0) & (hix < spec.width) & (hiy >= 0) & (hiy < spec.height)
        hits = hiy[ok] * spec.width + hix[ok]
        if len(hits):
            flat += grid.hit_delta * np.bincount(hits, minlength=flat.size)

    np.clip(grid.log_odds, -grid.clamp, grid.clamp, out=grid.log_odds)


@dataclass(frozen=True)
class Gauge:
    """A labeled straight-line dimension to verify against the map."""

    label: str
    start: tuple[float, float]
    end: tuple[float, float]

    @property
    def truth(self) -> float:
        return math.hypot(self.end[0] - self.start[0], self.end[1] - self.start[1])


class GaugeMeasurementError(RuntimeError):
    pass


def measure_gauge(grid: OccupancyGrid, gauge: Gauge, *, search: float = 0.25) -> float:
    """Measure the gauge span off the map.

    Walks the gauge line (extended by `search` beyond each endpoint), finds
    the log-odds zero crossings between adjacent free/occupied cells and
    interpolates the boundary position sub-cell.  The measured span is the
    distance between the crossings nearest to the two endpoints; failure to
    find a crossing within `search` of an endpoint raises
    GaugeMeasurementError.
    """
    spec = grid.spec
    res = spec.resolution
    a = np.asarray(gauge.start, dtype=float)
    b = np.asarray(gauge.end, dtype=float)
    total = gauge.truth
    if total <= 0:
        raise GaugeMeasurementError(f"gauge {gauge.label!r} has zero length")
    u = (b - a) / total

    ts = np.arange(-search - res, total + search + res, res / 3.0)
    pts = a[None, :] + ts[:, None] * u[None, :]
    ix = np.floor((pts[:, 0] - spec.origin[0]) / res).astype(np.int64)
    iy = np.floor((pts[:, 1] - spec.origin[1]) / res).astype(np.int64)
    inside = (ix >= 0) & (ix < spec.width) & (iy >= 0) & (iy < spec.height)
    lin = np.where(inside, iy * spec.width + ix, -1)
    keep = np.empty_like(inside)
    keep[0] = True
    keep[1:] = lin[1:] != lin[:-1]
    keep &= lin >= 0
    cells = lin[keep]
    if len(cells) < 2:
        raise GaugeMeasurementError(f"gauge {gauge.label!r} lies outside the map")
    cy, cx = cells // spec.width, cells % spec.width
    values = grid.log_odds[cy, cx]
    centers_x = spec.origin[0] + (cx + 0.5) * res
    centers_y = spec.origin[1] + (cy + 0.5) * res
    t_center = (centers_x - a[0]) * u[0] + (centers_y - a[1]) * u[1]

    v0, v1 = values[:-1], values[1:]
    crossing = (v0 * v1 < 0) & (np.maximum(np.abs(v0), np.abs(v1)) >= grid.occupied_threshold)
    idx = np.flatnonzero(crossing)
    if len(idx) == 0:
        raise GaugeMeasurementError(f"gauge {gauge.label!r}: no occupancy boundary on the line")
    frac = (0.0 - v0[idx]) / (v1[idx] - v0[idx])
    t_cross = t_center[idx] + frac * (t_center[idx + 1] - t_center[idx])

    def nearest(target: float, side: str) -> float:
        d = np.abs(t_cross - target)
        j = int(np.argmin(d))
        if d[j] > search:
            raise GaugeMeasurementError(
                f"gauge {gauge.label!r}: no occupied crossing within {search} m of {side} endpoint")
        return float(t_cross[j])

    return nearest(total, "end") - nearest(0.0, "start")


def save_pgm(grid: OccupancyGrid, path) -> None:
    """Export the thresholded map as binary PGM plus a `<path>.meta` sidecar.

    Pixel values: occupied 0, free 254, unknown 205.  Row 0 of the image is
    the top of the map (max y), matching common map viewers.
    """
    classes = grid.classes()
    img = np.full(classes.shape, 205, dtype=np.uint8)
    img[classes == CLASS_FREE] = 254
    img[classes == CLASS_OCCUPIED] = 0
    img = img[::-1]  # y-up world -> top-down image
    header = f"P5\n{grid.spec.width} {grid.spec.height}\n255\n".encode("ascii")
    with open(path, "wb") as f:
        f.write(header)
        f.write(img.tobytes())
    meta = (
        f"resolution: {grid.spec.resolution}\n"
        f"origin: [{grid.spec.origin[0]}, {grid.spec.origin[1]}]\n"
        f"width: {grid.spec.width}\n"
        f"height: {grid.spec.height}\n"
        "values: occupied=0 free=254 unknown=205\n"
    )
    with open(str(path) + ".meta", "w", encoding="ascii") as f:
        f.write(meta)
