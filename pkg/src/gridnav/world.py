"""Ground-truth world model: static walls/obstacles, moving disc obstacles,
the simulated planar lidar and the simplified holonomic vehicle model.

The lidar is modeled on a 240-degree, 5.6 m scanner.  Beam ranges are exact
geometric intersections against the world primitives; optional Gaussian range
noise is added per beam and clamped to [0, max_range].  No-hit beams are
encoded as +inf, never as max_range.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import Polyline, Pose2D, wrap_angle

LIDAR_FOV = 4.0 * math.pi / 3.0        # 240 degrees
LIDAR_MAX_RANGE = 5.6                  # meters
LIDAR_BEAMS = 683                      # ~0.352 degree spacing over the FOV


@dataclass(frozen=True)
class Disc:
    center: tuple[float, float]
    radius: float

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError("disc radius must be > 0")


class ConvexPolygon:
    """Convex polygon stored with CCW winding; used for boxes and furniture."""

    def __init__(self, vertices):
        pts = np.asarray(vertices, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 3:
            raise ValueError("polygon needs at least 3 (x, y) vertices")
        area2 = 0.0
        for i in range(len(pts)):
            a, b = pts[i], pts[(i + 1) % len(pts)]
            area2 += a[0] * b[1] - a[1] * b[0]
        if area2 < 0:
            pts = pts[::-1].copy()
        # Convexity check: every turn must be a left turn (or straight).
        n = len(pts)
        for i in range(n):
            a, b, c = pts[i], pts[(i + 1) % n], pts[(i + 2) % n]
            cross = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
            if cross < -1e-9:
                raise ValueError("polygon is not convex")
        self.vertices = pts

    def contains(self, p) -> bool:
        v = self.vertices
        nxt = np.roll(v, -1, axis=0)
        edge = nxt - v
        rel = np.asarray(p, dtype=float) - v
        cross = edge[:, 0] * rel[:, 1] - edge[:, 1] * rel[:, 0]
        return bool((cross >= 0).all())

    def edges(self) -> np.ndarray:
        """Edges as an (n, 4) array of x1, y1, x2, y2 rows."""
        v = self.vertices
        nxt = np.roll(v, -1, axis=0)
        return np.hstack([v, nxt])


@dataclass
class DynamicObstacle:
    """Disc obstacle that follows a waypoint polyline at constant speed.

    Inactive (absent from the world) before start_tick; it holds position at
    the polyline end once the route is exhausted.
    """

    radius: float
    speed: float
    waypoints: Polyline
    start_tick: int = 0
    position: np.ndarray | None = None

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError("dynamic obstacle radius must be > 0")
        if self.speed < 0:
            raise ValueError("dynamic obstacle speed must be >= 0")

    def position_at(self, tick: int, dt: float) -> np.ndarray | None:
        if tick < self.start_tick:
            return None
        progress = (tick - self.start_tick) * dt * self.speed
        return self.waypoints.point_at(progress)


@dataclass(frozen=True)
class RobotModel:
    """Holonomic point robot with a face-before-move heading rule.

    face_release < face_threshold forms the hysteresis pair that prevents
    rotate/translate chattering.
    """

    radius: float = 0.30
    v_max: float = 0.5
    yaw_rate_max: float = math.pi / 2
    face_threshold: float = math.radians(30.0)
    face_release: float = math.radians(10.0)

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError("robot radius must be > 0")
        if self.face_release >= self.face_threshold:
            raise ValueError("face_release must be < face_threshold")


@dataclass
class World:
    """Static geometry plus dynamic obstacles, all in world coordinates."""

    walls: np.ndarray                      # (m, 4) segments x1, y1, x2, y2
    discs: list[Disc] = field(default_factory=list)
    polygons: list[ConvexPolygon] = field(default_factory=list)
    dynamic: list[DynamicObstacle] = field(default_factory=list)
    bounds: tuple[float, float, float, float] = (0.0, 0.0, 1.0, 1.0)

    def __post_init__(self):
        self.walls = np.asarray(self.walls, dtype=float).reshape(-1, 4)
        self._segments = self._collect_segments()

    def _collect_segments(self) -> np.ndarray:
        segs = [self.walls] + [p.edges() for p in self.polygons]
        return np.vstack([s for s in segs if len(s)]) if any(len(s) for s in segs) else np.zeros((0, 4))

    @property
    def static_segments(self) -> np.ndarray:
        return self._segments

    def contains_point(self, x: float, y: float) -> bool:
        xmin, ymin, xmax, ymax = self.bounds
        return xmin <= x <= xmax and ymin <= y <= ymax

    def active_dynamic(self) -> list[tuple[np.ndarray, float]]:
        return [(o.position, o.radius) for o in self.dynamic if o.position is not None]

    def point_inside_obstacle(self, p) -> bool:
        p = np.asarray(p, dtype=float)
        for d in self.discs:
            if np.hypot(*(p - np.asarray(d.center))) < d.radius:
                return True
        for poly in self.polygons:
            if poly.contains(p):
                return True
        for center, radius in self.active_dynamic():
            if np.hypot(*(p - center)) < radius:
                return True
        if len(self._segments):
            if point_segment_distances(p, self._segments).min() < 1e-9:
                return True
        return False


@dataclass
class SimState:
    """Complete deterministic simulation state advanced by one owner per tick."""

    tick: int
    dt: float
    pose: Pose2D
    rotating: bool
    setpoint: np.ndarray | None
    world: World
    rng: np.random.Generator


@dataclass
class LaserScan:
    """One lidar sweep; angles are absolute world-frame bearings."""

    pose: Pose2D
    angle_min: float
    angle_max: float
    ranges: np.ndarray            # meters; +inf marks a no-hit beam
    max_range: float = LIDAR_MAX_RANGE
    in_collision: bool = False

    @property
    def beam_count(self) -> int:
        return len(self.ranges)

    @property
    def angles(self) -> np.ndarray:
        return np.linspace(self.angle_min, self.angle_max, self.beam_count)

    def endpoints(self) -> np.ndarray:
        """World points of the finite beams, shape (k, 2)."""
        finite = np.isfinite(self.ranges)
        ang = self.angles[finite]
        r = self.ranges[finite]
        return np.column_stack([
            self.pose.x + r * np.cos(ang),
            self.pose.y + r * np.sin(ang),
        ])


def point_segment_distances(p, segments: np.ndarray) -> np.ndarray:
    """Distance from point p to each segment row (x1, y1, x2, y2)."""
    p = np.asarray(p, dtype=float)
    a = segments[:, 0:2]
    b = segments[:, 2:4]
    ab = b - a
    len2 = (ab ** 2).sum(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        t = np.where(len2 > 0, ((p - a) * ab).sum(axis=1) / np.where(len2 > 0, len2, 1.0), 0.0)
    t = np.clip(t, 0.0, 1.0)
    q = a + t[:, None] * ab
    return np.hypot(p[0] - q[:, 0], p[1] - q[:, 1])


def _ray_segments(origin: np.ndarray, dirs: np.ndarray, segments: np.ndarray) -> np.ndarray:
    """Per-beam min intersection distance with a segment set (inf if none)."""
    t_min = np.full(len(dirs), np.inf)
    dx, dy = dirs[:, 0], dirs[:, 1]
    for x1, y1, x2, y2 in segments:
        ex, ey = x2 - x1, y2 - y1
        fx, fy = x1 - origin[0], y1 - origin[1]
        denom = dx * ey - dy * ex
        with np.errstate(invalid="ignore", divide="ignore"):
            t = (fx * ey - fy * ex) / denom
            u = (fx * dy - fy * dx) / denom
        ok = (np.abs(denom) > 1e-12) & (t >= 0) & (u >= 0.0) & (u <= 1.0)
        t_min = np.where(ok & (t < t_min), t, t_min)
    return t_min


def _ray_discs(origin: np.ndarray, dirs: np.ndarray,
               discs: list[tuple[np.ndarray, float]]) -> np.ndarray:
    t_min = np.full(len(dirs), np.inf)
    for center, radius in discs:
        oc = origin - np.asarray(center, dtype=float)
        b = dirs @ oc
        c0 = oc @ oc - radius * radius
        disc = b * b - c0
        with np.errstate(invalid="ignore"):
            root = np.sqrt(np.where(disc >= 0, disc, 0.0))
        t = -b - root
        t = np.where(c0 < 0, 0.0, t)      # origin inside the disc
        ok = (disc >= 0) & (t >= 0)
        t_min = np.where(ok & (t < t_min), t, t_min)
    return t_min


def simulate_lidar(world: World, pose: Pose2D, rng: np.random.Generator | None = None,
                   *, beam_count: int = LIDAR_BEAMS, noise_sigma: float = 0.0,
                   max_range: float = LIDAR_MAX_RANGE) -> LaserScan:
    """Simulate one 240-degree sweep from `pose`.

    Each beam range is the min intersection distance over walls, polygons and
    all currently active disc obstacles.  With noise_sigma > 0 a Gaussian
    perturbation is drawn for every beam (a fixed-length draw keeps the RNG
    stream independent of the scene) and applied to the finite ones, clamped
    to [0, max_range].  A pose inside an obstacle yields a degenerate all-zero
    scan flagged in_collision.
    """
    if not world.contains_point(pose.x, pose.y):
        raise ValueError("lidar pose outside world bounds")
    angle_min = pose.yaw - LIDAR_FOV / 2.0
    angle_max = pose.yaw + LIDAR_FOV / 2.0
    if world.point_inside_obstacle(pose.xy):
        return LaserScan(pose, angle_min, angle_max,
                         np.zeros(beam_count), max_range, in_collision=True)
    angles = np.linspace(angle_min, angle_max, beam_count)
    dirs = np.column_stack([np.cos(angles), np.sin(angles)])
    origin = pose.xy
    t = _ray_segments(origin, dirs, world.static_segments)
    discs = [(np.asarray(d.center, dtype=float), d.radius) for d in world.discs]
    discs += [(c, r) for c, r in world.active_dynamic()]
    t = np.minimum(t, _ray_discs(origin, dirs, discs))
    ranges = np.where(t <= max_range, t, np.inf)
    if noise_sigma > 0.0:
        if rng is None:
            raise ValueError("rng required when noise_sigma > 0")
        noise = rng.normal(0.0, noise_sigma, size=beam_count)
        finite = np.isfinite(ranges)
        ranges = np.where(finite, np.clip(ranges + noise, 0.0, max_range), ranges)
    return LaserScan(pose, angle_min, angle_max, ranges, max_range)


def step_robot(pose: Pose2D, rotating: bool, setpoint, model: RobotModel,
               dt: float) -> tuple[Pose2D, bool]:
    """Advance the robot one tick toward a positional setpoint.

    Face-before-move: above face_threshold of yaw error the robot only
    rotates; it resumes translating once the error drops below face_release.
    Translation never exceeds v_max*dt and never overshoots the setpoint.
    Returns the new pose and the updated rotating flag.
    """
    if dt <= 0:
        raise ValueError("dt must be > 0")
    sp = np.asarray(setpoint, dtype=float)
    to = sp - pose.xy
    dist = float(np.hypot(*to))
    if dist < 1e-12:
        return pose, rotating
    desired = math.atan2(to[1], to[0])
    err = wrap_angle(desired - pose.yaw)
    if rotating and abs(err) <= model.face_release:
        rotating = False
    elif not rotating and abs(err) > model.face_threshold:
        rotating = True
    max_dyaw = model.yaw_rate_max * dt
    new_yaw = wrap_angle(pose.yaw + min(max(err, -max_dyaw), max_dyaw))
    if rotating:
        return Pose2D(pose.x, pose.y, new_yaw), True
    step_len = min(model.v_max * dt, dist)
    p = pose.xy + to / dist * step_len
    return Pose2D(float(p[0]), float(p[1]), new_yaw), False


def step_dynamic_obstacles(world: World, tick: int, dt: float) -> list[np.ndarray | None]:
    """Recompute every dynamic obstacle position for `tick` (pure in tick)."""
    positions = []
    for obs in world.dynamic:
        obs.position = obs.position_at(tick, dt)
        positions.append(obs.position)
    return positions


def check_collision(world: World, pose_xy, body_radius: float) -> tuple[bool, float]:
    """Collision test against all world geometry.

    Returns (collision, clearance).  Clearance is the minimum distance from
    the robot center to any obstacle surface minus body_radius (negative when
    penetrating).  The boundary case of exactly body_radius separation counts
    as a collision (closed condition).
    """
    p = np.asarray(pose_xy, dtype=float)
    min_dist = math.inf
    if len(world.static_segments):
        min_dist = float(point_segment_distances(p, world.static_segments).min())
    for poly in world.polygons:
        if poly.contains(p):
            edge_d = float(point_segment_distances(p, poly.edges()).min())
            min_dist = min(min_dist, -edge_d)
    for d in world.discs:
        min_dist = min(min_dist, float(np.hypot(*(p - np.asarray(d.center))) - d.radius))
    for center, radius in world.active_dynamic():
        min_dist = min(min_dist, float(np.hypot(*(p - center)) - radius))
    clearance = min_dist - body_radius
    return clearance <= 0.0, clearance
