"""Scenario files: schema, validation, defaults and the shipped scenarios.

A scenario is a JSON object with the top-level keys
    name, resolution, walls, obstacles, dynamic_obstacles, robot, goals,
    gauges, params, seed, tick_budget
(seed is required, everything else has defaults; unknown keys are load
errors).  `params` accepts the documented cost/planner/sensor overrides so a
scenario can pin, e.g., its lidar noise or safety margin.  All defaults are
filled in at load time and echoed back by to_dict(), so a loaded scenario
serializes to a fully explicit document.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from .costmap import CostParams
from .geometry import GridSpec, Polyline, Pose2D
from .local_planner import PlannerParams
from .world import (LIDAR_BEAMS, LIDAR_MAX_RANGE, ConvexPolygon, Disc,
                    DynamicObstacle, RobotModel, World, check_collision,
                    step_dynamic_obstacles)

DT = 0.02                       # 50 Hz sim tick
LOCAL_PERIOD_TICKS = 5          # 10 Hz local planner
REPLAN_PERIOD_S = 1.0           # 1 Hz global replan
WORLD_PADDING = 0.5             # m of grid margin around the geometry

_TOP_KEYS = {"name", "resolution", "walls", "obstacles", "dynamic_obstacles",
             "robot", "goals", "gauges", "params", "seed", "tick_budget"}
_ROBOT_KEYS = {"start", "radius", "v_max", "yaw_rate_max"}
_DYN_KEYS = {"radius", "speed", "waypoints", "start_tick"}
_GAUGE_KEYS = {"label", "from", "to"}
_PARAM_KEYS = {"obstacle_gain", "obstacle_decay", "progress_gain", "progress_decay",
               "inscribed_radius", "cost_cutoff", "corridor_length", "sample_stride",
               "lateral_max", "switch_threshold", "safety_margin", "reach_radius",
               "noise_sigma", "pose_sigma", "beam_count", "max_range",
               "unknown_penalty", "goal_tolerance"}

BUILTIN_SCENARIOS = ("mapping_room", "dynamic_obstacle", "corner",
                     "doorway_080", "doorway_100")


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class ScenarioParams:
    """All tunables a scenario may override (cost, planner, sensing)."""

    cost: CostParams = CostParams()
    planner: PlannerParams = PlannerParams()
    noise_sigma: float = 0.01
    pose_sigma: float = 0.0
    beam_count: int = LIDAR_BEAMS
    max_range: float = LIDAR_MAX_RANGE
    unknown_penalty: float = 0.5
    goal_tolerance: float = 0.15


@dataclass
class Scenario:
    name: str
    resolution: float
    seed: int
    tick_budget: int
    robot_start: Pose2D
    robot: RobotModel
    world: World
    goals: list[np.ndarray]
    gauges: list
    params: ScenarioParams
    dt: float = DT

    def grid_spec(self) -> GridSpec:
        xmin, ymin, xmax, ymax = self.world.bounds
        return GridSpec.from_bounds(xmin, ymin, xmax, ymax, self.resolution)

    def to_dict(self) -> dict:
        """Fully explicit document: every default echoed."""
        c, p = self.params.cost, self.params.planner
        return {
            "name": self.name,
            "resolution": self.resolution,
            "walls": [list(w) for w in self.world.walls.tolist()],
            "obstacles": (
                [{"polygon": poly.vertices.tolist()} for poly in self.world.polygons]
                + [{"disc": {"center": list(d.center), "radius": d.radius}}
                   for d in self.world.discs]),
            "dynamic_obstacles": [
                {"radius": o.radius, "speed": o.speed,
                 "waypoints": o.waypoints.points.tolist(), "start_tick": o.start_tick}
                for o in self.world.dynamic],
            "robot": {"start": [self.robot_start.x, self.robot_start.y, self.robot_start.yaw],
                      "radius": self.robot.radius, "v_max": self.robot.v_max,
                      "yaw_rate_max": self.robot.yaw_rate_max},
            "goals": [list(map(float, g)) for g in self.goals],
            "gauges": [{"label": g.label, "from": list(g.start), "to": list(g.end)}
                       for g in self.gauges],
            "params": {
                "obstacle_gain": c.obstacle_gain, "obstacle_decay": c.obstacle_decay,
                "progress_gain": c.progress_gain, "progress_decay": c.progress_decay,
                "inscribed_radius": c.inscribed_radius, "cost_cutoff": c.cost_cutoff,
                "corridor_length": p.corridor_length, "sample_stride": p.sample_stride,
                "lateral_max": p.lateral_max, "switch_threshold": p.switch_threshold,
                "safety_margin": p.safety_margin, "reach_radius": p.reach_radius,
                "noise_sigma": self.params.noise_sigma, "pose_sigma": self.params.pose_sigma,
                "beam_count": self.params.beam_count, "max_range": self.params.max_range,
                "unknown_penalty": self.params.unknown_penalty,
                "goal_tolerance": self.params.goal_tolerance,
            },
            "seed": self.seed,
            "tick_budget": self.tick_budget,
        }


def _require_number(value, name: str) -> float:
    if not isinstance(value, (int, float)) or isinstance(value, bool):
        raise ScenarioError(f"field '{name}' must be a number")
    return float(value)


def _require_point(value, name: str) -> tuple[float, float]:
    if not isinstance(value, (list, tuple)) or len(value) != 2:
        raise ScenarioError(f"field '{name}' must be an [x, y] pair")
    return _require_number(value[0], name), _require_number(value[1], name)


def load_scenario(data) -> Scenario:
    """Parse and validate scenario bytes/str/dict into a Scenario."""
    if isinstance(data, (bytes, bytearray)):
        data = data.decode("utf-8")
    if isinstance(data, str):
        try:
            doc = json.loads(data)
        except json.JSONDecodeError as e:
            raise ScenarioError(f"invalid JSON: {e}") from None
    else:
        doc = data
    if not isinstance(doc, dict):
        raise ScenarioError("scenario document must be a JSON object")

    unknown = set(doc) - _TOP_KEYS
    if unknown:
        raise ScenarioError(f"unknown key '{sorted(unknown)[0]}'")
    if "seed" not in doc:
        raise ScenarioError("missing required field 'seed'")
    if not isinstance(doc["seed"], int) or isinstance(doc["seed"], bool):
        raise ScenarioError("field 'seed' must be an integer")

    name = doc.get("name", "unnamed")
    if not isinstance(name, str):
        raise ScenarioError("field 'name' must be a string")
    resolution = _require_number(doc.get("resolution", 0.05), "resolution")
    if resolution <= 0:
        raise ScenarioError("field 'resolution' must be > 0")
    tick_budget = doc.get("tick_budget", 3000)
    if not isinstance(tick_budget, int) or tick_budget < 1:
        raise ScenarioError("field 'tick_budget' must be a positive integer")

    walls = []
    for i, seg in enumerate(doc.get("walls", [])):
        if not isinstance(seg, (list, tuple)) or len(seg) != 4:
            raise ScenarioError(f"field 'walls[{i}]' must be [x1, y1, x2, y2]")
        walls.append([_require_number(v, f"walls[{i}]") for v in seg])
    walls = np.asarray(walls, dtype=float).reshape(-1, 4)

    discs: list[Disc] = []
    polygons: list[ConvexPolygon] = []
    for i, obs in enumerate(doc.get("obstacles", [])):
        if not isinstance(obs, dict) or len(obs) != 1:
            raise ScenarioError(f"field 'obstacles[{i}]' must be a polygon or disc object")
        if "polygon" in obs:
            try:
                polygons.append(ConvexPolygon(obs["polygon"]))
            except ValueError as e:
                raise ScenarioError(f"field 'obstacles[{i}].polygon': {e}") from None
        elif "disc" in obs:
            d = obs["disc"]
            if not isinstance(d, dict) or set(d) != {"center", "radius"}:
                raise ScenarioError(f"field 'obstacles[{i}].disc' needs center and radius")
            center = _require_point(d["center"], f"obstacles[{i}].disc.center")
            radius = _require_number(d["radius"], f"obstacles[{i}].disc.radius")
            try:
                discs.append(Disc(center, radius))
            except ValueError as e:
                raise ScenarioError(f"field 'obstacles[{i}].disc': {e}") from None
        else:
            raise ScenarioError(f"field 'obstacles[{i}]' must contain 'polygon' or 'disc'")

    dynamic: list[DynamicObstacle] = []
    for i, obs in enumerate(doc.get("dynamic_obstacles", [])):
        if not isinstance(obs, dict):
            raise ScenarioError(f"field 'dynamic_obstacles[{i}]' must be an object")
        extra = set(obs) - _DYN_KEYS
        if extra:
            raise ScenarioError(f"unknown key 'dynamic_obstacles[{i}].{sorted(extra)[0]}'")
        for req in ("radius", "speed", "waypoints"):
            if req not in obs:
                raise ScenarioError(f"missing field 'dynamic_obstacles[{i}].{req}'")
        wps = [_require_point(p, f"dynamic_obstacles[{i}].waypoints") for p in obs["waypoints"]]
        start_tick = obs.get("start_tick", 0)
        if not isinstance(start_tick, int):
            raise ScenarioError(f"field 'dynamic_obstacles[{i}].start_tick' must be an integer")
        try:
            dynamic.append(DynamicObstacle(
                radius=_require_number(obs["radius"], "radius"),
                speed=_require_number(obs["speed"], "speed"),
                waypoints=Polyline(wps), start_tick=start_tick))
        except ValueError as e:
            raise ScenarioError(f"field 'dynamic_obstacles[{i}]': {e}") from None

    robot_doc = doc.get("robot", {})
    if not isinstance(robot_doc, dict):
        raise ScenarioError("field 'robot' must be an object")
    extra = set(robot_doc) - _ROBOT_KEYS
    if extra:
        raise ScenarioError(f"unknown key 'robot.{sorted(extra)[0]}'")
    start = robot_doc.get("start", [0.0, 0.0, 0.0])
    if not isinstance(start, (list, tuple)) or len(start) != 3:
        raise ScenarioError("field 'robot.start' must be [x, y, yaw]")
    robot_start = Pose2D(*[_require_number(v, "robot.start") for v in start])
    try:
        robot = RobotModel(
            radius=_require_number(robot_doc.get("radius", 0.30), "robot.radius"),
            v_max=_require_number(robot_doc.get("v_max", 0.5), "robot.v_max"),
            yaw_rate_max=_require_number(robot_doc.get("yaw_rate_max", math.pi / 2),
                                         "robot.yaw_rate_max"))
    except ValueError as e:
        raise ScenarioError(f"field 'robot': {e}") from None

    goals = [np.array(_require_point(g, f"goals[{i}]"))
             for i, g in enumerate(doc.get("goals", []))]

    from .mapping import Gauge
    gauges = []
    for i, g in enumerate(doc.get("gauges", [])):
        if not isinstance(g, dict):
            raise ScenarioError(f"field 'gauges[{i}]' must be an object")
        extra = set(g) - _GAUGE_KEYS
        if extra:
            raise ScenarioError(f"unknown key 'gauges[{i}].{sorted(extra)[0]}'")
        for req in ("label", "from", "to"):
            if req not in g:
                raise ScenarioError(f"missing field 'gauges[{i}].{req}'")
        gauges.append(Gauge(str(g["label"]),
                            _require_point(g["from"], f"gauges[{i}].from"),
                            _require_point(g["to"], f"gauges[{i}].to")))

    params_doc = doc.get("params", {})
    if not isinstance(params_doc, dict):
        raise ScenarioError("field 'params' must be an object")
    extra = set(params_doc) - _PARAM_KEYS
    if extra:
        raise ScenarioError(f"unknown key 'params.{sorted(extra)[0]}'")

    def pnum(key, default):
        return _require_number(params_doc.get(key, default), f"params.{key}")

    try:
        cost = CostParams(
            obstacle_gain=pnum("obstacle_gain", 252.0),
            obstacle_decay=pnum("obstacle_decay", 2.5),
            progress_gain=pnum("progress_gain", 100.0),
            progress_decay=pnum("progress_decay", 0.4),
            # ROS convention: the inscribed radius of a circular robot is its
            # body radius, unless the scenario pins something else.
            inscribed_radius=pnum("inscribed_radius", robot.radius),
            cost_cutoff=pnum("cost_cutoff", 2.2))
        planner = PlannerParams(
            corridor_length=pnum("corridor_length", 3.0),
            sample_stride=pnum("sample_stride", 0.09),
            lateral_max=pnum("lateral_max", 1.0),
            switch_threshold=pnum("switch_threshold", 0.85),
            safety_margin=pnum("safety_margin", 0.05),
            reach_radius=pnum("reach_radius", 0.15))
    except ValueError as e:
        raise ScenarioError(f"field 'params': {e}") from None
    beam_count = params_doc.get("beam_count", LIDAR_BEAMS)
    if not isinstance(beam_count, int) or beam_count < 1:
        raise ScenarioError("field 'params.beam_count' must be a positive integer")
    params = ScenarioParams(
        cost=cost, planner=planner,
        noise_sigma=pnum("noise_sigma", 0.01),
        pose_sigma=pnum("pose_sigma", 0.0),
        beam_count=beam_count,
        max_range=pnum("max_range", LIDAR_MAX_RANGE),
        unknown_penalty=pnum("unknown_penalty", 0.5),
        goal_tolerance=pnum("goal_tolerance", 0.15))

    bounds = _derive_bounds(walls, discs, polygons, dynamic, robot_start, goals)
    world = World(walls=walls, discs=discs, polygons=polygons,
                  dynamic=dynamic, bounds=bounds)

    scenario = Scenario(name=name, resolution=resolution, seed=doc["seed"],
                        tick_budget=tick_budget, robot_start=robot_start,
                        robot=robot, world=world, goals=goals, gauges=gauges,
                        params=params)
    _validate(scenario)
    return scenario


def _derive_bounds(walls, discs, polygons, dynamic, start: Pose2D, goals):
    xs = [start.x] + [float(g[0]) for g in goals]
    ys = [start.y] + [float(g[1]) for g in goals]
    if len(walls):
        xs += walls[:, [0, 2]].ravel().tolist()
        ys += walls[:, [1, 3]].ravel().tolist()
    for d in discs:
        xs += [d.center[0] - d.radius, d.center[0] + d.radius]
        ys += [d.center[1] - d.radius, d.center[1] + d.radius]
    for p in polygons:
        xs += p.vertices[:, 0].tolist()
        ys += p.vertices[:, 1].tolist()
    for o in dynamic:
        xs += (o.waypoints.points[:, 0] + o.radius).tolist()
        xs += (o.waypoints.points[:, 0] - o.radius).tolist()
        ys += (o.waypoints.points[:, 1] + o.radius).tolist()
        ys += (o.waypoints.points[:, 1] - o.radius).tolist()
    return (min(xs) - WORLD_PADDING, min(ys) - WORLD_PADDING,
            max(xs) + WORLD_PADDING, max(ys) + WORLD_PADDING)


def _validate(scenario: Scenario) -> None:
    world = scenario.world
    step_dynamic_obstacles(world, 0, scenario.dt)
    collided, _ = check_collision(world, scenario.robot_start.xy, scenario.robot.radius)
    if collided:
        raise ScenarioError("field 'robot.start': start pose is in collision")
    xmin, ymin, xmax, ymax = world.bounds
    for i, g in enumerate(scenario.goals):
        if not (xmin <= g[0] <= xmax and ymin <= g[1] <= ymax):
            raise ScenarioError(f"field 'goals[{i}]': goal outside world bounds")


def load_scenario_file(path) -> Scenario:
    with open(path, "rb") as f:
        return load_scenario(f.read())


def load_builtin(name: str) -> Scenario:
    """Load one of the shipped scenarios by name."""
    if name not in BUILTIN_SCENARIOS:
        raise ScenarioError(f"unknown builtin scenario '{name}'")
    data = resources.files("gridnav").joinpath(f"scenarios/{name}.json").read_bytes()
    return load_scenario(data)
