"""Closed-loop experiment runner.

One SimSession owns the full deterministic loop: 50 Hz sim tick with scan
integration every tick, the local planner every 5 ticks, and global
replanning per the 1 Hz policy.  Everything stochastic (lidar noise, pose
noise, corridor laterals) draws from the single seeded generator in tick
order, so identical (scenario, seed) reproduce identical runs bit for bit.

Operator commands are queued thread-safe and applied only at tick
boundaries; a session with no commands behaves exactly like a headless run.
"""

from __future__ import annotations

import io
import math
import threading
from dataclasses import dataclass, field, replace

import numpy as np

from .costmap import CostParams, Costmap, compose_local_costmap, costmap_from_grid
from .geometry import Pose2D
from .global_planner import GlobalPlan, PlanningError, plan_global, replan_policy
from .local_planner import (KIND_LATERAL, KIND_ON_PLAN, CandidatePoint,
                            PlannerParams, PlannerStuck, SetpointDecision,
                            TrajectorySample, evaluate_sample, evaluate_samples,
                            sample_corridor, select_setpoint)
from .mapping import GaugeMeasurementError, OccupancyGrid, integrate_scan, measure_gauge
from .scenario import LOCAL_PERIOD_TICKS, REPLAN_PERIOD_S, Scenario
from .world import SimState, check_collision, simulate_lidar, step_dynamic_obstacles, step_robot

STALL_SECONDS = 5.0
STALL_DISTANCE = 0.1


class CommandError(ValueError):
    pass


@dataclass
class GoalResult:
    index: int
    reached: bool
    ticks: int


@dataclass
class GaugeResult:
    label: str
    truth: float
    measured: float | None
    error: float | None


@dataclass
class MetricsReport:
    scenario_name: str
    seed: int
    goals: list[GoalResult]
    gauges: list[GaugeResult]
    collisions: int
    min_clearance: float
    path_length: float
    replans: int
    setpoint_switches: int
    lateral_switches: int
    ticks_total: int
    stuck: bool
    stuck_reason: str | None

    @property
    def all_goals_reached(self) -> bool:
        return all(g.reached for g in self.goals)


# Commands a telemetry client may hot-swap while the sim runs.
PARAM_WHITELIST = ("progress_decay", "progress_gain", "switch_threshold")


class SimSession:
    """Deterministic tick-loop owner for one scenario run."""

    def __init__(self, scenario: Scenario):
        self.scenario = scenario
        self.params = scenario.params
        spec = scenario.grid_spec()
        self.map = OccupancyGrid(spec)
        rng = np.random.default_rng(scenario.seed)
        self.state = SimState(tick=0, dt=scenario.dt, pose=scenario.robot_start,
                              rotating=False, setpoint=None, world=scenario.world,
                              rng=rng)
        self.goals: list[np.ndarray] = [np.asarray(g, dtype=float) for g in scenario.goals]
        self.goal_index = 0
        self._goal_activation_tick = 0
        self.goal_results: list[GoalResult] = []

        self.global_costmap: Costmap | None = None
        self.local_costmap: Costmap | None = None
        self.plan: GlobalPlan | None = None
        self.current_sample: TrajectorySample | None = None
        self.current_kind: str = KIND_ON_PLAN
        self.last_scan = None
        self.last_samples: list[TrajectorySample] = []
        self.last_decision: SetpointDecision | None = None

        self.collisions = 0
        self._in_collision = False
        self.min_clearance = math.inf
        self.path_length = 0.0
        self.replans = 0
        self.planner_failures = 0
        self.setpoint_switches = 0
        self.lateral_switches = 0

        self.done = len(self.goals) == 0
        self.paused = False
        self.stuck = False
        self.stuck_reason: str | None = None
        self._force_plan = False
        self._stall_anchor = scenario.robot_start.xy
        self._stall_tick = 0

        self._command_lock = threading.Lock()
        self._pending_commands: list[dict] = []

    # ---- operator commands -------------------------------------------------

    def submit_command(self, command: dict) -> None:
        """Validate a command now, queue it for the next tick boundary."""
        if not isinstance(command, dict) or "type" not in command:
            raise CommandError("command must be an object with a 'type'")
        kind = command["type"]
        if kind == "set_goal":
            try:
                x, y = float(command["x"]), float(command["y"])
            except (KeyError, TypeError, ValueError):
                raise CommandError("set_goal needs numeric 'x' and 'y'") from None
            xmin, ymin, xmax, ymax = self.state.world.bounds
            if not (xmin <= x <= xmax and ymin <= y <= ymax):
                raise CommandError("set_goal outside world bounds")
        elif kind in ("pause", "resume"):
            pass
        elif kind == "set_param":
            name = command.get("name")
            if name not in PARAM_WHITELIST:
                raise CommandError(f"unknown or non-writable param '{name}'")
            try:
                float(command["value"])
            except (KeyError, TypeError, ValueError):
                raise CommandError("set_param needs a numeric 'value'") from None
        else:
            raise CommandError(f"unknown command type '{kind}'")
        with self._command_lock:
            if len(self._pending_commands) >= 64:
                raise CommandError("command queue full")
            self._pending_commands.append(command)

    def process_commands(self) -> None:
        with self._command_lock:
            pending, self._pending_commands = self._pending_commands, []
        for cmd in pending:
            self._apply_command(cmd)

    def _apply_command(self, cmd: dict) -> None:
        kind = cmd["type"]
        if kind == "set_goal":
            goal = np.array([float(cmd["x"]), float(cmd["y"])])
            self.goals = self.goals[: self.goal_index] + [goal]
            self._goal_activation_tick = self.state.tick
            self._force_plan = True
            self._reset_stall()
            self.state.setpoint = None
            self.current_sample = None
            if self.state.tick < self.scenario.tick_budget:
                self.done = False
        elif kind == "pause":
            self.paused = True
        elif kind == "resume":
            self.paused = False
        elif kind == "set_param":
            name, value = cmd["name"], float(cmd["value"])
            if name in ("progress_decay", "progress_gain"):
                cost = replace(self.params.cost, **{name: value})
                self.params = replace(self.params, cost=cost)
            elif name == "switch_threshold":
                planner = replace(self.params.planner, switch_threshold=value)
                self.params = replace(self.params, planner=planner)
            self._force_plan = True

    # ---- tick loop ---------------------------------------------------------

    def active_goal(self) -> np.ndarray | None:
        if self.goal_index < len(self.goals):
            return self.goals[self.goal_index]
        return None

    def _reset_stall(self) -> None:
        self._stall_anchor = self.state.pose.xy
        self._stall_tick = self.state.tick

    def step(self) -> None:
        if self.done:
            return
        self.process_commands()
        if self.paused:
            return
        st = self.state
        p = self.params

        step_dynamic_obstacles(st.world, st.tick, st.dt)
        scan = simulate_lidar(st.world, st.pose, st.rng,
                              beam_count=p.beam_count, noise_sigma=p.noise_sigma,
                              max_range=p.max_range)
        self.last_scan = scan
        map_pose = st.pose
        if p.pose_sigma > 0.0:
            dx, dy, dyaw = st.rng.normal(0.0, p.pose_sigma, size=3)
            map_pose = Pose2D(st.pose.x + dx, st.pose.y + dy, st.pose.yaw + dyaw)
        integrate_scan(self.map, map_pose, scan)

        collided, clearance = check_collision(st.world, st.pose.xy,
                                              self.scenario.robot.radius)
        self.min_clearance = min(self.min_clearance, clearance)
        if collided and not self._in_collision:
            self.collisions += 1
        self._in_collision = collided

        goal = self._advance_goals()
        if goal is None:
            st.tick += 1
            self.done = True
            return

        if st.tick % LOCAL_PERIOD_TICKS == 0 or self._force_plan:
            self._planning_phase(goal)

        if st.setpoint is not None:
            new_pose, rotating = step_robot(st.pose, st.rotating, st.setpoint,
                                            self.scenario.robot, st.dt)
            self.path_length += float(np.hypot(new_pose.x - st.pose.x,
                                               new_pose.y - st.pose.y))
            st.pose, st.rotating = new_pose, rotating

        if float(np.hypot(*(st.pose.xy - self._stall_anchor))) >= STALL_DISTANCE:
            self._reset_stall()
        elif (st.tick - self._stall_tick) * st.dt >= STALL_SECONDS:
            self.stuck = True
            self.stuck_reason = (f"no progress over {STALL_SECONDS:.0f} s of sim time "
                                 f"near ({st.pose.x:.2f}, {st.pose.y:.2f})")
            self.done = True

        st.tick += 1
        if st.tick >= self.scenario.tick_budget:
            self.done = True

    def _advance_goals(self) -> np.ndarray | None:
        st = self.state
        goal = self.active_goal()
        while goal is not None and \
                float(np.hypot(*(st.pose.xy - goal))) <= self.params.goal_tolerance:
            self.goal_results.append(GoalResult(self.goal_index, True,
                                                st.tick - self._goal_activation_tick))
            self.goal_index += 1
            self._goal_activation_tick = st.tick
            self._force_plan = True
            st.setpoint = None
            self.current_sample = None
            self._reset_stall()
            goal = self.active_goal()
        return goal

    def _planning_phase(self, goal: np.ndarray) -> None:
        st = self.state
        p = self.params
        if self._force_plan or replan_policy(st.tick, st.dt, self.plan, goal,
                                             self.global_costmap,
                                             period_s=REPLAN_PERIOD_S):
            self.global_costmap = costmap_from_grid(self.map, p.cost)
            self._force_plan = False
            try:
                self.plan = plan_global(self.global_costmap, st.pose.xy, goal,
                                        unknown_penalty=p.unknown_penalty,
                                        creation_tick=st.tick)
                self.replans += 1
            except PlanningError:
                self.plan = None
                self.planner_failures += 1
        if self.plan is None or self.global_costmap is None:
            st.setpoint = None
            self.current_sample = None
            return

        self.local_costmap = compose_local_costmap(
            self.global_costmap, self.last_scan, st.pose, p.cost,
            corridor_length=p.planner.corridor_length)
        candidates = sample_corridor(self.plan, st.pose, st.rng, p.planner)
        samples = evaluate_samples(candidates, st.pose, self.plan, self.local_costmap,
                                   p.cost, self.scenario.robot.radius, p.planner)
        self.last_samples = samples
        current = None
        if st.setpoint is not None:
            current = evaluate_sample(CandidatePoint(st.setpoint, self.current_kind),
                                      st.pose, self.plan, self.local_costmap,
                                      p.cost, self.scenario.robot.radius, p.planner)
        try:
            decision = select_setpoint(samples, current, st.setpoint, st.pose,
                                       p.planner, self.scenario.robot.face_threshold)
        except PlannerStuck:
            st.setpoint = None
            self.current_sample = None
            self._force_plan = True
            return
        if decision.superseded:
            self.setpoint_switches += 1
            if decision.kind == KIND_LATERAL:
                self.lateral_switches += 1
        st.setpoint = decision.target
        self.current_kind = decision.kind
        self.current_sample = decision.sample
        self.last_decision = decision

    def run(self) -> "MetricsReport":
        while not self.done:
            self.step()
        return self.report()

    # ---- results -----------------------------------------------------------

    def report(self) -> MetricsReport:
        reached = {g.index: g for g in self.goal_results}
        goals = []
        for i in range(len(self.goals)):
            if i in reached:
                goals.append(reached[i])
            elif i == self.goal_index:
                goals.append(GoalResult(i, False, self.state.tick - self._goal_activation_tick))
            else:
                goals.append(GoalResult(i, False, 0))
        gauges = []
        for g in self.scenario.gauges:
            try:
                measured = measure_gauge(self.map, g)
                gauges.append(GaugeResult(g.label, g.truth, measured, measured - g.truth))
            except GaugeMeasurementError:
                gauges.append(GaugeResult(g.label, g.truth, None, None))
        return MetricsReport(
            scenario_name=self.scenario.name, seed=self.scenario.seed,
            goals=goals, gauges=gauges, collisions=self.collisions,
            min_clearance=self.min_clearance, path_length=self.path_length,
            replans=self.replans, setpoint_switches=self.setpoint_switches,
            lateral_switches=self.lateral_switches, ticks_total=self.state.tick,
            stuck=self.stuck, stuck_reason=self.stuck_reason)


def run_experiment(scenario: Scenario) -> MetricsReport:
    """Run one scenario start to finish; pure in (scenario bytes, seed)."""
    return SimSession(scenario).run()


CSV_HEADER = ("kind,label,truth,measured,error,goal_reached,ticks,collisions,"
              "min_clearance,path_length,replans,setpoint_switches")


def _fmt(v: float | None) -> str:
    return "" if v is None else f"{v:.6f}"


def emit_metrics_csv(report: MetricsReport) -> bytes:
    """Stable-order CSV: one row per goal, then one row per gauge."""
    buf = io.StringIO()
    buf.write(CSV_HEADER + "\n")
    for g in report.goals:
        buf.write(f"goal,{g.index},,,,{'true' if g.reached else 'false'},{g.ticks},"
                  f"{report.collisions},{_fmt(report.min_clearance)},"
                  f"{_fmt(report.path_length)},{report.replans},"
                  f"{report.setpoint_switches}\n")
    for g in report.gauges:
        buf.write(f"gauge,{g.label},{_fmt(g.truth)},{_fmt(g.measured)},"
                  f"{_fmt(g.error)},,,,,,,\n")
    return buf.getvalue().encode("utf-8")
