"""Corridor-sampling local planner.

Candidate positional setpoints are drawn from the global plan segment within
reach of the robot (one sample per stride, capped) plus two points per plan
sample at independent uniform random lateral offsets left and right of the
local tangent -- a corridor of about a hundred samples.  Each candidate is
scored
    total = obstacle_gain * exp(-obstacle_decay * clearance)
          + progress_gain * exp(-progress_decay * progress)
where clearance is the minimum distance-field value along the straight
segment robot -> candidate and progress is the candidate's arc length along
the global plan.  The lowest-cost feasible candidate wins, but a sitting
setpoint is only abandoned for a significant improvement (the switch
threshold), which keeps the commanded point stable between cycles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .costmap import COST_INSCRIBED, CostParams, Costmap, clearance_at_many, cost_at_many
from .geometry import Pose2D, wrap_angle
from .global_planner import GlobalPlan

KIND_ON_PLAN = "on_plan"
KIND_LATERAL = "lateral"

MODE_ROTATE = "rotate-to-face"
MODE_TRANSLATE = "translate"


class PlannerStuck(RuntimeError):
    """Raised when every corridor sample is infeasible this cycle."""


@dataclass(frozen=True)
class PlannerParams:
    corridor_length: float = 3.0      # m of plan ahead of the robot's projection
    sample_stride: float = 0.09       # m between plan samples (34 over 3 m)
    max_plan_samples: int = 34
    lateral_max: float = 1.0          # m; lateral offsets are U(0, lateral_max]
    switch_threshold: float = 0.85    # adopt a new setpoint only below this fraction
    safety_margin: float = 0.05       # m added to the body radius for feasibility
    reach_radius: float = 0.15        # m; a setpoint this close counts as reached

    def __post_init__(self):
        if self.corridor_length <= 0 or self.sample_stride <= 0:
            raise ValueError("corridor_length and sample_stride must be > 0")
        if not (0.0 < self.switch_threshold <= 1.0):
            raise ValueError("switch_threshold must be in (0, 1]")


@dataclass(frozen=True)
class CandidatePoint:
    point: np.ndarray
    kind: str


@dataclass
class TrajectorySample:
    """A scored candidate setpoint."""

    target: np.ndarray
    kind: str
    clearance: float          # min obstacle distance along robot -> target
    progress: float           # arc length of target along the global plan
    obstacle_cost: float
    progress_cost: float
    total_cost: float         # inf when infeasible
    feasible: bool


@dataclass
class SetpointDecision:
    target: np.ndarray
    mode: str
    superseded: bool          # replaced a different previous setpoint
    kind: str
    sample: TrajectorySample


def sample_corridor(plan: GlobalPlan, robot: Pose2D, rng: np.random.Generator,
                    params: PlannerParams = PlannerParams()) -> list[CandidatePoint]:
    """Generate the candidate corridor for this cycle.

    Plan points start at the robot's arc-length projection, step by
    sample_stride and stop at corridor_length ahead (or the plan end).  Every
    plan point contributes itself plus one random point on each side,
    perpendicular to the local plan tangent.  Lateral draws happen in a fixed
    order (left then right per point), so a fixed seed reproduces the set.
    """
    line = plan.polyline
    if len(line) < 1:
        raise ValueError("empty global plan")
    s0 = line.project(robot.xy).arc_length
    s_end = min(s0 + params.corridor_length, line.total_length)
    count = int(math.floor((s_end - s0) / params.sample_stride + 1e-9)) + 1
    count = min(count, params.max_plan_samples)
    out: list[CandidatePoint] = []
    for k in range(count):
        s = min(s0 + k * params.sample_stride, line.total_length)
        pt = line.point_at(s)
        tangent = line.tangent_at(s)
        if tangent is None:
            tangent = robot.heading
        normal = np.array([-tangent[1], tangent[0]])
        out.append(CandidatePoint(pt, KIND_ON_PLAN))
        # (1 - random()) is in (0, 1]: strictly positive offsets per side.
        left = (1.0 - rng.random()) * params.lateral_max
        right = (1.0 - rng.random()) * params.lateral_max
        out.append(CandidatePoint(pt + left * normal, KIND_LATERAL))
        out.append(CandidatePoint(pt - right * normal, KIND_LATERAL))
    return out


def evaluate_sample(candidate: CandidatePoint, robot: Pose2D, plan: GlobalPlan,
                    local_costmap: Costmap, cost_params: CostParams,
                    body_radius: float,
                    params: PlannerParams = PlannerParams()) -> TrajectorySample:
    """Score one candidate against the local costmap and the global plan.

    Infeasible (never an error): the straight segment robot -> target touches
    an inscribed/lethal/unknown cell, leaves the grid, or its clearance drops
    below body_radius + safety_margin.
    """
    spec = local_costmap.spec
    target = np.asarray(candidate.point, dtype=float)
    seg = target - robot.xy
    seg_len = float(np.hypot(*seg))
    n = max(2, int(math.ceil(seg_len / (spec.resolution * 0.5))) + 1)
    ts = np.arange(n) / (n - 1)
    pts = robot.xy[None, :] + ts[:, None] * seg[None, :]

    inside = ((pts[:, 0] >= spec.origin[0]) & (pts[:, 0] < spec.xmax)
              & (pts[:, 1] >= spec.origin[1]) & (pts[:, 1] < spec.ymax))
    feasible = bool(inside.all())
    clearance = 0.0
    if feasible:
        clearance = float(clearance_at_many(local_costmap, pts).min())
        if (cost_at_many(local_costmap, pts) >= COST_INSCRIBED).any():
            feasible = False
        if clearance < body_radius + params.safety_margin:
            feasible = False

    progress = plan.polyline.project(target).arc_length
    obstacle_cost = cost_params.obstacle_gain * math.exp(-cost_params.obstacle_decay * clearance)
    progress_cost = cost_params.progress_gain * math.exp(-cost_params.progress_decay * progress)
    total = obstacle_cost + progress_cost if feasible else math.inf
    return TrajectorySample(target, candidate.kind, clearance, progress,
                            obstacle_cost, progress_cost, total, feasible)


def evaluate_samples(candidates: list[CandidatePoint], robot: Pose2D, plan: GlobalPlan,
                     local_costmap: Costmap, cost_params: CostParams,
                     body_radius: float,
                     params: PlannerParams = PlannerParams()) -> list[TrajectorySample]:
    """Vectorized evaluate_sample over a whole corridor (identical results).

    Each candidate keeps its own segment sampling density; rows are padded to
    the longest one by repeating the endpoint, which cannot change a min or a
    threshold test.
    """
    if not candidates:
        return []
    spec = local_costmap.spec
    targets = np.stack([np.asarray(c.point, dtype=float) for c in candidates])
    seg = targets - robot.xy[None, :]
    seg_len = np.hypot(seg[:, 0], seg[:, 1])
    n_pts = np.maximum(2, np.ceil(seg_len / (spec.resolution * 0.5)).astype(np.int64) + 1)
    j = np.arange(int(n_pts.max()))
    ts = np.minimum(j[None, :] / (n_pts[:, None] - 1), 1.0)
    pts = robot.xy[None, None, :] + ts[..., None] * seg[:, None, :]
    flat = pts.reshape(-1, 2)

    inside = ((flat[:, 0] >= spec.origin[0]) & (flat[:, 0] < spec.xmax)
              & (flat[:, 1] >= spec.origin[1]) & (flat[:, 1] < spec.ymax))
    inside = inside.reshape(len(candidates), -1)
    row_inside = inside.all(axis=1)

    clamped = flat.copy()
    clamped[:, 0] = np.clip(clamped[:, 0], spec.origin[0], np.nextafter(spec.xmax, -np.inf))
    clamped[:, 1] = np.clip(clamped[:, 1], spec.origin[1], np.nextafter(spec.ymax, -np.inf))
    clear = clearance_at_many(local_costmap, clamped).reshape(len(candidates), -1)
    costs = cost_at_many(local_costmap, clamped).reshape(len(candidates), -1)

    min_clear = clear.min(axis=1)
    blocked = (costs >= COST_INSCRIBED).any(axis=1)
    feasible = row_inside & ~blocked & (min_clear >= body_radius + params.safety_margin)
    clearance = np.where(row_inside, min_clear, 0.0)

    progress = plan.polyline.project_many(targets)
    obstacle_cost = cost_params.obstacle_gain * np.exp(-cost_params.obstacle_decay * clearance)
    progress_cost = cost_params.progress_gain * np.exp(-cost_params.progress_decay * progress)
    total = np.where(feasible, obstacle_cost + progress_cost, math.inf)
    return [TrajectorySample(targets[i], candidates[i].kind, float(clearance[i]),
                             float(progress[i]), float(obstacle_cost[i]),
                             float(progress_cost[i]), float(total[i]), bool(feasible[i]))
            for i in range(len(candidates))]


def select_setpoint(samples: list[TrajectorySample],
                    current: TrajectorySample | None,
                    previous_target: np.ndarray | None,
                    robot: Pose2D,
                    params: PlannerParams = PlannerParams(),
                    face_threshold: float = math.radians(30.0)) -> SetpointDecision:
    """Pick the setpoint for this cycle.

    `current` is the previously commanded setpoint re-evaluated against the
    fresh local costmap (None if there is none).  The best feasible sample
    (min cost; ties prefer larger progress, then sample order) replaces it
    only when the current one is gone, infeasible, reached, or beaten by the
    switch-threshold margin.  Raises PlannerStuck when nothing is feasible.
    """
    best: TrajectorySample | None = None
    for s in samples:
        if not s.feasible:
            continue
        if best is None or s.total_cost < best.total_cost or \
                (s.total_cost == best.total_cost and s.progress > best.progress):
            best = s
    if best is None:
        raise PlannerStuck("all corridor samples infeasible")

    chosen = best
    if current is not None and current.feasible:
        dist_to_current = float(np.hypot(*(current.target - robot.xy)))
        reached = dist_to_current <= params.reach_radius
        if not reached and not (best.total_cost < params.switch_threshold * current.total_cost):
            chosen = current

    to = chosen.target - robot.xy
    if np.hypot(*to) < 1e-12:
        mode = MODE_TRANSLATE
    else:
        err = wrap_angle(math.atan2(to[1], to[0]) - robot.yaw)
        mode = MODE_ROTATE if abs(err) > face_threshold else MODE_TRANSLATE
    superseded = previous_target is not None and \
        float(np.hypot(*(chosen.target - previous_target))) > 1e-9
    return SetpointDecision(chosen.target, mode, superseded, chosen.kind, chosen)
