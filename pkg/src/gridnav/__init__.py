"""Deterministic 2D indoor navigation simulator and planning library."""

from .costmap import (COST_INSCRIBED, COST_LETHAL, COST_MAX_INFLATED, COST_UNKNOWN,
                      CostParams, Costmap, clearance_at, compose_local_costmap,
                      costmap_from_grid, inflate)
from .geometry import GridSpec, Polyline, Pose2D, distance_transform, raycast, wrap_angle
from .global_planner import GlobalPlan, GoalUnreachable, NoPathFound, PlanningError, \
    plan_global, replan_policy
from .local_planner import (PlannerParams, PlannerStuck, SetpointDecision,
                            TrajectorySample, evaluate_sample, sample_corridor,
                            select_setpoint)
from .mapping import (Gauge, GaugeMeasurementError, OccupancyGrid, integrate_scan,
                      measure_gauge, save_pgm)
from .runner import MetricsReport, SimSession, emit_metrics_csv, run_experiment
from .scenario import (BUILTIN_SCENARIOS, Scenario, ScenarioError, load_builtin,
                       load_scenario, load_scenario_file)
from .tuning import ClearanceModel, SweepRow, model_clearance, sweep, sweep_csv
from .world import (Disc, ConvexPolygon, DynamicObstacle, LaserScan, RobotModel,
                    SimState, World, check_collision, simulate_lidar,
                    step_dynamic_obstacles, step_robot)

__version__ = "0.1.0"
