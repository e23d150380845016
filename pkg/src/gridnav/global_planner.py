"""Global shortest-path planning on the costmap with a periodic replan policy.

A* over the 8-connected cell graph.  Moving into a cell costs the geometric
step length scaled by (1 + cost/252) for known cells; unknown cells cost the
step length times (1 + unknown_penalty), so goals in unexplored space stay
plannable while known free space is preferred.  Inscribed and lethal cells
(cost 253/254) are never traversed.  Ties on f are broken toward larger g
(deeper first) and then insertion order, for determinism.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numpy as np

from .costmap import COST_INSCRIBED, COST_LETHAL, COST_MAX_INFLATED, COST_UNKNOWN, Costmap
from .geometry import Polyline


class PlanningError(RuntimeError):
    pass


class GoalUnreachable(PlanningError):
    pass


class NoPathFound(PlanningError):
    pass


@dataclass
class GlobalPlan:
    polyline: Polyline
    creation_tick: int
    goal: np.ndarray

    def cells(self, spec) -> list[tuple[int, int]]:
        ix, iy = spec.world_to_cells(self.polyline.points)
        return list(zip(ix.tolist(), iy.tolist()))


_SQRT2 = math.sqrt(2.0)
_NEIGHBORS = [(-1, -1, _SQRT2), (0, -1, 1.0), (1, -1, _SQRT2),
              (-1, 0, 1.0), (1, 0, 1.0),
              (-1, 1, _SQRT2), (0, 1, 1.0), (1, 1, _SQRT2)]


def plan_global(costmap: Costmap, start, goal, *, unknown_penalty: float = 0.5,
                creation_tick: int = 0) -> GlobalPlan:
    """Plan from a world start point to a world goal point.

    Raises GoalUnreachable when the goal cell is lethal or inscribed, and
    NoPathFound when the search space is exhausted.  The returned polyline
    runs through cell centers, with the exact start and goal points spliced
    on as first/last vertices (both lie within half a cell diagonal of their
    cell centers, preserving the <= sqrt(2)*resolution vertex spacing).
    """
    spec = costmap.spec
    start = np.asarray(start, dtype=float)
    goal = np.asarray(goal, dtype=float)
    sx, sy = spec.world_to_cell(start[0], start[1])
    gx, gy = spec.world_to_cell(goal[0], goal[1])
    if not spec.contains_cell(sx, sy):
        raise PlanningError("start outside costmap")
    if not spec.contains_cell(gx, gy):
        raise GoalUnreachable("goal outside costmap")
    cost = costmap.cost
    if cost[sy, sx] == COST_LETHAL:
        raise PlanningError("start in lethal cell")
    if cost[gy, gx] in (COST_INSCRIBED, COST_LETHAL):
        raise GoalUnreachable("goal in lethal or inscribed cell")

    if (sx, sy) == (gx, gy):
        if np.allclose(start, goal):
            return GlobalPlan(Polyline([start]), creation_tick, goal)
        return GlobalPlan(Polyline([start, goal]), creation_tick, goal)

    res = spec.resolution
    w, h = spec.width, spec.height
    g_score = np.full((h, w), np.inf)
    parent = np.full((h, w), -1, dtype=np.int64)
    g_score[sy, sx] = 0.0

    def heuristic(ix: int, iy: int) -> float:
        dx, dy = abs(ix - gx), abs(iy - gy)
        return res * (max(dx, dy) + (_SQRT2 - 1.0) * min(dx, dy))

    counter = 0
    open_heap: list[tuple[float, float, int, int, int]] = [
        (heuristic(sx, sy), 0.0, counter, sx, sy)]
    found = False
    while open_heap:
        f, neg_g, _, cx, cy = heapq.heappop(open_heap)
        g = -neg_g
        if g > g_score[cy, cx]:
            continue
        if (cx, cy) == (gx, gy):
            found = True
            break
        for dx, dy, step in _NEIGHBORS:
            nx, ny = cx + dx, cy + dy
            if not (0 <= nx < w and 0 <= ny < h):
                continue
            c = cost[ny, nx]
            if c in (COST_INSCRIBED, COST_LETHAL):
                continue
            length = step * res
            if c == COST_UNKNOWN:
                move = length * (1.0 + unknown_penalty)
            else:
                move = length * (1.0 + c / COST_MAX_INFLATED)
            ng = g + move
            if ng < g_score[ny, nx]:
                g_score[ny, nx] = ng
                parent[ny, nx] = cy * w + cx
                counter += 1
                heapq.heappush(open_heap, (ng + heuristic(nx, ny), -ng, counter, nx, ny))
    if not found:
        raise NoPathFound("no path from start to goal")

    cells = [(gx, gy)]
    while cells[-1] != (sx, sy):
        p = parent[cells[-1][1], cells[-1][0]]
        cells.append((p % w, p // w))
    cells.reverse()

    points = [start] + [spec.cell_center(ix, iy) for ix, iy in cells] + [goal]
    dedup = [points[0]]
    for p in points[1:]:
        if np.hypot(*(p - dedup[-1])) > 1e-9:
            dedup.append(p)
    return GlobalPlan(Polyline(dedup), creation_tick, goal)


def plan_cost(plan: GlobalPlan, costmap: Costmap, *, unknown_penalty: float = 0.5) -> float:
    """Traversal cost of a plan's cell sequence under the A* move metric."""
    spec = costmap.spec
    cells = plan.cells(spec)
    total = 0.0
    for (ax, ay), (bx, by) in zip(cells[:-1], cells[1:]):
        if (ax, ay) == (bx, by):
            continue
        length = math.hypot(bx - ax, by - ay) * spec.resolution
        c = costmap.cost[by, bx]
        if c == COST_UNKNOWN:
            total += length * (1.0 + unknown_penalty)
        else:
            total += length * (1.0 + c / COST_MAX_INFLATED)
    return total


def replan_policy(tick: int, dt: float, plan: GlobalPlan | None, goal,
                  costmap: Costmap | None, *, period_s: float = 1.0) -> bool:
    """True when a new global plan is due.

    Fires when no plan exists yet, the goal moved, at least period_s of sim
    time elapsed since the current plan was made, or the plan is newly
    blocked by lethal/inscribed cells (unknown cells do not block: plans are
    allowed to traverse unexplored space).
    """
    if plan is None:
        return True
    if not np.allclose(np.asarray(goal, dtype=float), plan.goal):
        return True
    if (tick - plan.creation_tick) * dt >= period_s:
        return True
    if costmap is not None:
        for ix, iy in plan.cells(costmap.spec)[1:]:
            if costmap.spec.contains_cell(ix, iy) and \
                    costmap.cost[iy, ix] in (COST_INSCRIBED, COST_LETHAL):
                return True
    return False
