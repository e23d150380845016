"""Inflation, local costmap composition and clearance lookups."""

import math

import numpy as np
import pytest

from gridnav.costmap import (COST_FREE, COST_INSCRIBED, COST_LETHAL,
                             COST_MAX_INFLATED, COST_UNKNOWN, CostParams,
                             clearance_at, clearance_at_many,
                             compose_local_costmap, cost_at_many, inflate)
from gridnav.geometry import GridSpec, Pose2D
from gridnav.world import LaserScan

PARAMS = CostParams(inscribed_radius=0.3)


def build(occupied, unknown=None, res=0.1, params=PARAMS):
    occupied = np.asarray(occupied, dtype=bool)
    if unknown is None:
        unknown = np.zeros_like(occupied)
    spec = GridSpec(res, occupied.shape[1], occupied.shape[0])
    return inflate(occupied, unknown, spec, params)


class TestInflate:
    def test_boundary_values(self):
        occ = np.zeros((1, 60), dtype=bool)
        occ[0, 0] = True
        cm = build(occ)
        assert cm.cost[0, 0] == COST_LETHAL
        # 0.3 m inscribed radius at 0.1 m cells: cells 1..2 are strictly inside,
        # cell 3 sits exactly at the inscribed radius and takes the full gain.
        assert cm.cost[0, 1] == COST_INSCRIBED
        assert cm.cost[0, 2] == COST_INSCRIBED
        assert cm.cost[0, 3] == COST_MAX_INFLATED

    def test_closed_form_values(self):
        occ = np.zeros((1, 60), dtype=bool)
        occ[0, 0] = True
        cm = build(occ)
        # 1.0 m beyond the inscribed radius -> round(252 e^-2.5) = 21
        assert cm.cost[0, 13] == 21
        # 2.0 m beyond -> round(252 e^-5) = 2 ("insignificant after around 2 m")
        assert cm.cost[0, 23] == 2

    def test_cutoff_floors_to_zero(self):
        occ = np.zeros((1, 80), dtype=bool)
        occ[0, 0] = True
        cm = build(occ)
        beyond = int((0.3 + PARAMS.cost_cutoff) / 0.1) + 2
        assert (cm.cost[0, beyond:] == COST_FREE).all()

    def test_unknown_marker_survives_except_near_obstacles(self):
        occ = np.zeros((1, 60), dtype=bool)
        occ[0, 0] = True
        unk = np.ones((1, 60), dtype=bool)
        unk[0, 0] = False
        cm = build(occ, unk)
        assert cm.cost[0, 1] == COST_INSCRIBED     # safety beats missing data
        assert cm.cost[0, 30] == COST_UNKNOWN

    def test_monotone_in_distance(self):
        rng = np.random.default_rng(20)
        for _ in range(20):
            occ = rng.random((24, 24)) < 0.1
            if not occ.any():
                continue
            cm = build(occ)
            inflated = cm.cost < COST_INSCRIBED
            d = cm.dist[inflated]
            c = cm.cost[inflated].astype(int)
            order = np.argsort(d)
            assert (np.diff(c[order]) <= 0).all() or \
                np.all(np.diff(d[order][np.flatnonzero(np.diff(c[order]) > 0)]) == 0)

    def test_headroom_252_only_at_inscribed_boundary(self):
        rng = np.random.default_rng(21)
        for _ in range(20):
            occ = rng.random((24, 24)) < 0.15
            cm = build(occ)
            inflated = cm.cost < COST_INSCRIBED
            assert cm.cost[inflated].max(initial=0) <= COST_MAX_INFLATED
            at_max = inflated & (cm.cost == COST_MAX_INFLATED)
            assert np.all(cm.dist[at_max] >= PARAMS.inscribed_radius - 1e-12)
            assert np.all(cm.dist[at_max] <= PARAMS.inscribed_radius + 1e-12)

    def test_lethal_iff_occupied(self):
        rng = np.random.default_rng(22)
        occ = rng.random((16, 16)) < 0.2
        cm = build(occ)
        assert np.array_equal(cm.cost == COST_LETHAL, occ)


def scan_with_endpoint(pose, point, max_range=5.6):
    ang = math.atan2(point[1] - pose.y, point[0] - pose.x)
    r = math.hypot(point[0] - pose.x, point[1] - pose.y)
    return LaserScan(pose, ang, ang, np.array([r]), max_range)


class TestComposeLocal:
    def test_empty_scan_equals_map_costmap(self):
        occ = np.zeros((40, 40), dtype=bool)
        occ[10, 10] = True
        cm = build(occ)
        pose = Pose2D(2.0, 2.0, 0.0)
        scan = LaserScan(pose, 0, 0, np.array([np.inf]), 5.6)
        local = compose_local_costmap(cm, scan, pose, PARAMS)
        assert np.array_equal(local.cost, cm.cost)

    def test_unmapped_disc_becomes_lethal_locally_only(self):
        occ = np.zeros((40, 40), dtype=bool)
        cm = build(occ)
        pose = Pose2D(2.0, 2.0, 0.0)
        local = compose_local_costmap(cm, scan_with_endpoint(pose, (3.0, 2.0)), pose, PARAMS)
        ix, iy = cm.spec.world_to_cell(3.05, 2.0)
        assert local.cost[iy, ix] >= COST_INSCRIBED
        assert (cm.cost == COST_FREE).all()   # global map untouched

    def test_dominates_global_cellwise(self):
        rng = np.random.default_rng(23)
        for _ in range(10):
            occ = rng.random((50, 50)) < 0.05
            unk = rng.random((50, 50)) < 0.2
            unk &= ~occ
            cm = build(occ, unk)
            pose = Pose2D(2.5, 2.5, rng.uniform(-3, 3))
            n = 41
            ranges = rng.uniform(0.3, 5.6, n)
            ranges[rng.random(n) < 0.3] = np.inf
            scan = LaserScan(pose, pose.yaw - 2, pose.yaw + 2, ranges, 5.6)
            local = compose_local_costmap(cm, scan, pose, PARAMS)
            assert (local.cost.astype(int) >= cm.cost.astype(int)).all()


class TestClearanceAt:
    def test_on_obstacle_cell_is_zero(self):
        occ = np.zeros((20, 20), dtype=bool)
        occ[5, 5] = True
        cm = build(occ)
        assert clearance_at(cm, cm.spec.cell_center(5, 5)) == 0.0

    def test_between_two_walls_by_symmetry(self):
        occ = np.zeros((20, 41), dtype=bool)
        occ[:, 0] = True
        occ[:, 40] = True   # walls 4.0 m apart (cell centers 0.05 and 4.05)
        cm = build(occ)
        mid = ((0.05 + 4.05) / 2, 1.0)
        assert clearance_at(cm, mid) == pytest.approx(2.0)

    def test_matches_all_pairs_within_half_cell(self):
        rng = np.random.default_rng(24)
        occ = rng.random((30, 30)) < 0.1
        occ[0, 0] = True
        cm = build(occ)
        centers = np.argwhere(occ)[:, ::-1] * 0.1 + 0.05
        for _ in range(100):
            p = rng.uniform(0.0, 2.99, 2)
            oracle = np.hypot(*(centers - p).T).min()
            assert clearance_at(cm, p) == pytest.approx(oracle, abs=0.05 + 1e-9)

    def test_outside_grid_raises(self):
        cm = build(np.zeros((10, 10), dtype=bool))
        with pytest.raises(ValueError):
            clearance_at(cm, (5.0, 0.5))

    def test_no_obstacles_infinite(self):
        cm = build(np.zeros((10, 10), dtype=bool))
        assert math.isinf(clearance_at(cm, (0.5, 0.5)))


class TestCostAt:
    def test_lookup_and_out_of_grid(self):
        occ = np.zeros((10, 10), dtype=bool)
        occ[3, 3] = True
        cm = build(occ)
        pts = np.array([[0.35, 0.35], [20.0, 20.0]])
        costs = cost_at_many(cm, pts)
        assert costs[0] == COST_LETHAL
        assert costs[1] == COST_UNKNOWN


class TestCostParams:
    def test_validation(self):
        with pytest.raises(ValueError):
            CostParams(obstacle_gain=300)
        with pytest.raises(ValueError):
            CostParams(progress_decay=0)
