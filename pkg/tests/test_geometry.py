"""Geometry primitives against brute-force oracles."""

import math

import numpy as np
import pytest

from gridnav.geometry import (GridSpec, Polyline, Pose2D, distance_transform,
                              raycast, traverse_cells, wrap_angle)


def brute_force_distance_field(occupied, resolution):
    """All-pairs nearest-occupied oracle (cell centers)."""
    h, w = occupied.shape
    out = np.full((h, w), np.inf)
    occ = np.argwhere(occupied)
    if len(occ) == 0:
        return out
    ys, xs = np.mgrid[0:h, 0:w]
    for oy, ox in occ:
        d = np.hypot(xs - ox, ys - oy) * resolution
        out = np.minimum(out, d)
    return out


def march_ray(spec, occupied, origin, angle, max_range, step):
    """Fine-step ray marching oracle: first sample landing in an occupied cell."""
    n = int(max_range / step) + 1
    t = np.arange(n) * step
    xs = origin[0] + t * math.cos(angle)
    ys = origin[1] + t * math.sin(angle)
    for ti, x, y in zip(t, xs, ys):
        ix = int(math.floor((x - spec.origin[0]) / spec.resolution))
        iy = int(math.floor((y - spec.origin[1]) / spec.resolution))
        if not spec.contains_cell(ix, iy):
            return None
        if occupied[iy, ix]:
            return ti
    return None


class TestWrapAngle:
    def test_half_open_interval(self):
        assert wrap_angle(math.pi) == math.pi
        assert wrap_angle(-math.pi) == math.pi
        assert wrap_angle(3 * math.pi) == pytest.approx(math.pi)
        assert wrap_angle(0.3) == pytest.approx(0.3)
        assert wrap_angle(2 * math.pi + 0.3) == pytest.approx(0.3)

    def test_pose_normalizes(self):
        assert Pose2D(0, 0, 4 * math.pi + 0.1).yaw == pytest.approx(0.1)


class TestGridSpec:
    def test_round_trip_is_stable(self):
        spec = GridSpec(0.05, 40, 30, origin=(-1.0, 2.0))
        rng = np.random.default_rng(0)
        for _ in range(200):
            x = rng.uniform(-1.0, spec.xmax - 1e-9)
            y = rng.uniform(2.0, spec.ymax - 1e-9)
            ix, iy = spec.world_to_cell(x, y)
            assert spec.contains_cell(ix, iy)
            cx, cy = spec.cell_center(ix, iy)
            assert spec.world_to_cell(cx, cy) == (ix, iy)

    def test_from_bounds_covers(self):
        spec = GridSpec.from_bounds(0.0, 0.0, 1.01, 0.99, 0.1)
        assert spec.width == 11 and spec.height == 10


class TestRaycast:
    def test_empty_grid_no_hit(self):
        spec = GridSpec(0.1, 30, 30)
        occ = np.zeros((30, 30), dtype=bool)
        for angle in np.linspace(0, 2 * math.pi, 17):
            assert raycast(spec, lambda i, j: occ[j, i], (1.5, 1.5), angle, 10.0) is None

    def test_perpendicular_wall_hits_at_boundary(self):
        spec = GridSpec(0.1, 30, 30)
        occ = np.zeros((30, 30), dtype=bool)
        occ[:, 20] = True  # wall occupying x in [2.0, 2.1)
        d = raycast(spec, lambda i, j: occ[j, i], (1.0, 1.5), 0.0, 10.0)
        assert d == pytest.approx(1.0, abs=spec.resolution / 2)

    def test_origin_outside_grid_raises(self):
        spec = GridSpec(0.1, 10, 10)
        with pytest.raises(ValueError):
            raycast(spec, lambda i, j: False, (5.0, 5.0), 0.0, 1.0)

    def test_diagonal_into_l_shape_matches_marching(self):
        spec = GridSpec(0.1, 40, 40)
        occ = np.zeros((40, 40), dtype=bool)
        occ[20:23, 10:30] = True   # horizontal bar
        occ[5:23, 27:30] = True    # vertical bar
        step = spec.resolution / 10
        rng = np.random.default_rng(1)
        for _ in range(50):
            ox = rng.uniform(0.5, 2.3)
            oy = rng.uniform(0.2, 1.8)
            if occ[int(oy / 0.1), int(ox / 0.1)]:
                continue
            angle = rng.uniform(0, 2 * math.pi)
            d = raycast(spec, lambda i, j: occ[j, i], (ox, oy), angle, 5.0)
            m = march_ray(spec, occ, (ox, oy), angle, 5.0, step)
            if d is None:
                # Marching may overrun the grid edge a hair before giving up.
                assert m is None or m > 5.0 - step
            else:
                assert m is not None
                assert abs(d - m) <= step + 1e-9

    def test_monotone_in_obstacle_distance(self):
        spec = GridSpec(0.1, 50, 10)
        prev = 0.0
        for col in range(5, 45):
            occ = np.zeros((10, 50), dtype=bool)
            occ[:, col] = True
            d = raycast(spec, lambda i, j: occ[j, i], (0.05, 0.5), 0.0, 10.0)
            assert d is not None and d >= prev
            prev = d


class TestTraverseCells:
    def test_straight_line_visits_every_column(self):
        spec = GridSpec(1.0, 10, 10)
        cells = traverse_cells(spec, (0.5, 0.5), (8.5, 0.5))
        assert cells == [(i, 0) for i in range(9)]

    def test_diagonal_includes_all_crossed_cells(self):
        spec = GridSpec(1.0, 10, 10)
        cells = traverse_cells(spec, (0.5, 0.5), (2.5, 1.5))
        assert set(cells) >= {(0, 0), (1, 0), (1, 1), (2, 1)}


class TestDistanceTransform:
    def test_all_free_is_infinite(self):
        d = distance_transform(np.zeros((8, 8), dtype=bool), 0.1)
        assert np.isinf(d).all()

    def test_single_center_cell(self):
        occ = np.zeros((3, 3), dtype=bool)
        occ[1, 1] = True
        d = distance_transform(occ, 0.5)
        assert d[1, 1] == 0.0
        assert d[0, 0] == pytest.approx(math.sqrt(2) * 0.5)
        assert d[0, 1] == pytest.approx(0.5)

    def test_random_16x16_matches_brute_force(self):
        rng = np.random.default_rng(2)
        occ = rng.random((16, 16)) < 0.2
        got = distance_transform(occ, 0.25)
        want = brute_force_distance_field(occ, 0.25)
        assert np.allclose(got, want, atol=1e-9)

    def test_property_random_masks_up_to_32(self):
        rng = np.random.default_rng(3)
        for _ in range(100):
            h = int(rng.integers(1, 33))
            w = int(rng.integers(1, 33))
            occ = rng.random((h, w)) < rng.uniform(0.02, 0.5)
            res = float(rng.uniform(0.01, 1.0))
            got = distance_transform(occ, res)
            want = brute_force_distance_field(occ, res)
            assert np.allclose(got, want, atol=1e-9, equal_nan=False)


class TestPolyline:
    def test_single_point(self):
        line = Polyline([(1.0, 2.0)])
        assert line.total_length == 0.0
        proj = line.project((4.0, 6.0))
        assert proj.arc_length == 0.0
        assert proj.offset == pytest.approx(5.0)

    def test_arc_length_non_decreasing(self):
        line = Polyline([(0, 0), (1, 0), (1, 1), (3, 1)])
        assert np.all(np.diff(line.arc) >= 0)
        assert line.arc[0] == 0.0

    def test_point_on_vertex(self):
        line = Polyline([(0, 0), (2, 0), (2, 2)])
        proj = line.project((2.0, 0.0))
        assert proj.arc_length == pytest.approx(2.0)
        assert proj.offset == pytest.approx(0.0, abs=1e-12)

    def test_offset_sign_left_positive(self):
        line = Polyline([(0, 0), (2, 0)])
        assert line.project((1.0, 0.5)).offset == pytest.approx(0.5)
        assert line.project((1.0, -0.5)).offset == pytest.approx(-0.5)

    def test_right_angle_matches_dense_sampling(self):
        line = Polyline([(0, 0), (1, 0), (1, 1)])
        p = np.array([1.2, 0.15])
        # Dense 1 mm sampling oracle over the polyline.
        s = np.arange(0, line.total_length + 5e-4, 1e-3)
        pts = np.array([line.point_at(v) for v in s])
        d2 = ((pts - p) ** 2).sum(axis=1)
        i = int(np.argmin(d2))
        proj = line.project(p)
        assert proj.arc_length == pytest.approx(s[i], abs=2e-3)
        assert abs(proj.offset) == pytest.approx(math.sqrt(d2[i]), abs=2e-3)

    def test_projection_monotone_along_line(self):
        rng = np.random.default_rng(4)
        for _ in range(20):
            pts = np.cumsum(rng.uniform(-1, 1, size=(6, 2)), axis=0)
            line = Polyline(pts)
            if line.total_length == 0:
                continue
            ss = np.sort(rng.uniform(0, line.total_length, size=30))
            projected = [line.project(line.point_at(s)).arc_length for s in ss]
            assert all(b >= a - 1e-9 for a, b in zip(projected, projected[1:]))

    def test_project_many_matches_project(self):
        rng = np.random.default_rng(5)
        line = Polyline([(0, 0), (1, 0.5), (2, 0), (2, 2)])
        pts = rng.uniform(-1, 3, size=(50, 2))
        batch = line.project_many(pts)
        single = np.array([line.project(p).arc_length for p in pts])
        assert np.allclose(batch, single, atol=1e-12)
