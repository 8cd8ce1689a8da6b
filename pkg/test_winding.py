"""
Tests for winding numbers and index maps
"""

import numpy as np
import pytest

from components.paths import circle_loop, rectangle_loop
from utils.errors import TooCloseToCurve
from utils.loopgeom import arc_length, constant_loop, reparametrize_uniform, sample_loop
from utils.loop_io import write_index_map
from utils.winding import (abs_index_area, distance_to_polyline, index_map, perturb_generic, point_index,
                           resolved_index_map)


def lemniscate(points: int = 256):
    """Figure eight: right lobe counterclockwise, left lobe clockwise"""
    return sample_loop(lambda t: np.column_stack([np.cos(2 * np.pi * t), 0.5 * np.sin(4 * np.pi * t)]), points)


def nearest_cell(grid, z):
    xs, ys = grid.centers()
    flat = np.argmin((xs - z[0]) ** 2 + (ys - z[1]) ** 2)
    return np.unravel_index(flat, xs.shape), (xs.ravel()[flat], ys.ravel()[flat])


class TestPointIndex:
    def test_circle(self):
        u = circle_loop(1.0)
        assert point_index(u, (0.0, 0.0)) == 1
        assert point_index(u, (2.0, 0.0)) == 0
        assert point_index(u.reversed(), (0.0, 0.0)) == -1

    def test_double_circle(self):
        assert point_index(circle_loop(1.0, j=2), (0.1, -0.2)) == 2

    def test_lemniscate_lobes(self):
        u = lemniscate()
        assert point_index(u, (0.6, 0.0)) == 1
        assert point_index(u, (-0.6, 0.0)) == -1
        assert point_index(u, (0.0, 0.4)) == 0

    def test_point_on_curve(self):
        u = circle_loop(1.0)
        with pytest.raises(TooCloseToCurve):
            point_index(u, u.samples[5])

    def test_constant_loop(self):
        assert point_index(constant_loop((1.0, 1.0)), (0.0, 0.0)) == 0

    def test_reparametrization_keeps_index(self):
        u = sample_loop(lambda t: np.column_stack([
            np.cos(2 * np.pi * (t + 0.2 * np.sin(2 * np.pi * t))),
            np.sin(2 * np.pi * (t + 0.2 * np.sin(2 * np.pi * t))),
        ]))
        v = reparametrize_uniform(u)
        for z in [(0.0, 0.0), (0.5, 0.3), (1.5, 0.0), (-0.2, -0.9)]:
            assert point_index(v, z) == point_index(u, z)

    def test_distance(self):
        u = rectangle_loop(1, 1.0, 1.0)
        assert distance_to_polyline(u, np.array([[0.5, 0.25], [2.0, 0.5]])) == pytest.approx([0.25, 1.0])


class TestIndexMap:
    def test_circle(self):
        grid = index_map(circle_loop(1.0))
        (row, col), _ = nearest_cell(grid, (0.0, 0.0))
        assert grid.indices[row, col] == 1
        assert grid.indices[0, 0] == 0
        assert grid.indices[-1, -1] == 0
        assert grid.ambiguous_count == 0
        assert grid.near_curve_count > 0

    def test_reversal_negates(self):
        u = circle_loop(1.0, (0.3, -0.2))
        assert np.array_equal(index_map(u.reversed()).indices, -index_map(u).indices)

    def test_lemniscate_matches_point_index(self):
        u = lemniscate()
        grid = index_map(u)
        for z, expected in [((0.6, 0.0), 1), ((-0.6, 0.0), -1)]:
            (row, col), center = nearest_cell(grid, z)
            assert grid.indices[row, col] == expected
            assert point_index(u, center) == expected

    def test_agrees_with_point_index_off_the_band(self, random_loop):
        u = random_loop(4)
        grid = index_map(u, resolution=128)
        xs, ys = grid.centers()
        rng = np.random.default_rng(0)
        rows, cols = np.nonzero(~grid.near_curve)
        for k in rng.choice(rows.size, size=100, replace=False):
            row, col = rows[k], cols[k]
            assert grid.indices[row, col] == point_index(u, (xs[row, col], ys[row, col]))

    def test_constant_loop(self):
        grid = index_map(constant_loop((1.0, 2.0)), resolution=64)
        assert not np.any(grid.indices)

    def test_resolution_floor(self):
        with pytest.raises(ValueError):
            index_map(circle_loop(1.0), resolution=16)

    def test_resolved_map(self):
        grid = resolved_index_map(rectangle_loop(1, 1.0, 1.0))
        assert grid.ambiguous_count == 0
        assert grid.resolution == 512

    def test_export(self, tmp_path):
        grid = index_map(circle_loop(1.0, j=-1), resolution=64)
        pgm = write_index_map(grid, tmp_path / "circle_index")
        lines = pgm.read_text().splitlines()
        assert lines[:3] == ["P2", "64 64", "1"]
        assert (tmp_path / "circle_index.json").exists()


class TestAreas:
    def test_circle(self):
        assert abs_index_area(circle_loop(1.0)) == pytest.approx(np.pi, abs=2e-3)

    def test_double_circle(self):
        assert abs_index_area(circle_loop(1.0, j=2)) == pytest.approx(2 * np.pi, abs=5e-3)

    def test_unit_square(self):
        assert abs_index_area(rectangle_loop(1, 1.0, 1.0)) == pytest.approx(1.0, abs=2e-3)

    def test_isoperimetric_bound(self, random_loop):
        for seed in range(10):
            u = random_loop(seed)
            grid = index_map(u)
            area = float(np.sum(np.abs(grid.indices)) * grid.cell_area)
            assert area <= arc_length(u) ** 2 / (4 * np.pi) + 10 * grid.cell_area


class TestPerturbGeneric:
    def test_deterministic(self):
        u = circle_loop(1.0)
        assert np.array_equal(perturb_generic(u, 3).samples, perturb_generic(u, 3).samples)
        assert not np.array_equal(perturb_generic(u, 3).samples, perturb_generic(u, 4).samples)

    def test_small(self):
        u = circle_loop(1.0)
        shift = perturb_generic(u, 0).samples - u.samples
        assert np.max(np.hypot(shift[:, 0], shift[:, 1])) <= 1e-9 * arc_length(u)
