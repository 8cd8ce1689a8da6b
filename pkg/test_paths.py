"""
Tests for the initial path constructors
"""

import numpy as np
import pytest

from components.functional import energy_value, g_line, level_lower_bound, well_length
from components.paths import (PathFamily, circle_loop, crossing_loop, initial_path, initial_path_bump,
                              initial_path_k4, initial_path_periodic, lambda_interval, node_energies, path_max,
                              rectangle_loop, resolve_constructor, segment_peak)
from utils.errors import ConfigurationError, NoBumpFound, WrongKind, ZeroAverage
from utils.fields import build_field
from utils.loopgeom import curvature, length_energy


def scaling_path(shape, count=16):
    return PathFamily(nodes=tuple(shape.scaled(s) for s in np.linspace(0.0, 1.0, count)),
                      lambda_context=1.0, endpoint_energy=0.0)


class TestLoops:
    def test_rectangle_starts_at_origin(self):
        u = rectangle_loop(3, 1.0, 2.0)
        assert np.array_equal(u.samples[0], [0.0, 0.0])
        assert u.is_polygonal
        assert np.allclose(np.max(u.samples, axis=0), [3.0, 6.0])

    def test_rectangle_orientation(self, unit_field):
        assert g_line(rectangle_loop(1, 1.0, 1.0, -1), unit_field) == pytest.approx(1.0, abs=1e-12)

    def test_rectangle_arguments(self):
        with pytest.raises(ValueError):
            rectangle_loop(0, 1.0, 1.0)
        with pytest.raises(ValueError):
            rectangle_loop(1, 1.0, 1.0, orientation=2)

    def test_circle(self):
        u = circle_loop(2.0, (1.0, 1.0), j=-1)
        assert length_energy(u) == pytest.approx(4 * np.pi)
        assert np.allclose(curvature(u), -0.5)

    def test_circle_arguments(self):
        with pytest.raises(ValueError):
            circle_loop(-1.0)
        with pytest.raises(ValueError):
            circle_loop(1.0, j=0)


class TestPathFamily:
    def test_needs_zero_start(self):
        loops = tuple(circle_loop(1.0 + s) for s in np.linspace(0.0, 1.0, 16))
        with pytest.raises(ValueError):
            PathFamily(nodes=loops, lambda_context=1.0, endpoint_energy=0.0)

    def test_needs_enough_nodes(self):
        with pytest.raises(ValueError):
            scaling_path(circle_loop(1.0), count=8)

    def test_parameters(self):
        path = scaling_path(circle_loop(1.0))
        assert path.size == 16
        assert path.parameters[-1] == 1.0
        assert path.lambda_range == (1.0, 1.0)
        assert path.labels == ("path",) * 16

    def test_lambda_interval(self):
        assert lambda_interval(2.0) == (2.0, 2.0)
        assert lambda_interval((3.0, 0.5)) == (0.5, 3.0)
        with pytest.raises(ValueError):
            lambda_interval((-1.0, 1.0))


class TestPathMax:
    def test_ties_take_smallest_parameter(self, unit_field):
        path = PathFamily(nodes=tuple(circle_loop(1.0).scaled(0.0) for _ in range(16)),
                          lambda_context=1.0, endpoint_energy=0.0)
        s, value, _ = path_max(path, unit_field, 1.0)
        assert s == 0.0
        assert value == 0.0

    def test_monotone_path_peaks_at_end(self, unit_field):
        s, value, loop = path_max(scaling_path(circle_loop(0.5)), unit_field, 1.0)
        assert s == 1.0
        assert value == pytest.approx(np.pi - 0.25 * np.pi)
        assert loop is not None

    def test_segment_peak(self, unit_field):
        theta, value = segment_peak(circle_loop(0.5), circle_loop(1.5), unit_field, 1.0)
        assert theta == pytest.approx(0.5, abs=1e-5)
        assert value == pytest.approx(np.pi, abs=1e-9)

    def test_segment_peak_at_endpoint(self, unit_field):
        theta, value = segment_peak(circle_loop(0.2), circle_loop(0.5), unit_field, 1.0)
        assert value == pytest.approx(energy_value(circle_loop(0.5), unit_field, 1.0), abs=1e-9)
        assert theta == pytest.approx(1.0, abs=1e-5)


class TestPeriodicPath:
    def test_order_for_unit_field(self, unit_field):
        path = initial_path_periodic(unit_field, (0.8, 1.2))
        assert path.meta["order"] == 6
        assert path.meta["orientation"] == 1
        assert path.endpoint_energy < 0
        assert path.constructor == "periodic"

    def test_endpoint_energy_negative_over_range(self, periodic_field):
        path = initial_path_periodic(periodic_field, (0.5, 2.0))
        for lam in (0.5, 1.0, 2.0):
            assert energy_value(path.end, periodic_field, lam) < 0
            assert length_energy(path.end) > well_length(periodic_field, lam)

    def test_negative_average_reverses(self):
        fld = build_field("periodic_sine", c0=-1.0)
        path = initial_path_periodic(fld, 1.0)
        assert path.meta["orientation"] == -1
        assert energy_value(path.end, fld, 1.0) < 0

    def test_zero_average(self):
        with pytest.raises(ZeroAverage):
            initial_path_periodic(build_field("periodic_sine", c0=0.0), 1.0)

    def test_needs_periodic_field(self, lobe_field):
        with pytest.raises(WrongKind):
            initial_path_periodic(lobe_field, 1.0)

    def test_crossing_node_clears_the_well(self, periodic_field):
        lam = 1.0
        path = initial_path_periodic(periodic_field, lam)
        crossing = crossing_loop(path.end, periodic_field, lam)
        assert length_energy(crossing) == pytest.approx(well_length(periodic_field, lam))
        assert energy_value(crossing, periodic_field, lam) >= level_lower_bound(periodic_field, lam) - 1e-9

    def test_no_crossing_inside_well(self, unit_field):
        assert crossing_loop(circle_loop(0.5), unit_field, 1.0) is None


class TestBumpPath:
    def test_unit_field(self, unit_field):
        path = initial_path_bump(unit_field, 1.0)
        assert path.meta["radius"] == pytest.approx(5.0)
        assert path.endpoint_energy == pytest.approx(10 * np.pi - 25 * np.pi, abs=1e-9)
        assert path.constructor == "bump"

    def test_zero_average_field(self):
        fld = build_field("periodic_sine", c0=0.0)
        path = initial_path(fld, 100.0)
        assert path.constructor == "bump"
        assert path.meta["center"] == pytest.approx([0.25, 0.25])
        energies = node_energies(path, fld, 100.0)
        assert energies[-1] < 0
        approach = [k for k, label in enumerate(path.labels) if label == "approach"]
        assert approach
        assert np.allclose(energies[approach], 0.0, atol=1e-12)

    def test_no_favorable_point(self):
        with pytest.raises(NoBumpFound):
            initial_path_bump(build_field("constant", c=1.0), -1.0)

    def test_single_lambda_only(self, unit_field):
        with pytest.raises(ConfigurationError):
            initial_path(unit_field, (1.0, 2.0), constructor="bump")


class TestFarFieldPath:
    def test_unit_field_peak(self, unit_field):
        path = initial_path_k4(unit_field, 1.0)
        assert path.constructor == "k4"
        assert path.endpoint_energy < 0
        s, value, _ = path_max(path, unit_field, 1.0)
        assert value == pytest.approx(np.pi, abs=1e-3)

    def test_negative_lambda_uses_clockwise_circles(self, unit_field):
        path = initial_path_k4(unit_field, -1.0)
        assert np.allclose(curvature(path.end), -1.0 / path.meta["r0"])
        assert energy_value(path.end, unit_field, -1.0) < 0

    def test_lobe_routes_through_favorable_center(self, lobe_field):
        lam = 1.0
        path = initial_path(lobe_field, lam)
        assert path.constructor == "k4"
        assert path.meta["start_center"] == [3.0, 0.0]
        assert set(path.labels) == {"approach", "growth", "transfer"}
        energies = node_energies(path, lobe_field, lam)
        assert np.max(energies) < 0.99 * np.pi
        transfer = [k for k, label in enumerate(path.labels) if label == "transfer"]
        assert np.all(energies[transfer] < 0)

    def test_needs_constant_at_infinity(self, periodic_field):
        with pytest.raises(WrongKind):
            initial_path_k4(periodic_field, 1.0)

    def test_auto_picks_constructor(self, unit_field, periodic_field):
        assert initial_path(unit_field, 1.0).constructor == "k4"
        assert initial_path(periodic_field, 1.0).constructor == "periodic"
        with pytest.raises(ConfigurationError):
            initial_path(unit_field, 1.0, constructor="spiral")

    def test_auto_resolves_to_bump_for_zero_average(self):
        fld = build_field("periodic_sine", c0=0.0)
        assert resolve_constructor(fld) == "bump"
        assert resolve_constructor(fld, "periodic") == "periodic"
        assert initial_path(fld, 50.0).constructor == "bump"
