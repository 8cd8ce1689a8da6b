"""
Tests for the discrete loop geometry
"""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from components.paths import circle_loop, rectangle_loop
from utils.errors import DegenerateSpeed
from utils.loopgeom import (Interpolation, LoopCurve, arc_gaps, arc_length, barycenter, constant_loop, curvature,
                            dual_norm_of, h1_inner, h1_norm, h1_weights, length_energy, loop_metrics,
                            normalize_to_cell, reparametrize_uniform, riesz_representative, sample_loop)

seeds = st.integers(min_value=0, max_value=10_000)
offsets = st.floats(min_value=-50.0, max_value=50.0, allow_nan=False)


class TestLoopCurve:
    def test_rejects_short_loops(self):
        with pytest.raises(ValueError):
            LoopCurve(np.zeros((8, 2)))

    def test_rejects_non_finite_samples(self):
        samples = np.zeros((32, 2))
        samples[3, 1] = np.nan
        with pytest.raises(ValueError):
            LoopCurve(samples)

    def test_samples_are_read_only(self):
        u = circle_loop(1.0)
        with pytest.raises(ValueError):
            u.samples[0, 0] = 5.0

    def test_reversed_keeps_start_node(self):
        u = circle_loop(1.0, points=64)
        back = u.reversed()
        assert np.array_equal(back.samples[0], u.samples[0])
        assert np.allclose(back.samples[1], u.samples[-1])

    def test_blend_endpoints(self):
        u = circle_loop(1.0, points=64)
        v = circle_loop(2.0, (1.0, 0.0), points=64)
        assert np.allclose(u.blend(v, 0.0).samples, u.samples)
        assert np.allclose(u.blend(v, 1.0).samples, v.samples)

    def test_blend_needs_matching_sizes(self):
        with pytest.raises(ValueError):
            circle_loop(1.0, points=64).blend(circle_loop(1.0, points=32), 0.5)


class TestLength:
    def test_unit_circle(self):
        assert length_energy(circle_loop(1.0)) == pytest.approx(2 * np.pi, rel=1e-12)

    def test_unit_square(self):
        assert length_energy(rectangle_loop(1, 1.0, 1.0)) == pytest.approx(4.0, abs=1e-9)

    def test_rectangle_with_corners_on_nodes(self):
        u = rectangle_loop(2, 1.0, 2.0, points=240)
        assert length_energy(u) == pytest.approx(12.0, abs=1e-9)
        assert arc_length(u) == pytest.approx(12.0, abs=1e-9)

    def test_constant_loop_has_zero_length(self):
        u = constant_loop((3.0, -1.0))
        assert length_energy(u) == 0.0
        assert arc_length(u) == 0.0

    def test_length_dominates_arc_length(self, random_loop):
        for seed in range(20):
            u = random_loop(seed)
            assert arc_length(u) <= length_energy(u) * (1 + 1e-12)

    @settings(max_examples=50, deadline=None)
    @given(seed=seeds, dx=offsets, dy=offsets)
    def test_translation_invariance(self, random_loop, seed, dx, dy):
        u = random_loop(seed)
        moved = u.translated((dx, dy))
        assert length_energy(moved) == pytest.approx(length_energy(u), rel=1e-9)
        assert np.allclose(curvature(moved), curvature(u), rtol=1e-6, atol=1e-6)

    @settings(max_examples=50, deadline=None)
    @given(seed=seeds, scale=st.floats(min_value=0.01, max_value=100.0))
    def test_scaling_is_homogeneous(self, random_loop, seed, scale):
        u = random_loop(seed)
        assert length_energy(u.scaled(scale)) == pytest.approx(scale * length_energy(u), rel=1e-9)

    @settings(max_examples=50, deadline=None)
    @given(seed=seeds)
    def test_reversal_flips_curvature(self, random_loop, seed):
        u = random_loop(seed)
        back = u.reversed()
        assert length_energy(back) == pytest.approx(length_energy(u), rel=1e-12)
        order = (-np.arange(u.n)) % u.n
        assert np.allclose(curvature(back), -curvature(u)[order], rtol=1e-8, atol=1e-8)


class TestBarycenter:
    def test_unit_square(self):
        assert np.allclose(barycenter(rectangle_loop(1, 1.0, 1.0)), [0.5, 0.5], atol=1e-9)

    def test_shifted_circle(self):
        assert np.allclose(barycenter(circle_loop(1.0, (2.0, -1.0))), [2.0, -1.0], atol=1e-12)

    def test_metrics(self):
        metrics = loop_metrics(circle_loop(1.0, (2.0, -1.0))).to_dict()
        assert set(metrics) == {"length_energy", "barycenter", "h1_norm", "arc_length"}
        assert metrics["barycenter"] == pytest.approx([2.0, -1.0], abs=1e-12)


class TestCurvature:
    def test_circle(self):
        assert np.allclose(curvature(circle_loop(0.5)), 2.0, atol=1e-9)
        assert np.allclose(curvature(circle_loop(0.5, j=-1)), -2.0, atol=1e-9)

    def test_ellipse(self):
        a, b = 2.0, 1.0
        u = sample_loop(lambda t: np.column_stack([a * np.cos(2 * np.pi * t), b * np.sin(2 * np.pi * t)]), 512)
        theta = 2 * np.pi * u.parameters
        exact = a * b / (a ** 2 * np.sin(theta) ** 2 + b ** 2 * np.cos(theta) ** 2) ** 1.5
        assert np.max(np.abs(curvature(u) - exact)) < 1e-3

    def test_constant_loop_is_degenerate(self):
        with pytest.raises(DegenerateSpeed):
            curvature(constant_loop())


class TestNormalizeToCell:
    def test_circle(self):
        u = normalize_to_cell(circle_loop(0.2, (2.3, -0.7)), 1.0, 1.0)
        assert np.allclose(barycenter(u), [0.3, 0.3], atol=1e-12)

    def test_barycenter_on_cell_boundary(self):
        square = rectangle_loop(1, 1.0, 1.0).translated((4.5, 0.0))
        u = normalize_to_cell(square, 1.0, 1.0)
        assert barycenter(u)[0] == pytest.approx(0.0, abs=1e-12)
        assert barycenter(u)[1] == pytest.approx(0.5, abs=1e-12)

    def test_inside_cell_is_untouched(self):
        u = circle_loop(0.1, (0.5, 0.5))
        assert normalize_to_cell(u, 1.0, 1.0) is u

    def test_rejects_bad_periods(self):
        with pytest.raises(ValueError):
            normalize_to_cell(circle_loop(1.0), 0.0, 1.0)

    @given(x=offsets, y=offsets)
    @settings(max_examples=50, deadline=None)
    def test_idempotent(self, x, y):
        once = normalize_to_cell(circle_loop(0.2, (x, y), points=64), 1.0, 2.0)
        assert normalize_to_cell(once, 1.0, 2.0) is once
        center = barycenter(once)
        assert 0.0 <= center[0] < 1.0
        assert 0.0 <= center[1] < 2.0

    def test_pure_lattice_translation(self):
        edge = np.arange(4) / 4.0
        side = np.zeros(4)
        square = np.concatenate([np.column_stack([edge, side]), np.column_stack([side + 1.0, edge]),
                                 np.column_stack([1.0 - edge, side + 1.0]), np.column_stack([side, 1.0 - edge])])
        u = LoopCurve(square + [3.25, -1.25], Interpolation.POLYGONAL)
        v = normalize_to_cell(u, 1.0, 1.0)
        assert np.array_equal(v.samples, u.samples - [3.0, -1.0])
        assert np.array_equal(v.samples, square + [0.25, -0.25])
        assert length_energy(v) == length_energy(u)
        assert arc_length(v) == arc_length(u)
        assert v.interpolation is Interpolation.POLYGONAL

    def test_smooth_loop_keeps_shape(self):
        u = circle_loop(0.4, (-12.6, 7.3))
        v = normalize_to_cell(u, 1.0, 1.0)
        assert length_energy(v) == pytest.approx(length_energy(u), rel=1e-12)
        assert np.allclose(curvature(v), curvature(u), atol=1e-9)


class TestReparametrize:
    def test_uniform_circle_is_fixed(self):
        u = circle_loop(1.0)
        assert np.allclose(reparametrize_uniform(u).samples, u.samples, atol=1e-9)

    def test_slanted_circle(self):
        u = sample_loop(lambda t: np.column_stack([
            np.cos(2 * np.pi * (t + 0.2 * np.sin(2 * np.pi * t))),
            np.sin(2 * np.pi * (t + 0.2 * np.sin(2 * np.pi * t))),
        ]))
        v = reparametrize_uniform(u)
        assert length_energy(v) == pytest.approx(2 * np.pi, abs=1e-3)
        gaps = arc_gaps(v)
        assert np.max(np.abs(gaps / np.mean(gaps) - 1.0)) < 1e-3

    def test_clustered_polygon(self):
        theta = lambda t: 2 * np.pi * (t + 0.1 * np.sin(2 * np.pi * t))
        u = sample_loop(lambda t: np.column_stack([np.cos(theta(t)), np.sin(theta(t))]),
                        interpolation=Interpolation.POLYGONAL)
        gaps = arc_gaps(reparametrize_uniform(u))
        assert np.max(np.abs(gaps / np.mean(gaps) - 1.0)) < 0.01

    def test_keeps_interpolation(self):
        u = rectangle_loop(1, 1.0, 1.0)
        assert reparametrize_uniform(u).interpolation is Interpolation.POLYGONAL

    def test_constant_loop_is_degenerate(self):
        with pytest.raises(DegenerateSpeed):
            reparametrize_uniform(constant_loop())


class TestH1:
    @pytest.mark.parametrize("interpolation", list(Interpolation))
    def test_weights_never_vanish(self, interpolation):
        weights = h1_weights(64, interpolation)
        assert np.all(weights > 0)
        assert weights[0] == 1.0
        assert weights[32] == pytest.approx((np.pi * 64) ** 2 if interpolation is Interpolation.TRIGONOMETRIC
                                            else 4.0 * 64 ** 2)

    def test_norm_splits_into_length_and_mean(self, random_loop):
        for seed in range(10):
            u = random_loop(seed)
            expected = length_energy(u) ** 2 + float(np.sum(barycenter(u) ** 2))
            assert h1_norm(u) ** 2 == pytest.approx(expected, rel=1e-10)

    @pytest.mark.parametrize("interpolation", list(Interpolation))
    def test_riesz_representative(self, interpolation):
        rng = np.random.default_rng(7)
        covector = rng.normal(size=(64, 2))
        direction = rng.normal(size=(64, 2))
        g = riesz_representative(covector, interpolation)
        assert h1_inner(g, direction, interpolation) == pytest.approx(float(np.sum(covector * direction)), rel=1e-10)
        assert h1_inner(g, g, interpolation) == pytest.approx(dual_norm_of(covector, interpolation) ** 2, rel=1e-10)

    def test_polygonal_weights_match_differences(self):
        u = rectangle_loop(1, 1.0, 1.0, points=64)
        expected = length_energy(u) ** 2 + float(np.sum(barycenter(u) ** 2))
        assert h1_norm(u) ** 2 == pytest.approx(expected, rel=1e-10)
