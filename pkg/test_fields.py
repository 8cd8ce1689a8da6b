"""
Tests for the curvature field catalog and the primitive field Q
"""

import numpy as np
import pytest
from scipy import integrate

from utils.errors import FieldConfigurationError, WrongKind
from utils.fields import (FieldKind, build_field, cell_average, eval_K, eval_Q, eval_Q1, primitive,
                          primitive_jacobian)

CLOSED_FORM_FIELDS = ("constant", "periodic_sine", "periodic_sine_cosine", "gaussian_lobe")


class TestCatalog:
    def test_lists_every_kind(self, catalog):
        assert catalog.get_kinds() == ["constant", "constant_at_infinity", "doubly_periodic"]
        assert {entry.name for entry in catalog.list_entries()} == {
            "constant", "periodic_sine", "periodic_sine_cosine", "gaussian_lobe", "gaussian_dipole"}

    def test_unknown_field(self, catalog):
        with pytest.raises(FieldConfigurationError):
            catalog.build("spiral")

    def test_unknown_parameter(self, catalog):
        with pytest.raises(FieldConfigurationError):
            catalog.build("constant", c=1.0, d=2.0)

    def test_zero_constant_is_rejected(self, catalog):
        with pytest.raises(FieldConfigurationError):
            catalog.build("constant", c=0.0)

    def test_lobe_needs_asymptotic_constant(self, catalog):
        with pytest.raises(FieldConfigurationError):
            catalog.build("gaussian_lobe", k0=0.0)

    def test_bad_period(self, catalog):
        with pytest.raises(FieldConfigurationError):
            catalog.build("periodic_sine", a=-1.0)

    def test_build_from_spec_checks_kind(self, catalog):
        spec = {"kind": "doubly_periodic", "name": "periodic_sine", "params": {"c1": 0.25}}
        fld = catalog.build_from_spec(spec)
        assert fld.params["c1"] == 0.25
        assert fld.spec == {"kind": "doubly_periodic", "name": "periodic_sine",
                            "params": {"c0": 1.0, "c1": 0.25, "a": 1.0, "b": 1.0}}
        with pytest.raises(FieldConfigurationError):
            catalog.build_from_spec({"kind": "constant", "name": "periodic_sine"})

    def test_sup_norms(self, catalog_fields):
        assert catalog_fields["constant"].sup_norm == 1.0
        assert catalog_fields["periodic_sine"].sup_norm == 1.5
        assert catalog_fields["gaussian_lobe"].sup_norm == 1.5

    def test_kinds(self, catalog_fields):
        assert catalog_fields["constant"].kind is FieldKind.CONSTANT
        assert catalog_fields["periodic_sine_cosine"].kind is FieldKind.DOUBLY_PERIODIC
        assert catalog_fields["gaussian_dipole"].kind is FieldKind.CONSTANT_AT_INFINITY

    def test_lobe_has_favorable_center(self, lobe_field):
        assert lobe_field.favorable_center == (3.0, 0.0)


class TestEvaluation:
    def test_periodic_value(self, periodic_field):
        assert eval_K(periodic_field, (0.25, 0.25)) == pytest.approx(1.5, abs=1e-12)

    def test_periodicity(self, periodic_field):
        rng = np.random.default_rng(3)
        x, y = rng.uniform(-5, 5, size=(2, 200))
        assert np.allclose(periodic_field.k(x + 1.0, y), periodic_field.k(x, y), atol=1e-12)
        assert np.allclose(periodic_field.k(x, y - 3.0), periodic_field.k(x, y), atol=1e-12)

    def test_lobe_peak(self, lobe_field):
        assert eval_K(lobe_field, (3.0, 0.0)) == pytest.approx(1.5)
        assert eval_K(lobe_field, (300.0, 0.0)) == pytest.approx(1.0)

    @pytest.mark.parametrize("name", ["periodic_sine", "gaussian_lobe", "gaussian_dipole"])
    def test_analytic_gradient(self, catalog_fields, name):
        fld = catalog_fields[name]
        rng = np.random.default_rng(11)
        x, y = rng.uniform(-2, 4, size=(2, 50))
        kx, ky = fld.k_gradient(x, y)
        h = 1e-6
        assert np.allclose(kx, (fld.k(x + h, y) - fld.k(x - h, y)) / (2 * h), atol=1e-6)
        assert np.allclose(ky, (fld.k(x, y + h) - fld.k(x, y - h)) / (2 * h), atol=1e-6)


class TestPrimitive:
    def test_constant_field(self, unit_field):
        assert np.allclose(eval_Q(unit_field, (0.7, -1.3)), [0.35, -0.65], atol=1e-12)

    def test_origin_is_zero(self, catalog_fields):
        for fld in catalog_fields.values():
            assert np.allclose(eval_Q(fld, (0.0, 0.0)), 0.0, atol=1e-14)

    def test_against_simpson(self, periodic_field):
        x, y = 0.5, 0.25
        s = np.linspace(0.0, 1.0, 10_001)
        expected = 0.5 * np.array([
            integrate.simpson(periodic_field.k(s * x, y) * x, x=s),
            integrate.simpson(periodic_field.k(x, s * y) * y, x=s),
        ])
        assert np.allclose(eval_Q(periodic_field, (x, y)), expected, atol=1e-8)

    @pytest.mark.parametrize("name", CLOSED_FORM_FIELDS)
    def test_closed_form_matches_quadrature(self, catalog_fields, name):
        fld = catalog_fields[name]
        rng = np.random.default_rng(5)
        points = rng.uniform(-4, 4, size=(40, 2))
        assert np.allclose(primitive(fld, points), primitive(fld, points, method="quadrature"), atol=1e-8)

    @pytest.mark.parametrize("name", CLOSED_FORM_FIELDS)
    def test_divergence_recovers_field(self, catalog_fields, name):
        fld = catalog_fields[name]
        rng = np.random.default_rng(17)
        points = rng.uniform(-5, 5, size=(1000, 2))
        h = 1e-4
        dx, dy = np.array([h, 0.0]), np.array([0.0, h])
        div = ((primitive(fld, points + dx)[:, 0] - primitive(fld, points - dx)[:, 0])
               + (primitive(fld, points + dy)[:, 1] - primitive(fld, points - dy)[:, 1])) / (2 * h)
        k = fld.k_at(points)
        assert np.max(np.abs(div - k) / np.maximum(1.0, np.abs(k))) < 1e-5

    def test_divergence_by_quadrature(self, catalog_fields):
        fld = catalog_fields["gaussian_dipole"]
        rng = np.random.default_rng(19)
        points = rng.uniform(-2, 2, size=(30, 2))
        h = 1e-3
        dx, dy = np.array([h, 0.0]), np.array([0.0, h])
        div = ((primitive(fld, points + dx)[:, 0] - primitive(fld, points - dx)[:, 0])
               + (primitive(fld, points + dy)[:, 1] - primitive(fld, points - dy)[:, 1])) / (2 * h)
        k = fld.k_at(points)
        assert np.max(np.abs(div - k) / np.maximum(1.0, np.abs(k))) < 1e-5

    def test_jacobian_cross_terms(self, periodic_field):
        rng = np.random.default_rng(23)
        points = rng.uniform(-1, 1, size=(20, 2))
        _, jac = primitive_jacobian(periodic_field, points)
        h = 1e-6
        dq1_dy = (primitive(periodic_field, points + [0.0, h])[:, 0]
                  - primitive(periodic_field, points - [0.0, h])[:, 0]) / (2 * h)
        assert np.allclose(jac[:, 0, 1], dq1_dy, atol=1e-6)
        assert np.allclose(jac[:, 0, 0], 0.5 * periodic_field.k_at(points))

    def test_quadrature_jacobian_matches_closed_form(self, lobe_field):
        points = np.array([[0.5, 0.2], [3.1, -0.4], [-1.0, 2.0]])
        q_closed, jac_closed = primitive_jacobian(lobe_field, points)
        q_quad, jac_quad = primitive_jacobian(lobe_field, points, method="quadrature")
        assert np.allclose(q_closed, q_quad, atol=1e-8)
        assert np.allclose(jac_closed, jac_quad, atol=1e-8)


class TestDecayingPart:
    def test_settles_far_from_lobe(self, lobe_field):
        near, far = eval_Q1(lobe_field, (12.0, 0.0)), eval_Q1(lobe_field, (14.0, 0.0))
        assert abs(far[0] - near[0]) / 2.0 < 1e-6

    def test_periodic_field_has_no_decaying_part(self, periodic_field):
        with pytest.raises(WrongKind):
            eval_Q1(periodic_field, (1.0, 1.0))

    @pytest.mark.parametrize("name", ["gaussian_lobe", "gaussian_dipole"])
    def test_divergence_is_decaying_part(self, catalog_fields, name):
        fld = catalog_fields[name]
        rng = np.random.default_rng(7)
        h = 1e-3
        for x, y in zip(rng.uniform(-3.0, 6.0, 100), rng.uniform(-3.0, 3.0, 100)):
            dq1_dx = (eval_Q1(fld, (x + h, y))[0] - eval_Q1(fld, (x - h, y))[0]) / (2 * h)
            dq2_dy = (eval_Q1(fld, (x, y + h))[1] - eval_Q1(fld, (x, y - h))[1]) / (2 * h)
            assert dq1_dx + dq2_dy == pytest.approx(eval_K(fld, (x, y)) - fld.k0, abs=1e-4)

    def test_flat_field_has_zero_decaying_primitive(self):
        fld = build_field("gaussian_lobe", amplitude=0.0)
        assert np.array_equal(eval_Q1(fld, (1.5, -0.7)), [0.0, 0.0])


class TestCellAverage:
    def test_periodic(self, periodic_field, catalog_fields):
        assert cell_average(periodic_field) == pytest.approx(1.0, abs=1e-8)
        assert cell_average(catalog_fields["periodic_sine_cosine"]) == pytest.approx(1.0, abs=1e-8)

    def test_shifted_mean(self):
        fld = build_field("periodic_sine", c0=-0.5, a=2.0, b=0.5)
        assert cell_average(fld) == pytest.approx(-0.5, abs=1e-8)
        assert fld.cell_average == pytest.approx(-0.5, abs=1e-8)

    def test_constant(self, unit_field):
        assert cell_average(unit_field) == 1.0

    def test_needs_periodic_field(self, lobe_field):
        with pytest.raises(WrongKind):
            cell_average(lobe_field)
