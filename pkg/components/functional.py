"""
Energy Functional
G(u) = int Q(u) . i u' dt, E(u) = L(u) + lambda G(u), and the H1 gradient of E
"""

import logging
from dataclasses import dataclass
from typing import NamedTuple, Optional, Tuple

import numpy as np
from scipy import special

from utils.errors import NearConstantLoop
from utils.fields import CurvatureField, FieldKind, primitive, primitive_jacobian
from utils.loopgeom import (LoopCurve, arc_length, dual_norm_of, h1_inner, length_energy,
                            riesz_representative, rotate, spectral_derivative)
from utils.winding import DEFAULT_RESOLUTION, index_weighted_integral

logger = logging.getLogger(__name__)

MIN_LENGTH = 1e-6
ISO_TOLERANCE = 1e-6
SEGMENT_NODES = 4

_gl_nodes, _gl_weights = special.roots_legendre(SEGMENT_NODES)
SEGMENT_TAU = 0.5 * (_gl_nodes + 1.0)
SEGMENT_WEIGHTS = 0.5 * _gl_weights


@dataclass
class EnergyReport:
    """Energy of one loop at one lambda"""
    length_energy: float
    g_value: float
    energy: float
    lam: float
    iso_bound: float
    iso_satisfied: bool

    def to_dict(self) -> dict:
        return {
            "length_energy": self.length_energy,
            "g_value": self.g_value,
            "energy": self.energy,
            "lambda": self.lam,
            "iso_bound": self.iso_bound,
            "iso_satisfied": self.iso_satisfied,
        }


@dataclass
class GradientField:
    """Riesz representative of E'(u) in the discrete H1 inner product"""
    values: np.ndarray
    dual_norm: float
    energy: float


class IsoCheck(NamedTuple):
    satisfied: bool
    slack: float


def _segment_points(u: LoopCurve) -> Tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre points on every chord of the polyline, shape (N, q, 2)"""
    chords = np.roll(u.samples, -1, axis=0) - u.samples
    points = u.samples[:, None, :] + SEGMENT_TAU[None, :, None] * chords[:, None, :]
    return points, chords


def g_line(u: LoopCurve, field: CurvatureField) -> float:
    """Line integral of the primitive field along the loop"""
    if u.is_polygonal:
        points, chords = _segment_points(u)
        q = primitive(field, points.reshape(-1, 2)).reshape(points.shape)
        q_bar = np.einsum("q,kqi->ki", SEGMENT_WEIGHTS, q)
        return float(np.sum(q_bar * rotate(chords)))
    q = primitive(field, u.samples)
    du = spectral_derivative(u.samples)
    return float(np.mean(np.sum(q * rotate(du), axis=1)))


def signed_area_form(u: LoopCurve) -> float:
    """G for K = 1, i.e. minus the index-weighted area enclosed"""
    if u.is_polygonal:
        chords = np.roll(u.samples, -1, axis=0) - u.samples
        midpoints = u.samples + 0.5 * chords
        return float(np.sum(0.5 * midpoints * rotate(chords)))
    du = spectral_derivative(u.samples)
    return float(np.mean(np.sum(0.5 * u.samples * rotate(du), axis=1)))


def g_split(u: LoopCurve, field: CurvatureField) -> Tuple[float, float]:
    """(K0 part, decaying part) of G for fields with an asymptotic constant"""
    if field.k0 is None:
        raise ValueError(f"Field '{field.name}' has no asymptotic constant")
    g0 = field.k0 * signed_area_form(u)
    return g0, g_line(u, field) - g0


def g_winding(u: LoopCurve, field: CurvatureField, resolution: int = DEFAULT_RESOLUTION) -> float:
    """G = - integral of Ind_u K over the plane, on a grid"""
    return -index_weighted_integral(u, field.k, resolution)


def energy_value(u: LoopCurve, field: CurvatureField, lam: float) -> float:
    """E(u) = L(u) + lambda G(u)"""
    return length_energy(u) + lam * g_line(u, field)


def energy(u: LoopCurve, field: CurvatureField, lam: float) -> EnergyReport:
    """E with its length and G parts"""
    length = length_energy(u)
    g_value = g_line(u, field)
    iso_bound = field.sup_norm * length ** 2 / (4 * np.pi)
    return EnergyReport(
        length_energy=length,
        g_value=g_value,
        energy=length + lam * g_value,
        lam=float(lam),
        iso_bound=float(iso_bound),
        iso_satisfied=bool(abs(g_value) <= iso_bound + ISO_TOLERANCE),
    )


def _covector_trigonometric(u: LoopCurve, field: CurvatureField, lam: float,
                            length: float) -> Tuple[float, np.ndarray]:
    n = u.n
    du = spectral_derivative(u.samples)
    q, jac = primitive_jacobian(field, u.samples)
    turned = rotate(du)
    g_value = float(np.mean(np.sum(q * turned, axis=1)))
    length_part = -spectral_derivative(du) / (length * n)
    g_part = (np.einsum("kji,kj->ki", jac, turned) + rotate(spectral_derivative(q))) / n
    return length + lam * g_value, length_part + lam * g_part


def _covector_polygonal(u: LoopCurve, field: CurvatureField, lam: float,
                        length: float) -> Tuple[float, np.ndarray]:
    n = u.n
    points, chords = _segment_points(u)
    q, jac = primitive_jacobian(field, points.reshape(-1, 2))
    q = q.reshape(points.shape)
    jac = jac.reshape(points.shape[:2] + (2, 2))
    turned = rotate(chords)
    q_bar = np.einsum("q,kqi->ki", SEGMENT_WEIGHTS, q)
    g_value = float(np.sum(q_bar * turned))

    previous = np.roll(chords, 1, axis=0)
    length_part = (n / length) * (previous - chords)

    pulled = np.einsum("kqji,kj->kqi", jac, turned)
    own = np.einsum("q,kqi->ki", SEGMENT_WEIGHTS * (1.0 - SEGMENT_TAU), pulled)
    incoming = np.roll(np.einsum("q,kqi->ki", SEGMENT_WEIGHTS * SEGMENT_TAU, pulled), 1, axis=0)
    g_part = own + incoming + rotate(q_bar - np.roll(q_bar, 1, axis=0))
    return length + lam * g_value, length_part + lam * g_part


def energy_covector(u: LoopCurve, field: CurvatureField, lam: float) -> Tuple[float, np.ndarray]:
    """E(u) and the nodal covector c with E'(u)[h] = sum_k c_k . h_k"""
    length = length_energy(u)
    if length < MIN_LENGTH:
        raise NearConstantLoop(f"Length energy {length:.3e} is below {MIN_LENGTH:.0e}")
    if u.is_polygonal:
        return _covector_polygonal(u, field, lam, length)
    return _covector_trigonometric(u, field, lam, length)


def gradient(u: LoopCurve, field: CurvatureField, lam: float) -> GradientField:
    """H1 gradient of E and its dual norm"""
    value, covector = energy_covector(u, field, lam)
    return GradientField(
        values=riesz_representative(covector, u.interpolation),
        dual_norm=dual_norm_of(covector, u.interpolation),
        energy=value,
    )


def directional_derivative(u: LoopCurve, field: CurvatureField, lam: float, direction: np.ndarray) -> float:
    _, covector = energy_covector(u, field, lam)
    return float(np.sum(covector * direction))


def gradient_norm_squared(grad: GradientField, u: LoopCurve) -> float:
    """<g, g> in the H1 inner product of the loop's interpolation"""
    return h1_inner(grad.values, grad.values, u.interpolation)


def iso_check(u: LoopCurve, field: CurvatureField, g_value: Optional[float] = None) -> IsoCheck:
    """|G(u)| <= ||K|| (arc length)^2 / (4 pi), with its slack"""
    if g_value is None:
        g_value = g_line(u, field)
    bound = field.sup_norm * arc_length(u) ** 2 / (4 * np.pi)
    slack = bound - abs(g_value)
    return IsoCheck(satisfied=bool(slack >= -ISO_TOLERANCE), slack=float(slack))


def well_length(field: CurvatureField, lam: float) -> float:
    """Below this length E >= L/2, so the zero loop is a strict local minimum"""
    return 2 * np.pi / (abs(lam) * field.sup_norm)


def level_lower_bound(field: CurvatureField, lam: float) -> float:
    """pi / (|lambda| sup |K|), below every mountain-pass level"""
    return np.pi / (abs(lam) * field.sup_norm)


def level_upper_bound(field: CurvatureField, lam: float) -> Optional[float]:
    """pi / |lambda K0| for fields with a constant K0; None for periodic ones"""
    if field.kind is FieldKind.DOUBLY_PERIODIC or not field.k0:
        return None
    return np.pi / abs(lam * field.k0)


def min_energy_bound(u: LoopCurve, field: CurvatureField, lam: float) -> Optional[float]:
    """L(u)/2 when u lies inside the well, where it bounds E(u) from below"""
    length = length_energy(u)
    if length > well_length(field, lam):
        return None
    return 0.5 * length
