"""
Curvature Fields
Catalog of prescribed curvature functions K and their primitive fields Q
"""

import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from functools import partial
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np
from scipy import integrate, special

from .errors import FieldConfigurationError, QuadratureFailure, WrongKind

logger = logging.getLogger(__name__)

QUADRATURE_TOLERANCE = 1e-9
QUADRATURE_BUDGET = 10_000
GK21_NODES = 21
CHECK_GRID = 32
DECAY_RAYS = 16
DECAY_RADIUS = 1e3
DECAY_TOLERANCE = 1e-3
CELL_GRID = 256


class FieldKind(Enum):
    """Structural class of a curvature field"""
    CONSTANT = "constant"
    DOUBLY_PERIODIC = "doubly_periodic"
    CONSTANT_AT_INFINITY = "constant_at_infinity"


@dataclass(frozen=True, eq=False)
class CurvatureField:
    """Prescribed curvature K with its structural metadata"""
    name: str
    kind: FieldKind
    evaluator: Callable[[np.ndarray, np.ndarray], np.ndarray]
    sup_norm: float
    params: Dict[str, float] = field(default_factory=dict)
    gradient: Optional[Callable] = None
    closed_primitive: Optional[Callable] = None
    periods: Optional[Tuple[float, float]] = None
    k0: Optional[float] = None
    cell_average: Optional[float] = None
    scale: float = 1.0
    extremal_points: Tuple[Tuple[float, float], ...] = ((0.0, 0.0),)
    favorable_center: Optional[Tuple[float, float]] = None

    def k(self, x, y) -> np.ndarray:
        """Vectorized K(x, y)"""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        return np.broadcast_to(self.evaluator(x, y), np.broadcast(x, y).shape).astype(float)

    def k_at(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        return self.k(points[..., 0], points[..., 1])

    def k_gradient(self, x, y) -> Tuple[np.ndarray, np.ndarray]:
        """(dK/dx, dK/dy), analytic when the catalog supplies it"""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        shape = np.broadcast(x, y).shape
        if self.gradient is not None:
            kx, ky = self.gradient(x, y)
            return np.broadcast_to(kx, shape).astype(float), np.broadcast_to(ky, shape).astype(float)
        step = 1e-6 * max(1.0, self.scale)
        kx = (self.k(x + step, y) - self.k(x - step, y)) / (2 * step)
        ky = (self.k(x, y + step) - self.k(x, y - step)) / (2 * step)
        return kx, ky

    @property
    def has_k0(self) -> bool:
        return self.k0 is not None

    @property
    def spec(self) -> Dict[str, Any]:
        """Config-file representation"""
        return {"kind": self.kind.value, "name": self.name, "params": dict(self.params)}


@dataclass
class FieldCatalogEntry:
    """Named, parametrized recipe for a curvature field"""
    name: str
    kind: FieldKind
    description: str
    parameters: Dict[str, float]
    builder: Callable[..., CurvatureField]

    def build(self, **overrides) -> CurvatureField:
        unknown = set(overrides) - set(self.parameters)
        if unknown:
            raise FieldConfigurationError(
                f"Unknown parameters for field '{self.name}': {sorted(unknown)}")
        values = {**self.parameters, **{k: float(v) for k, v in overrides.items()}}
        return self.builder(**values)


# Constant field

def _constant_k(x, y, c):
    return np.full(np.broadcast(x, y).shape, c)


def _constant_gradient(x, y):
    zeros = np.zeros(np.broadcast(x, y).shape)
    return zeros, zeros


def _constant_primitive(x, y, c):
    zeros = np.zeros(np.broadcast(x, y).shape)
    return 0.5 * c * x, 0.5 * c * y, zeros, zeros


# Doubly periodic field c0 + c1 sin(ax) sin(by) + c2 cos(ax)

def _periodic_k(x, y, c0, c1, c2, a, b):
    alpha, beta = 2 * np.pi / a, 2 * np.pi / b
    return c0 + c1 * np.sin(alpha * x) * np.sin(beta * y) + c2 * np.cos(alpha * x)


def _periodic_gradient(x, y, c0, c1, c2, a, b):
    alpha, beta = 2 * np.pi / a, 2 * np.pi / b
    kx = c1 * alpha * np.cos(alpha * x) * np.sin(beta * y) - c2 * alpha * np.sin(alpha * x)
    ky = c1 * beta * np.sin(alpha * x) * np.cos(beta * y)
    return kx, ky


def _periodic_primitive(x, y, c0, c1, c2, a, b):
    alpha, beta = 2 * np.pi / a, 2 * np.pi / b
    sx, cx = np.sin(alpha * x), np.cos(alpha * x)
    sy, cy = np.sin(beta * y), np.cos(beta * y)
    q1 = 0.5 * (c0 * x + c1 * sy * (1 - cx) / alpha + c2 * sx / alpha)
    q2 = 0.5 * (c0 * y + c1 * sx * (1 - cy) / beta + c2 * cx * y)
    dq1_dy = 0.5 * c1 * beta * cy * (1 - cx) / alpha
    dq2_dx = 0.5 * (c1 * alpha * cx * (1 - cy) / beta - c2 * alpha * sx * y)
    return q1, q2, dq1_dy, dq2_dx


# Gaussian lobe k0 + A exp(-|z - c|^2 / s^2)

def _gaussian_profile(v, center, sigma):
    return np.exp(-((v - center) / sigma) ** 2)


def _gaussian_antiderivative(v, center, sigma):
    """Integral of the 1-D Gaussian profile from 0 to v"""
    return 0.5 * sigma * np.sqrt(np.pi) * (special.erf((v - center) / sigma) + special.erf(center / sigma))


def _lobe_k(x, y, k0, amplitude, sigma, cx, cy):
    return k0 + amplitude * _gaussian_profile(x, cx, sigma) * _gaussian_profile(y, cy, sigma)


def _lobe_gradient(x, y, k0, amplitude, sigma, cx, cy):
    bump = amplitude * _gaussian_profile(x, cx, sigma) * _gaussian_profile(y, cy, sigma)
    return -2 * (x - cx) / sigma ** 2 * bump, -2 * (y - cy) / sigma ** 2 * bump


def _lobe_primitive(x, y, k0, amplitude, sigma, cx, cy):
    gx, gy = _gaussian_profile(x, cx, sigma), _gaussian_profile(y, cy, sigma)
    ix, iy = _gaussian_antiderivative(x, cx, sigma), _gaussian_antiderivative(y, cy, sigma)
    q1 = 0.5 * (k0 * x + amplitude * gy * ix)
    q2 = 0.5 * (k0 * y + amplitude * gx * iy)
    dq1_dy = -amplitude * (y - cy) / sigma ** 2 * gy * ix
    dq2_dx = -amplitude * (x - cx) / sigma ** 2 * gx * iy
    return q1, q2, dq1_dy, dq2_dx


# Gaussian dipole k0 + A ((x - cx)/s) exp(-|z - c|^2 / s^2), no closed primitive

def _dipole_k(x, y, k0, amplitude, sigma, cx, cy):
    envelope = _gaussian_profile(x, cx, sigma) * _gaussian_profile(y, cy, sigma)
    return k0 + amplitude * (x - cx) / sigma * envelope


def _dipole_gradient(x, y, k0, amplitude, sigma, cx, cy):
    envelope = _gaussian_profile(x, cx, sigma) * _gaussian_profile(y, cy, sigma)
    u = (x - cx) / sigma
    kx = amplitude / sigma * (1 - 2 * u * u) * envelope
    ky = amplitude * u * (-2 * (y - cy) / sigma ** 2) * envelope
    return kx, ky


# Primitive field Q

def _quadrature_primitive(fld: CurvatureField, points: np.ndarray, with_jacobian: bool,
                          decaying_part: bool = False) -> np.ndarray:
    """Adaptive Gauss-Kronrod quadrature of the primitive components.

    Integrals from 0 to x are mapped to [0, 1]; one vector-valued quad_vec call
    covers every point and component. Returns shape (P, 2) or (P, 4) with the
    cross derivatives dQ1/dy, dQ2/dx appended.
    """
    x, y = points[:, 0], points[:, 1]
    offset = fld.k0 if decaying_part else 0.0

    def integrand(tau):
        values = [
            0.5 * x * (fld.k(tau * x, y) - offset),
            0.5 * y * (fld.k(x, tau * y) - offset),
        ]
        if with_jacobian:
            _, ky = fld.k_gradient(tau * x, y)
            kx, _ = fld.k_gradient(x, tau * y)
            values += [0.5 * x * ky, 0.5 * y * kx]
        return np.concatenate(values)

    result, error, info = integrate.quad_vec(
        integrand, 0.0, 1.0, epsabs=QUADRATURE_TOLERANCE, epsrel=0.0, norm="max",
        limit=QUADRATURE_BUDGET // GK21_NODES, full_output=True)
    if not info.success or error > QUADRATURE_TOLERANCE:
        raise QuadratureFailure(
            f"Primitive of '{fld.name}' reached error {error:.3e} after {info.neval} evaluations")
    return result.reshape(-1, points.shape[0]).T


def primitive_jacobian(fld: CurvatureField, points, method: str = "auto") -> Tuple[np.ndarray, np.ndarray]:
    """Q and its Jacobian dQ_i/dz_j at an (P, 2) array of points"""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if method == "auto" and fld.closed_primitive is not None:
        q1, q2, dq1_dy, dq2_dx = fld.closed_primitive(points[:, 0], points[:, 1])
    else:
        columns = _quadrature_primitive(fld, points, with_jacobian=True)
        q1, q2, dq1_dy, dq2_dx = columns.T
    half_k = 0.5 * fld.k_at(points)
    q = np.column_stack([q1, q2])
    jac = np.empty((points.shape[0], 2, 2))
    jac[:, 0, 0] = half_k
    jac[:, 0, 1] = dq1_dy
    jac[:, 1, 0] = dq2_dx
    jac[:, 1, 1] = half_k
    return q, jac


def primitive(fld: CurvatureField, points, method: str = "auto") -> np.ndarray:
    """Q at an (P, 2) array of points"""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if method == "auto" and fld.closed_primitive is not None:
        q1, q2, _, _ = fld.closed_primitive(points[:, 0], points[:, 1])
        return np.column_stack([np.broadcast_to(q1, points.shape[:1]), np.broadcast_to(q2, points.shape[:1])])
    return _quadrature_primitive(fld, points, with_jacobian=False)


def eval_K(fld: CurvatureField, z) -> float:
    z = np.asarray(z, dtype=float)
    return float(fld.k(z[0], z[1]))


def eval_Q(fld: CurvatureField, z) -> np.ndarray:
    """Q(z) = 1/2 (int_0^x K(s,y) ds, int_0^y K(x,s) ds) by adaptive quadrature"""
    return primitive(fld, np.asarray(z, dtype=float)[None, :], method="quadrature")[0]


def eval_Q1(fld: CurvatureField, z) -> np.ndarray:
    """Primitive of the decaying part K1 = K - K0"""
    if fld.kind is not FieldKind.CONSTANT_AT_INFINITY:
        raise WrongKind(f"eval_Q1 needs a constant-at-infinity field, got {fld.kind.value}")
    points = np.asarray(z, dtype=float)[None, :]
    return _quadrature_primitive(fld, points, with_jacobian=False, decaying_part=True)[0]


def cell_average(fld: CurvatureField) -> float:
    """Mean of K over one period cell (tensor trapezoid rule)"""
    if fld.kind is FieldKind.CONSTANT:
        return float(fld.k0)
    if fld.kind is not FieldKind.DOUBLY_PERIODIC:
        raise WrongKind(f"cell_average needs a periodic field, got {fld.kind.value}")
    a, b = fld.periods
    xs = np.arange(CELL_GRID) * a / CELL_GRID
    ys = np.arange(CELL_GRID) * b / CELL_GRID
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    return float(np.mean(fld.k(gx, gy)))


# Validation

def _check_points(fld: CurvatureField) -> np.ndarray:
    span = 4.0 * fld.scale
    axis = np.linspace(-span, span, CHECK_GRID)
    gx, gy = np.meshgrid(axis, axis, indexing="ij")
    points = [np.column_stack([gx.ravel(), gy.ravel()]), np.asarray(fld.extremal_points, dtype=float)]
    if fld.periods is not None:
        a, b = fld.periods
        cx, cy = np.meshgrid(np.linspace(0, a, CHECK_GRID), np.linspace(0, b, CHECK_GRID), indexing="ij")
        points.append(np.column_stack([cx.ravel(), cy.ravel()]))
    return np.vstack(points)


def validate_field(fld: CurvatureField) -> CurvatureField:
    """Check the structural assumptions; raise FieldConfigurationError on failure"""
    if not np.isfinite(fld.sup_norm) or fld.sup_norm <= 0:
        raise FieldConfigurationError(f"Field '{fld.name}' needs a positive sup-norm bound")
    if fld.kind in (FieldKind.CONSTANT, FieldKind.CONSTANT_AT_INFINITY) and not fld.k0:
        raise FieldConfigurationError(f"Field '{fld.name}' needs a nonzero K0")

    grid_points = _check_points(fld)
    values = fld.k_at(grid_points)
    if not np.all(np.isfinite(values)):
        raise FieldConfigurationError(f"Field '{fld.name}' is not finite on the check grid")
    if np.max(np.abs(values)) > fld.sup_norm * (1 + 1e-12):
        raise FieldConfigurationError(
            f"Field '{fld.name}' exceeds its sup-norm bound: {np.max(np.abs(values))} > {fld.sup_norm}")

    if fld.kind is FieldKind.DOUBLY_PERIODIC:
        a, b = fld.periods
        x, y = grid_points[:, 0], grid_points[:, 1]
        drift = max(np.max(np.abs(fld.k(x + a, y) - fld.k(x, y))),
                    np.max(np.abs(fld.k(x, y + b) - fld.k(x, y))))
        if drift > 1e-9 * fld.sup_norm:
            raise FieldConfigurationError(f"Field '{fld.name}' is not ({a}, {b})-periodic (drift {drift:.3e})")

    if fld.kind is FieldKind.CONSTANT_AT_INFINITY:
        radius = DECAY_RADIUS * fld.scale
        angles = 2 * np.pi * np.arange(DECAY_RAYS) / DECAY_RAYS
        tail = fld.k(radius * np.cos(angles), radius * np.sin(angles)) - fld.k0
        if np.max(np.abs(tail)) >= DECAY_TOLERANCE * abs(fld.k0):
            raise FieldConfigurationError(
                f"Field '{fld.name}' does not settle to K0 = {fld.k0} at radius {radius}")
    return fld


# Builders

def _build_constant(c: float) -> CurvatureField:
    return CurvatureField(
        name="constant", kind=FieldKind.CONSTANT, params={"c": c},
        evaluator=partial(_constant_k, c=c), gradient=_constant_gradient,
        closed_primitive=partial(_constant_primitive, c=c),
        sup_norm=abs(c), k0=c, cell_average=c, extremal_points=((0.0, 0.0),),
    )


def _periodic_extrema(evaluator: Callable, a: float, b: float) -> Tuple[Tuple[float, float], ...]:
    xs, ys = np.meshgrid(np.arange(64) * a / 64, np.arange(64) * b / 64, indexing="ij")
    values = evaluator(xs, ys)
    hi = np.unravel_index(np.argmax(values), values.shape)
    lo = np.unravel_index(np.argmin(values), values.shape)
    return ((float(xs[hi]), float(ys[hi])), (float(xs[lo]), float(ys[lo])))


def _build_periodic(name: str, c0: float, c1: float, c2: float, a: float, b: float) -> CurvatureField:
    if a <= 0 or b <= 0:
        raise FieldConfigurationError("Periods must be positive")
    params = dict(c0=c0, c1=c1, c2=c2, a=a, b=b)
    evaluator = partial(_periodic_k, **params)
    fld = CurvatureField(
        name=name, kind=FieldKind.DOUBLY_PERIODIC,
        params=params if name == "periodic_sine_cosine" else {k: params[k] for k in ("c0", "c1", "a", "b")},
        evaluator=evaluator, gradient=partial(_periodic_gradient, **params),
        closed_primitive=partial(_periodic_primitive, **params),
        sup_norm=abs(c0) + abs(c1) + abs(c2), periods=(a, b), scale=min(a, b),
        extremal_points=_periodic_extrema(evaluator, a, b),
    )
    return replace(fld, cell_average=cell_average(fld))


def _build_lobe(k0: float, amplitude: float, sigma: float, cx: float, cy: float) -> CurvatureField:
    if sigma <= 0:
        raise FieldConfigurationError("Lobe width must be positive")
    params = dict(k0=k0, amplitude=amplitude, sigma=sigma, cx=cx, cy=cy)
    return CurvatureField(
        name="gaussian_lobe", kind=FieldKind.CONSTANT_AT_INFINITY, params=params,
        evaluator=partial(_lobe_k, **params), gradient=partial(_lobe_gradient, **params),
        closed_primitive=partial(_lobe_primitive, **params),
        sup_norm=max(abs(k0), abs(k0 + amplitude)), k0=k0, scale=sigma,
        extremal_points=((cx, cy),),
        favorable_center=(cx, cy) if k0 * amplitude > 0 else None,
    )


def _build_dipole(k0: float, amplitude: float, sigma: float, cx: float, cy: float) -> CurvatureField:
    if sigma <= 0:
        raise FieldConfigurationError("Dipole width must be positive")
    params = dict(k0=k0, amplitude=amplitude, sigma=sigma, cx=cx, cy=cy)
    offset = sigma / np.sqrt(2.0)
    return CurvatureField(
        name="gaussian_dipole", kind=FieldKind.CONSTANT_AT_INFINITY, params=params,
        evaluator=partial(_dipole_k, **params), gradient=partial(_dipole_gradient, **params),
        sup_norm=abs(k0) + abs(amplitude) / np.sqrt(2 * np.e), k0=k0, scale=sigma,
        extremal_points=((cx + offset, cy), (cx - offset, cy)),
    )


class FieldCatalog:
    """Manages the named curvature fields available to runs"""

    def __init__(self):
        self.entries = self._initialize_entries()

    def _initialize_entries(self) -> Dict[str, FieldCatalogEntry]:
        entries = [
            FieldCatalogEntry("constant", FieldKind.CONSTANT,
                              "K = c everywhere", {"c": 1.0}, _build_constant),
            FieldCatalogEntry("periodic_sine", FieldKind.DOUBLY_PERIODIC,
                              "K = c0 + c1 sin(2 pi x/a) sin(2 pi y/b)",
                              {"c0": 1.0, "c1": 0.5, "a": 1.0, "b": 1.0},
                              partial(_build_periodic, "periodic_sine", c2=0.0)),
            FieldCatalogEntry("periodic_sine_cosine", FieldKind.DOUBLY_PERIODIC,
                              "K = c0 + c1 sin(2 pi x/a) sin(2 pi y/b) + c2 cos(2 pi x/a)",
                              {"c0": 1.0, "c1": 0.5, "c2": 0.25, "a": 1.0, "b": 1.0},
                              partial(_build_periodic, "periodic_sine_cosine")),
            FieldCatalogEntry("gaussian_lobe", FieldKind.CONSTANT_AT_INFINITY,
                              "K = k0 + A exp(-|z - c|^2 / sigma^2)",
                              {"k0": 1.0, "amplitude": 0.5, "sigma": 1.0, "cx": 3.0, "cy": 0.0},
                              _build_lobe),
            FieldCatalogEntry("gaussian_dipole", FieldKind.CONSTANT_AT_INFINITY,
                              "K = k0 + A (x - cx)/sigma exp(-|z - c|^2 / sigma^2)",
                              {"k0": 1.0, "amplitude": 0.5, "sigma": 1.0, "cx": 0.0, "cy": 0.0},
                              _build_dipole),
        ]
        return {entry.name: entry for entry in entries}

    def get_entry(self, name: str) -> Optional[FieldCatalogEntry]:
        return self.entries.get(name)

    def list_entries(self) -> List[FieldCatalogEntry]:
        return list(self.entries.values())

    def get_kinds(self) -> List[str]:
        return sorted({entry.kind.value for entry in self.entries.values()})

    def build(self, name: str, **params) -> CurvatureField:
        """Build and validate a catalog field"""
        entry = self.get_entry(name)
        if entry is None:
            raise FieldConfigurationError(
                f"Unknown field '{name}'. Available: {', '.join(sorted(self.entries))}")
        try:
            fld = entry.build(**params)
        except (TypeError, ValueError) as exc:
            if isinstance(exc, FieldConfigurationError):
                raise
            raise FieldConfigurationError(f"Bad parameters for field '{name}': {exc}") from exc
        logger.debug("Built field %s with %s", name, fld.params)
        return validate_field(fld)

    def build_from_spec(self, spec: Dict[str, Any]) -> CurvatureField:
        """Build from {"kind": ..., "name": ..., "params": {...}}"""
        if not isinstance(spec, dict) or "name" not in spec:
            raise FieldConfigurationError("Field spec needs at least a 'name'")
        fld = self.build(spec["name"], **(spec.get("params") or {}))
        kind = spec.get("kind")
        if kind is not None and kind != fld.kind.value:
            raise FieldConfigurationError(
                f"Field '{spec['name']}' has kind {fld.kind.value}, config says {kind}")
        return fld


def build_field(name: str, **params) -> CurvatureField:
    """Convenience wrapper around the default catalog"""
    return FieldCatalog().build(name, **params)
