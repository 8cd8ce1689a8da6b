"""
Mountain-Pass Paths
Admissible paths from the zero loop to a loop of negative energy
"""

import logging
from dataclasses import dataclass, field as dataclass_field
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import optimize, special

from utils.errors import ConfigurationError, NoBumpFound, NoNegativeEndpoint, WrongKind, ZeroAverage
from utils.fields import DECAY_RADIUS, CurvatureField, FieldKind
from utils.loopgeom import DEFAULT_NODES, Interpolation, LoopCurve, constant_loop, length_energy

from .functional import energy_value, well_length

logger = logging.getLogger(__name__)

MIN_PATH_NODES = 16
DEFAULT_PATH_NODES = 33
RADIUS_MARGIN = 1.25
BUMP_ATTEMPTS = 12
MAX_WINDING_ORDER = 10_000
DISC_RADIAL_NODES = 24
DISC_ANGULAR_NODES = 64
TRIAL_CENTERS = 16

LambdaRange = Union[float, Tuple[float, float], Sequence[float]]


@dataclass(frozen=True, eq=False)
class PathFamily:
    """Nodes gamma(s_j), s_j = j/(M-1), of a piecewise-linear path of loops"""
    nodes: Tuple[LoopCurve, ...]
    lambda_context: float
    endpoint_energy: float
    lambda_range: Tuple[float, float] = (0.0, 0.0)
    labels: Tuple[str, ...] = ()
    constructor: str = "custom"
    meta: dict = dataclass_field(default_factory=dict)

    def __post_init__(self):
        nodes = tuple(self.nodes)
        if len(nodes) < MIN_PATH_NODES:
            raise ValueError(f"A path needs at least {MIN_PATH_NODES} nodes, got {len(nodes)}")
        if np.any(nodes[0].samples != 0.0):
            raise ValueError("Paths start at the zero loop")
        if len({(u.n, u.interpolation) for u in nodes}) != 1:
            raise ValueError("All path nodes must share node count and interpolation")
        object.__setattr__(self, "nodes", nodes)
        labels = tuple(self.labels) or ("path",) * len(nodes)
        object.__setattr__(self, "labels", labels)
        if self.lambda_range == (0.0, 0.0):
            object.__setattr__(self, "lambda_range", (self.lambda_context, self.lambda_context))

    @property
    def size(self) -> int:
        return len(self.nodes)

    @property
    def parameters(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.size)

    @property
    def start(self) -> LoopCurve:
        return self.nodes[0]

    @property
    def end(self) -> LoopCurve:
        return self.nodes[-1]

    def with_nodes(self, nodes: Sequence[LoopCurve], labels: Optional[Sequence[str]] = None) -> "PathFamily":
        return PathFamily(nodes=tuple(nodes), lambda_context=self.lambda_context,
                          endpoint_energy=self.endpoint_energy, lambda_range=self.lambda_range,
                          labels=tuple(labels) if labels is not None else (), constructor=self.constructor,
                          meta=dict(self.meta))


def lambda_interval(lambda_range: LambdaRange) -> Tuple[float, float]:
    """(lo, hi) of a nonzero, single-signed range; a scalar is a degenerate range"""
    values = np.atleast_1d(np.asarray(lambda_range, dtype=float))
    lo, hi = float(values.min()), float(values.max())
    if lo <= 0 <= hi:
        raise ValueError(f"Lambda range [{lo}, {hi}] must exclude 0")
    return lo, hi


# Loops

def rectangle_loop(n: int, a: float, b: float, orientation: int = 1,
                   points: int = DEFAULT_NODES) -> LoopCurve:
    """Boundary of [0, na] x [0, nb] from the origin along e1 (orientation +1)"""
    if a <= 0 or b <= 0 or n < 1:
        raise ValueError("Rectangle loops need n >= 1 and positive periods")
    if orientation not in (1, -1):
        raise ValueError("Orientation must be +1 or -1")
    width, height = n * a, n * b
    corners = np.array([[0.0, 0.0], [width, 0.0], [width, height], [0.0, height], [0.0, 0.0]])
    perimeter = 2 * (width + height)
    fractions = np.array([width, width + height, 2 * width + height]) / perimeter

    # corners sit on nodes; each side keeps at least one node
    breaks = [0]
    for k, fraction in enumerate(fractions):
        lower = breaks[-1] + 1
        upper = points - (len(fractions) - k)
        breaks.append(int(min(max(round(points * fraction), lower), upper)))
    breaks.append(points)

    samples = np.empty((points, 2))
    for side in range(4):
        first, last = breaks[side], breaks[side + 1]
        weights = np.arange(last - first) / (last - first)
        samples[first:last] = corners[side] + weights[:, None] * (corners[side + 1] - corners[side])
    loop = LoopCurve(samples, Interpolation.POLYGONAL)
    return loop if orientation == 1 else loop.reversed()


def circle_loop(r: float, center=(0.0, 0.0), j: int = 1, points: int = DEFAULT_NODES) -> LoopCurve:
    """center + r exp(2 pi i j t)"""
    if r <= 0:
        raise ValueError("Circle radius must be positive")
    if j == 0 or int(j) != j:
        raise ValueError("Circle multiplicity must be a nonzero integer")
    t = np.arange(points) / points
    phase = 2 * np.pi * j * t
    samples = np.column_stack([np.cos(phase), np.sin(phase)]) * r + np.asarray(center, dtype=float)
    return LoopCurve(samples)


# Helpers

def node_energies(path: PathFamily, field: CurvatureField, lam: float) -> np.ndarray:
    """E at every node of the path"""
    return np.array([energy_value(u, field, lam) for u in path.nodes])


def path_max(path: PathFamily, field: CurvatureField, lam: float) -> Tuple[float, float, LoopCurve]:
    """Node of largest energy, smallest s among ties"""
    energies = node_energies(path, field, lam)
    top = float(np.max(energies))
    tied = np.nonzero(energies >= top - 1e-12 * max(1.0, abs(top)))[0]
    index = int(tied[0])
    return float(path.parameters[index]), float(energies[index]), path.nodes[index]


def segment_peak(first: LoopCurve, second: LoopCurve, field: CurvatureField, lam: float,
                 endpoint_energies: Optional[Tuple[float, float]] = None,
                 xatol: float = 1e-6) -> Tuple[float, float]:
    """(theta, E) of the largest energy on the chord (1 - theta) first + theta second"""
    if endpoint_energies is None:
        endpoint_energies = (energy_value(first, field, lam), energy_value(second, field, lam))
    ea, eb = endpoint_energies
    best = (0.0, ea) if ea >= eb else (1.0, eb)
    found = optimize.minimize_scalar(lambda t: -energy_value(first.blend(second, t), field, lam),
                                     bounds=(0.0, 1.0), method="bounded", options={"xatol": xatol})
    if found.success and -found.fun > best[1]:
        return float(found.x), float(-found.fun)
    return best


def _worst_endpoint(endpoint: LoopCurve, field: CurvatureField,
                    interval: Tuple[float, float]) -> Tuple[float, float]:
    """(lambda, energy) of the largest endpoint energy over the range ends"""
    energies = [(lam, energy_value(endpoint, field, lam)) for lam in sorted(set(interval))]
    return max(energies, key=lambda item: item[1])


def _growth_parameters(count: int, peaks: Sequence[float]) -> np.ndarray:
    peaks = sorted({p for p in peaks if 0.0 < p < 1.0})
    base = np.linspace(0.0, 1.0, max(count - len(peaks), 2))
    return np.unique(np.concatenate([base, peaks]))


def disc_integral(func, center, radius: float) -> float:
    """Polar Gauss-Legendre x trapezoid quadrature over a disc"""
    nodes, weights = special.roots_legendre(DISC_RADIAL_NODES)
    rho = 0.5 * radius * (nodes + 1.0)
    rho_weights = 0.5 * radius * weights
    theta = 2 * np.pi * np.arange(DISC_ANGULAR_NODES) / DISC_ANGULAR_NODES
    x = center[0] + rho[:, None] * np.cos(theta)[None, :]
    y = center[1] + rho[:, None] * np.sin(theta)[None, :]
    values = func(x, y)
    return float(np.sum(rho_weights[:, None] * rho[:, None] * values) * 2 * np.pi / DISC_ANGULAR_NODES)


# Constructors

def initial_path_periodic(field: CurvatureField, lambda_range: LambdaRange,
                          points: int = DEFAULT_NODES, nodes: int = DEFAULT_PATH_NODES) -> PathFamily:
    """gamma(s) = s u_n for the smallest admissible rectangle loop u_n"""
    if field.kind is FieldKind.DOUBLY_PERIODIC:
        a, b = field.periods
    elif field.kind is FieldKind.CONSTANT:
        a, b = 1.0, 1.0
    else:
        raise WrongKind(f"Rectangle paths need a periodic field, got {field.kind.value}")
    lo, hi = lambda_interval(lambda_range)
    average = field.cell_average
    if abs(average) <= 1e-12 * field.sup_norm:
        raise ZeroAverage(f"Field '{field.name}' has zero cell average")
    cell_integral = average * a * b
    orientation = 1 if lo * average > 0 else -1

    def admissible(n: int) -> bool:
        for lam in (lo, hi):
            length = 2 * n * (a + b)
            if length - n * n * abs(lam * cell_integral) >= 0:
                return False
            if length <= well_length(field, lam):
                return False
        return True

    order = next((n for n in range(1, MAX_WINDING_ORDER) if admissible(n)), None)
    if order is None:
        raise ZeroAverage(f"No rectangle loop of negative energy below order {MAX_WINDING_ORDER}")
    endpoint = rectangle_loop(order, a, b, orientation, points)
    lam_ctx, end_energy = _worst_endpoint(endpoint, field, (lo, hi))
    if end_energy >= 0:
        raise NoNegativeEndpoint(f"Rectangle loop of order {order} has energy {end_energy:.6g} >= 0")
    logger.info("Periodic path: order %d, orientation %+d, endpoint energy %.6g", order, orientation, end_energy)

    loops = [endpoint.scaled(s) for s in np.linspace(0.0, 1.0, nodes)]
    return PathFamily(nodes=tuple(loops), lambda_context=lam_ctx, endpoint_energy=end_energy,
                      lambda_range=(lo, hi), labels=("scaling",) * nodes, constructor="periodic",
                      meta={"order": order, "orientation": orientation})


def initial_path_bump(field: CurvatureField, lam: float, points: int = DEFAULT_NODES,
                      nodes: int = DEFAULT_PATH_NODES) -> PathFamily:
    """Constant loops from 0 to z*, then discs of growing radius around z*"""
    lo, _ = lambda_interval(lam)
    lam = lo
    candidates = [np.asarray(p, dtype=float) for p in field.extremal_points]
    values = [lam * field.k(p[0], p[1]) for p in candidates]
    best = int(np.argmax(values))
    center, favorable = candidates[best], float(values[best])
    if favorable <= 0:
        raise NoBumpFound(f"No catalog point with lambda K > 0 for field '{field.name}'")

    radius = RADIUS_MARGIN * 4.0 / favorable
    for _ in range(BUMP_ATTEMPTS):
        disc = circle_loop(radius, center, 1, points)
        end_energy = energy_value(disc, field, lam)
        if end_energy < 0:
            break
        radius *= 1.5
    else:
        raise NoBumpFound(f"No disc of negative energy around {tuple(center)} up to radius {radius:.3g}")

    approach = max(1, nodes // 4) if np.any(center) else 0
    loops: List[LoopCurve] = [constant_loop(s * center, points) for s in np.linspace(0.0, 1.0, approach + 1)[:-1]]
    labels = ["approach"] * len(loops)
    shape = circle_loop(radius, (0.0, 0.0), 1, points)
    for s in _growth_parameters(nodes - len(loops), [1.0 / (favorable * radius)]):
        loops.append(LoopCurve(center + s * shape.samples))
        labels.append("growth")
    loops[0] = constant_loop((0.0, 0.0), points)
    logger.info("Bump path around %s, radius %.4g, endpoint energy %.6g", tuple(center), radius, end_energy)
    return PathFamily(nodes=tuple(loops), lambda_context=lam, endpoint_energy=end_energy,
                      lambda_range=(lam, lam), labels=tuple(labels), constructor="bump",
                      meta={"center": center.tolist(), "radius": radius})


def _far_radius(field: CurvatureField, r0: float, beta: float, target: float) -> float:
    """Smallest doubling radius R with beta * int_{D_r0(z)} |K1| < target for |z| = R"""
    if field.kind is FieldKind.CONSTANT:
        return 0.0

    def decay(x, y):
        return np.abs(field.k(x, y) - field.k0)

    anchors = [np.hypot(*p) for p in field.extremal_points]
    if field.favorable_center is not None:
        anchors.append(np.hypot(*field.favorable_center))
    radius = max(r0, field.scale) + max(anchors)
    limit = DECAY_RADIUS * field.scale + r0 + max(anchors)
    angles = 2 * np.pi * np.arange(TRIAL_CENTERS) / TRIAL_CENTERS
    while radius <= limit:
        mass = max(disc_integral(decay, (radius * np.cos(t), radius * np.sin(t)), r0) for t in angles)
        if beta * mass < target:
            return radius
        radius *= 2.0
    raise NoNegativeEndpoint(f"Decaying part of '{field.name}' never small enough within radius {limit:.3g}")


def initial_path_k4(field: CurvatureField, lambda_range: LambdaRange,
                    points: int = DEFAULT_NODES, nodes: int = DEFAULT_PATH_NODES) -> PathFamily:
    """Constant loops out to a center, a growing circle there, then a translation"""
    if field.kind not in (FieldKind.CONSTANT_AT_INFINITY, FieldKind.CONSTANT):
        raise WrongKind(f"Far-field paths need a field constant at infinity, got {field.kind.value}")
    lo, hi = lambda_interval(lambda_range)
    alpha, beta = min(abs(lo), abs(hi)), max(abs(lo), abs(hi))
    k0 = field.k0
    j = 1 if lo * k0 > 0 else -1

    r0 = RADIUS_MARGIN * max(2.0 / (alpha * abs(k0)), 1.0 / (beta * field.sup_norm))
    eps0 = alpha * np.pi * r0 ** 2 * abs(k0) - 2 * np.pi * r0
    target = min(0.5 * eps0, 1e-3 * np.pi / (beta * abs(k0)))
    far = _far_radius(field, r0, beta, target)
    endpoint_center = np.array([far, 0.0])
    start_center = (np.asarray(field.favorable_center, dtype=float)
                    if field.favorable_center is not None else endpoint_center)
    transfer = not np.allclose(start_center, endpoint_center)

    transfer_count = nodes // 4 if transfer else 0
    approach_count = max(1, nodes // 8) if np.any(start_center) else 0
    growth_count = nodes - transfer_count - approach_count

    loops: List[LoopCurve] = []
    labels: List[str] = []
    for s in np.linspace(0.0, 1.0, approach_count + 1)[:-1]:
        loops.append(constant_loop(s * start_center, points))
        labels.append("approach")
    shape = circle_loop(r0, (0.0, 0.0), j, points)
    peaks = [1.0 / (abs(lam * k0) * r0) for lam in (lo, hi)]
    for s in _growth_parameters(growth_count, peaks):
        loops.append(LoopCurve(start_center + s * shape.samples))
        labels.append("growth")
    for s in np.linspace(0.0, 1.0, transfer_count + 1)[1:]:
        loops.append(shape.translated((1 - s) * start_center + s * endpoint_center))
        labels.append("transfer")
    loops[0] = constant_loop((0.0, 0.0), points)

    lam_ctx, end_energy = _worst_endpoint(loops[-1], field, (lo, hi))
    if end_energy >= 0:
        raise NoNegativeEndpoint(f"Endpoint energy {end_energy:.6g} is not negative")
    logger.info("Far-field path: r0 %.4g, R %.4g, endpoint energy %.6g", r0, far, end_energy)
    return PathFamily(nodes=tuple(loops), lambda_context=lam_ctx, endpoint_energy=end_energy,
                      lambda_range=(lo, hi), labels=tuple(labels), constructor="k4",
                      meta={"r0": r0, "far_radius": far, "start_center": start_center.tolist()})


def resolve_constructor(field: CurvatureField, constructor: str = "auto") -> str:
    """Concrete constructor name for a field; 'auto' follows the field kind"""
    if constructor != "auto":
        return constructor
    if field.kind is FieldKind.DOUBLY_PERIODIC:
        if abs(field.cell_average) > 1e-12 * field.sup_norm:
            return "periodic"
        return "bump"
    return "k4"


def initial_path(field: CurvatureField, lambda_range: LambdaRange, constructor: str = "auto",
                 points: int = DEFAULT_NODES, nodes: int = DEFAULT_PATH_NODES) -> PathFamily:
    """Pick the constructor matching the field kind"""
    constructor = resolve_constructor(field, constructor)
    if constructor == "periodic":
        return initial_path_periodic(field, lambda_range, points, nodes)
    if constructor == "k4":
        return initial_path_k4(field, lambda_range, points, nodes)
    if constructor == "bump":
        lo, hi = lambda_interval(lambda_range)
        if lo != hi:
            raise ConfigurationError("Bump paths cover a single lambda")
        return initial_path_bump(field, lo, points, nodes)
    raise ConfigurationError(f"Unknown path constructor '{constructor}'")


def crossing_loop(endpoint: LoopCurve, field: CurvatureField, lam: float) -> Optional[LoopCurve]:
    """Point of the scaling path s * endpoint where L reaches the well boundary"""
    length = length_energy(endpoint)
    threshold = well_length(field, lam)
    if length <= threshold:
        return None
    return endpoint.scaled(threshold / length)
