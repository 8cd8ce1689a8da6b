"""
Loop Geometry
Discrete closed planar curves and their basic geometric functionals
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Tuple

import numpy as np
from scipy import fft as sfft

from .errors import DegenerateSpeed

logger = logging.getLogger(__name__)

MIN_NODES = 16
DEFAULT_NODES = 256
SPEED_TOLERANCE = 1e-8
CELL_SHIFT_ATTEMPTS = 3
OVERSAMPLING = 8


class Interpolation(Enum):
    """How the samples of a loop are joined between nodes"""
    TRIGONOMETRIC = "trigonometric"
    POLYGONAL = "polygonal"


@dataclass(frozen=True, eq=False)
class LoopCurve:
    """Samples u(k/N), k = 0..N-1, of a 1-periodic plane curve"""
    samples: np.ndarray
    interpolation: Interpolation = Interpolation.TRIGONOMETRIC

    def __post_init__(self):
        samples = np.array(self.samples, dtype=float)
        if samples.ndim != 2 or samples.shape[1] != 2:
            raise ValueError(f"Loop samples must have shape (N, 2), got {samples.shape}")
        if samples.shape[0] < MIN_NODES:
            raise ValueError(f"Loop needs at least {MIN_NODES} nodes, got {samples.shape[0]}")
        if not np.all(np.isfinite(samples)):
            raise ValueError("Loop samples must be finite")
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "interpolation", Interpolation(self.interpolation))

    @property
    def n(self) -> int:
        return self.samples.shape[0]

    @property
    def parameters(self) -> np.ndarray:
        """Uniform parameter grid t_k = k/N"""
        return np.arange(self.n) / self.n

    @property
    def is_polygonal(self) -> bool:
        return self.interpolation is Interpolation.POLYGONAL

    def with_samples(self, samples: np.ndarray) -> "LoopCurve":
        """Same interpolation, new samples"""
        return LoopCurve(samples, self.interpolation)

    def translated(self, z) -> "LoopCurve":
        return self.with_samples(self.samples + np.asarray(z, dtype=float))

    def scaled(self, s: float) -> "LoopCurve":
        """Pointwise scaling about the origin"""
        return self.with_samples(s * self.samples)

    def reversed(self) -> "LoopCurve":
        """u(-t), the same image traversed the other way"""
        order = (-np.arange(self.n)) % self.n
        return self.with_samples(self.samples[order])

    def as_interpolation(self, interpolation: Interpolation) -> "LoopCurve":
        return LoopCurve(self.samples, interpolation)

    def blend(self, other: "LoopCurve", theta: float) -> "LoopCurve":
        """Point (1 - theta) u + theta v on the segment joining two loops"""
        if other.n != self.n:
            raise ValueError("Cannot blend loops with different node counts")
        return self.with_samples((1.0 - theta) * self.samples + theta * other.samples)


@dataclass
class LoopMetrics:
    """Basic geometric quantities of a loop"""
    length_energy: float
    barycenter: Tuple[float, float]
    h1_norm: float
    arc_length: float

    def to_dict(self) -> dict:
        return {
            "length_energy": self.length_energy,
            "barycenter": list(self.barycenter),
            "h1_norm": self.h1_norm,
            "arc_length": self.arc_length,
        }


# Construction helpers

def sample_loop(func: Callable[[np.ndarray], np.ndarray], n: int = DEFAULT_NODES,
                interpolation: Interpolation = Interpolation.TRIGONOMETRIC) -> LoopCurve:
    """Sample a callable t -> (N, 2) array on the uniform grid"""
    t = np.arange(n) / n
    return LoopCurve(np.asarray(func(t), dtype=float), interpolation)


def constant_loop(z=(0.0, 0.0), n: int = DEFAULT_NODES,
                  interpolation: Interpolation = Interpolation.TRIGONOMETRIC) -> LoopCurve:
    return LoopCurve(np.tile(np.asarray(z, dtype=float), (n, 1)), interpolation)


# Discrete calculus

def wavenumbers(n: int) -> np.ndarray:
    """Integer Fourier modes in FFT order"""
    return np.rint(sfft.fftfreq(n, d=1.0 / n)).astype(int)


def spectral_derivative(values: np.ndarray, order: int = 1) -> np.ndarray:
    """Derivative in t of trigonometric interpolant, Nyquist mode dropped"""
    values = np.asarray(values, dtype=float)
    n = values.shape[0]
    m = wavenumbers(n).astype(float)
    if n % 2 == 0:
        m[n // 2] = 0.0
    factor = (2j * np.pi * m) ** order
    if values.ndim > 1:
        factor = factor.reshape((n,) + (1,) * (values.ndim - 1))
    return np.real(sfft.ifft(factor * sfft.fft(values, axis=0), axis=0))


def forward_difference(values: np.ndarray) -> np.ndarray:
    """Slope of each chord of the closed polyline: N (u_{k+1} - u_k)"""
    values = np.asarray(values, dtype=float)
    return values.shape[0] * (np.roll(values, -1, axis=0) - values)


def discrete_derivative(u: LoopCurve) -> np.ndarray:
    if u.is_polygonal:
        return forward_difference(u.samples)
    return spectral_derivative(u.samples)


def speed_tolerance(arc: float) -> float:
    return SPEED_TOLERANCE * max(1.0, arc)


# Functionals

def length_energy(u: LoopCurve) -> float:
    """L(u) = (mean |Du|^2)^(1/2)"""
    du = discrete_derivative(u)
    return float(np.sqrt(np.mean(np.sum(du * du, axis=1))))


def arc_length(u: LoopCurve) -> float:
    """Euclidean length of the curve"""
    if u.is_polygonal:
        chords = np.roll(u.samples, -1, axis=0) - u.samples
        return float(np.sum(np.hypot(chords[:, 0], chords[:, 1])))
    du = spectral_derivative(u.samples)
    return float(np.mean(np.hypot(du[:, 0], du[:, 1])))


def barycenter(u: LoopCurve) -> np.ndarray:
    """Mean of the samples"""
    return np.mean(u.samples, axis=0)


def h1_weights(n: int, interpolation: Interpolation) -> np.ndarray:
    """Diagonal of the H1 inner product in the normalized DFT basis"""
    m = wavenumbers(n).astype(float)
    if Interpolation(interpolation) is Interpolation.POLYGONAL:
        weights = 4.0 * n * n * np.sin(np.pi * m / n) ** 2
    else:
        weights = (2.0 * np.pi * m) ** 2
    # Nyquist keeps its derivative weight here although spectral_derivative drops it; no weight may vanish
    weights[0] = 1.0
    return weights


def h1_inner(first: np.ndarray, second: np.ndarray, interpolation: Interpolation) -> float:
    """<u, v> = integral of u'.v' + (mean u).(mean v), discretely"""
    n = first.shape[0]
    a = sfft.fft(np.asarray(first, dtype=float), axis=0) / n
    b = sfft.fft(np.asarray(second, dtype=float), axis=0) / n
    weights = h1_weights(n, interpolation)[:, None]
    return float(np.sum(weights * np.real(a * np.conj(b))))


def h1_norm(u: LoopCurve) -> float:
    return float(np.sqrt(max(h1_inner(u.samples, u.samples, u.interpolation), 0.0)))


def riesz_representative(covector: np.ndarray, interpolation: Interpolation) -> np.ndarray:
    """Nodal field g with <g, h> = sum_k c_k . h_k for every h"""
    n = covector.shape[0]
    weights = h1_weights(n, interpolation)[:, None]
    spectrum = sfft.fft(np.asarray(covector, dtype=float), axis=0)
    return np.real(sfft.ifft(n * spectrum / weights, axis=0))


def dual_norm_of(covector: np.ndarray, interpolation: Interpolation) -> float:
    """H1 dual norm of a nodal covector"""
    n = covector.shape[0]
    weights = h1_weights(n, interpolation)[:, None]
    spectrum = sfft.fft(np.asarray(covector, dtype=float), axis=0)
    return float(np.sqrt(np.sum(np.abs(spectrum) ** 2 / weights)))


def loop_metrics(u: LoopCurve) -> LoopMetrics:
    center = barycenter(u)
    return LoopMetrics(
        length_energy=length_energy(u),
        barycenter=(float(center[0]), float(center[1])),
        h1_norm=h1_norm(u),
        arc_length=arc_length(u),
    )


def rotate(vectors: np.ndarray) -> np.ndarray:
    """Multiplication by i: (x, y) -> (-y, x)"""
    return np.stack([-vectors[..., 1], vectors[..., 0]], axis=-1)


def curvature(u: LoopCurve) -> np.ndarray:
    """Signed curvature at the nodes from spectral derivatives"""
    du = spectral_derivative(u.samples)
    ddu = spectral_derivative(du)
    speed = np.hypot(du[:, 0], du[:, 1])
    tolerance = speed_tolerance(float(np.mean(speed)))
    if np.min(speed) < tolerance:
        raise DegenerateSpeed(
            f"Speed {np.min(speed):.3e} below {tolerance:.3e} at node {int(np.argmin(speed))}")
    return np.sum(ddu * rotate(du), axis=1) / speed ** 3


def normalize_to_cell(u: LoopCurve, a: float, b: float) -> LoopCurve:
    """Translate by a lattice vector so the barycenter lies in [0,a) x [0,b)"""
    if a <= 0 or b <= 0:
        raise ValueError("Cell periods must be positive")
    periods = np.array([a, b], dtype=float)
    shift = np.floor(barycenter(u) / periods)
    if not np.any(shift):
        return u
    moved = u.with_samples(u.samples - shift * periods)
    # roundoff may leave the mean a hair outside the cell
    for _ in range(CELL_SHIFT_ATTEMPTS):
        step = np.floor(barycenter(moved) / periods)
        if not np.any(step):
            break
        shift += step
        moved = u.with_samples(u.samples - shift * periods)
    return moved


# Reparametrization

def _trig_eval(coefficients: np.ndarray, t: np.ndarray) -> np.ndarray:
    """Evaluate a trigonometric interpolant (normalized DFT coefficients) at t"""
    n = coefficients.shape[0]
    m = wavenumbers(n)
    basis = np.exp(2j * np.pi * np.outer(t, m))
    if n % 2 == 0:
        basis[:, n // 2] = np.cos(np.pi * n * t)
    return np.real(basis @ coefficients)


def _uniform_trigonometric(u: LoopCurve) -> LoopCurve:
    n = u.n
    du = spectral_derivative(u.samples)
    speed = np.hypot(du[:, 0], du[:, 1])
    total = float(np.mean(speed))

    # s(t) = total t + P(t), P' = speed - total
    m = wavenumbers(n).astype(float)
    speed_hat = sfft.fft(speed) / n
    primitive_hat = np.zeros(n, dtype=complex)
    nonzero = m != 0
    if n % 2 == 0:
        nonzero[n // 2] = False
    primitive_hat[nonzero] = speed_hat[nonzero] / (2j * np.pi * m[nonzero])

    fine = OVERSAMPLING * n
    t_fine = np.arange(fine + 1) / fine
    p_fine = _trig_eval(primitive_hat, t_fine)
    s_fine = total * t_fine + p_fine - p_fine[0]
    s_fine = np.maximum.accumulate(s_fine)

    targets = total * np.arange(n) / n
    t_new = np.interp(targets, s_fine, t_fine)

    offset = p_fine[0]
    for _ in range(3):
        s_now = total * t_new + _trig_eval(primitive_hat, t_new) - offset
        sigma = _trig_eval(speed_hat, t_new)
        safe = sigma > speed_tolerance(total)
        t_new = np.where(safe, t_new - (s_now - targets) / np.where(safe, sigma, 1.0), t_new)

    coefficients = sfft.fft(u.samples, axis=0) / n
    return u.with_samples(_trig_eval(coefficients, t_new))


def _uniform_polygonal(u: LoopCurve) -> LoopCurve:
    closed = np.vstack([u.samples, u.samples[:1]])
    chords = np.diff(closed, axis=0)
    cumulative = np.concatenate([[0.0], np.cumsum(np.hypot(chords[:, 0], chords[:, 1]))])
    targets = cumulative[-1] * np.arange(u.n) / u.n
    resampled = np.column_stack([
        np.interp(targets, cumulative, closed[:, 0]),
        np.interp(targets, cumulative, closed[:, 1]),
    ])
    return u.with_samples(resampled)


def reparametrize_uniform(u: LoopCurve) -> LoopCurve:
    """Constant-speed parametrization of the same image"""
    arc = arc_length(u)
    if arc <= speed_tolerance(arc):
        raise DegenerateSpeed(f"Cannot reparametrize a constant loop (arc length {arc:.3e})")
    if u.is_polygonal:
        return _uniform_polygonal(u)
    return _uniform_trigonometric(u)


def arc_gaps(u: LoopCurve) -> np.ndarray:
    """Chord lengths between consecutive nodes"""
    chords = np.roll(u.samples, -1, axis=0) - u.samples
    return np.hypot(chords[:, 0], chords[:, 1])
