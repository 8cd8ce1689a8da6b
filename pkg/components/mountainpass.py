"""
Mountain-Pass Solver
Estimation of the mountain-pass level by path deformation, local refinement
of saddle loops, and lambda sweeps with difference-quotient diagnostics
"""

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field as dataclass_field
from typing import Callable, Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np
from scipy import optimize

from utils.errors import (CollapseToConstant, DegenerateSpeed, EndpointViolation, LoopSolverError,
                          NearConstantLoop, TooCloseToCurve)
from utils.fields import CurvatureField, FieldKind
from utils.loopgeom import (DEFAULT_NODES, Interpolation, LoopCurve, barycenter, length_energy,
                            normalize_to_cell, reparametrize_uniform)
from utils.winding import point_index

from .functional import (MIN_LENGTH, directional_derivative, energy_value, gradient, well_length)
from .paths import DEFAULT_PATH_NODES, PathFamily, initial_path, resolve_constructor, segment_peak
from .verify import ode_residual

logger = logging.getLogger(__name__)


@dataclass
class SolverOptions:
    """Tolerances, step control and budgets shared by the solvers"""
    tol_saddle: float = 1e-4
    tol_crit: float = 1e-6
    armijo: float = 0.5
    sufficient_decrease: float = 1e-4
    initial_step: Optional[float] = None
    step_growth: float = 2.0
    min_step: float = 1e-14
    path_budget: int = 5_000
    descent_budget: int = 100_000
    redistribute_every: int = 50
    max_path_factor: int = 4
    segment_xatol: float = 1e-6
    denjoy_factor: float = 1e3
    workers: int = 1
    refine: bool = True

    def step_for(self, field: CurvatureField, lam: float) -> float:
        if self.initial_step is not None:
            return self.initial_step
        return 0.1 / (1.0 + abs(lam) * field.sup_norm)


@dataclass
class MountainPassEstimate:
    """Path maximum after deformation and where it sits"""
    c_estimate: float
    argmax_loop: LoopCurve
    argmax_s: float
    grad_dual_norm_at_max: float
    iterations: int
    path_final: PathFamily
    converged: bool = False
    status: str = "converged"
    max_history: List[float] = dataclass_field(default_factory=list)
    lam: float = 0.0

    def to_dict(self) -> dict:
        return {
            "lambda": self.lam,
            "c_estimate": self.c_estimate,
            "argmax_s": self.argmax_s,
            "grad_dual_norm_at_max": self.grad_dual_norm_at_max,
            "iterations": self.iterations,
            "converged": self.converged,
            "status": self.status,
            "path_nodes": self.path_final.size,
        }


@dataclass
class CriticalPointResult:
    """Outcome of the local refinement of a loop"""
    loop: LoopCurve
    energy: float
    grad_dual_norm: float
    ode_residual: float
    winding_at_barycenter: Optional[int]
    converged: bool
    length_history: List[float] = dataclass_field(default_factory=list)
    energy_history: List[float] = dataclass_field(default_factory=list)
    iterations: int = 0
    status: str = "converged"
    regime: str = "pass"

    def to_dict(self) -> dict:
        return {
            "energy": self.energy,
            "grad_dual_norm": self.grad_dual_norm,
            "ode_residual": self.ode_residual,
            "winding_at_barycenter": self.winding_at_barycenter,
            "converged": self.converged,
            "status": self.status,
            "regime": self.regime,
            "iterations": self.iterations,
            "length_history": list(self.length_history),
        }


@dataclass
class SweepEntry:
    """One lambda of a sweep; failures are kept inline"""
    lam: float
    c: Optional[float]
    converged: bool
    grad_norm: Optional[float]
    ode_residual: Optional[float]
    status: str
    error: Optional[str] = None
    estimate: Optional[MountainPassEstimate] = None
    critical: Optional[CriticalPointResult] = None

    def to_dict(self) -> dict:
        return {
            "lambda": self.lam,
            "c": self.c,
            "converged": self.converged,
            "grad_norm": self.grad_norm,
            "ode_residual": self.ode_residual,
            "status": self.status,
            "error": self.error,
            "estimate": self.estimate.to_dict() if self.estimate else None,
            "critical_point": self.critical.to_dict() if self.critical else None,
        }


@dataclass
class LambdaSweep:
    """Levels over a lambda grid and their left difference quotients"""
    lambdas: List[float]
    c_values: List[Optional[float]]
    left_quotients: List[Optional[float]]
    flagged: List[bool]
    entries: List[SweepEntry] = dataclass_field(default_factory=list)
    scaled_level_spread: Optional[float] = None

    def rows(self) -> List[dict]:
        """Rows of the sweep CSV"""
        return [sweep_row(entry, quotient, flag)
                for entry, quotient, flag in zip(self.entries, self.left_quotients, self.flagged)]

    def to_dict(self) -> dict:
        return {
            "lambdas": self.lambdas,
            "c_values": self.c_values,
            "left_quotients": self.left_quotients,
            "flagged": self.flagged,
            "scaled_level_spread": self.scaled_level_spread,
        }


def sweep_row(entry: SweepEntry, quotient: Optional[float] = None, flag: bool = False) -> dict:
    """One row of the sweep CSV"""
    return {
        "lambda": entry.lam,
        "c": entry.c,
        "quotient": quotient,
        "flag": flag,
        "converged": entry.converged,
        "grad_norm": entry.grad_norm,
        "ode_residual": entry.ode_residual,
    }


class MountainPassSolver:
    """Path deformation and saddle refinement for one field and lambda"""

    def __init__(self, field: CurvatureField, lam: float, options: Optional[SolverOptions] = None):
        if lam == 0:
            raise ValueError("lambda must be nonzero")
        self.field = field
        self.lam = float(lam)
        self.options = options or SolverOptions()
        self.periodic = field.kind is FieldKind.DOUBLY_PERIODIC

    def energy(self, u: LoopCurve) -> float:
        return energy_value(u, self.field, self.lam)

    def _normalize(self, u: LoopCurve) -> LoopCurve:
        if self.periodic:
            return normalize_to_cell(u, *self.field.periods)
        return u

    # Path deformation

    def _segment_peak(self, a: LoopCurve, b: LoopCurve, ea: float, eb: float) -> Tuple[float, float]:
        return segment_peak(a, b, self.field, self.lam, (ea, eb), self.options.segment_xatol)

    def estimate(self, path: PathFamily) -> MountainPassEstimate:
        """Choi-McKenna deformation of a piecewise-linear path of loops"""
        opts = self.options
        nodes = list(path.nodes)
        labels = list(path.labels)
        energies = [self.energy(u) for u in nodes]
        if energies[-1] >= 0:
            raise EndpointViolation(f"Endpoint energy {energies[-1]:.6g} is not negative at lambda {self.lam}")
        peaks = [self._segment_peak(nodes[j], nodes[j + 1], energies[j], energies[j + 1])
                 for j in range(len(nodes) - 1)]
        node_cap = opts.max_path_factor * path.size
        step = opts.step_for(self.field, self.lam)
        step_cap = 100.0 * step
        history: List[float] = []
        status, converged, grad_norm = "budget", False, float("nan")
        iterations = 0

        def insert(j: int, theta: float) -> int:
            loop = nodes[j].blend(nodes[j + 1], theta)
            nodes.insert(j + 1, loop)
            labels.insert(j + 1, labels[j])
            energies.insert(j + 1, self.energy(loop))
            peaks[j:j + 1] = [
                self._segment_peak(nodes[j], loop, energies[j], energies[j + 1]),
                self._segment_peak(loop, nodes[j + 2], energies[j + 1], energies[j + 2]),
            ]
            return j + 1

        def locate() -> int:
            """Make the path maximum a node and return its index"""
            j = int(np.argmax([value for _, value in peaks]))
            theta, value = peaks[j]
            rise = value - max(energies[j], energies[j + 1])
            if 1e-9 < theta < 1 - 1e-9 and rise > 1e-12 * max(1.0, abs(value)):
                return insert(j, theta)
            if energies[j] >= energies[j + 1]:
                return j
            return j + 1

        while True:
            top = locate()
            current = max(value for _, value in peaks)
            history.append(current)
            if top == 0 or top == len(nodes) - 1:
                raise EndpointViolation("Path maximum sits on an endpoint; path is not admissible")
            grad = gradient(nodes[top], self.field, self.lam)
            grad_norm = grad.dual_norm
            if grad_norm < opts.tol_saddle:
                status, converged = "converged", True
                break
            if iterations >= opts.path_budget:
                logger.warning("Path budget of %d iterations exhausted at level %.8g (gradient %.3e)",
                               opts.path_budget, current, grad_norm)
                break

            accepted = False
            while step >= opts.min_step:
                try:
                    trial = reparametrize_uniform(nodes[top].with_samples(nodes[top].samples - step * grad.values))
                except DegenerateSpeed:
                    step *= opts.armijo
                    continue
                trial_energy = self.energy(trial)
                left = self._segment_peak(nodes[top - 1], trial, energies[top - 1], trial_energy)
                right = self._segment_peak(trial, nodes[top + 1], trial_energy, energies[top + 1])
                others = [value for k, (_, value) in enumerate(peaks) if k not in (top - 1, top)]
                new_max = max(others + [left[1], right[1]])
                if new_max < current:
                    nodes[top], energies[top] = trial, trial_energy
                    peaks[top - 1], peaks[top] = left, right
                    step = min(step * opts.step_growth, step_cap)
                    accepted = True
                    break
                step *= opts.armijo
            if not accepted:
                status = "stalled"
                logger.warning("Path deformation stalled at level %.8g (gradient %.3e)", current, grad_norm)
                break

            iterations += 1
            logger.debug("iteration %d: level %.10g, gradient %.3e, step %.3e", iterations, current, grad_norm, step)
            if iterations % opts.redistribute_every == 0:
                self._redistribute(nodes, labels, energies, peaks, node_cap)

        top = int(np.argmax(energies))
        final = path.with_nodes(nodes, labels)
        return MountainPassEstimate(
            c_estimate=float(energies[top]),
            argmax_loop=nodes[top],
            argmax_s=float(final.parameters[top]),
            grad_dual_norm_at_max=float(grad_norm),
            iterations=iterations,
            path_final=final,
            converged=converged,
            status=status,
            max_history=history,
            lam=self.lam,
        )

    def _redistribute(self, nodes: List[LoopCurve], labels: List[str], energies: List[float],
                      peaks: List[Tuple[float, float]], node_cap: int):
        """Refine chords around the maximum, drop redundant low nodes elsewhere.

        Both moves leave the path maximum unchanged.
        """
        current = max(value for _, value in peaks)
        top = int(np.argmax(energies))
        spread = current - min(energies)
        window = range(max(0, top - 3), min(len(nodes) - 1, top + 3))
        for j in sorted(window, reverse=True):
            if len(nodes) >= node_cap:
                break
            if abs(energies[j] - energies[j + 1]) > 0.05 * spread:
                loop = nodes[j].blend(nodes[j + 1], 0.5)
                nodes.insert(j + 1, loop)
                labels.insert(j + 1, labels[j])
                energies.insert(j + 1, self.energy(loop))
                peaks[j:j + 1] = [
                    self._segment_peak(nodes[j], loop, energies[j], energies[j + 1]),
                    self._segment_peak(loop, nodes[j + 2], energies[j + 1], energies[j + 2]),
                ]

        ranked = sorted(nodes[1:-1], key=lambda loop: energies[nodes.index(loop)])
        for loop in ranked:
            if len(nodes) <= node_cap:
                break
            k = nodes.index(loop)
            if abs(k - int(np.argmax(energies))) <= 3:
                continue
            chord = self._segment_peak(nodes[k - 1], nodes[k + 1], energies[k - 1], energies[k + 1])
            if chord[1] < current:
                del nodes[k], labels[k], energies[k]
                peaks[k - 1:k + 1] = [chord]

    # Local refinement

    def _lift(self, u: LoopCurve) -> Optional[Tuple[LoopCurve, float]]:
        """Maximum of E on the ray barycenter + s (u - barycenter), s beyond half the well"""
        center = barycenter(u)
        shape = u.samples - center
        length = length_energy(u)
        if length < MIN_LENGTH:
            return None

        def along(s: float) -> LoopCurve:
            return u.with_samples(center + s * shape)

        def phi(s: float) -> float:
            return self.energy(along(s))

        start = 0.5 * well_length(self.field, self.lam) / length
        grid = [start]
        values = [phi(start)]
        for _ in range(60):
            grid.append(grid[-1] * np.sqrt(2.0))
            values.append(phi(grid[-1]))
            if len(values) >= 3 and values[-1] < values[-2]:
                break
        else:
            return None
        k = int(np.argmax(values))
        lo = grid[max(k - 1, 0)]
        hi = grid[min(k + 1, len(grid) - 1)]
        found = optimize.minimize_scalar(lambda s: -phi(s), bounds=(lo, hi), method="bounded",
                                         options={"xatol": 1e-12 * grid[k]})
        s_best, e_best = grid[k], values[k]
        if found.success and -found.fun >= e_best:
            s_best, e_best = float(found.x), float(-found.fun)

        # secant polish of d/ds E = E'[shape]
        direction = shape
        s_prev, d_prev = s_best, directional_derivative(along(s_best), self.field, self.lam, direction)
        s_next = s_best * (1 + 1e-6)
        for _ in range(4):
            d_next = directional_derivative(along(s_next), self.field, self.lam, direction)
            if d_next == d_prev:
                break
            s_new = s_next - d_next * (s_next - s_prev) / (d_next - d_prev)
            if not (lo <= s_new <= hi):
                break
            s_prev, d_prev, s_next = s_next, d_next, s_new
        candidate = phi(s_next)
        if candidate >= e_best:
            s_best, e_best = s_next, candidate
        return along(s_best), e_best

    def _finish(self, u: LoopCurve, value: float, grad_norm: float, converged: bool, status: str,
                lengths: List[float], energies: List[float], iterations: int, regime: str) -> CriticalPointResult:
        try:
            residual = ode_residual(u, self.field, self.lam)
        except DegenerateSpeed:
            residual = float("inf")
        try:
            winding = point_index(u, barycenter(u))
        except TooCloseToCurve:
            winding = None
        if converged:
            logger.info("Critical loop at energy %.10g after %d steps (gradient %.3e, residual %.3e)",
                        value, iterations, grad_norm, residual)
        return CriticalPointResult(loop=u, energy=float(value), grad_dual_norm=float(grad_norm),
                                   ode_residual=float(residual), winding_at_barycenter=winding,
                                   converged=converged, length_history=lengths, energy_history=energies,
                                   iterations=iterations, status=status, regime=regime)

    def refine(self, start: LoopCurve) -> CriticalPointResult:
        """Descend to a critical loop of the mountain-pass type.

        Loops shorter than the well length are plain H1 descents and collapse.
        Longer loops are lifted to the energy maximum on their scaling ray and
        moved along the negative gradient, lifting again after every step.
        """
        opts = self.options
        u = self._normalize(start.as_interpolation(Interpolation.TRIGONOMETRIC))
        length = length_energy(u)
        if length < MIN_LENGTH:
            raise CollapseToConstant(f"Start loop has length energy {length:.3e}", [length])
        lengths = [length]
        grad = gradient(u, self.field, self.lam)
        value = grad.energy
        energies = [value]
        if grad.dual_norm < opts.tol_crit:
            return self._finish(u, value, grad.dual_norm, True, "converged", lengths, energies, 0, "pass")

        regime = "well" if length < well_length(self.field, self.lam) else "pass"
        if regime == "pass":
            lifted = self._lift(u)
            if lifted is None:
                logger.warning("No energy peak on the scaling ray of the start loop")
                return self._finish(u, value, grad.dual_norm, False, "no-peak", lengths, energies, 0, regime)
            u, value = lifted
            u = self._normalize(u)
            lengths, energies = [length_energy(u)], [value]
            grad = gradient(u, self.field, self.lam)

        step = opts.step_for(self.field, self.lam)
        step_cap = 1e3 * step
        iterations = 0
        while grad.dual_norm >= opts.tol_crit:
            if iterations >= opts.descent_budget:
                logger.warning("Descent budget of %d steps exhausted (gradient %.3e)", opts.descent_budget, grad.dual_norm)
                return self._finish(u, value, grad.dual_norm, False, "budget", lengths, energies, iterations, regime)
            if step < opts.min_step:
                logger.warning("Line search stalled at gradient %.3e", grad.dual_norm)
                return self._finish(u, value, grad.dual_norm, False, "stalled", lengths, energies, iterations, regime)

            moved = u.with_samples(u.samples - step * grad.values)
            if regime == "well" and length_energy(moved) < MIN_LENGTH:
                raise CollapseToConstant("Descent collapsed the loop to a constant", lengths + [length_energy(moved)])
            try:
                trial = self._normalize(reparametrize_uniform(moved))
            except DegenerateSpeed:
                if regime == "well":
                    raise CollapseToConstant("Descent collapsed the loop to a constant", lengths)
                step *= opts.armijo
                continue
            if regime == "pass":
                lifted = self._lift(trial)
                if lifted is None:
                    step *= opts.armijo
                    continue
                trial, trial_value = lifted
                trial = self._normalize(trial)
            else:
                trial_value = self.energy(trial)

            if trial_value > value - opts.sufficient_decrease * step * grad.dual_norm ** 2:
                step *= opts.armijo
                continue

            u, value = trial, trial_value
            iterations += 1
            lengths.append(length_energy(u))
            energies.append(value)
            step = min(step * opts.step_growth, step_cap)
            if regime == "well" and lengths[-1] < MIN_LENGTH:
                raise CollapseToConstant("Descent collapsed the loop to a constant", lengths)
            try:
                grad = gradient(u, self.field, self.lam)
            except NearConstantLoop as exc:
                raise CollapseToConstant(str(exc), lengths) from exc
            logger.debug("step %d: energy %.12g, gradient %.3e, length %.6g", iterations, value, grad.dual_norm, lengths[-1])

        return self._finish(u, value, grad.dual_norm, True, "converged", lengths, energies, iterations, regime)


def estimate_c(path: PathFamily, field: CurvatureField, lam: float,
               options: Optional[SolverOptions] = None) -> MountainPassEstimate:
    """Deform the path and return its highest loop"""
    return MountainPassSolver(field, lam, options).estimate(path)


def refine_critical(start: LoopCurve, field: CurvatureField, lam: float,
                    options: Optional[SolverOptions] = None) -> CriticalPointResult:
    """Refine a loop to a critical point of E"""
    return MountainPassSolver(field, lam, options).refine(start)


# Sweeps

def _sweep_task(args) -> SweepEntry:
    field, path, lam, options = args
    solver = MountainPassSolver(field, lam, options)
    try:
        estimate = solver.estimate(path)
    except LoopSolverError as exc:
        logger.error("lambda %.6g: %s", lam, exc)
        return SweepEntry(lam, None, False, None, None, "failed", f"{type(exc).__name__}: {exc}")
    entry = SweepEntry(lam, estimate.c_estimate, estimate.converged, estimate.grad_dual_norm_at_max,
                       None, estimate.status, estimate=estimate)
    if not options.refine:
        return entry
    try:
        critical = solver.refine(estimate.argmax_loop)
    except LoopSolverError as exc:
        logger.warning("lambda %.6g: refinement failed: %s", lam, exc)
        entry.error = f"{type(exc).__name__}: {exc}"
        entry.converged = False
        return entry
    entry.critical = critical
    entry.converged = estimate.converged and critical.converged
    entry.grad_norm = critical.grad_dual_norm
    entry.ode_residual = critical.ode_residual
    if not critical.converged:
        entry.status = critical.status
    return entry


def _difference_quotients(lambdas: Sequence[float], values: Sequence[Optional[float]]) -> List[Optional[float]]:
    quotients: List[Optional[float]] = [None]
    for k in range(1, len(lambdas)):
        if values[k] is None or values[k - 1] is None:
            quotients.append(None)
        else:
            quotients.append((values[k - 1] - values[k]) / (lambdas[k] - lambdas[k - 1]))
    return quotients


def lambda_sweep(field: CurvatureField, lambda_grid: Sequence[float], options: Optional[SolverOptions] = None,
                 points: int = DEFAULT_NODES, nodes: int = DEFAULT_PATH_NODES, constructor: str = "auto",
                 on_entry: Optional[Callable[[SweepEntry, Optional[float]], None]] = None) -> LambdaSweep:
    """Levels over a lambda grid; one path per sign of lambda"""
    options = options or SolverOptions()
    grid = [float(v) for v in lambda_grid]
    if any(v == 0 for v in grid):
        raise ValueError("lambda grid must exclude 0")
    unique = sorted(set(grid))
    if len(unique) < len(grid):
        logger.warning("Removed %d duplicate lambda values from the grid", len(grid) - len(unique))
    if not unique:
        return LambdaSweep([], [], [], [])

    constructor = resolve_constructor(field, constructor)
    groups = [[v for v in unique if v < 0], [v for v in unique if v > 0]]
    if constructor == "bump":
        groups = [[v] for v in unique]
    tasks = []
    failures: Dict[float, SweepEntry] = {}
    for group in groups:
        if not group:
            continue
        try:
            span = group[0] if constructor == "bump" else (group[0], group[-1])
            shared = initial_path(field, span, constructor, points, nodes)
        except LoopSolverError as exc:
            logger.error("No admissible path for lambda in [%g, %g]: %s", group[0], group[-1], exc)
            for lam in group:
                failures[lam] = SweepEntry(lam, None, False, None, None, "failed", f"{type(exc).__name__}: {exc}")
            continue
        tasks.extend((field, shared, lam, options) for lam in group)

    def completed() -> Iterator[SweepEntry]:
        """Entries in ascending lambda as they finish"""
        if options.workers > 1 and len(tasks) > 1:
            with ProcessPoolExecutor(max_workers=options.workers) as pool:
                finished = pool.map(_sweep_task, tasks)
                for lam in unique:
                    yield failures[lam] if lam in failures else next(finished)
        else:
            pending = iter(tasks)
            for lam in unique:
                yield failures[lam] if lam in failures else _sweep_task(next(pending))

    entries: List[SweepEntry] = []
    for entry in completed():
        entries.append(entry)
        if on_entry is not None:
            previous = entries[-2].c if len(entries) > 1 else None
            quotient = None
            if previous is not None and entry.c is not None:
                quotient = (previous - entry.c) / (entry.lam - entries[-2].lam)
            on_entry(entry, quotient)

    values = [entry.c for entry in entries]
    quotients = _difference_quotients(unique, values)
    finite = [abs(q) for q in quotients if q is not None and np.isfinite(q)]
    reference = float(np.median(finite)) if finite else 0.0
    flagged = [bool(q is not None and reference > 0 and q > options.denjoy_factor * reference) for q in quotients]

    spread = None
    if field.kind is FieldKind.CONSTANT:
        scaled = [abs(lam) * c for lam, c in zip(unique, values) if c is not None]
        if scaled:
            spread = float((max(scaled) - min(scaled)) / abs(np.mean(scaled)))
    return LambdaSweep(lambdas=unique, c_values=values, left_quotients=quotients, flagged=flagged,
                       entries=entries, scaled_level_spread=spread)
