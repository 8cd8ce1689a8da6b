"""
Loop Verification
ODE residuals, curvature matching, exact circle solutions and level bounds
"""

import logging
from dataclasses import dataclass, field as dataclass_field
from typing import TYPE_CHECKING, List, NamedTuple, Optional, Tuple, Union

import numpy as np

from utils.errors import DegenerateSpeed, SignMismatch, WrongKind
from utils.fields import CurvatureField, FieldKind
from utils.loopgeom import DEFAULT_NODES, LoopCurve, curvature, rotate, spectral_derivative, speed_tolerance

from .functional import iso_check, level_lower_bound, level_upper_bound
from .paths import circle_loop

if TYPE_CHECKING:
    from .mountainpass import MountainPassEstimate

logger = logging.getLogger(__name__)


@dataclass
class VerifyThresholds:
    """Acceptance thresholds for a candidate loop"""
    ode_residual: float = 1e-3
    curvature_match: float = 5e-3
    iso_tolerance: float = 1e-6
    bounds_tolerance: float = 0.02


@dataclass
class CheckRecord:
    name: str
    value: Optional[float]
    threshold: Optional[float]
    passed: bool
    note: str = ""

    def to_dict(self) -> dict:
        return {"name": self.name, "value": self.value, "threshold": self.threshold,
                "passed": self.passed, "note": self.note}


@dataclass
class VerificationReport:
    """Outcome of every check run on one loop"""
    ode_residual_sup: float
    curvature_mismatch_sup: float
    iso_slack: float
    bounds_ok: bool
    details: List[CheckRecord] = dataclass_field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(record.passed for record in self.details)

    def to_dict(self) -> dict:
        return {
            "ode_residual_sup": self.ode_residual_sup,
            "curvature_mismatch_sup": self.curvature_mismatch_sup,
            "iso_slack": self.iso_slack,
            "bounds_ok": self.bounds_ok,
            "passed": self.passed,
            "details": [record.to_dict() for record in self.details],
        }


class OracleCircle(NamedTuple):
    loop: LoopCurve
    energy: float


def _regular_derivatives(u: LoopCurve) -> Tuple[np.ndarray, np.ndarray]:
    du = spectral_derivative(u.samples)
    speed = np.hypot(du[:, 0], du[:, 1])
    tolerance = speed_tolerance(float(np.mean(speed)))
    if np.min(speed) < tolerance:
        raise DegenerateSpeed(f"Speed {np.min(speed):.3e} below {tolerance:.3e}")
    return du, spectral_derivative(du)


def ode_residual(u: LoopCurve, field: CurvatureField, lam: float) -> float:
    """sup |u'' - lambda L(u) K(u) i u'| / (1 + |u''|)"""
    du, ddu = _regular_derivatives(u)
    length = np.sqrt(np.mean(np.sum(du * du, axis=1)))
    defect = ddu - lam * length * field.k_at(u.samples)[:, None] * rotate(du)
    return float(np.max(np.hypot(defect[:, 0], defect[:, 1]) / (1.0 + np.hypot(ddu[:, 0], ddu[:, 1]))))


def curvature_match(u: LoopCurve, field: CurvatureField, lam: float) -> float:
    """sup |kappa - lambda K(u)| over the nodes"""
    _regular_derivatives(u)
    return float(np.max(np.abs(curvature(u) - lam * field.k_at(u.samples))))


def circle_oracle(field: CurvatureField, lam: float, j: int, points: int = DEFAULT_NODES) -> OracleCircle:
    """Exact j-fold circle solution for constant K and its energy j pi / (lambda K0)"""
    if field.kind is not FieldKind.CONSTANT:
        raise WrongKind(f"circle_oracle needs a constant field, got {field.kind.value}")
    if j == 0 or np.sign(j) != np.sign(lam * field.k0):
        raise SignMismatch(f"j = {j} must have the sign of lambda K0 = {lam * field.k0}")
    radius = 1.0 / abs(lam * field.k0)
    return OracleCircle(circle_loop(radius, (0.0, 0.0), j, points), j * np.pi / (lam * field.k0))


def bounds_for(field: CurvatureField, lam: float) -> Tuple[float, Optional[float]]:
    """Lower bound pi/(|lambda| ||K||) and, with an asymptotic constant, pi/|lambda K0|"""
    return level_lower_bound(field, lam), level_upper_bound(field, lam)


def check_bounds(report: Union["MountainPassEstimate", float], field: CurvatureField, lam: float,
                 tolerance: float = 0.02) -> bool:
    """True iff the estimated level lies within the two-sided bounds up to `tolerance`"""
    value = getattr(report, "c_estimate", report)
    if value is None or not np.isfinite(value):
        return False
    lower, upper = bounds_for(field, lam)
    if value < lower * (1 - tolerance):
        return False
    return upper is None or value <= upper * (1 + tolerance)


def verify_loop(u: LoopCurve, field: CurvatureField, lam: float, thresholds: Optional[VerifyThresholds] = None,
                estimate: Optional["MountainPassEstimate"] = None) -> VerificationReport:
    """Run every applicable check on a candidate loop"""
    thresholds = thresholds or VerifyThresholds()
    details: List[CheckRecord] = []

    try:
        residual = ode_residual(u, field, lam)
        mismatch = curvature_match(u, field, lam)
    except DegenerateSpeed as exc:
        logger.warning("Loop is not regular: %s", exc)
        residual = mismatch = float("inf")
        details.append(CheckRecord("regularity", None, None, False, str(exc)))
    details.append(CheckRecord("ode_residual", residual, thresholds.ode_residual,
                               residual < thresholds.ode_residual))
    details.append(CheckRecord("curvature_match", mismatch, thresholds.curvature_match,
                               mismatch < thresholds.curvature_match))

    iso = iso_check(u, field)
    details.append(CheckRecord("isoperimetric", iso.slack, -thresholds.iso_tolerance,
                               iso.slack >= -thresholds.iso_tolerance))

    bounds_ok = True
    if estimate is not None:
        bounds_ok = check_bounds(estimate, field, lam, thresholds.bounds_tolerance)
        lower, upper = bounds_for(field, lam)
        note = f"lower {lower:.6g}" + (f", upper {upper:.6g}" if upper is not None else "")
        details.append(CheckRecord("level_bounds", float(estimate.c_estimate), thresholds.bounds_tolerance,
                                   bounds_ok, note))

    return VerificationReport(
        ode_residual_sup=float(residual) if np.isfinite(residual) else float("inf"),
        curvature_mismatch_sup=float(mismatch),
        iso_slack=float(max(iso.slack, 0.0)),
        bounds_ok=bounds_ok,
        details=details,
    )
