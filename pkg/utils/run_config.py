"""
Run Configuration
JSON run files merged over default settings
"""

import logging
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from .errors import ConfigurationError
from .loop_io import read_json

logger = logging.getLogger(__name__)

OUTPUT_DIR_VARIABLE = "LOOPSOLVER_OUTPUT_DIR"
CONSTRUCTORS = ("auto", "periodic", "bump", "k4")

discretization_settings = {
    "n": 256,
}

path_settings = {
    "constructor": "auto",
    "nodes": 33,
    "lambda_range": None,
}

solver_settings = {
    "tol_saddle": 1e-4,
    "tol_crit": 1e-6,
    "armijo": 0.5,
    "initial_step": None,
    "path_budget": 5000,
    "descent_budget": 100000,
    "redistribute_every": 50,
    "denjoy_factor": 1e3,
    "workers": 1,
    "refine": True,
}

verify_settings = {
    "ode_residual": 1e-3,
    "curvature_match": 5e-3,
    "iso_tolerance": 1e-6,
    "bounds_tolerance": 0.02,
}

POSITIVE_KEYS = ("tol_saddle", "tol_crit", "ode_residual", "curvature_match", "iso_tolerance", "bounds_tolerance")


def _merge(defaults: Dict[str, Any], values: Optional[Dict[str, Any]], section: str) -> Dict[str, Any]:
    values = values or {}
    if not isinstance(values, dict):
        raise ConfigurationError(f"Section '{section}' must be an object")
    unknown = set(values) - set(defaults)
    if unknown:
        raise ConfigurationError(f"Unknown keys in '{section}': {sorted(unknown)}")
    return {**defaults, **values}


def _number(value: Any, name: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not np.isfinite(value):
        raise ConfigurationError(f"'{name}' must be a finite number, got {value!r}")
    return float(value)


@dataclass
class RunConfig:
    """Everything one invocation needs, from one JSON document"""
    field: Dict[str, Any]
    lam: Optional[float] = None
    lambda_grid: Optional[List[float]] = None
    discretization: Dict[str, Any] = field(default_factory=lambda: dict(discretization_settings))
    path: Dict[str, Any] = field(default_factory=lambda: dict(path_settings))
    solver: Dict[str, Any] = field(default_factory=lambda: dict(solver_settings))
    verify: Dict[str, Any] = field(default_factory=lambda: dict(verify_settings))
    start: Optional[Dict[str, Any]] = None
    seed: int = 0
    output_dir: str = "loopsolver_output"

    def __post_init__(self):
        self.validate()

    def validate(self):
        if not isinstance(self.field, dict) or "name" not in self.field:
            raise ConfigurationError("'field' must be an object with at least a 'name'")
        if (self.lam is None) == (self.lambda_grid is None):
            raise ConfigurationError("Give exactly one of 'lambda' and 'lambda_grid'")
        if self.lam is not None:
            self.lam = _number(self.lam, "lambda")
            if self.lam == 0:
                raise ConfigurationError("lambda must be nonzero")
        if self.lambda_grid is not None:
            if not isinstance(self.lambda_grid, list):
                raise ConfigurationError("'lambda_grid' must be a list")
            self.lambda_grid = [_number(v, "lambda_grid") for v in self.lambda_grid]
            if any(v == 0 for v in self.lambda_grid):
                raise ConfigurationError("lambda_grid must exclude 0")

        for section in (self.solver, self.verify):
            for key in POSITIVE_KEYS:
                if key in section and _number(section[key], key) <= 0:
                    raise ConfigurationError(f"'{key}' must be positive")
        if self.solver["initial_step"] is not None and _number(self.solver["initial_step"], "initial_step") <= 0:
            raise ConfigurationError("'initial_step' must be positive")
        if not 0 < _number(self.solver["armijo"], "armijo") < 1:
            raise ConfigurationError("'armijo' must lie in (0, 1)")
        for key in ("path_budget", "descent_budget", "redistribute_every", "workers"):
            if not isinstance(self.solver[key], int) or self.solver[key] < 1:
                raise ConfigurationError(f"'{key}' must be a positive integer")

        n = self.discretization["n"]
        if not isinstance(n, int) or n < 16:
            raise ConfigurationError("discretization n must be an integer >= 16")
        if self.path["constructor"] not in CONSTRUCTORS:
            raise ConfigurationError(f"path constructor must be one of {CONSTRUCTORS}")
        if not isinstance(self.path["nodes"], int) or self.path["nodes"] < 16:
            raise ConfigurationError("path nodes must be an integer >= 16")
        if self.path["lambda_range"] is not None:
            lo, hi = self.lambda_range
            if lo <= 0 <= hi:
                raise ConfigurationError("path lambda_range must exclude 0")
        if not isinstance(self.seed, int):
            raise ConfigurationError("'seed' must be an integer")

    @property
    def points(self) -> int:
        return self.discretization["n"]

    @property
    def lambda_range(self) -> Tuple[float, float]:
        """Range the initial path must cover; defaults to the single lambda"""
        values = self.path["lambda_range"]
        if values is None:
            return (self.lam, self.lam)
        if not isinstance(values, list) or len(values) != 2:
            raise ConfigurationError("path lambda_range must be [lo, hi]")
        lo, hi = sorted(_number(v, "lambda_range") for v in values)
        return lo, hi

    @property
    def output_path(self) -> Path:
        return Path(self.output_dir)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "RunConfig":
        if not isinstance(data, dict):
            raise ConfigurationError("Run configuration must be a JSON object")
        known = {"field", "lambda", "lambda_grid", "discretization", "path", "solver", "verify",
                 "start", "seed", "output_dir"}
        unknown = set(data) - known
        if unknown:
            raise ConfigurationError(f"Unknown configuration keys: {sorted(unknown)}")
        if "field" not in data:
            raise ConfigurationError("Configuration needs a 'field' section")
        output_dir = os.environ.get(OUTPUT_DIR_VARIABLE) or data.get("output_dir", "loopsolver_output")
        return cls(
            field=data["field"],
            lam=data.get("lambda"),
            lambda_grid=data.get("lambda_grid"),
            discretization=_merge(discretization_settings, data.get("discretization"), "discretization"),
            path=_merge(path_settings, data.get("path"), "path"),
            solver=_merge(solver_settings, data.get("solver"), "solver"),
            verify=_merge(verify_settings, data.get("verify"), "verify"),
            start=data.get("start"),
            seed=data.get("seed", 0),
            output_dir=str(output_dir),
        )

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        logger.debug("Loading configuration from %s", path)
        return cls.from_dict(read_json(path))

    def to_dict(self) -> Dict[str, Any]:
        data = {
            "field": self.field,
            "discretization": self.discretization,
            "path": self.path,
            "solver": self.solver,
            "verify": self.verify,
            "seed": self.seed,
            "output_dir": self.output_dir,
        }
        if self.lam is not None:
            data["lambda"] = self.lam
        else:
            data["lambda_grid"] = self.lambda_grid
        if self.start is not None:
            data["start"] = self.start
        return data
