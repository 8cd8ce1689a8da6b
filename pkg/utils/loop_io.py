"""
Loop Files
Reading and writing loops, paths, index maps and sweep tables
"""

import json
import logging
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Union

import numpy as np
import pandas as pd

from .errors import LoopFormatError
from .loopgeom import MIN_NODES, Interpolation, LoopCurve

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

LOOP_COLUMNS = ["t", "x", "y"]
PATH_COLUMNS = ["s", "E", "L", "G"]
SWEEP_COLUMNS = ["lambda", "c", "quotient", "flag", "converged", "grad_norm", "ode_residual"]
FLOAT_FORMAT = "%.17g"
INTERPOLATION_MARKER = "# interpolation: "


def _plain(value: Any) -> Any:
    """numpy scalars and arrays to JSON-native values"""
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return _plain(value.tolist())
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    return value


def dumps(payload: Dict[str, Any]) -> str:
    """Deterministic JSON text"""
    return json.dumps(_plain(payload), sort_keys=True, indent=2) + "\n"


def write_json(payload: Dict[str, Any], path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(payload), encoding="utf-8")
    return path


def read_json(path: PathLike) -> Dict[str, Any]:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise LoopFormatError(f"Cannot read JSON from {path}: {exc}") from exc


# Loops

def loop_frame(u: LoopCurve) -> pd.DataFrame:
    """Loop as a t,x,y frame"""
    return pd.DataFrame({"t": u.parameters, "x": u.samples[:, 0], "y": u.samples[:, 1]}, columns=LOOP_COLUMNS)


def loop_to_json(u: LoopCurve) -> Dict[str, Any]:
    return {"n": u.n, "interpolation": u.interpolation.value, "points": u.samples.tolist()}


def _checked_loop(points: np.ndarray, interpolation: Interpolation, source: str) -> LoopCurve:
    if points.ndim != 2 or points.shape[1] != 2:
        raise LoopFormatError(f"{source}: expected an (N, 2) array of points, got shape {points.shape}")
    if points.shape[0] < MIN_NODES:
        raise LoopFormatError(f"{source}: a loop needs at least {MIN_NODES} points, got {points.shape[0]}")
    if not np.all(np.isfinite(points)):
        raise LoopFormatError(f"{source}: non-finite coordinates")
    return LoopCurve(points, interpolation)


def _interpolation(value: Optional[str], source: str) -> Interpolation:
    if value is None:
        return Interpolation.TRIGONOMETRIC
    try:
        return Interpolation(value)
    except ValueError as exc:
        raise LoopFormatError(f"{source}: unknown interpolation '{value}'") from exc


def loop_from_json(payload: Dict[str, Any], source: str = "loop") -> LoopCurve:
    """Validated loop from a parsed JSON payload"""
    if not isinstance(payload, dict) or "points" not in payload:
        raise LoopFormatError(f"{source}: missing 'points'")
    try:
        points = np.asarray(payload["points"], dtype=float)
    except (TypeError, ValueError) as exc:
        raise LoopFormatError(f"{source}: points are not numeric") from exc
    if "n" in payload and payload["n"] != len(points):
        raise LoopFormatError(f"{source}: n = {payload['n']} but {len(points)} points given")
    return _checked_loop(points, _interpolation(payload.get("interpolation"), source), source)


def write_loop_csv(u: LoopCurve, path: PathLike) -> Path:
    """CSV with columns t,x,y at full double precision; polygonal loops end with a marker line"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    loop_frame(u).to_csv(path, index=False, float_format=FLOAT_FORMAT)
    if u.is_polygonal:
        with path.open("a", encoding="utf-8") as handle:
            handle.write(f"{INTERPOLATION_MARKER}{u.interpolation.value}\n")
    return path


def _csv_interpolation(path: PathLike) -> Optional[str]:
    with open(path, encoding="utf-8") as handle:
        for line in handle:
            if line.startswith(INTERPOLATION_MARKER):
                return line[len(INTERPOLATION_MARKER):].strip()
    return None


def read_loop_csv(path: PathLike, interpolation: Optional[Interpolation] = None) -> LoopCurve:
    """Loop from a t,x,y CSV; the interpolation comes from the marker line unless given"""
    try:
        frame = pd.read_csv(path, float_precision="round_trip", comment="#")
        marker = _csv_interpolation(path)
    except (OSError, ValueError, pd.errors.ParserError) as exc:
        raise LoopFormatError(f"Cannot parse loop CSV {path}: {exc}") from exc
    missing = [c for c in ("x", "y") if c not in frame.columns]
    if missing:
        raise LoopFormatError(f"{path}: missing columns {missing}")
    try:
        points = frame[["x", "y"]].to_numpy(dtype=float)
        t = frame["t"].to_numpy(dtype=float) if "t" in frame.columns else None
    except ValueError as exc:
        raise LoopFormatError(f"{path}: coordinates are not numeric") from exc
    if t is not None and not np.allclose(t, np.arange(len(t)) / max(len(t), 1), rtol=0.0, atol=1e-9):
        raise LoopFormatError(f"{path}: t must be the uniform grid k/N")
    if interpolation is None:
        interpolation = _interpolation(marker, str(path))
    return _checked_loop(points, Interpolation(interpolation), str(path))


def write_loop_json(u: LoopCurve, path: PathLike) -> Path:
    return write_json(loop_to_json(u), path)


def read_loop(path: PathLike) -> LoopCurve:
    """Loop from a .csv or .json file"""
    path = Path(path)
    if not path.exists():
        raise LoopFormatError(f"Loop file {path} does not exist")
    if path.suffix.lower() == ".json":
        return loop_from_json(read_json(path), str(path))
    if path.suffix.lower() == ".csv":
        return read_loop_csv(path)
    raise LoopFormatError(f"Unsupported loop file type '{path.suffix}'")


# Paths

def write_path(nodes: Iterable[LoopCurve], rows: List[Dict[str, float]], directory: PathLike,
               meta: Optional[Dict[str, Any]] = None) -> Path:
    """One JSON file per node, a path.json listing them and the per-node energy table"""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    files = []
    for index, u in enumerate(nodes):
        name = f"node_{index:04d}.json"
        write_loop_json(u, directory / name)
        files.append(name)
    write_json({"nodes": files, "meta": meta or {}}, directory / "path.json")
    pd.DataFrame(rows, columns=PATH_COLUMNS).to_csv(directory / "path_energies.csv", index=False,
                                                    float_format=FLOAT_FORMAT)
    logger.debug("Wrote %d path nodes to %s", len(files), directory)
    return directory


def read_path_nodes(directory: PathLike) -> List[LoopCurve]:
    directory = Path(directory)
    listing = read_json(directory / "path.json")
    return [loop_from_json(read_json(directory / name), name) for name in listing.get("nodes", [])]


# Index maps

def write_index_map(grid, stem: PathLike) -> Path:
    """Plain-text greymap (P2) of the index shifted to be nonnegative, with JSON metadata"""
    stem = Path(stem)
    stem.parent.mkdir(parents=True, exist_ok=True)
    meta = grid.metadata()
    shifted = grid.indices[::-1] - meta["min_index"]
    maxval = max(1, int(shifted.max()))
    lines = ["P2", f"{grid.resolution} {grid.resolution}", str(maxval)]
    lines.extend(" ".join(str(int(v)) for v in row) for row in shifted)
    stem.with_suffix(".pgm").write_text("\n".join(lines) + "\n", encoding="ascii")
    meta["offset"] = meta["min_index"]
    write_json(meta, stem.with_suffix(".json"))
    return stem.with_suffix(".pgm")


# Sweeps

class SweepTable:
    """Sweep CSV kept valid after every appended row"""

    def __init__(self, path: PathLike):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        pd.DataFrame(columns=SWEEP_COLUMNS).to_csv(self.path, index=False)

    def append(self, row: Dict[str, Any]):
        frame = pd.DataFrame([row], columns=SWEEP_COLUMNS)
        frame.to_csv(self.path, mode="a", header=False, index=False, float_format=FLOAT_FORMAT)

    def rewrite(self, rows: List[Dict[str, Any]]):
        pd.DataFrame(rows, columns=SWEEP_COLUMNS).to_csv(self.path, index=False, float_format=FLOAT_FORMAT)


def read_sweep(path: PathLike) -> pd.DataFrame:
    return pd.read_csv(path, float_precision="round_trip")
