"""
Winding Numbers
Indices of closed polylines about points and over grids of cells
"""

import logging
from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import cv2
import numpy as np
from scipy import ndimage

from .errors import IndexAmbiguity, TooCloseToCurve
from .loopgeom import LoopCurve, arc_length

logger = logging.getLogger(__name__)

DEFAULT_RESOLUTION = 512
REFINED_RESOLUTION = 1024
MIN_RESOLUTION = 64
BAND_DIAGONALS = 2.0
POINT_BAND = 1e-9
AMBIGUITY_TOLERANCE = 1e-12
RASTER_SHIFT = 8
CHUNK = 4096


@dataclass
class IndexMap:
    """Winding numbers at cell centers of a square grid.

    Row j, column i holds the index at
    (origin[0] + (i + 1/2) spacing, origin[1] + (j + 1/2) spacing).
    """
    origin: Tuple[float, float]
    spacing: float
    indices: np.ndarray
    ambiguous: np.ndarray
    near_curve: np.ndarray
    exclusion_band: float

    @property
    def resolution(self) -> int:
        return self.indices.shape[0]

    @property
    def cell_area(self) -> float:
        return self.spacing ** 2

    @property
    def ambiguous_count(self) -> int:
        return int(np.count_nonzero(self.ambiguous))

    @property
    def near_curve_count(self) -> int:
        return int(np.count_nonzero(self.near_curve))

    def centers(self) -> Tuple[np.ndarray, np.ndarray]:
        axis = (np.arange(self.resolution) + 0.5) * self.spacing
        return np.meshgrid(self.origin[0] + axis, self.origin[1] + axis, indexing="xy")

    def error_bound(self) -> float:
        """Area of the cells whose index may be off by the grid"""
        return (self.near_curve_count + self.ambiguous_count) * self.cell_area

    def metadata(self) -> dict:
        return {
            "origin": list(self.origin),
            "spacing": self.spacing,
            "resolution": self.resolution,
            "exclusion_band": self.exclusion_band,
            "ambiguous_count": self.ambiguous_count,
            "near_curve_count": self.near_curve_count,
            "min_index": int(self.indices.min()),
            "max_index": int(self.indices.max()),
        }


def _edges(u: LoopCurve) -> Tuple[np.ndarray, np.ndarray]:
    start = u.samples
    return start, np.roll(start, -1, axis=0)


def distance_to_polyline(u: LoopCurve, points: np.ndarray) -> np.ndarray:
    """Euclidean distance from each point to the closed polyline"""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    start, end = _edges(u)
    chord = end - start
    length2 = np.sum(chord * chord, axis=1)
    safe = np.where(length2 > 0, length2, 1.0)
    result = np.empty(points.shape[0])
    for lo in range(0, points.shape[0], CHUNK):
        block = points[lo:lo + CHUNK]
        rel = block[:, None, :] - start[None, :, :]
        t = np.clip(np.sum(rel * chord[None], axis=2) / safe, 0.0, 1.0)
        t = np.where(length2 > 0, t, 0.0)
        diff = rel - t[..., None] * chord[None]
        result[lo:lo + CHUNK] = np.sqrt(np.min(np.sum(diff * diff, axis=2), axis=1))
    return result


def point_index(u: LoopCurve, z, exclusion_band: Optional[float] = None) -> int:
    """Winding number of the closed polyline about z by signed +x ray crossings"""
    z = np.asarray(z, dtype=float)
    if exclusion_band is None:
        exclusion_band = POINT_BAND * max(1.0, arc_length(u))
    distance = float(distance_to_polyline(u, z[None, :])[0])
    if distance <= exclusion_band:
        raise TooCloseToCurve(f"Point {tuple(z)} lies {distance:.3e} from the curve")

    start, end = _edges(u)
    x0, y0 = start[:, 0], start[:, 1]
    x1, y1 = end[:, 0], end[:, 1]
    # > 0 when z is left of the directed edge
    side = (x1 - x0) * (z[1] - y0) - (z[0] - x0) * (y1 - y0)
    upward = (y0 <= z[1]) & (y1 > z[1]) & (side > 0)
    downward = (y0 > z[1]) & (y1 <= z[1]) & (side < 0)
    return int(np.count_nonzero(upward) - np.count_nonzero(downward))


def _row_sweep(u: LoopCurve, origin: np.ndarray, spacing: float, resolution: int) -> np.ndarray:
    """Crossing-count indices of every cell center, one pass per row"""
    start, end = _edges(u)
    x0, y0 = start[:, 0], start[:, 1]
    x1, y1 = end[:, 0], end[:, 1]
    rows = origin[1] + (np.arange(resolution) + 0.5) * spacing

    yc = rows[:, None]
    up = (y0 <= yc) & (y1 > yc)
    down = (y1 <= yc) & (y0 > yc)
    crossing = up | down
    row_ids, edge_ids = np.nonzero(crossing)
    if row_ids.size == 0:
        return np.zeros((resolution, resolution), dtype=int)

    ey0, ey1 = y0[edge_ids], y1[edge_ids]
    ex0, ex1 = x0[edge_ids], x1[edge_ids]
    x_cross = ex0 + (rows[row_ids] - ey0) * (ex1 - ex0) / (ey1 - ey0)
    sign = np.where(up[row_ids, edge_ids], 1, -1)

    # cells with center strictly left of the crossing see it on their +x ray
    count = np.ceil((x_cross - origin[0]) / spacing - 0.5).astype(int)
    count = np.clip(count, 0, resolution)
    accumulator = np.zeros((resolution, resolution + 1), dtype=int)
    np.add.at(accumulator, (row_ids, count), sign)
    tail = np.cumsum(accumulator[:, ::-1], axis=1)[:, ::-1]
    return tail[:, 1:]


def _band_candidates(u: LoopCurve, origin: np.ndarray, spacing: float,
                     resolution: int, band: float) -> np.ndarray:
    """Superset of the cells within `band` of the curve, from a raster distance transform"""
    canvas = np.full((resolution, resolution), 255, dtype=np.uint8)
    pixels = (u.samples - origin) / spacing - 0.5
    points = np.round(pixels * (1 << RASTER_SHIFT)).astype(np.int32).reshape(-1, 1, 2)
    cv2.polylines(canvas, [points], isClosed=True, color=0, thickness=1,
                  lineType=cv2.LINE_8, shift=RASTER_SHIFT)
    distance = cv2.distanceTransform(canvas, cv2.DIST_L2, cv2.DIST_MASK_PRECISE)
    return distance * spacing <= band + 1.5 * spacing


def index_map(u: LoopCurve, resolution: int = DEFAULT_RESOLUTION,
              ambiguity_tolerance: Optional[float] = None) -> IndexMap:
    """Winding numbers over the bounding box padded by one cell ring"""
    if resolution < MIN_RESOLUTION:
        raise ValueError(f"Index map resolution must be at least {MIN_RESOLUTION}")
    lower = np.min(u.samples, axis=0)
    upper = np.max(u.samples, axis=0)
    width = float(np.max(upper - lower))
    if width <= 0:
        width = 1.0
    spacing = width / (resolution - 2)
    origin = 0.5 * (lower + upper) - 0.5 * resolution * spacing
    band = BAND_DIAGONALS * np.sqrt(2.0) * spacing
    if ambiguity_tolerance is None:
        ambiguity_tolerance = AMBIGUITY_TOLERANCE * max(1.0, width)

    indices = _row_sweep(u, origin, spacing, resolution)

    near_curve = np.zeros_like(indices, dtype=bool)
    ambiguous = np.zeros_like(indices, dtype=bool)
    candidates = _band_candidates(u, origin, spacing, resolution, band)
    rows, cols = np.nonzero(candidates)
    if rows.size:
        centers = origin + (np.column_stack([cols, rows]) + 0.5) * spacing
        distance = distance_to_polyline(u, centers)
        near_curve[rows, cols] = distance < band
        ambiguous[rows, cols] = distance <= ambiguity_tolerance

    # the component touching the padding ring is unbounded
    labels, _ = ndimage.label(~near_curve)
    ring = np.concatenate([labels[0], labels[-1], labels[:, 0], labels[:, -1]])
    outside = np.isin(labels, ring[ring > 0])
    stray = np.count_nonzero(indices[outside])
    if stray:
        logger.warning("Index map had %d nonzero cells in the unbounded component; reset to 0", stray)
        indices[outside] = 0

    indices[ambiguous] = 0
    return IndexMap(origin=(float(origin[0]), float(origin[1])), spacing=float(spacing),
                    indices=indices, ambiguous=ambiguous, near_curve=near_curve,
                    exclusion_band=float(band))


def resolved_index_map(u: LoopCurve, resolution: int = DEFAULT_RESOLUTION,
                       refined_resolution: int = REFINED_RESOLUTION) -> IndexMap:
    """Index map with one refinement pass; IndexAmbiguity if cells stay ambiguous"""
    grid = index_map(u, resolution)
    if grid.ambiguous_count:
        logger.info("%d ambiguous cells at %d^2, refining to %d^2",
                    grid.ambiguous_count, resolution, refined_resolution)
        grid = index_map(u, refined_resolution)
    if grid.ambiguous_count:
        raise IndexAmbiguity(
            f"{grid.ambiguous_count} cell centers lie on the curve at resolution {refined_resolution}")
    return grid


def index_weighted_integral(u: LoopCurve, weight: Callable[[np.ndarray, np.ndarray], np.ndarray],
                            resolution: int = DEFAULT_RESOLUTION) -> float:
    """Midpoint sum of Ind_u * weight over the grid"""
    grid = resolved_index_map(u, resolution)
    xs, ys = grid.centers()
    return float(np.sum(grid.indices * weight(xs, ys)) * grid.cell_area)


def abs_index_area(u: LoopCurve, resolution: int = DEFAULT_RESOLUTION) -> float:
    """Integral of |Ind_u| over the plane"""
    grid = index_map(u, resolution)
    return float(np.sum(np.abs(grid.indices)) * grid.cell_area)


def perturb_generic(u: LoopCurve, seed: int) -> LoopCurve:
    """Jitter every node by at most 1e-9 * arc length, deterministically"""
    rng = np.random.default_rng(seed)
    magnitude = 1e-9 * arc_length(u) / np.sqrt(2.0)
    return u.with_samples(u.samples + magnitude * rng.uniform(-1.0, 1.0, size=u.samples.shape))
