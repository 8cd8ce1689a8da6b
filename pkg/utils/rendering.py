"""
Loop Rendering
Static SVG pictures of a loop drawn over a raster heatmap of K
"""

import base64
import io
import logging
from pathlib import Path
from typing import Tuple

import numpy as np
from matplotlib import colormaps
from matplotlib.colors import Normalize
from PIL import Image

from .fields import CurvatureField
from .loopgeom import LoopCurve

logger = logging.getLogger(__name__)

HEATMAP_SIZE = 256
PADDING = 0.2

render_settings = {
    "colormap": "viridis",
    "stroke": "#d62728",
    "stroke_fraction": 0.004,
    "start_marker": True,
}

Bounds = Tuple[float, float, float, float]


class LoopRenderer:
    """Heatmap and SVG export helpers"""

    @staticmethod
    def view_bounds(u: LoopCurve, padding: float = PADDING) -> Bounds:
        """(xmin, ymin, xmax, ymax) of the bounding box padded on every side"""
        lower = np.min(u.samples, axis=0)
        upper = np.max(u.samples, axis=0)
        size = upper - lower
        size = np.where(size > 0, size, max(float(np.max(size)), 1.0))
        lower = lower - padding * size
        upper = upper + padding * size
        return float(lower[0]), float(lower[1]), float(upper[0]), float(upper[1])

    @staticmethod
    def field_heatmap(field: CurvatureField, bounds: Bounds, size: int = HEATMAP_SIZE,
                      colormap: str = render_settings["colormap"]) -> Image.Image:
        """RGB image of K over bounds; row 0 is the top edge y = ymax"""
        xmin, ymin, xmax, ymax = bounds
        xs = xmin + (np.arange(size) + 0.5) * (xmax - xmin) / size
        ys = ymax - (np.arange(size) + 0.5) * (ymax - ymin) / size
        gx, gy = np.meshgrid(xs, ys, indexing="xy")
        values = field.k(gx, gy)
        lo, hi = float(values.min()), float(values.max())
        if hi - lo < 1e-12 * max(1.0, abs(hi)):
            lo, hi = lo - 1.0, hi + 1.0
        rgba = colormaps[colormap](Normalize(vmin=lo, vmax=hi)(values))
        return Image.fromarray(np.round(255 * rgba[..., :3]).astype(np.uint8), mode="RGB")

    @staticmethod
    def image_to_base64(image: Image.Image, format: str = "PNG") -> str:
        """PIL image as a data URI"""
        buffer = io.BytesIO()
        image.save(buffer, format=format, optimize=False)
        encoded = base64.b64encode(buffer.getvalue()).decode()
        return f"data:image/{format.lower()};base64,{encoded}"

    @staticmethod
    def render_svg(u: LoopCurve, field: CurvatureField, size: int = HEATMAP_SIZE) -> str:
        """SVG text; plane y points up, so SVG coordinates are (x, -y)"""
        xmin, ymin, xmax, ymax = LoopRenderer.view_bounds(u)
        width, height = xmax - xmin, ymax - ymin
        heatmap = LoopRenderer.image_to_base64(LoopRenderer.field_heatmap(field, (xmin, ymin, xmax, ymax), size))
        stroke = render_settings["stroke_fraction"] * max(width, height)
        points = " ".join(f"{x:.9g},{-y:.9g}" for x, y in u.samples)

        parts = [
            f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="{xmin:.9g} {-ymax:.9g} {width:.9g} {height:.9g}" '
            f'width="{size}" height="{size}" preserveAspectRatio="none">',
            f'<image x="{xmin:.9g}" y="{-ymax:.9g}" width="{width:.9g}" height="{height:.9g}" '
            f'preserveAspectRatio="none" href="{heatmap}"/>',
            f'<polygon points="{points}" fill="none" stroke="{render_settings["stroke"]}" '
            f'stroke-width="{stroke:.6g}" stroke-linejoin="round"/>',
        ]
        if render_settings["start_marker"]:
            x0, y0 = u.samples[0]
            parts.append(f'<circle cx="{x0:.9g}" cy="{-y0:.9g}" r="{2.5 * stroke:.6g}" '
                         f'fill="{render_settings["stroke"]}"/>')
        parts.append("</svg>")
        return "\n".join(parts) + "\n"

    @staticmethod
    def write_svg(u: LoopCurve, field: CurvatureField, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(LoopRenderer.render_svg(u, field), encoding="utf-8")
        logger.debug("Wrote %s", path)
        return path
