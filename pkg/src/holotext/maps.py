"""Single-channel float rasters and polygon rasterization."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import shapely
from shapely.geometry import Polygon

from .geometry import wrap_orientation

CHANNELS = ("region", "character", "orientation")


@dataclass(frozen=True, eq=False)
class RasterMap:
    """A (height, width) float32 image with values in [0, 1]."""

    data: np.ndarray
    channel: str

    def __post_init__(self):
        if self.channel not in CHANNELS:
            raise ValueError(f"unknown channel {self.channel!r}")
        arr = np.array(self.data, dtype=np.float32, copy=True)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"raster must be a non-empty 2-D array, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)) or arr.min() < 0.0 or arr.max() > 1.0:
            raise ValueError("raster values must lie in [0, 1]")
        arr.flags.writeable = False
        object.__setattr__(self, "data", arr)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    def with_data(self, data: np.ndarray) -> "RasterMap":
        return RasterMap(data, self.channel)


def normalize_orientation(theta: float) -> float:
    """Map an orientation in [-pi/2, pi/2) onto [0, 1)."""
    value = (wrap_orientation(theta) + math.pi / 2) / math.pi
    return 0.0 if value >= 1.0 else value


def denormalize_orientation(value):
    """Inverse of :func:`normalize_orientation`; accepts scalars or arrays."""
    if np.ndim(value):
        return np.asarray(value, dtype=float) * math.pi - math.pi / 2
    return float(value) * math.pi - math.pi / 2


def pixel_centers(width: int, height: int) -> tuple[np.ndarray, np.ndarray]:
    ys, xs = np.mgrid[0:height, 0:width]
    return xs + 0.5, ys + 0.5


def rasterize_polygon(vertices, width: int, height: int) -> np.ndarray:
    """Boolean mask of pixels whose center lies inside or on the polygon."""
    mask = np.zeros((height, width), dtype=bool)
    pts = np.asarray(vertices, dtype=float).reshape(-1, 2)
    if len(pts) < 3:
        return mask
    poly = Polygon(pts)
    if poly.area <= 0:
        return mask
    minx, miny, maxx, maxy = poly.bounds
    x0 = max(int(math.floor(minx - 0.5)), 0)
    y0 = max(int(math.floor(miny - 0.5)), 0)
    x1 = min(int(math.ceil(maxx - 0.5)) + 1, width)
    y1 = min(int(math.ceil(maxy - 0.5)) + 1, height)
    if x0 >= x1 or y0 >= y1:
        return mask
    ys, xs = np.mgrid[y0:y1, x0:x1]
    shapely.prepare(poly)
    mask[y0:y1, x0:x1] = shapely.intersects_xy(poly, xs + 0.5, ys + 0.5)
    return mask


def polygon_centroid(vertices) -> np.ndarray:
    c = Polygon(np.asarray(vertices, dtype=float).reshape(-1, 2)).centroid
    return np.array([c.x, c.y])


def principal_orientation(vertices) -> float:
    """Orientation of the longer principal axis of a polygon's area."""
    pts = np.asarray(vertices, dtype=float).reshape(-1, 2)
    x, y = pts[:, 0], pts[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    cross = x * yn - xn * y
    area = cross.sum() / 2
    if abs(area) < 1e-12:
        raise ValueError("cannot derive orientation from a degenerate polygon")
    cx = ((x + xn) * cross).sum() / (6 * area)
    cy = ((y + yn) * cross).sum() / (6 * area)
    sxx = ((x * x + x * xn + xn * xn) * cross).sum() / (12 * area) - cx * cx
    syy = ((y * y + y * yn + yn * yn) * cross).sum() / (12 * area) - cy * cy
    sxy = ((x * yn + 2 * x * y + 2 * xn * yn + xn * y) * cross).sum() / (24 * area) - cx * cy
    return wrap_orientation(0.5 * math.atan2(2 * sxy, sxx - syy))
