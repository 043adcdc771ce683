"""Ground-truth label maps (region, character, linking orientation) from polygons."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Union

import numpy as np
from shapely.geometry import Polygon

from .geometry import segment_orientation, wrap_orientation
from .maps import (
    RasterMap,
    normalize_orientation,
    pixel_centers,
    polygon_centroid,
    principal_orientation,
    rasterize_polygon,
)

CHAR_SHRINK = 0.5
CHAR_BBOX_SLACK = 2.0

# Orientation source of a region: explicit radians, "auto" (principal axis of
# the region polygon) or "chain" (curved: follow the ordered character chain).
OrientationSource = Union[float, str]


@dataclass(frozen=True, eq=False)
class TextRegion:
    polygon: np.ndarray
    chars: tuple[np.ndarray, ...] = ()
    orientation: OrientationSource = "auto"

    def __post_init__(self):
        poly = _as_vertices(self.polygon, "region polygon")
        chars = tuple(_as_vertices(c, "character polygon") for c in self.chars)
        src = self.orientation
        if isinstance(src, str):
            if src not in ("auto", "chain"):
                raise ValueError(f"unknown orientation source {src!r}")
        else:
            src = wrap_orientation(src)
        minx, miny = poly.min(axis=0) - CHAR_BBOX_SLACK
        maxx, maxy = poly.max(axis=0) + CHAR_BBOX_SLACK
        for c in chars:
            if c[:, 0].min() < minx or c[:, 0].max() > maxx or c[:, 1].min() < miny or c[:, 1].max() > maxy:
                raise ValueError("character polygon lies outside its region's bounding box")
        object.__setattr__(self, "polygon", poly)
        object.__setattr__(self, "chars", chars)
        object.__setattr__(self, "orientation", src)

    def bbox_origin(self) -> tuple[float, float]:
        return float(self.polygon[:, 0].min()), float(self.polygon[:, 1].min())


@dataclass(frozen=True)
class AnnotationSet:
    width: int
    height: int
    regions: tuple[TextRegion, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ValueError(f"image dims must be positive, got {self.width}x{self.height}")
        object.__setattr__(self, "regions", tuple(self.regions))


def _as_vertices(vertices, what: str) -> np.ndarray:
    pts = np.asarray(vertices, dtype=float).reshape(-1, 2)
    if len(pts) < 3:
        raise ValueError(f"{what} needs at least 3 vertices")
    if not np.all(np.isfinite(pts)):
        raise ValueError(f"{what} has non-finite coordinates")
    if not Polygon(pts).is_valid:
        raise ValueError(f"{what} is not a simple polygon")
    return pts


def _check_inside(poly: np.ndarray, width: int, height: int) -> None:
    if poly[:, 0].min() < 0 or poly[:, 1].min() < 0 or poly[:, 0].max() > width or poly[:, 1].max() > height:
        warnings.warn("polygon extends outside the image and is clipped", stacklevel=3)


def shrink_polygon(vertices, factor: float = CHAR_SHRINK) -> np.ndarray:
    """Scale a polygon about its area centroid."""
    pts = np.asarray(vertices, dtype=float)
    c = polygon_centroid(pts)
    return c + factor * (pts - c)


def gen_region_map(ann: AnnotationSet) -> RasterMap:
    mask = np.zeros((ann.height, ann.width), dtype=bool)
    for region in ann.regions:
        _check_inside(region.polygon, ann.width, ann.height)
        mask |= rasterize_polygon(region.polygon, ann.width, ann.height)
    return RasterMap(mask.astype(np.float32), "region")


def gen_character_map(ann: AnnotationSet) -> RasterMap:
    mask = np.zeros((ann.height, ann.width), dtype=bool)
    for region in ann.regions:
        if not region.chars:
            warnings.warn("region has no character polygons; it contributes nothing", stacklevel=2)
            continue
        for char in region.chars:
            _check_inside(char, ann.width, ann.height)
            mask |= rasterize_polygon(shrink_polygon(char), ann.width, ann.height)
    return RasterMap(mask.astype(np.float32), "character")


def _chain_orientations(centroids: np.ndarray, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Per-pixel orientation of the chain segment next to the nearest centroid."""
    d2 = (xs[:, None] - centroids[None, :, 0]) ** 2 + (ys[:, None] - centroids[None, :, 1]) ** 2
    nearest = np.argmin(d2, axis=1)
    n = len(centroids)
    seg_theta = np.array([segment_orientation(centroids[k], centroids[k + 1]) for k in range(n - 1)])
    rows = np.arange(len(xs))
    prev_d = np.where(nearest > 0, d2[rows, np.maximum(nearest - 1, 0)], np.inf)
    next_d = np.where(nearest < n - 1, d2[rows, np.minimum(nearest + 1, n - 1)], np.inf)
    seg = np.where(prev_d <= next_d, nearest - 1, nearest)
    return seg_theta[np.clip(seg, 0, n - 2)]


def gen_orientation_map(ann: AnnotationSet) -> tuple[RasterMap, np.ndarray]:
    """Normalized orientation map plus the boolean validity mask (region foreground).

    Background pixels hold 0 and are invalid.  Where regions overlap, the
    later region in annotation order wins.
    """
    values = np.zeros((ann.height, ann.width), dtype=np.float64)
    valid = np.zeros((ann.height, ann.width), dtype=bool)
    xs_all, ys_all = pixel_centers(ann.width, ann.height)
    for region in ann.regions:
        mask = rasterize_polygon(region.polygon, ann.width, ann.height)
        if not mask.any():
            continue
        src = region.orientation
        if src == "chain" and len(region.chars) >= 2:
            centroids = np.array([polygon_centroid(c) for c in region.chars])
            thetas = _chain_orientations(centroids, xs_all[mask], ys_all[mask])
            values[mask] = [normalize_orientation(t) for t in thetas]
        else:
            theta = principal_orientation(region.polygon) if isinstance(src, str) else src
            values[mask] = normalize_orientation(theta)
        valid |= mask
    return RasterMap(values.astype(np.float32), "orientation"), valid


@dataclass(frozen=True)
class LabelMaps:
    region: RasterMap
    character: RasterMap
    orientation: RasterMap
    valid: np.ndarray


def gen_label_maps(ann: AnnotationSet) -> LabelMaps:
    orientation, valid = gen_orientation_map(ann)
    return LabelMaps(gen_region_map(ann), gen_character_map(ann), orientation, valid)


def rotate_annotation(ann: AnnotationSet, angle: float, center=None) -> AnnotationSet:
    """Rotate every polygon by ``angle`` radians about ``center`` (image center by default)."""
    if center is None:
        center = (ann.width / 2, ann.height / 2)
    c = np.asarray(center, dtype=float)
    rot = np.array([[math.cos(angle), -math.sin(angle)], [math.sin(angle), math.cos(angle)]])

    def turn(p):
        return (np.asarray(p) - c) @ rot.T + c

    regions = []
    for r in ann.regions:
        src = r.orientation if isinstance(r.orientation, str) else wrap_orientation(r.orientation + angle)
        regions.append(TextRegion(turn(r.polygon), tuple(turn(ch) for ch in r.chars), src))
    return AnnotationSet(ann.width, ann.height, tuple(regions))
