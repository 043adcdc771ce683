"""Text-region and character candidates from prediction maps."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .geometry import segment_orientation, wrap_orientation
from .maps import RasterMap

REGION_THRESHOLD = 0.5
MIN_REGION_AREA = 12
CHAR_THRESHOLD_RANGE = (0.4, 0.7)
RADIUS_FACTOR = 2.0

_EIGHT = np.ones((3, 3), dtype=int)


def connected_components(mask: np.ndarray) -> tuple[np.ndarray, int]:
    """8-connected labeling; labels run 1..n in raster-scan order of first pixel."""
    labels, n = ndimage.label(np.asarray(mask, dtype=bool), structure=_EIGHT)
    return labels, int(n)


@dataclass(frozen=True)
class RegionCandidate:
    id: int
    runs: tuple[tuple[int, int, int], ...]  # (row, first column, length)
    area: int
    bbox: tuple[int, int, int, int]  # x0, y0, x1, y1 (exclusive)

    @classmethod
    def from_mask(cls, id: int, mask: np.ndarray) -> "RegionCandidate":
        runs = []
        ys, xs = np.nonzero(mask)
        for row in np.unique(ys):
            cols = xs[ys == row]
            breaks = np.nonzero(np.diff(cols) != 1)[0]
            starts = np.concatenate([[0], breaks + 1])
            ends = np.concatenate([breaks, [len(cols) - 1]])
            runs.extend((int(row), int(cols[s]), int(cols[e] - cols[s] + 1)) for s, e in zip(starts, ends))
        bbox = (int(xs.min()), int(ys.min()), int(xs.max()) + 1, int(ys.max()) + 1)
        return cls(id, tuple(runs), int(mask.sum()), bbox)

    def mask(self, shape: tuple[int, int]) -> np.ndarray:
        out = np.zeros(shape, dtype=bool)
        for row, col, length in self.runs:
            out[row, col : col + length] = True
        return out


@dataclass(frozen=True)
class CharCandidate:
    id: int
    center: tuple[float, float]
    radius: float
    confidence: float
    region_id: int


def segment_regions(
    region_map: RasterMap, threshold: float = REGION_THRESHOLD, min_area: int = MIN_REGION_AREA
) -> list[RegionCandidate]:
    labels, n = connected_components(region_map.data >= threshold)
    found = []
    for label, sl in enumerate(ndimage.find_objects(labels), start=1):
        sub = np.zeros(labels.shape, dtype=bool)
        sub[sl] = labels[sl] == label
        if sub.sum() >= min_area:
            found.append(RegionCandidate.from_mask(0, sub))
    found.sort(key=lambda r: (r.bbox[1], r.bbox[0], r.runs[0]))
    return [RegionCandidate(k, r.runs, r.area, r.bbox) for k, r in enumerate(found)]


def otsu_threshold(values: np.ndarray, bins: int = 256) -> float:
    """Otsu's threshold over [0, 1]; the midpoint of the optimal plateau."""
    values = np.asarray(values, dtype=float).ravel()
    if values.size == 0 or values.min() == values.max():
        return 0.5
    hist, edges = np.histogram(values, bins=bins, range=(0.0, 1.0))
    p = hist / hist.sum()
    centers = (edges[:-1] + edges[1:]) / 2
    w0 = np.cumsum(p)[:-1]
    w1 = 1.0 - w0
    mu = np.cumsum(p * centers)
    mu0 = mu[:-1] / np.where(w0 > 0, w0, 1)
    mu1 = (mu[-1] - mu[:-1]) / np.where(w1 > 0, w1, 1)
    between = w0 * w1 * (mu0 - mu1) ** 2
    best = np.flatnonzero(np.isclose(between, between.max(), rtol=1e-12, atol=0))
    # split lies on the upper edge of the last bin of class 0
    return float((edges[best[0] + 1] + edges[best[-1] + 1]) / 2)


def character_threshold(values: np.ndarray) -> float:
    lo, hi = CHAR_THRESHOLD_RANGE
    return min(max(otsu_threshold(values), lo), hi)


def extract_characters(char_map: RasterMap, regions: list[RegionCandidate]) -> list[CharCandidate]:
    chars: list[CharCandidate] = []
    data = char_map.data.astype(np.float64)
    for region in regions:
        rmask = region.mask(data.shape)
        t = character_threshold(data[rmask])
        labels, n = connected_components((data >= t) & rmask)
        for label in range(1, n + 1):
            comp = labels == label
            ys, xs = np.nonzero(comp)
            area = len(xs)
            chars.append(
                CharCandidate(
                    id=len(chars),
                    center=(float(xs.mean() + 0.5), float(ys.mean() + 0.5)),
                    radius=RADIUS_FACTOR * math.sqrt(area / math.pi),
                    confidence=float(np.clip(data[comp].mean(), 0.0, 1.0)),
                    region_id=region.id,
                )
            )
    return chars


def corridor_mask(shape: tuple[int, int], p, q, radius: float) -> np.ndarray:
    """Pixels whose center lies within ``radius`` of the segment [p, q]."""
    h, w = shape
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    x0 = max(int(math.floor(min(p[0], q[0]) - radius)), 0)
    y0 = max(int(math.floor(min(p[1], q[1]) - radius)), 0)
    x1 = min(int(math.ceil(max(p[0], q[0]) + radius)) + 1, w)
    y1 = min(int(math.ceil(max(p[1], q[1]) + radius)) + 1, h)
    out = np.zeros(shape, dtype=bool)
    if x0 >= x1 or y0 >= y1:
        return out
    ys, xs = np.mgrid[y0:y1, x0:x1]
    px, py = xs + 0.5 - p[0], ys + 0.5 - p[1]
    d = q - p
    L2 = float(d @ d)
    t = np.clip((px * d[0] + py * d[1]) / L2, 0.0, 1.0) if L2 > 0 else np.zeros_like(px)
    dist2 = (px - t * d[0]) ** 2 + (py - t * d[1]) ** 2
    out[y0:y1, x0:x1] = dist2 <= radius * radius
    return out


def axial_mean(normalized: np.ndarray) -> float | None:
    """Mean orientation of normalized values on the doubled-angle circle.

    Returns None when the values cancel out and no mean direction exists.
    """
    doubled = 2 * math.pi * np.asarray(normalized, dtype=float)
    c, s = np.cos(doubled).mean(), np.sin(doubled).mean()
    if math.hypot(c, s) < 1e-9:
        return None
    # doubled angle of theta = v*pi - pi/2 is 2*pi*v - pi
    return wrap_orientation(math.atan2(s, c) / 2 - math.pi / 2)


def sample_linking_orientation(
    orient_map: RasterMap,
    region_map: RasterMap,
    a: CharCandidate,
    b: CharCandidate,
    region_threshold: float = REGION_THRESHOLD,
) -> tuple[float, bool]:
    """Predicted linking orientation between two characters.

    Returns ``(psi, fell_back)``; ``fell_back`` is True when the corridor holds
    no valid pixel and psi is the orientation of the segment itself.
    """
    if (b.center, b.id) < (a.center, a.id):
        a, b = b, a
    corridor = corridor_mask(orient_map.shape, a.center, b.center, max(a.radius, b.radius))
    corridor &= region_map.data >= region_threshold
    if corridor.any():
        psi = axial_mean(orient_map.data[corridor])
        if psi is not None:
            return psi, False
    return segment_orientation(a.center, b.center), True
