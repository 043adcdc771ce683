"""Character graph construction and partition into text lines and words."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.spatial import ConvexHull, QhullError

from .candidates import CharCandidate, sample_linking_orientation
from .evaluation import polygon_iou
from .geometry import (
    SpanningTree,
    Triangulation,
    WeightedGraph,
    components,
    covariance_eigs,
    delaunay,
    included_angle,
    maximum_spanning_tree,
    segment_orientation,
    wrap_orientation,
)
from .maps import RasterMap

TAU = 0.8
STRAIGHTNESS_EPS = 1e-6
MIN_GAIN = 0.01
AXIS_ALIGNED_WORD_ANGLE = math.radians(5.0)


def spatial_similarity(a: CharCandidate, b: CharCandidate, D: float) -> float:
    if not D > 0:
        raise ValueError(f"mean edge length must be positive, got {D}")
    d2 = (a.center[0] - b.center[0]) ** 2 + (a.center[1] - b.center[1]) ** 2
    return math.exp(-d2 / (2 * D * D))


def orientation_similarity(phi: float, psi: float) -> float:
    return max(math.cos(included_angle(phi, psi)), 0.0)


def pair_similarity(a_sim: float, o_sim: float) -> float:
    """Harmonic mean of spatial and orientation similarity."""
    if a_sim + o_sim == 0:
        return 0.0
    return 2 * a_sim * o_sim / (a_sim + o_sim)


@dataclass(frozen=True)
class SimilarityEdge:
    i: int
    j: int
    weight: float
    in_triangulation: bool
    spatial: float
    orientation: float


@dataclass(frozen=True)
class SimilarityGraph:
    chars: tuple[CharCandidate, ...]
    triangulation: Triangulation | None
    edges: tuple[SimilarityEdge, ...]
    mean_edge_length: float

    def weighted_graph(self) -> WeightedGraph:
        return WeightedGraph(len(self.chars), tuple((e.i, e.j, e.weight) for e in self.edges))

    def weight(self, i: int, j: int) -> float:
        """Edge weight; pairs outside the triangulation weigh zero."""
        key = (min(i, j), max(i, j))
        for e in self.edges:
            if (e.i, e.j) == key:
                return e.weight
        return 0.0


def build_similarity_graph(
    chars: Sequence[CharCandidate], orient_map: RasterMap, region_map: RasterMap
) -> SimilarityGraph:
    """Weighted graph over one clique; vertex k is ``chars[k]``."""
    chars = tuple(chars)
    if len(chars) < 2:
        return SimilarityGraph(chars, delaunay([c.center for c in chars]) if chars else None, (), 0.0)
    tri = delaunay([c.center for c in chars])
    D = tri.mean_edge_length()
    rep: dict[int, int] = {}
    for k, v in enumerate(tri.vertex_of):
        rep.setdefault(v, k)
    edges = []
    for k, v in enumerate(tri.vertex_of):
        if rep[v] != k:
            # coincident centers are the same character twice
            edges.append(SimilarityEdge(rep[v], k, 1.0, True, 1.0, 1.0))
    for u, v in tri.edges:
        i, j = sorted((rep[u], rep[v]))
        a, b = chars[i], chars[j]
        a_sim = spatial_similarity(a, b, D)
        psi, _ = sample_linking_orientation(orient_map, region_map, a, b)
        o_sim = orientation_similarity(segment_orientation(a.center, b.center), psi)
        edges.append(SimilarityEdge(i, j, pair_similarity(a_sim, o_sim), True, a_sim, o_sim))
    edges.sort(key=lambda e: (e.i, e.j))
    return SimilarityGraph(chars, tri, tuple(edges), D)


def straightness(clusters: Sequence[Sequence[Sequence[float]]], eps: float = STRAIGHTNESS_EPS) -> float:
    """Sum of largest/second-largest covariance eigenvalue ratios over clusters.

    Clusters of fewer than three points count as 1.
    """
    total = 0.0
    for pts in clusters:
        if len(pts) < 3:
            total += 1.0
            continue
        l1, l2 = covariance_eigs(pts)
        total += l1 / max(l2, eps)
    return total


@dataclass(frozen=True)
class Partition:
    clusters: tuple[tuple[int, ...], ...]
    kept: tuple[tuple[int, int, float], ...]
    cut: tuple[tuple[int, int, float], ...]


def partition_lines(
    graph: SimilarityGraph,
    tree: SpanningTree,
    tau: float = TAU,
    eps: float = STRAIGHTNESS_EPS,
) -> Partition:
    """Greedily cut weak spanning-tree edges while mean straightness improves.

    The lightest tree edge with weight <= tau is tried first; the cut is kept
    only if straightness per cluster rises by more than 1%, and the search stops
    at the first rejected cut.  Edges heavier than tau are never cut.
    """
    if not 0 < tau <= 1:
        raise ValueError(f"tau must lie in (0, 1], got {tau}")
    n = len(graph.chars)
    centers = [c.center for c in graph.chars]

    def score(edges):
        groups = components(n, edges)
        return straightness([[centers[v] for v in g] for g in groups], eps) / len(groups)

    kept = list(tree.edges)
    cut = []
    current = score(kept)
    while True:
        eligible = [e for e in kept if e[2] <= tau]
        if not eligible:
            break
        weakest = min(eligible, key=lambda e: (e[2], e[0], e[1]))
        trial = [e for e in kept if e is not weakest]
        trial_score = score(trial)
        if trial_score <= current * (1 + MIN_GAIN):
            break
        kept, current = trial, trial_score
        cut.append(weakest)
    groups = components(n, kept)
    return Partition(tuple(tuple(g) for g in groups), tuple(kept), tuple(cut))


# ---------------------------------------------------------------------------
# Boxes
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class OrientedBox:
    """Rectangle of ``width`` along ``angle`` and ``height`` across it."""

    cx: float
    cy: float
    width: float
    height: float
    angle: float

    def corners(self) -> np.ndarray:
        """Four corners, clockwise on screen (y down), from the top-left-most one."""
        u = np.array([math.cos(self.angle), math.sin(self.angle)])
        v = np.array([-math.sin(self.angle), math.cos(self.angle)])
        c = np.array([self.cx, self.cy])
        pts = [c + su * self.width / 2 * u + sv * self.height / 2 * v for su, sv in ((-1, -1), (1, -1), (1, 1), (-1, 1))]
        pts = np.array(pts)
        # with y pointing down, increasing atan2 is clockwise on screen
        order = np.argsort(np.arctan2(pts[:, 1] - self.cy, pts[:, 0] - self.cx), kind="stable")
        pts = pts[order]
        start = min(range(4), key=lambda k: (round(pts[k, 0] + pts[k, 1], 9), pts[k, 1]))
        return np.roll(pts, -start, axis=0)

    @property
    def area(self) -> float:
        return self.width * self.height


def _extents(centers: np.ndarray, radii: np.ndarray, angle: float):
    u = np.array([math.cos(angle), math.sin(angle)])
    v = np.array([-math.sin(angle), math.cos(angle)])
    pu, pv = centers @ u, centers @ v
    return (pu - radii).min(), (pu + radii).max(), (pv - radii).min(), (pv + radii).max()


def _box_area(centers, radii, angle) -> float:
    u0, u1, v0, v1 = _extents(centers, radii, angle)
    return (u1 - u0) * (v1 - v0)


def fit_oriented_box(centers: Sequence[Sequence[float]], radii: Sequence[float]) -> OrientedBox:
    """Minimum-area rectangle enclosing the discs (center, radius).

    A single disc gives the axis-aligned square of side 2r.
    """
    c = np.asarray(centers, dtype=float).reshape(-1, 2)
    r = np.asarray(radii, dtype=float).reshape(-1)
    if len(c) == 0 or len(c) != len(r):
        raise ValueError("need one radius per center and at least one disc")
    candidates = {0.0}
    uniq = np.unique(np.round(c, 9), axis=0)
    if len(uniq) == 2:
        candidates.add(segment_orientation(uniq[0], uniq[1]) % (math.pi / 2))
    elif len(uniq) > 2:
        try:
            hull = ConvexHull(uniq)
            loop = list(hull.vertices) + [hull.vertices[0]]
            for p, q in zip(loop[:-1], loop[1:]):
                candidates.add(segment_orientation(uniq[p], uniq[q]) % (math.pi / 2))
        except QhullError:
            candidates.add(segment_orientation(uniq[0], uniq[-1]) % (math.pi / 2))
    if len(uniq) > 1 and not np.allclose(r, r[0]):
        step = math.pi / 360
        candidates.update(k * step for k in range(180))
    best = min(sorted(candidates), key=lambda a: _box_area(c, r, a))
    if len(uniq) > 1 and not np.allclose(r, r[0]):
        res = minimize_scalar(
            lambda a: _box_area(c, r, a), bounds=(best - math.pi / 360, best + math.pi / 360), method="bounded"
        )
        if res.fun < _box_area(c, r, best):
            best = float(res.x)
    u0, u1, v0, v1 = _extents(c, r, best)
    width, height, angle = u1 - u0, v1 - v0, best
    mu, mv = (u0 + u1) / 2, (v0 + v1) / 2
    cx = mu * math.cos(best) - mv * math.sin(best)
    cy = mu * math.sin(best) + mv * math.cos(best)
    if height > width + 1e-9:
        width, height, angle = height, width, angle + math.pi / 2
    return OrientedBox(float(cx), float(cy), float(width), float(height), wrap_orientation(angle))


# ---------------------------------------------------------------------------
# Lines, words, fusion
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TextLine:
    char_ids: tuple[int, ...]
    box: OrientedBox
    region_id: int
    score: float


@dataclass(frozen=True)
class Detection:
    box: OrientedBox
    score: float
    kind: str = "line"

    def polygon(self) -> np.ndarray:
        return self.box.corners()


def make_line(members: Sequence[CharCandidate], region_id: int) -> TextLine:
    box = fit_oriented_box([m.center for m in members], [m.radius for m in members])
    u = (math.cos(box.angle), math.sin(box.angle))
    ordered = sorted(members, key=lambda m: (m.center[0] * u[0] + m.center[1] * u[1], m.id))
    score = float(np.mean([m.confidence for m in members]))
    return TextLine(tuple(m.id for m in ordered), box, region_id, score)


def split_gaps(gaps: Sequence[float], mean_radius: float) -> list[int]:
    """Indices of gaps that separate words.

    A gap splits when it exceeds twice the median gap and 1.5 mean radii.
    """
    if len(gaps) == 0:
        return []
    med = float(np.median(gaps))
    return [k for k, g in enumerate(gaps) if g > 2 * med and g > 1.5 * mean_radius]


def word_partition(line: TextLine, chars: dict[int, CharCandidate] | Sequence[CharCandidate]) -> list[Detection]:
    lookup = chars if isinstance(chars, dict) else {c.id: c for c in chars}
    members = [lookup[k] for k in line.char_ids]
    u = np.array([math.cos(line.box.angle), math.sin(line.box.angle)])
    proj = [float(np.dot(m.center, u)) for m in members]
    groups = [members]
    if len(members) > 2:
        gaps = [(proj[k + 1] - members[k + 1].radius) - (proj[k] + members[k].radius) for k in range(len(members) - 1)]
        mean_r = float(np.mean([m.radius for m in members]))
        groups, start = [], 0
        for k in split_gaps(gaps, mean_r):
            groups.append(members[start : k + 1])
            start = k + 1
        groups.append(members[start:])
    words = []
    for group in groups:
        centers = [m.center for m in group]
        radii = [m.radius for m in group]
        score = float(np.mean([m.confidence for m in group]))
        if abs(line.box.angle) < AXIS_ALIGNED_WORD_ANGLE:
            x0 = min(c[0] - r for c, r in zip(centers, radii))
            x1 = max(c[0] + r for c, r in zip(centers, radii))
            y0 = min(c[1] - r for c, r in zip(centers, radii))
            y1 = max(c[1] + r for c, r in zip(centers, radii))
            box = OrientedBox((x0 + x1) / 2, (y0 + y1) / 2, x1 - x0, y1 - y0, 0.0)
        else:
            box = fit_oriented_box(centers, radii)
        words.append(Detection(box, score, "word"))
    return words


def box_iou(a: OrientedBox, b: OrientedBox) -> float:
    return polygon_iou(a.corners(), b.corners())


def canonical_order(dets: Sequence[Detection]) -> list[Detection]:
    return sorted(dets, key=lambda d: (round(d.box.cy, 6), round(d.box.cx, 6), -d.score, d.kind))


def fuse_multiscale(per_scale: Sequence[Sequence[Detection]], iou_thresh: float = 0.5) -> list[Detection]:
    """Greedy NMS over detections already mapped to original-image coordinates."""
    pool = [d for dets in per_scale for d in dets]
    pool.sort(key=lambda d: (-d.score, round(d.box.cy, 6), round(d.box.cx, 6)))
    kept: list[Detection] = []
    for d in pool:
        if all(box_iou(d.box, k.box) < iou_thresh for k in kept):
            kept.append(d)
    return canonical_order(kept)


def scale_detection(det: Detection, factor: float) -> Detection:
    """Map a detection from a rescaled image back by dividing coordinates by ``factor``."""
    b = det.box
    box = OrientedBox(b.cx / factor, b.cy / factor, b.width / factor, b.height / factor, b.angle)
    return Detection(box, det.score, det.kind)
