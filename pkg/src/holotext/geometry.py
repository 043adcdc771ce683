"""Geometric and graph primitives shared by the detection pipeline.

Angles are measured in image coordinates (x to the right, y downwards), so a
positive orientation turns clockwise on screen.  Line orientations are
undirected and live in the half-open interval [-pi/2, pi/2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.spatial import Delaunay, QhullError

HALF_PI = math.pi / 2
DEDUP_TOL = 1e-6
_INCIRCLE_TOL = 1e-10


def wrap_orientation(angle: float) -> float:
    """Wrap an undirected orientation into [-pi/2, pi/2)."""
    angle = float(angle)
    if not math.isfinite(angle):
        raise ValueError(f"orientation must be finite, got {angle!r}")
    if -HALF_PI <= angle < HALF_PI:
        return angle
    wrapped = (angle + HALF_PI) % math.pi - HALF_PI
    if wrapped >= HALF_PI:
        wrapped -= math.pi
    return wrapped


def included_angle(phi: float, psi: float) -> float:
    """Acute angle between two undirected orientations, in [0, pi/2]."""
    d = abs(float(phi) - float(psi)) % math.pi
    return min(d, math.pi - d)


def segment_orientation(p: Sequence[float], q: Sequence[float]) -> float:
    return wrap_orientation(math.atan2(q[1] - p[1], q[0] - p[0]))


# ---------------------------------------------------------------------------
# Delaunay triangulation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Triangulation:
    """Planar triangulation over deduplicated vertices.

    ``vertex_of[k]`` is the vertex index that input point ``k`` was merged into.
    Edges and triangles are tuples of ascending vertex indices, sorted.
    """

    vertices: np.ndarray
    edges: tuple[tuple[int, int], ...]
    triangles: tuple[tuple[int, int, int], ...]
    vertex_of: tuple[int, ...]

    def mean_edge_length(self) -> float:
        if not self.edges:
            return 0.0
        v = self.vertices
        return float(np.mean([np.hypot(*(v[i] - v[j])) for i, j in self.edges]))


def _dedup(points: np.ndarray) -> tuple[np.ndarray, list[int]]:
    kept: list[np.ndarray] = []
    vertex_of: list[int] = []
    for p in points:
        for idx, q in enumerate(kept):
            if abs(p[0] - q[0]) <= DEDUP_TOL and abs(p[1] - q[1]) <= DEDUP_TOL:
                vertex_of.append(idx)
                break
        else:
            vertex_of.append(len(kept))
            kept.append(p)
    return np.array(kept, dtype=float).reshape(-1, 2), vertex_of


def _orient(a, b, c) -> float:
    return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])


def _incircle(a, b, c, d) -> float:
    """Positive when d lies inside the circumcircle of the ccw triangle abc."""
    adx, ady = a[0] - d[0], a[1] - d[1]
    bdx, bdy = b[0] - d[0], b[1] - d[1]
    cdx, cdy = c[0] - d[0], c[1] - d[1]
    return (
        (adx * adx + ady * ady) * (bdx * cdy - cdx * bdy)
        - (bdx * bdx + bdy * bdy) * (adx * cdy - cdx * ady)
        + (cdx * cdx + cdy * cdy) * (adx * bdy - bdx * ady)
    )


def in_circumcircle(tri_pts: np.ndarray, p: Sequence[float], tol: float = _INCIRCLE_TOL) -> bool:
    """Strict inside test, scale-normalized so ``tol`` is dimensionless."""
    pts = np.vstack([tri_pts, np.asarray(p, dtype=float)[None, :]])
    center = pts.mean(axis=0)
    scale = float(np.abs(pts - center).max()) or 1.0
    a, b, c, d = (pts - center) / scale
    if _orient(a, b, c) < 0:
        b, c = c, b
    return _incircle(a, b, c, d) > tol


def _chain(points: np.ndarray) -> list[tuple[int, int]]:
    center = points.mean(axis=0)
    _, _, vt = np.linalg.svd(points - center)
    t = (points - center) @ vt[0]
    order = sorted(range(len(points)), key=lambda k: (t[k], k))
    return [tuple(sorted((order[k], order[k + 1]))) for k in range(len(order) - 1)]


def _is_collinear(points: np.ndarray) -> bool:
    center = points.mean(axis=0)
    extent = float(np.abs(points - center).max())
    if extent == 0.0:
        return True
    s = np.linalg.svd((points - center) / extent, compute_uv=False)
    return s.size < 2 or s[1] <= 1e-9 * max(s[0], 1.0)


def _legalize(pts: np.ndarray, triangles: set[tuple[int, int, int]]) -> set[tuple[int, int, int]]:
    """Lawson flips to Delaunay; cocircular quads keep the smaller index diagonal."""
    center = pts.mean(axis=0)
    scale = float(np.abs(pts - center).max()) or 1.0
    q = (pts - center) / scale
    max_passes = 4 * len(pts) ** 2 + 10
    for _ in range(max_passes):
        owners: dict[tuple[int, int], list[tuple[int, int, int]]] = {}
        for tri in triangles:
            a, b, c = tri
            for e in ((a, b), (b, c), (a, c)):
                owners.setdefault(e, []).append(tri)
        flipped = False
        for (i, j), tris in sorted(owners.items()):
            if len(tris) != 2 or tris[0] not in triangles or tris[1] not in triangles:
                continue
            k = next(v for v in tris[0] if v not in (i, j))
            l = next(v for v in tris[1] if v not in (i, j))
            # quad must be strictly convex for the flip to be valid
            if _orient(q[i], q[j], q[k]) * _orient(q[i], q[j], q[l]) >= 0:
                continue
            if _orient(q[k], q[l], q[i]) * _orient(q[k], q[l], q[j]) >= 0:
                continue
            a, b, c = (i, j, k) if _orient(q[i], q[j], q[k]) > 0 else (j, i, k)
            score = _incircle(q[a], q[b], q[c], q[l])
            tie = abs(score) <= _INCIRCLE_TOL
            if score > _INCIRCLE_TOL or (tie and (min(k, l), max(k, l)) < (i, j)):
                triangles.discard(tris[0])
                triangles.discard(tris[1])
                triangles.add(tuple(sorted((k, l, i))))
                triangles.add(tuple(sorted((k, l, j))))
                flipped = True
        if not flipped:
            return triangles
    return triangles


def delaunay(points: Iterable[Sequence[float]]) -> Triangulation:
    """Delaunay triangulation with deterministic handling of degenerate input.

    Coincident points (within 1e-6 px) are merged; collinear sets fall back to
    a nearest-neighbour chain along the line and carry no triangles.
    """
    raw = np.asarray(list(points), dtype=float).reshape(-1, 2)
    if raw.shape[0] == 0:
        raise ValueError("delaunay needs at least one point")
    if not np.all(np.isfinite(raw)):
        raise ValueError("point coordinates must be finite")
    pts, vertex_of = _dedup(raw)
    m = len(pts)
    if m == 1:
        return Triangulation(pts, (), (), tuple(vertex_of))
    if m == 2:
        return Triangulation(pts, ((0, 1),), (), tuple(vertex_of))
    if _is_collinear(pts):
        return Triangulation(pts, tuple(sorted(_chain(pts))), (), tuple(vertex_of))

    try:
        tri = Delaunay(pts)
        if len(tri.coplanar):
            tri = Delaunay(pts, qhull_options="QJ")
    except QhullError:
        return Triangulation(pts, tuple(sorted(_chain(pts))), (), tuple(vertex_of))
    triangles = {tuple(sorted(int(v) for v in simplex)) for simplex in tri.simplices}
    triangles = _legalize(pts, triangles)
    edges = set()
    for a, b, c in triangles:
        edges.update({(a, b), (b, c), (a, c)})
    return Triangulation(pts, tuple(sorted(edges)), tuple(sorted(triangles)), tuple(vertex_of))


# ---------------------------------------------------------------------------
# Maximum spanning tree
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class WeightedGraph:
    n: int
    edges: tuple[tuple[int, int, float], ...]

    def __post_init__(self):
        seen = set()
        norm = []
        for i, j, w in self.edges:
            if i == j or not (0 <= i < self.n and 0 <= j < self.n):
                raise ValueError(f"bad edge ({i}, {j}) for {self.n} vertices")
            if not 0.0 <= w <= 1.0:
                raise ValueError(f"edge weight {w} outside [0, 1]")
            key = (min(i, j), max(i, j))
            if key in seen:
                raise ValueError(f"duplicate edge {key}")
            seen.add(key)
            norm.append((key[0], key[1], float(w)))
        object.__setattr__(self, "edges", tuple(norm))

    def weight(self, i: int, j: int) -> float:
        key = (min(i, j), max(i, j))
        for a, b, w in self.edges:
            if (a, b) == key:
                return w
        return 0.0


@dataclass(frozen=True)
class SpanningTree:
    n: int
    edges: tuple[tuple[int, int, float], ...]
    connected: bool

    @property
    def total_weight(self) -> float:
        return sum(w for _, _, w in self.edges)


class DisjointSet:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, x: int) -> int:
        while self.parent[x] != x:
            self.parent[x] = self.parent[self.parent[x]]
            x = self.parent[x]
        return x

    def union(self, a: int, b: int) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        if ra > rb:
            ra, rb = rb, ra
        self.parent[rb] = ra
        return True


def maximum_spanning_tree(graph: WeightedGraph) -> SpanningTree:
    """Kruskal on (descending weight, ascending index pair).

    A disconnected graph yields a spanning forest with ``connected=False``.
    """
    dsu = DisjointSet(graph.n)
    chosen = []
    for i, j, w in sorted(graph.edges, key=lambda e: (-e[2], e[0], e[1])):
        if dsu.union(i, j):
            chosen.append((i, j, w))
    connected = graph.n <= 1 or len(chosen) == graph.n - 1
    return SpanningTree(graph.n, tuple(chosen), connected)


def components(n: int, edges: Iterable[tuple[int, int]]) -> list[list[int]]:
    """Connected components as sorted vertex lists, ordered by smallest member."""
    dsu = DisjointSet(n)
    for e in edges:
        dsu.union(e[0], e[1])
    groups: dict[int, list[int]] = {}
    for v in range(n):
        groups.setdefault(dsu.find(v), []).append(v)
    return sorted(groups.values(), key=lambda g: g[0])


def covariance_eigs(points: Iterable[Sequence[float]]) -> tuple[float, float]:
    """Eigenvalues (largest first) of the population covariance of 2-D points."""
    pts = np.asarray(list(points), dtype=float).reshape(-1, 2)
    if len(pts) == 0:
        raise ValueError("covariance_eigs needs at least one point")
    if len(pts) == 1:
        return 0.0, 0.0
    centered = pts - pts.mean(axis=0)
    cov = centered.T @ centered / len(pts)
    lo, hi = np.linalg.eigvalsh(cov)
    return max(float(hi), 0.0), max(float(lo), 0.0)
