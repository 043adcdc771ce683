"""Synthetic scenes with known layout and their ideal prediction maps.

Random draws use numpy's PCG64 bit generator seeded through ``SeedSequence``
so fixtures reproduce exactly from the integer seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import ndimage
from shapely.geometry import LineString, Polygon

from .geometry import wrap_orientation
from .labelgen import AnnotationSet, TextRegion, gen_character_map, gen_region_map
from .maps import RasterMap, normalize_orientation, pixel_centers, rasterize_polygon

RNG_ALGORITHM = "PCG64"
DISC_VERTICES = 32
# half-width of the swept text corridor, in character radii
REGION_HALF_WIDTH = 1.0
MIN_REGION_GAP = 4.0


@dataclass(frozen=True)
class LineSpec:
    """One text line: ``n_chars`` discs placed along a straight or circular path.

    Straight lines start at ``start`` and run along ``angle``.  Arcs are centered
    at ``start`` with radius ``arc_radius``, beginning at polar angle ``angle``
    and advancing counter-clockwise in array coordinates when ``arc_radius`` is
    positive.  ``spacing`` is the edge-to-edge gap between neighbours and
    ``word_gaps`` lists positions k where an extra ``word_gap`` px separates
    characters k and k+1.
    """

    start: tuple[float, float]
    angle: float
    n_chars: int
    char_radius: float
    spacing: float
    arc_radius: float | None = None
    word_gaps: tuple[int, ...] = ()
    word_gap: float = 0.0

    def __post_init__(self):
        if self.n_chars < 1 or self.char_radius <= 0 or self.spacing < 0 or self.word_gap < 0:
            raise ValueError("line needs >=1 char, positive radius and non-negative spacing")

    @property
    def curved(self) -> bool:
        return self.arc_radius is not None

    def arc_positions(self) -> np.ndarray:
        pitch = 2 * self.char_radius + self.spacing
        steps = [pitch + (self.word_gap if k in self.word_gaps else 0.0) for k in range(self.n_chars - 1)]
        return np.concatenate([[0.0], np.cumsum(steps)])

    def point_at(self, s: np.ndarray) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        x0, y0 = self.start
        if not self.curved:
            return np.stack([x0 + s * math.cos(self.angle), y0 + s * math.sin(self.angle)], axis=-1)
        t = self.angle + s / self.arc_radius
        R = abs(self.arc_radius)
        return np.stack([x0 + R * np.cos(t), y0 + R * np.sin(t)], axis=-1)

    def centers(self) -> np.ndarray:
        return self.point_at(self.arc_positions())

    def path(self) -> np.ndarray:
        length = self.arc_positions()[-1]
        n = max(2, int(math.ceil(length / 2.0)) + 1) if self.curved else 2
        return self.point_at(np.linspace(0.0, length, n))

    def rotated(self, angle: float, center: tuple[float, float]) -> "LineSpec":
        c, s = math.cos(angle), math.sin(angle)
        dx, dy = self.start[0] - center[0], self.start[1] - center[1]
        start = (center[0] + c * dx - s * dy, center[1] + s * dx + c * dy)
        return replace(self, start=start, angle=self.angle + angle)


@dataclass(frozen=True)
class SceneSpec:
    width: int
    height: int
    lines: tuple[LineSpec, ...]
    sigma: float = 0.0
    blur: int = 0
    seed: int = 0

    def rotated(self, angle: float) -> "SceneSpec":
        center = (self.width / 2, self.height / 2)
        return replace(self, lines=tuple(ln.rotated(angle, center) for ln in self.lines))


@dataclass(frozen=True)
class Scene:
    spec: SceneSpec
    annotation: AnnotationSet
    region: RasterMap
    character: RasterMap
    orientation: RasterMap
    gt_centers: tuple[np.ndarray, ...] = field(default_factory=tuple)

    @property
    def maps(self) -> tuple[RasterMap, RasterMap, RasterMap]:
        return self.region, self.character, self.orientation


def disc_polygon(center, radius: float, n: int = DISC_VERTICES) -> np.ndarray:
    t = 2 * math.pi * np.arange(n) / n
    return np.stack([center[0] + radius * np.cos(t), center[1] + radius * np.sin(t)], axis=1)


def region_polygon(line: LineSpec) -> np.ndarray:
    """The line's path swept by a disc of REGION_HALF_WIDTH character radii."""
    path = line.path()
    width = REGION_HALF_WIDTH * line.char_radius
    if len(np.unique(np.round(path, 9), axis=0)) < 2:
        return disc_polygon(path[0], width)
    shape = LineString(path).buffer(width, quad_segs=8)
    return np.asarray(shape.exterior.coords)[:-1]


def _tangent_map(line: LineSpec, mask: np.ndarray, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    if not line.curved:
        return np.full(mask.sum(), normalize_orientation(wrap_orientation(line.angle)))
    polar = np.arctan2(ys[mask] - line.start[1], xs[mask] - line.start[0])
    tangent = polar + math.pi / 2
    return np.array([normalize_orientation(wrap_orientation(t)) for t in tangent])


def gen_scene(spec: SceneSpec) -> Scene:
    """Annotation and ideal (then optionally perturbed) prediction maps for a scene."""
    regions, region_polys, centers = [], [], []
    for line in spec.lines:
        cs = line.centers()
        chars = tuple(disc_polygon(c, line.char_radius) for c in cs)
        for ch in chars:
            if ch[:, 0].min() < 0 or ch[:, 1].min() < 0 or ch[:, 0].max() > spec.width or ch[:, 1].max() > spec.height:
                raise ValueError("character does not fit inside the image")
        poly = region_polygon(line)
        src = "chain" if line.curved else wrap_orientation(line.angle)
        regions.append(TextRegion(poly, chars, src))
        region_polys.append(Polygon(poly))
        centers.append(cs)
    for a in range(len(region_polys)):
        for b in range(a + 1, len(region_polys)):
            if region_polys[a].distance(region_polys[b]) < MIN_REGION_GAP:
                raise ValueError(f"lines {a} and {b} overlap or nearly touch")
    ann = AnnotationSet(spec.width, spec.height, tuple(regions))
    region = gen_region_map(ann)
    character = gen_character_map(ann)
    orient = np.zeros((spec.height, spec.width), dtype=np.float64)
    xs, ys = pixel_centers(spec.width, spec.height)
    for line, r in zip(spec.lines, regions):
        mask = rasterize_polygon(r.polygon, spec.width, spec.height)
        orient[mask] = _tangent_map(line, mask, xs, ys)
    orientation = RasterMap(orient.astype(np.float32), "orientation")
    maps = perturb_maps((region, character, orientation), spec.sigma, spec.blur, spec.seed)
    return Scene(spec, ann, *maps, gt_centers=tuple(centers))


def perturb_maps(maps, sigma: float, blur: int, seed: int):
    """Seeded Gaussian noise then a (2*blur+1)-wide box blur, clamped to [0, 1]."""
    if sigma < 0 or blur < 0:
        raise ValueError("sigma and blur must be non-negative")
    maps = tuple(maps)
    if sigma == 0 and blur == 0:
        return maps
    streams = np.random.SeedSequence(seed).spawn(len(maps))
    out = []
    for m, ss in zip(maps, streams):
        data = m.data.astype(np.float64)
        if sigma > 0:
            data = data + np.random.Generator(np.random.PCG64(ss)).normal(0.0, sigma, size=data.shape)
        if blur > 0:
            data = ndimage.uniform_filter(data, size=2 * blur + 1, mode="nearest")
        out.append(m.with_data(np.clip(data, 0.0, 1.0).astype(np.float32)))
    return tuple(out)


# ---------------------------------------------------------------------------
# Random scene suites
# ---------------------------------------------------------------------------


def random_straight_scene(seed: int, size: int = 320, n_lines: int | None = None, max_tries: int = 500) -> SceneSpec:
    """1-4 non-overlapping straight lines of 3-10 characters each."""
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    target = int(rng.integers(1, 5)) if n_lines is None else n_lines
    lines: list[LineSpec] = []
    for _ in range(max_tries):
        if len(lines) == target:
            break
        r = float(rng.uniform(4.0, 8.0))
        line = LineSpec(
            start=(0.0, 0.0),
            angle=float(rng.uniform(-math.pi / 2, math.pi / 2)),
            n_chars=int(rng.integers(3, 11)),
            char_radius=r,
            spacing=float(rng.uniform(0.5, 1.0) * r),
        )
        length = line.arc_positions()[-1]
        u = np.array([math.cos(line.angle), math.sin(line.angle)])
        margin = 2 * r
        lo = np.maximum(margin - np.minimum(u * length, 0), margin)
        hi = size - margin - np.maximum(u * length, 0)
        if np.any(hi <= lo):
            continue
        start = rng.uniform(lo, hi)
        line = replace(line, start=(float(start[0]), float(start[1])))
        try:
            gen_scene_geometry_check(size, lines + [line])
        except ValueError:
            continue
        lines.append(line)
    if not lines:
        raise RuntimeError(f"could not place any line for seed {seed}")
    return SceneSpec(size, size, tuple(lines), seed=seed)


def random_arc_scene(seed: int, size: int = 320, max_sagitta: float = 0.4) -> SceneSpec:
    """One gently curved line; the arc's sagitta stays within ``max_sagitta`` radii."""
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, 1])))
    r = float(rng.uniform(4.0, 7.0))
    n = int(rng.integers(6, 11))
    spacing = float(rng.uniform(0.5, 1.0) * r)
    length = (n - 1) * (2 * r + spacing)
    sagitta = float(rng.uniform(0.6, 1.0)) * max_sagitta * r
    R = (length**2 / 4 + sagitta**2) / (2 * sagitta)
    span = length / R
    mid = float(rng.uniform(-math.pi, math.pi))
    center = np.array([size / 2, size / 2]) - (R - sagitta / 2) * np.array([math.cos(mid), math.sin(mid)])
    line = LineSpec(
        start=(float(center[0]), float(center[1])),
        angle=mid - span / 2,
        n_chars=n,
        char_radius=r,
        spacing=spacing,
        arc_radius=R,
    )
    return SceneSpec(size, size, (line,), seed=seed)


def gen_scene_geometry_check(size: int, lines) -> None:
    """Raise ValueError if the lines leave the image or come too close."""
    polys = []
    for line in lines:
        cs = line.centers()
        r = line.char_radius
        if cs[:, 0].min() - r < 0 or cs[:, 1].min() - r < 0 or cs[:, 0].max() + r > size or cs[:, 1].max() + r > size:
            raise ValueError("line leaves the image")
        polys.append(Polygon(region_polygon(line)))
    for a in range(len(polys)):
        for b in range(a + 1, len(polys)):
            if polys[a].distance(polys[b]) < max(MIN_REGION_GAP, 2 * max(lines[a].char_radius, lines[b].char_radius)):
                raise ValueError("lines too close")


def oracle_suite(n_straight: int = 50, n_arcs: int = 10, base_seed: int = 0) -> list[SceneSpec]:
    specs = [random_straight_scene(base_seed + k) for k in range(n_straight)]
    specs += [random_arc_scene(base_seed + 1000 + k) for k in range(n_arcs)]
    return specs


# ---------------------------------------------------------------------------
# Oracle comparisons
# ---------------------------------------------------------------------------


def assign_to_truth(scene: Scene, centers) -> list[tuple[int, int] | None]:
    """(line, char) of the nearest ground-truth character within its radius, per center."""
    out = []
    for p in centers:
        best, best_d = None, math.inf
        for li, (line, cs) in enumerate(zip(scene.spec.lines, scene.gt_centers)):
            d = np.hypot(cs[:, 0] - p[0], cs[:, 1] - p[1])
            k = int(np.argmin(d))
            if d[k] <= line.char_radius and d[k] < best_d:
                best, best_d = (li, k), float(d[k])
        out.append(best)
    return out


def grouping_matches(scene: Scene, result) -> bool:
    """True iff detected lines partition the characters exactly as the scene does."""
    chars = {c.id: c for c in result.chars}
    truth = {}
    for line in result.lines:
        labels = assign_to_truth(scene, [chars[k].center for k in line.char_ids])
        if any(lab is None for lab in labels):
            return False
        line_ids = {lab[0] for lab in labels}
        if len(line_ids) != 1:
            return False
        li = line_ids.pop()
        if li in truth:
            return False
        members = sorted(lab[1] for lab in labels)
        if members != list(range(len(scene.gt_centers[li]))):
            return False
        truth[li] = members
    return len(truth) == len(scene.spec.lines)
