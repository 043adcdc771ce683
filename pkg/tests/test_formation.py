import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from holotext.candidates import CharCandidate, extract_characters, segment_regions
from holotext.evaluation import polygon_iou
from holotext.formation import (
    TAU,
    Detection,
    OrientedBox,
    build_similarity_graph,
    fit_oriented_box,
    fuse_multiscale,
    make_line,
    orientation_similarity,
    pair_similarity,
    partition_lines,
    spatial_similarity,
    split_gaps,
    straightness,
    word_partition,
)
from holotext.geometry import components, maximum_spanning_tree
from holotext.maps import RasterMap
from holotext.pipeline import DetectConfig, detect
from holotext.synth import LineSpec, SceneSpec, gen_scene


def char(k, x, y, r=5.0, conf=1.0):
    return CharCandidate(k, (float(x), float(y)), float(r), conf, 0)


def uniform_maps(shape, value):
    return (
        RasterMap(np.full(shape, value, dtype=np.float32), "orientation"),
        RasterMap(np.ones(shape, dtype=np.float32), "region"),
    )


# ---------------------------------------------------------------------------
# similarity
# ---------------------------------------------------------------------------


def test_similarity_examples():
    assert orientation_similarity(0.3, 0.3) == 1.0
    assert orientation_similarity(0.0, math.pi / 2) == pytest.approx(0.0, abs=1e-15)
    assert orientation_similarity(2 * math.pi / 3, 0.0) == pytest.approx(0.5)
    assert pair_similarity(1, 1) == 1
    assert pair_similarity(1, 0) == 0
    assert pair_similarity(0, 0) == 0
    assert pair_similarity(0.5, 1) == pytest.approx(2 / 3)
    a, b = char(0, 0, 0), char(1, 3, 4)
    assert spatial_similarity(a, b, 5.0) == pytest.approx(math.exp(-0.5))
    assert spatial_similarity(a, a, 5.0) == 1.0
    with pytest.raises(ValueError):
        spatial_similarity(a, b, 0.0)


@given(st.floats(0, 1), st.floats(0, 1))
def test_harmonic_mean_bounds(a, o):
    h = pair_similarity(a, o)
    lo, hi = min(a, o), max(a, o)
    assert lo - 1e-12 <= h <= min(hi, 2 * lo) + 1e-12
    assert h <= math.sqrt(a * o) + 1e-12


def test_graph_sizes():
    omap, rmap = uniform_maps((40, 40), 0.5)
    assert build_similarity_graph([char(0, 10, 10)], omap, rmap).edges == ()
    g = build_similarity_graph([char(0, 5, 5), char(1, 30, 8), char(2, 15, 30)], omap, rmap)
    assert len(g.edges) == 3


def test_six_character_line_weights_recomputed():
    spec = SceneSpec(160, 60, (LineSpec((20.0, 30.0), 0.05, 6, 5.0, 4.0),))
    scene = gen_scene(spec)
    regions = segment_regions(scene.region)
    chars = extract_characters(scene.character, regions)
    assert len(chars) == 6
    g = build_similarity_graph(chars, scene.orientation, scene.region)
    tri_edges = g.triangulation.edges
    D = np.mean([math.dist(chars[i].center, chars[j].center) for i, j in tri_edges])
    orient = scene.orientation.data.astype(float)
    ys, xs = np.mgrid[:60, :160]
    for e in g.edges:
        p, q = np.array(chars[e.i].center), np.array(chars[e.j].center)
        r = max(chars[e.i].radius, chars[e.j].radius)
        # brute-force corridor: distance from each pixel center to the segment
        pts = np.stack([xs + 0.5, ys + 0.5], axis=-1)
        t = np.clip(((pts - p) @ (q - p)) / ((q - p) @ (q - p)), 0, 1)
        dist = np.linalg.norm(pts - (p + t[..., None] * (q - p)), axis=-1)
        sel = (dist <= r) & (scene.region.data >= 0.5)
        theta = orient[sel] * math.pi - math.pi / 2
        psi = math.atan2(np.sin(2 * theta).mean(), np.cos(2 * theta).mean()) / 2
        phi = math.atan2(q[1] - p[1], q[0] - p[0])
        a = math.exp(-((q - p) @ (q - p)) / (2 * D * D))
        o = abs(math.cos(phi - psi))
        assert e.weight == pytest.approx(2 * a * o / (a + o), abs=1e-9)
        assert 0 <= e.weight <= 1
    assert g.mean_edge_length == pytest.approx(D)


def _rot90_orientation(data):
    # rotating the image by +90 degrees (y down) adds pi/2 to every orientation
    return ((np.rot90(data, k=-1).astype(np.float64) + 0.5) % 1.0).astype(np.float32)


@pytest.mark.parametrize("seed", range(5))
def test_weights_invariant_under_rotation_and_translation(seed):
    rng = np.random.default_rng(seed)
    n = 48
    orient = rng.uniform(size=(n, n)).astype(np.float32)
    pts = rng.uniform(8, n - 8, size=(7, 2))
    radii = rng.uniform(2, 5, size=7)
    chars = [CharCandidate(k, tuple(p), float(r), 1.0, 0) for k, (p, r) in enumerate(zip(pts, radii))]
    ones = RasterMap(np.ones((n, n), dtype=np.float32), "region")
    base = build_similarity_graph(chars, RasterMap(orient, "orientation"), ones)

    turned = [
        CharCandidate(c.id, (n - c.center[1], c.center[0]), c.radius, 1.0, 0) for c in chars
    ]
    g_rot = build_similarity_graph(turned, RasterMap(_rot90_orientation(orient), "orientation"), ones)

    big = np.zeros((n + 20, n + 20), dtype=np.float32)
    big[7 : 7 + n, 13 : 13 + n] = orient
    region = np.zeros_like(big)
    region[7 : 7 + n, 13 : 13 + n] = 1
    moved = [CharCandidate(c.id, (c.center[0] + 13, c.center[1] + 7), c.radius, 1.0, 0) for c in chars]
    g_mov = build_similarity_graph(moved, RasterMap(big, "orientation"), RasterMap(region, "region"))

    want = {(e.i, e.j): e.weight for e in base.edges}
    for g in (g_rot, g_mov):
        got = {(e.i, e.j): e.weight for e in g.edges}
        assert got.keys() == want.keys()
        for key in want:
            assert got[key] == pytest.approx(want[key], abs=1e-6)


# ---------------------------------------------------------------------------
# straightness and partition
# ---------------------------------------------------------------------------


def test_straightness_examples():
    assert straightness([[(0, 0), (1, 0), (1, 1), (0, 1)]]) == pytest.approx(1.0)
    assert straightness([[(0, 0), (1, 0), (2, 0)]]) == pytest.approx((2 / 3) / 1e-6)
    assert straightness([[(0, 0)], [(5, 5)]]) == 2.0


def test_straight_line_stays_one_cluster():
    chars = [char(k, 10 + 14 * k, 30) for k in range(7)]
    omap, rmap = uniform_maps((60, 120), 0.5)
    g = build_similarity_graph(chars, omap, rmap)
    part = partition_lines(g, maximum_spanning_tree(g.weighted_graph()))
    assert part.clusters == (tuple(range(7)),)
    assert part.cut == ()


def test_bridged_parallel_lines_split():
    chars = [char(k, 20 + 20 * (k % 3), 20 + 30 * (k // 3), 8) for k in range(6)]
    omap, rmap = uniform_maps((80, 90), 0.5)
    g = build_similarity_graph(chars, omap, rmap)
    tree = maximum_spanning_tree(g.weighted_graph())
    part = partition_lines(g, tree)
    assert sorted(part.clusters) == [(0, 1, 2), (3, 4, 5)]
    assert len(part.cut) == 1 and part.cut[0][2] <= TAU


def _arc_scene(n_chars, degrees, size=220):
    r, spacing = 5.0, 3.0
    length = (n_chars - 1) * (2 * r + spacing)
    R = length / math.radians(degrees)
    line = LineSpec((size / 2, size / 2 + R / 3), -math.pi / 2 - math.radians(degrees) / 2, n_chars, r, spacing, R)
    return gen_scene(SceneSpec(size, size, (line,)))


def test_tau_protects_strongly_curved_line():
    scene = _arc_scene(11, 135)
    protected = detect(*scene.maps)
    assert len(protected.lines) == 1 and len(protected.lines[0].char_ids) == 11
    assert all(w <= TAU for *_, w in protected.cut_edges)
    unprotected = detect(*scene.maps, DetectConfig(tau=1.0))
    assert len(unprotected.lines) > 1


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 100_000), st.floats(0.3, 1.0))
def test_partition_invariants(seed, tau):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 12))
    chars = [CharCandidate(k, tuple(rng.uniform(5, 75, 2)), float(rng.uniform(2, 6)), 1.0, 0) for k in range(n)]
    omap = RasterMap(rng.uniform(size=(80, 80)).astype(np.float32), "orientation")
    rmap = RasterMap(np.ones((80, 80), dtype=np.float32), "region")
    g = build_similarity_graph(chars, omap, rmap)
    tree = maximum_spanning_tree(g.weighted_graph())
    part = partition_lines(g, tree, tau)
    assert all(w <= tau for *_, w in part.cut)
    assert sorted(part.kept + part.cut) == sorted(tree.edges)
    expected = components(n, [(i, j) for i, j, _ in part.kept])
    assert sorted(part.clusters) == sorted(tuple(c) for c in expected)


def test_partition_rejects_bad_tau():
    omap, rmap = uniform_maps((20, 20), 0.5)
    g = build_similarity_graph([char(0, 5, 5), char(1, 15, 5)], omap, rmap)
    with pytest.raises(ValueError):
        partition_lines(g, maximum_spanning_tree(g.weighted_graph()), 0.0)


# ---------------------------------------------------------------------------
# boxes
# ---------------------------------------------------------------------------


def test_single_disc_box():
    box = fit_oriented_box([(10, 12)], [3])
    assert (box.cx, box.cy, box.width, box.height, box.angle) == pytest.approx((10, 12, 6, 6, 0))


@pytest.mark.parametrize("theta", [0.0, 0.3, -1.1, 1.2])
def test_two_disc_box(theta):
    L, r = 20.0, 4.0
    p = np.array([30.0, 40.0])
    q = p + L * np.array([math.cos(theta), math.sin(theta)])
    box = fit_oriented_box([p, q], [r, r])
    assert box.width == pytest.approx(L + 2 * r)
    assert box.height == pytest.approx(2 * r)
    assert box.angle == pytest.approx(theta)


def _contains(box, pts, tol=1e-6):
    u = np.array([math.cos(box.angle), math.sin(box.angle)])
    v = np.array([-math.sin(box.angle), math.cos(box.angle)])
    d = pts - [box.cx, box.cy]
    return np.all(np.abs(d @ u) <= box.width / 2 + tol) and np.all(np.abs(d @ v) <= box.height / 2 + tol)


def _boundary_samples(centers, radii, n=720):
    t = np.linspace(0, 2 * math.pi, n, endpoint=False)
    return np.concatenate([c + r * np.stack([np.cos(t), np.sin(t)], axis=1) for c, r in zip(centers, radii)])


def _brute_min_area(centers, radii, steps=3600):
    best = math.inf
    for a in np.linspace(0, math.pi / 2, steps, endpoint=False):
        u = np.array([math.cos(a), math.sin(a)])
        v = np.array([-math.sin(a), math.cos(a)])
        pu, pv = centers @ u, centers @ v
        area = ((pu + radii).max() - (pu - radii).min()) * ((pv + radii).max() - (pv - radii).min())
        best = min(best, area)
    return best


def test_curved_line_box_contains_discs():
    line = LineSpec((100.0, 100.0), 0.2, 5, 4.0, 3.0, arc_radius=40.0)
    centers = line.centers()
    radii = np.full(5, 4.0)
    box = fit_oriented_box(centers, radii)
    assert _contains(box, _boundary_samples(centers, radii))


@pytest.mark.parametrize("seed", range(15))
def test_box_is_minimal_and_contains(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 8))
    centers = rng.uniform(0, 50, size=(n, 2))
    radii = rng.uniform(1, 6, size=n) if seed % 2 else np.full(n, 3.0)
    box = fit_oriented_box(centers, radii)
    assert _contains(box, _boundary_samples(centers, radii))
    assert box.area <= _brute_min_area(centers, radii) + 1e-6
    assert box.width >= box.height
    assert -math.pi / 2 <= box.angle < math.pi / 2


def test_corners_are_clockwise_from_top_left():
    box = OrientedBox(10, 10, 8, 4, 0.0)
    np.testing.assert_allclose(box.corners(), [(6, 8), (14, 8), (14, 12), (6, 12)])
    for angle in np.linspace(-1.5, 1.5, 13):
        pts = OrientedBox(0, 0, 9, 3, angle).corners()
        x, y = pts[:, 0], pts[:, 1]
        assert (x * np.roll(y, -1) - np.roll(x, -1) * y).sum() > 0


# ---------------------------------------------------------------------------
# words
# ---------------------------------------------------------------------------


def brute_force_two_means_splits(gaps):
    """Best 1-D two-cluster split of the gap values; returns the large-gap indices."""
    vals = sorted(set(gaps))
    best, best_t = math.inf, None
    for lo, hi in zip(vals[:-1], vals[1:]):
        t = (lo + hi) / 2
        small = [g for g in gaps if g <= t]
        large = [g for g in gaps if g > t]
        sse = sum((g - np.mean(small)) ** 2 for g in small) + sum((g - np.mean(large)) ** 2 for g in large)
        if sse < best:
            best, best_t = sse, t
    return [k for k, g in enumerate(gaps) if best_t is not None and g > best_t]


def test_split_gap_examples():
    assert split_gaps([2, 2, 2, 2], 1.0) == []
    assert split_gaps([2, 2, 10, 2], 1.0) == [2]
    gaps = [3, 9, 3, 9, 3]
    assert split_gaps(gaps, 2.0) == brute_force_two_means_splits(gaps) == [1, 3]
    assert split_gaps([], 1.0) == []


def _line(chars):
    return make_line(chars, 0)


def test_word_partition_splits_at_wide_gap():
    xs = [10, 22, 34, 70, 82]
    chars = [char(k, x, 20, 5) for k, x in enumerate(xs)]
    words = word_partition(_line(chars), chars)
    assert len(words) == 2
    assert all(w.kind == "word" and w.box.angle == 0.0 for w in words)
    assert words[0].box.width == pytest.approx(34 + 5 - 5)
    assert words[1].box.width == pytest.approx(22)


def test_short_lines_never_split():
    chars = [char(0, 10, 20, 3), char(1, 80, 20, 3)]
    assert len(word_partition(_line(chars), chars)) == 1


def test_tilted_line_words_are_oriented():
    theta = 0.5
    u = np.array([math.cos(theta), math.sin(theta)])
    ss = [0, 12, 24, 60, 72]
    chars = [CharCandidate(k, tuple(np.array([20.0, 20.0]) + s * u), 5.0, 1.0, 0) for k, s in enumerate(ss)]
    words = word_partition(_line(chars), chars)
    assert len(words) == 2
    assert all(w.box.angle == pytest.approx(theta) for w in words)


# ---------------------------------------------------------------------------
# multi-scale fusion
# ---------------------------------------------------------------------------


def det(cx, cy, score, w=10.0, h=10.0, angle=0.0):
    return Detection(OrientedBox(cx, cy, w, h, angle), score)


def test_fusion_examples():
    assert len(fuse_multiscale([[det(10, 10, 0.9)], [det(10, 10, 0.8)]])) == 1
    assert len(fuse_multiscale([[det(10, 10, 0.9)], [det(50, 50, 0.8)]])) == 2
    shift = 10 - 140 / 17
    a, b = det(10, 10, 0.6), det(10 + shift, 10, 0.9)
    assert polygon_iou(a.polygon(), b.polygon()) == pytest.approx(0.7)
    assert fuse_multiscale([[a], [b]]) == [b]


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 100_000))
def test_fusion_output_pairwise_below_threshold(seed):
    rng = np.random.default_rng(seed)
    scales = [
        [det(*rng.uniform(0, 40, 2), rng.uniform(), *rng.uniform(4, 15, 2), rng.uniform(-1.5, 1.5)) for _ in range(4)]
        for _ in range(3)
    ]
    out = fuse_multiscale(scales, 0.5)
    for a, b in itertools.combinations(out, 2):
        assert polygon_iou(a.polygon(), b.polygon()) < 0.5
