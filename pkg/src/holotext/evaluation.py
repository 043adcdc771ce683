"""IoU-based one-to-one matching and precision/recall/F-measure."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from shapely.geometry import Polygon
from shapely.validation import make_valid


def _polygon(vertices) -> Polygon:
    poly = Polygon(np.asarray(vertices, dtype=float).reshape(-1, 2))
    return poly if poly.is_valid else make_valid(poly)


def polygon_iou(a, b) -> float:
    """Intersection over union of two simple polygons; 0 if either has no area."""
    pa, pb = _polygon(a), _polygon(b)
    if pa.area <= 0 or pb.area <= 0:
        return 0.0
    inter = pa.intersection(pb).area
    union = pa.area + pb.area - inter
    return float(min(max(inter / union, 0.0), 1.0)) if union > 0 else 0.0


@dataclass(frozen=True)
class MatchResult:
    pairs: tuple[tuple[int, int, float], ...]  # (detection, gt, iou)
    unmatched_dets: tuple[int, ...]
    unmatched_gts: tuple[int, ...]

    @property
    def n_dets(self) -> int:
        return len(self.pairs) + len(self.unmatched_dets)

    @property
    def n_gts(self) -> int:
        return len(self.pairs) + len(self.unmatched_gts)


def match_detections(dets: Sequence, gts: Sequence, iou_thresh: float = 0.5) -> MatchResult:
    """Greedy one-to-one matching in descending IoU order."""
    candidates = []
    for i, d in enumerate(dets):
        for j, g in enumerate(gts):
            iou = polygon_iou(d, g)
            if iou >= iou_thresh and iou > 0:
                candidates.append((-iou, i, j))
    candidates.sort()
    used_d, used_g, pairs = set(), set(), []
    for neg_iou, i, j in candidates:
        if i in used_d or j in used_g:
            continue
        used_d.add(i)
        used_g.add(j)
        pairs.append((i, j, -neg_iou))
    pairs.sort()
    return MatchResult(
        tuple(pairs),
        tuple(i for i in range(len(dets)) if i not in used_d),
        tuple(j for j in range(len(gts)) if j not in used_g),
    )


def prf_counts(matched: int, n_dets: int, n_gts: int) -> tuple[float, float, float]:
    if n_dets == 0:
        precision = 1.0 if n_gts == 0 else 0.0
    else:
        precision = matched / n_dets
    recall = 1.0 if n_gts == 0 else matched / n_gts
    f = 0.0 if precision + recall == 0 else 2 * precision * recall / (precision + recall)
    return precision, recall, f


def prf(match: MatchResult) -> tuple[float, float, float]:
    return prf_counts(len(match.pairs), match.n_dets, match.n_gts)


def aggregate(matches: Sequence[MatchResult]) -> tuple[float, float, float]:
    """Dataset-level P/R/F from pooled counts."""
    return prf_counts(
        sum(len(m.pairs) for m in matches),
        sum(m.n_dets for m in matches),
        sum(m.n_gts for m in matches),
    )
