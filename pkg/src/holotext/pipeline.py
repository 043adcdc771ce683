"""End-to-end detection from a (region, character, orientation) map triple."""

from __future__ import annotations

from dataclasses import dataclass, fields, replace
from typing import Mapping, Sequence

from . import candidates as cand
from .candidates import CharCandidate, RegionCandidate, extract_characters, segment_regions
from .formation import (
    TAU,
    Detection,
    Partition,
    TextLine,
    build_similarity_graph,
    canonical_order,
    fuse_multiscale,
    make_line,
    partition_lines,
    scale_detection,
    word_partition,
)
from .geometry import maximum_spanning_tree
from .maps import RasterMap


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class DetectConfig:
    tau: float = TAU
    iou_thresh: float = 0.5
    words: bool = False
    region_threshold: float = cand.REGION_THRESHOLD
    min_region_area: int = cand.MIN_REGION_AREA
    lambda1: float = 1 / 3
    lambda2: float = 1 / 3
    lambda3: float = 1 / 3

    def __post_init__(self):
        if not 0 < self.tau <= 1:
            raise ConfigError(f"tau must lie in (0, 1], got {self.tau}")
        if not 0 <= self.iou_thresh <= 1:
            raise ConfigError(f"iou_thresh must lie in [0, 1], got {self.iou_thresh}")
        if self.min_region_area < 1:
            raise ConfigError("min_region_area must be at least 1")

    @classmethod
    def from_mapping(cls, values: Mapping[str, str]) -> "DetectConfig":
        """Build from string key/values; unknown keys are an error."""
        return cls().updated(values)

    def updated(self, values: Mapping[str, str]) -> "DetectConfig":
        types = {f.name: f.type for f in fields(self)}
        for key in values:
            if key not in types:
                raise ConfigError(f"unknown config key {key!r}")
        return replace(self, **{k: _coerce(k, types[k], v) for k, v in values.items()})


def _coerce(key: str, typ: str, raw):
    if not isinstance(raw, str):
        return raw
    text = raw.strip()
    try:
        if typ == "bool":
            lowered = text.lower()
            if lowered in ("on", "true", "yes", "1"):
                return True
            if lowered in ("off", "false", "no", "0"):
                return False
            raise ValueError(text)
        if typ == "int":
            return int(text)
        if "/" in text:
            num, den = text.split("/", 1)
            return float(num) / float(den)
        return float(text)
    except ValueError:
        raise ConfigError(f"bad value {raw!r} for config key {key!r}") from None


@dataclass(frozen=True)
class DetectionResult:
    regions: tuple[RegionCandidate, ...]
    chars: tuple[CharCandidate, ...]
    partitions: tuple[Partition, ...]
    lines: tuple[TextLine, ...]
    detections: tuple[Detection, ...]

    @property
    def cut_edges(self) -> list[tuple[int, int, float]]:
        return [e for p in self.partitions for e in p.cut]


def detect(
    region_map: RasterMap, char_map: RasterMap, orient_map: RasterMap, config: DetectConfig | None = None
) -> DetectionResult:
    config = config or DetectConfig()
    if not (region_map.shape == char_map.shape == orient_map.shape):
        raise ValueError(
            f"map dims differ: region {region_map.shape}, character {char_map.shape}, orientation {orient_map.shape}"
        )
    regions = segment_regions(region_map, config.region_threshold, config.min_region_area)
    chars = extract_characters(char_map, regions)
    partitions, lines = [], []
    for region in regions:
        members = [c for c in chars if c.region_id == region.id]
        if not members:
            continue
        graph = build_similarity_graph(members, orient_map, region_map)
        tree = maximum_spanning_tree(graph.weighted_graph())
        part = partition_lines(graph, tree, config.tau)
        # partition indices are positions in ``members``; keep global ids in the record
        part = Partition(
            tuple(tuple(members[k].id for k in g) for g in part.clusters),
            tuple((members[i].id, members[j].id, w) for i, j, w in part.kept),
            tuple((members[i].id, members[j].id, w) for i, j, w in part.cut),
        )
        partitions.append(part)
        for cluster in part.clusters:
            lines.append(make_line([chars[k] for k in cluster], region.id))
    lines.sort(key=lambda ln: (round(ln.box.cy, 6), round(ln.box.cx, 6), ln.char_ids))
    dets: list[Detection] = []
    for line in lines:
        if config.words:
            dets.extend(word_partition(line, chars))
        else:
            dets.append(Detection(line.box, line.score, "line"))
    return DetectionResult(tuple(regions), tuple(chars), tuple(partitions), tuple(lines), tuple(canonical_order(dets)))


def detect_multiscale(
    scaled_maps: Sequence[tuple[RasterMap, RasterMap, RasterMap, float]], config: DetectConfig | None = None
) -> list[Detection]:
    """Run :func:`detect` per scale, map back by each scale factor, and fuse with NMS."""
    config = config or DetectConfig()
    per_scale = []
    for region_map, char_map, orient_map, factor in scaled_maps:
        result = detect(region_map, char_map, orient_map, config)
        per_scale.append([scale_detection(d, factor) for d in result.detections])
    return fuse_multiscale(per_scale, config.iou_thresh)
