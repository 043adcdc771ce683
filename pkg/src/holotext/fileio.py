"""File formats: TMAP rasters, annotation text files, detection JSON, config files.

TMAP layout (all little-endian)::

    offset 0   4 bytes  magic b"TMAP"
    offset 4   u16      version (1)
    offset 6   u16      channel (0 region, 1 character, 2 orientation)
    offset 8   u32      width
    offset 12  u32      height
    offset 16  f32[]    width*height values, row-major, top-left origin
"""

from __future__ import annotations

import json
import math
import struct
from pathlib import Path
from typing import Sequence

import numpy as np

from .formation import Detection
from .labelgen import AnnotationSet, TextRegion
from .maps import CHANNELS, RasterMap

TMAP_MAGIC = b"TMAP"
TMAP_VERSION = 1
_HEADER = struct.Struct("<4sHHII")


class ParseError(ValueError):
    """Malformed input file; ``where`` names the byte offset or line."""

    def __init__(self, message: str, where: str = ""):
        super().__init__(f"{where}: {message}" if where else message)
        self.where = where


class TmapError(ParseError):
    def __init__(self, message: str, offset: int):
        super().__init__(message, f"byte offset {offset}")
        self.offset = offset


# ---------------------------------------------------------------------------
# TMAP
# ---------------------------------------------------------------------------


def encode_tmap(raster: RasterMap) -> bytes:
    header = _HEADER.pack(TMAP_MAGIC, TMAP_VERSION, CHANNELS.index(raster.channel), raster.width, raster.height)
    return header + raster.data.astype("<f4").tobytes(order="C")


def decode_tmap(blob: bytes) -> RasterMap:
    if len(blob) < _HEADER.size:
        raise TmapError(f"header needs {_HEADER.size} bytes, file has {len(blob)}", len(blob))
    magic, version, channel, width, height = _HEADER.unpack_from(blob)
    if magic != TMAP_MAGIC:
        raise TmapError(f"bad magic {magic!r}, expected {TMAP_MAGIC!r}", 0)
    if version != TMAP_VERSION:
        raise TmapError(f"unsupported version {version}", 4)
    if channel >= len(CHANNELS):
        raise TmapError(f"unknown channel tag {channel}", 6)
    if width == 0 or height == 0:
        raise TmapError(f"empty raster {width}x{height}", 8)
    expected = _HEADER.size + 4 * width * height
    if len(blob) < expected:
        raise TmapError(f"payload truncated: expected {expected} bytes, got {len(blob)}", len(blob))
    if len(blob) > expected:
        raise TmapError(f"{len(blob) - expected} trailing bytes after payload", expected)
    values = np.frombuffer(blob, dtype="<f4", count=width * height, offset=_HEADER.size)
    bad = np.flatnonzero(~(np.isfinite(values) & (values >= 0) & (values <= 1)))
    if bad.size:
        k = int(bad[0])
        raise TmapError(f"value {values[k]!r} outside [0, 1]", _HEADER.size + 4 * k)
    return RasterMap(values.reshape(height, width).astype(np.float32), CHANNELS[channel])


def write_tmap(raster: RasterMap, path) -> None:
    Path(path).write_bytes(encode_tmap(raster))


def read_tmap(path) -> RasterMap:
    return decode_tmap(Path(path).read_bytes())


# ---------------------------------------------------------------------------
# Annotation files
# ---------------------------------------------------------------------------


def _numbers(text: str, where: str) -> np.ndarray:
    try:
        vals = [float(v) for v in text.split(",")]
    except ValueError:
        raise ParseError(f"bad coordinate list {text!r}", where) from None
    if len(vals) < 6 or len(vals) % 2:
        raise ParseError("polygon needs an even count of at least 6 coordinates", where)
    if not all(math.isfinite(v) for v in vals):
        raise ParseError("non-finite coordinate", where)
    return np.array(vals).reshape(-1, 2)


def parse_annotation(text: str) -> AnnotationSet:
    lines = text.splitlines()
    if not lines:
        raise ParseError("empty annotation file", "line 1")
    head = lines[0].split()
    if len(head) != 3 or head[0] != "dims:":
        raise ParseError("expected header 'dims: W H'", "line 1")
    try:
        width, height = int(head[1]), int(head[2])
    except ValueError:
        raise ParseError("dims must be integers", "line 1") from None
    regions = []
    for no, raw in enumerate(lines[1:], start=2):
        where = f"line {no}"
        if not raw.strip():
            continue
        fields = raw.split("|")
        if len(fields) != 3:
            raise ParseError("expected 'polygon|characters|orientation'", where)
        poly = _numbers(fields[0].strip(), where)
        chars = tuple(_numbers(c.strip(), where) for c in fields[1].split(";") if c.strip())
        src = fields[2].strip()
        if src not in ("auto", "chain"):
            try:
                src = float(src)
            except ValueError:
                raise ParseError(f"orientation must be 'auto', 'chain' or radians, got {src!r}", where) from None
            if not math.isfinite(src):
                raise ParseError("orientation must be finite", where)
        try:
            regions.append(TextRegion(poly, chars, src))
        except ValueError as exc:
            raise ParseError(str(exc), where) from None
    try:
        return AnnotationSet(width, height, tuple(regions))
    except ValueError as exc:
        raise ParseError(str(exc), "line 1") from None


def _fmt_poly(pts: np.ndarray) -> str:
    return ",".join(repr(float(v)) for v in np.asarray(pts).ravel())


def format_annotation(ann: AnnotationSet) -> str:
    """Canonical text form; regions sorted by bounding-box origin (y, then x)."""
    out = [f"dims: {ann.width} {ann.height}"]
    for region in sorted(ann.regions, key=lambda r: (r.bbox_origin()[1], r.bbox_origin()[0])):
        chars = ";".join(_fmt_poly(c) for c in region.chars)
        src = region.orientation if isinstance(region.orientation, str) else repr(float(region.orientation))
        out.append(f"{_fmt_poly(region.polygon)}|{chars}|{src}")
    return "\n".join(out) + "\n"


def read_annotation(path) -> AnnotationSet:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except UnicodeDecodeError as exc:
        raise ParseError("annotation file is not UTF-8", f"byte offset {exc.start}") from None
    return parse_annotation(text)


def write_annotation(ann: AnnotationSet, path) -> None:
    Path(path).write_text(format_annotation(ann), encoding="utf-8")


# ---------------------------------------------------------------------------
# Detection files
# ---------------------------------------------------------------------------

DETECTION_KINDS = ("line", "word")


def detections_to_json(image_id: str, detections: Sequence[Detection]) -> str:
    items = [
        {
            "kind": d.kind,
            "polygon": [round(float(v), 4) + 0.0 for v in d.polygon().ravel()],
            "score": round(float(d.score), 6),
        }
        for d in detections
    ]
    return json.dumps({"image_id": image_id, "detections": items}, indent=1, sort_keys=True) + "\n"


def parse_detections(text: str) -> tuple[str, list[dict]]:
    """Validate a detection document; returns (image id, list of entries)."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, f"line {exc.lineno}") from None
    if not isinstance(doc, dict) or not isinstance(doc.get("image_id"), str):
        raise ParseError("document needs a string 'image_id'", "root")
    dets = doc.get("detections")
    if not isinstance(dets, list):
        raise ParseError("'detections' must be a list", "root")
    out = []
    for k, d in enumerate(dets):
        where = f"detections[{k}]"
        if not isinstance(d, dict) or set(d) != {"kind", "polygon", "score"}:
            raise ParseError("entry needs exactly kind, polygon, score", where)
        if d["kind"] not in DETECTION_KINDS:
            raise ParseError(f"unknown kind {d['kind']!r}", where)
        poly = d["polygon"]
        if not isinstance(poly, list) or len(poly) != 8 or not all(isinstance(v, (int, float)) for v in poly):
            raise ParseError("polygon must be 8 numbers", where)
        pts = np.asarray(poly, dtype=float).reshape(4, 2)
        x, y = pts[:, 0], pts[:, 1]
        # shoelace sum is positive for clockwise-on-screen order when y points down
        if (x * np.roll(y, -1) - np.roll(x, -1) * y).sum() <= 0:
            raise ParseError("polygon must be clockwise with positive area", where)
        score = d["score"]
        if not isinstance(score, (int, float)) or not 0 <= score <= 1:
            raise ParseError("score must lie in [0, 1]", where)
        out.append({"kind": d["kind"], "polygon": pts, "score": float(score)})
    return doc["image_id"], out


def read_detections(path) -> tuple[str, list[dict]]:
    return parse_detections(Path(path).read_text(encoding="utf-8"))


# ---------------------------------------------------------------------------
# Config files
# ---------------------------------------------------------------------------


def parse_config_text(text: str) -> dict[str, str]:
    """Flat ``key=value`` lines; blank lines and ``#`` comments are skipped."""
    values = {}
    for no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError("expected key=value", f"line {no}")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ParseError("empty key", f"line {no}")
        values[key] = value
    return values
