"""Command line interface.

Exit codes: 0 success, 1 usage error, 2 parse error, 3 internal invariant violation.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

from . import __version__
from .evaluation import aggregate, match_detections, prf
from .fileio import (
    ParseError,
    detections_to_json,
    parse_config_text,
    read_annotation,
    read_detections,
    read_tmap,
    write_annotation,
    write_tmap,
)
from .labelgen import gen_label_maps
from .losses import LossWeights, compute_losses
from .pipeline import ConfigError, DetectConfig, detect, detect_multiscale

log = logging.getLogger("holotext")

EXIT_OK, EXIT_USAGE, EXIT_PARSE, EXIT_INVARIANT = 0, 1, 2, 3


class UsageError(Exception):
    pass


class InvariantError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def load_config(args) -> DetectConfig:
    values = {}
    if getattr(args, "config", None):
        values.update(parse_config_text(Path(args.config).read_text(encoding="utf-8")))
    for item in getattr(args, "set", None) or []:
        if "=" not in item:
            raise UsageError(f"--set expects key=value, got {item!r}")
        key, value = item.split("=", 1)
        values[key.strip()] = value.strip()
    return DetectConfig.from_mapping(values)


def _write(path, text: str) -> None:
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


# ---------------------------------------------------------------------------
# verbs
# ---------------------------------------------------------------------------


def cmd_labelgen(args) -> int:
    ann = read_annotation(args.annotation)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    maps = gen_label_maps(ann)
    write_tmap(maps.region, out / "region.tmap")
    write_tmap(maps.character, out / "character.tmap")
    write_tmap(maps.orientation, out / "orientation.tmap")
    log.info("wrote label maps for %dx%d image to %s", ann.width, ann.height, out)
    return EXIT_OK


def _check_invariants(result, config: DetectConfig) -> None:
    for i, j, w in result.cut_edges:
        if w > config.tau:
            raise InvariantError(f"edge ({i}, {j}) with weight {w:.4f} > tau was cut")
    for d in result.detections:
        if not (d.box.width > 0 and d.box.height > 0 and 0 <= d.score <= 1):
            raise InvariantError(f"degenerate detection {d}")


def cmd_detect(args) -> int:
    config = load_config(args)
    maps = [read_tmap(p) for p in (args.region, args.character, args.orientation)]
    for m, want in zip(maps, ("region", "character", "orientation")):
        if m.channel != want:
            raise UsageError(f"expected a {want} map, got channel {m.channel!r}")
    image_id = args.image_id or Path(args.region).parent.name or "image"
    result = detect(*maps, config)
    _check_invariants(result, config)
    dets = list(result.detections)
    if args.scale_set:
        scaled = [(*maps, 1.0)]
        for r, c, o, factor in args.scale_set:
            scaled.append((read_tmap(r), read_tmap(c), read_tmap(o), float(factor)))
        dets = detect_multiscale(scaled, config)
    _write(args.output, detections_to_json(image_id, dets))
    return EXIT_OK


def _synth_one(job):
    from .synth import SceneSpec, gen_scene, random_arc_scene, random_straight_scene

    seed, lines, arc, sigma, blur, size, out = job
    spec: SceneSpec = random_arc_scene(seed, size) if arc else random_straight_scene(seed, size, lines)
    scene = gen_scene(replace(spec, sigma=sigma, blur=blur))
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    write_annotation(scene.annotation, out / "scene.ann")
    write_tmap(scene.region, out / "region.tmap")
    write_tmap(scene.character, out / "character.tmap")
    write_tmap(scene.orientation, out / "orientation.tmap")
    return str(out)


def cmd_synth(args) -> int:
    root = Path(args.out_dir)
    if args.count == 1:
        targets = [root]
    else:
        targets = [root / f"scene_{k:04d}" for k in range(args.count)]
    jobs = [
        (args.seed + k, args.lines, args.arc, args.sigma, args.blur, args.size, str(t))
        for k, t in enumerate(targets)
    ]
    for path in _run_jobs(_synth_one, jobs, args.jobs):
        log.info("wrote %s", path)
    return EXIT_OK


def _eval_one(job):
    det_path, gt_path, iou = job
    image_id, dets = read_detections(det_path)
    ann = read_annotation(gt_path)
    match = match_detections([d["polygon"] for d in dets], [r.polygon for r in ann.regions], iou)
    return image_id, match


def cmd_eval(args) -> int:
    if len(args.det) != len(args.gt):
        raise UsageError("--det and --gt must be given the same number of times")
    jobs = [(d, g, args.iou) for d, g in zip(args.det, args.gt)]
    results = list(_run_jobs(_eval_one, jobs, args.jobs))
    per_image = []
    for image_id, match in results:
        p, r, f = prf(match)
        per_image.append(
            {"image_id": image_id, "detections": match.n_dets, "gts": match.n_gts,
             "matched": len(match.pairs), "precision": p, "recall": r, "f_measure": f}
        )
    P, R, F = aggregate([m for _, m in results])
    report = {"iou_thresh": args.iou, "images": per_image, "aggregate": {"precision": P, "recall": R, "f_measure": F}}
    table = format_table(per_image, (P, R, F))
    if args.out_dir:
        out = Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "eval.json").write_text(json.dumps(report, indent=1) + "\n", encoding="utf-8")
        (out / "eval.txt").write_text(table, encoding="utf-8")
        from .plotting import save_prf_chart

        names = [row["image_id"] for row in per_image] + ["all"]
        rows = [(row["precision"], row["recall"], row["f_measure"]) for row in per_image] + [(P, R, F)]
        save_prf_chart(out / "eval.png", names, rows)
    if args.json:
        sys.stdout.write(json.dumps(report, indent=1) + "\n")
    else:
        sys.stdout.write(table)
    return EXIT_OK


def format_table(per_image, total) -> str:
    width = max([len("image")] + [len(r["image_id"]) for r in per_image] + [len("ALL")])
    lines = [f"{'image':<{width}}  {'dets':>5}  {'gts':>5}  {'match':>5}  {'P':>6}  {'R':>6}  {'F':>6}"]
    for r in per_image:
        lines.append(
            f"{r['image_id']:<{width}}  {r['detections']:>5}  {r['gts']:>5}  {r['matched']:>5}  "
            f"{r['precision']:>6.4f}  {r['recall']:>6.4f}  {r['f_measure']:>6.4f}"
        )
    n_d = sum(r["detections"] for r in per_image)
    n_g = sum(r["gts"] for r in per_image)
    n_m = sum(r["matched"] for r in per_image)
    lines.append(f"{'ALL':<{width}}  {n_d:>5}  {n_g:>5}  {n_m:>5}  {total[0]:>6.4f}  {total[1]:>6.4f}  {total[2]:>6.4f}")
    return "\n".join(lines) + "\n"


def cmd_loss(args) -> int:
    config = load_config(args)
    weights = LossWeights(config.lambda1, config.lambda2, config.lambda3)
    pred = [read_tmap(p) for p in args.pred]
    gt = [read_tmap(p) for p in args.gt]
    try:
        report = compute_losses(pred, gt, weights, mean=args.mean)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    sys.stdout.write(json.dumps(report.to_dict(), indent=1, sort_keys=True) + "\n")
    return EXIT_OK


def cmd_overlay(args) -> int:
    from .plotting import save_overlay

    _, dets = read_detections(args.detections)
    region = read_tmap(args.region)
    gt = [r.polygon for r in read_annotation(args.gt).regions] if args.gt else ()
    save_overlay(
        args.output,
        region.data,
        [d["polygon"] for d in dets],
        [d["kind"] for d in dets],
        [d["score"] for d in dets],
        gt,
    )
    return EXIT_OK


def _run_jobs(fn, jobs, n_jobs: int):
    if n_jobs <= 1 or len(jobs) <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=n_jobs) as pool:
        return list(pool.map(fn, jobs))


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="holotext", description="Text line detection from region, character and orientation maps.")
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def config_opts(p):
        p.add_argument("--config", help="flat key=value config file")
        p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override one config key")

    p = sub.add_parser("labelgen", help="annotation file -> region/character/orientation TMAPs")
    p.add_argument("annotation")
    p.add_argument("out_dir")
    p.set_defaults(func=cmd_labelgen)

    p = sub.add_parser("detect", help="three prediction TMAPs -> detection JSON")
    p.add_argument("region")
    p.add_argument("character")
    p.add_argument("orientation")
    p.add_argument("-o", "--output", help="output JSON (default stdout)")
    p.add_argument("--image-id")
    p.add_argument(
        "--scale-set", nargs=4, action="append", metavar=("REGION", "CHAR", "ORIENT", "FACTOR"),
        help="maps predicted on the image rescaled by FACTOR; fused with NMS",
    )
    config_opts(p)
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("synth", help="write synthetic scenes (annotation + ideal TMAPs)")
    p.add_argument("out_dir")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--count", type=int, default=1)
    p.add_argument("--lines", type=int, choices=range(1, 5), help="number of straight lines (default random 1-4)")
    p.add_argument("--arc", action="store_true", help="one curved line instead of straight lines")
    p.add_argument("--sigma", type=float, default=0.0)
    p.add_argument("--blur", type=int, default=0)
    p.add_argument("--size", type=int, default=320)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("eval", help="score detection JSON files against annotation files")
    p.add_argument("--det", action="append", required=True)
    p.add_argument("--gt", action="append", required=True)
    p.add_argument("--iou", type=float, default=0.5)
    p.add_argument("--json", action="store_true", help="print the JSON report instead of the table")
    p.add_argument("-o", "--out-dir", help="write eval.json, eval.txt and eval.png here")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("loss", help="loss report for prediction vs ground-truth TMAPs")
    p.add_argument("--pred", nargs=3, required=True, metavar=("REGION", "CHAR", "ORIENT"))
    p.add_argument("--gt", nargs=3, required=True, metavar=("REGION", "CHAR", "ORIENT"))
    p.add_argument("--mean", action="store_true", help="per-pixel mean instead of sum")
    config_opts(p)
    p.set_defaults(func=cmd_loss)

    p = sub.add_parser("overlay", help="draw detections over the region map as a PNG")
    p.add_argument("detections")
    p.add_argument("region")
    p.add_argument("output")
    p.add_argument("--gt", help="annotation file; its regions are drawn dashed")
    p.set_defaults(func=cmd_overlay)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # --help and --version exit 0; argparse errors exit with EXIT_USAGE
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except InvariantError as exc:
        print(f"invariant violated: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except (UsageError, ConfigError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
