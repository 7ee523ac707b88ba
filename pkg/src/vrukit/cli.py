"""``vrukit`` command line: convert, stats, weights, augment, eval, fuse, manifest.

Every subcommand writes JSON to ``--out`` and a readable table to stdout.
Exit codes: 0 success, 1 I/O, 2 validation/parse, 3 configuration.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import shutil
import sys
import zlib
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Sequence

from . import __version__
from .augment import PipelineSpec, apply_pipeline, load_image, save_image
from .convert import SOURCE_FORMATS, convert_dataset
from .errors import ConfigError, DatasetIOError, VrukitError
from .evaluation import EvalConfig, evaluate
from .fixtures import make_fixtures
from .formats import (
    list_splits,
    read_classes,
    read_detections,
    read_ground_truth,
    split_frames,
    write_detection_dir,
)
from .fusion import FusionConfig, fuse_frame_with_audit, pair_streams
from .geometry import Modality
from .ingest import IMAGE_EXTENSIONS, LabelFormat, scan_dataset
from .labels import ClassFilter, FilterName, default_label_map, load_label_map
from .stats import (
    AugmentationLevel,
    ClassHistogram,
    ExperimentConfig,
    WeightScheme,
    compute_class_weights,
    count_instances,
    dataset_summary,
    emit_experiment_manifest,
    render_table,
    summary_csv,
    summary_text,
)

log = logging.getLogger("vrukit")

THREADS_ENV = "VRUKIT_THREADS"


def _dump(obj, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2) + "\n", encoding="utf-8")


def _require(path: str | Path, kind: str = "path") -> Path:
    p = Path(path)
    if not p.exists():
        raise DatasetIOError(f"{kind} {p} does not exist")
    return p


def _threads() -> int:
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None
    return max(1, n)


# --------------------------------------------------------------------------
# subcommands


def cmd_convert(args: argparse.Namespace) -> int:
    src = _require(args.src, "source root")
    label_map = load_label_map(_require(args.label_map, "label map")) if args.label_map else default_label_map()
    class_filter = ClassFilter.named(args.filter)
    modality = args.modality or ("thermal" if args.format == "flir" else "rgb")
    report = convert_dataset(src, args.format, modality, label_map, class_filter, args.dst, args.split)
    _dump(report.to_dict(), args.out)
    rows = [(c, report.instances[c]) for c in report.classes] + [("Don't care", report.dont_care)]
    print(render_table(["class", "instances"], rows), end="")
    print(f"images {report.images}, label files {report.label_files}, errors {report.errors}")
    return 0


def _parse_input(spec: str) -> tuple[Path, Modality]:
    root, sep, modality = spec.rpartition("=")
    if not sep:
        root, modality = spec, "rgb"
    try:
        return _require(root, "dataset root"), Modality(modality.lower())
    except ValueError:
        raise ConfigError(f"unknown modality {modality!r} in {spec!r}") from None


def cmd_stats(args: argparse.Namespace) -> int:
    histograms = []
    indexes = []
    for spec in args.input:
        root, modality = _parse_input(spec)
        classes = read_classes(root)
        for split in list_splits(root):
            gts = read_ground_truth(root, split)
            annos = (a for fid in sorted(gts) for a in gts[fid])
            histograms.append(count_instances(annos, classes, split, modality))
            indexes.append(scan_dataset(root, LabelFormat.YOLO, modality, split))
    rows = dataset_summary(indexes)
    _dump(
        {
            "histograms": [h.to_dict() for h in histograms],
            "summary": [{"modality": r.modality, "split": r.split, "images": r.images, "labels": r.labels} for r in rows],
        },
        args.out,
    )
    if args.csv:
        Path(args.csv).write_text(summary_csv(rows), encoding="utf-8")
    for h in histograms:
        print(f"{h.modality.value} {h.split}")
        table = [(c, n) for c, n in h.counts.items()] + [("Don't care", h.dont_care)]
        print(render_table(["class", "instances"], table))
    print(summary_text(rows), end="")
    return 0


def cmd_weights(args: argparse.Namespace) -> int:
    try:
        data = json.loads(_require(args.stats, "stats file").read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"stats file {args.stats}: {exc}") from None
    picked = [
        h for h in data.get("histograms", [])
        if h["split"] == args.split and h["modality"] == args.modality
    ]
    if not picked:
        raise ConfigError(f"no {args.modality}/{args.split} histogram in {args.stats}")
    classes = tuple(picked[0]["counts"])
    hist = ClassHistogram(classes, {c: 0 for c in classes}, 0, args.split, Modality(args.modality))
    for h in picked:
        if tuple(h["counts"]) != classes:
            raise ConfigError("histograms to merge list different classes")
        hist = hist + ClassHistogram(classes, dict(h["counts"]), 0, args.split, Modality(args.modality))
    weights = compute_class_weights(hist, args.scheme, args.cap, args.epsilon)
    by_name = weights.by_name()
    _dump(by_name, args.out)
    print(render_table(["class", "count", "weight"], [(c, hist.counts[c], f"{w:.4f}") for c, w in by_name.items()]), end="")
    return 0


def _augment_one(job):
    img_path, stem, n, spec, out_dir = job
    img = load_image(img_path)
    frame_seed = zlib.crc32(f"{stem}_aug{n}".encode("utf-8"))
    out, _, applied = apply_pipeline(img, [], spec, frame_seed)
    save_image(out, out_dir / f"{stem}_aug{n}{img_path.suffix}")
    return f"{stem}_aug{n}", applied


def cmd_augment(args: argparse.Namespace) -> int:
    root = _require(args.root, "dataset root")
    if args.spec:
        spec = PipelineSpec.load(_require(args.spec, "pipeline spec"))
    else:
        spec = PipelineSpec.for_level(args.level)
    if args.seed is not None:
        spec = PipelineSpec(spec.level, spec.steps, args.seed)
    if args.copies < 1:
        raise ConfigError("--copies must be at least 1")

    dst = Path(args.dst)
    if dst.resolve() == root.resolve():
        raise ConfigError("--dst must differ from --root; inputs are never modified")
    stems = split_frames(root, args.split)
    src_images = {p.stem: p for p in (root / "images" / args.split).iterdir() if p.suffix.lower() in IMAGE_EXTENSIONS}
    img_dst = dst / "images" / args.split
    img_dst.mkdir(parents=True, exist_ok=True)
    jobs = [(src_images[stem], stem, n, spec, img_dst) for stem in stems for n in range(1, args.copies + 1)]
    with ThreadPoolExecutor(max_workers=_threads()) as pool:
        results = list(pool.map(_augment_one, jobs))

    for sub in ("labels", "ignore"):
        src_dir = root / sub / args.split
        if not src_dir.is_dir():
            continue
        (dst / sub / args.split).mkdir(parents=True, exist_ok=True)
        for _, stem, n, _, _ in jobs:
            label = src_dir / f"{stem}.txt"
            if label.is_file():
                shutil.copyfile(label, dst / sub / args.split / f"{stem}_aug{n}.txt")
    if (root / "classes.txt").is_file() and not (dst / "classes.txt").exists():
        shutil.copyfile(root / "classes.txt", dst / "classes.txt")

    _dump({"level": spec.level, "seed": spec.seed, "frames": {name: applied for name, applied in results}}, args.out)
    counts: dict[str, int] = {}
    for _, applied in results:
        for entry in applied:
            counts[entry["transform"]] = counts.get(entry["transform"], 0) + 1
    print(render_table(["transform", "applied"], sorted(counts.items())), end="")
    print(f"{len(results)} augmented images ({spec.level}, seed {spec.seed})")
    return 0


def _iou_range(start: float, stop: float, step: float) -> tuple[float, ...]:
    if not (0 < start <= stop <= 1) or step <= 0:
        raise ConfigError(f"invalid IoU range {start}:{stop}:{step}")
    n = int(round((stop - start) / step)) + 1
    return tuple(round(start + step * i, 10) for i in range(n))


def cmd_eval(args: argparse.Namespace) -> int:
    gts_root = _require(args.gts, "ground-truth root")
    dets = read_detections(_require(args.dets, "detections"))
    gts = read_ground_truth(gts_root, args.split)
    thresholds = _iou_range(args.iou_start, args.iou_stop, args.iou_step)
    config = EvalConfig(read_classes(gts_root), thresholds, args.iou_start)
    report = evaluate(dets, gts, config)
    _dump(report.to_dict(), args.out)
    print(report.to_text(), end="")
    if not report.precision_defined:
        print("precision undefined (no detections); reported as 0")
    return 0


def cmd_fuse(args: argparse.Namespace) -> int:
    cfg = FusionConfig() if args.cfg == "default" else FusionConfig.load(_require(args.cfg, "fusion config"))
    rgb = read_detections(_require(args.rgb, "RGB detections"), Modality.RGB)
    tir = read_detections(_require(args.tir, "thermal detections"), Modality.THERMAL)
    fused: dict[str, list] = {}
    frames_log = {}
    for fid, r, t in pair_streams(rgb, tir):
        result = fuse_frame_with_audit(r or (), t or (), cfg)
        fused[fid] = result.detections
        frames_log[fid] = {
            "detections": [
                {"class_id": d.class_id, "confidence": d.confidence, "support": d.support.value,
                 "box": list(d.box.as_tuple())}
                for d in result.detections
            ],
            "audit": [
                {"modality": e.modality, "index": e.index, "outcome": e.outcome,
                 "candidate": e.candidate, "partner": e.partner}
                for e in result.audit
            ],
        }
    if args.dst:
        write_detection_dir(args.dst, fused)
    cfg_dict = {k: getattr(cfg, k) for k in cfg.__dataclass_fields__}
    cfg_dict["box_mode"] = cfg.box_mode.value
    _dump({"config": cfg_dict, "frames": frames_log}, args.out)
    support: dict[str, int] = {}
    for dets in fused.values():
        for d in dets:
            support[d.support.value] = support.get(d.support.value, 0) + 1
    print(render_table(["support", "detections"], sorted(support.items())), end="")
    print(f"{len(fused)} frames fused")
    return 0


def cmd_manifest(args: argparse.Namespace) -> int:
    config = ExperimentConfig(
        resolution=args.resolution,
        freeze_layers=args.freeze_layers,
        batch=args.batch,
        epochs=args.epochs,
        patience=args.patience,
        class_filter=FilterName(args.class_filter),
        weights_file=args.weights_file,
        augmentation_level=AugmentationLevel(args.augmentation_level),
    )
    text = emit_experiment_manifest(config)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(text, encoding="utf-8")
    print(text, end="")
    return 0


def cmd_make_fixtures(args: argparse.Namespace) -> int:
    dst = Path(args.dst)
    if dst.exists() and any(dst.iterdir()):
        raise DatasetIOError(f"{dst} is not empty")
    summary = make_fixtures(dst, args.seed)
    if args.out:
        _dump(summary, args.out)
    print(render_table(["source", "frames"], [(k, v) for k, v in summary.items() if k != "frames"]), end="")
    return 0


# --------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vrukit",
        description="Dataset unification, imbalance weights, augmentation, scoring and RGB/thermal fusion.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="more logging (repeatable)")
    seeded = argparse.ArgumentParser(add_help=False)
    seeded.add_argument("--seed", type=int, default=0, help="accepted by every subcommand; this one is deterministic")
    sub = parser.add_subparsers(
        dest="command", required=True,
        metavar="{convert,stats,weights,augment,eval,fuse,manifest}",
    )

    p = sub.add_parser("convert", parents=[seeded], help="convert a KITTI/BDD100K/FLIR dataset into a unified YOLO tree")
    p.add_argument("--src", required=True, help="source dataset root")
    p.add_argument("--format", required=True, choices=sorted(SOURCE_FORMATS), help="source label format")
    p.add_argument("--modality", choices=[m.value for m in Modality], help="defaults to thermal for flir, else rgb")
    p.add_argument("--label-map", help="JSON override {dataset: {source_class: target}}")
    p.add_argument("--filter", default="full", choices=[f.value for f in FilterName if f is not FilterName.CUSTOM])
    p.add_argument("--split", default="train", help="split name under images/ and labels/")
    p.add_argument("--dst", required=True, help="destination YOLO tree root")
    p.add_argument("--out", required=True, help="conversion report (JSON)")
    p.set_defaults(func=cmd_convert)

    p = sub.add_parser("stats", parents=[seeded], help="class histograms and image/label counts of YOLO trees")
    p.add_argument("--input", required=True, action="append", metavar="ROOT[=MODALITY]",
                   help="converted tree and its modality (rgb|thermal); repeatable")
    p.add_argument("--out", required=True, help="statistics (JSON)")
    p.add_argument("--csv", help="also write the image/label summary as CSV")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("weights", parents=[seeded], help="class weights from a stats file")
    p.add_argument("--stats", required=True, help="output of the stats subcommand")
    p.add_argument("--split", default="train")
    p.add_argument("--modality", default="rgb", choices=[m.value for m in Modality])
    p.add_argument("--scheme", default="inverse_freq", choices=[s.value for s in WeightScheme])
    p.add_argument("--cap", type=float, default=10.0, help="largest allowed weight")
    p.add_argument("--epsilon", type=int, default=1, help="count floor in the weight formula")
    p.add_argument("--out", required=True, help="weights (JSON {class: weight})")
    p.set_defaults(func=cmd_weights)

    p = sub.add_parser("augment", help="write augmented copies of a split")
    p.add_argument("--root", required=True, help="YOLO tree to read")
    p.add_argument("--split", default="train")
    p.add_argument("--level", default="light", choices=[a.value for a in AugmentationLevel])
    p.add_argument("--spec", help="pipeline spec JSON (overrides --level)")
    p.add_argument("--copies", type=int, default=1, help="augmented copies per image")
    p.add_argument("--seed", type=int, help="master seed (overrides the pipeline file's seed)")
    p.add_argument("--dst", required=True, help="tree receiving the *_aug{n} copies")
    p.add_argument("--out", required=True, help="per-image transform log (JSON)")
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("eval", parents=[seeded], help="score detections against a YOLO tree split")
    p.add_argument("--dets", required=True, help="detection directory (*.txt) or JSON file")
    p.add_argument("--gts", required=True, help="YOLO tree with ground truth")
    p.add_argument("--split", default="val")
    p.add_argument("--iou-start", type=float, default=0.5)
    p.add_argument("--iou-stop", type=float, default=0.95)
    p.add_argument("--iou-step", type=float, default=0.05)
    p.add_argument("--out", required=True, help="evaluation report (JSON)")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("fuse", parents=[seeded], help="late-fuse RGB and thermal detections")
    p.add_argument("--rgb", required=True, help="RGB detection directory or JSON")
    p.add_argument("--tir", required=True, help="thermal detection directory or JSON")
    p.add_argument("--cfg", default="default", help="'default' or a fusion config JSON")
    p.add_argument("--dst", help="directory for fused detection files")
    p.add_argument("--out", required=True, help="fused detections and audit log (JSON)")
    p.set_defaults(func=cmd_fuse)

    defaults = ExperimentConfig()
    p = sub.add_parser("manifest", parents=[seeded], help="emit a training experiment manifest")
    p.add_argument("--resolution", type=int, default=defaults.resolution)
    p.add_argument("--freeze-layers", type=int, default=defaults.freeze_layers)
    p.add_argument("--batch", type=int, default=defaults.batch)
    p.add_argument("--epochs", type=int, default=defaults.epochs)
    p.add_argument("--patience", type=int, default=defaults.patience)
    p.add_argument("--class-filter", default=defaults.class_filter.value,
                   choices=[f.value for f in FilterName if f is not FilterName.CUSTOM])
    p.add_argument("--weights-file", help="class weights JSON handed to the trainer")
    p.add_argument("--augmentation-level", default=defaults.augmentation_level.value,
                   choices=[a.value for a in AugmentationLevel])
    p.add_argument("--out", required=True, help="manifest (JSON)")
    p.set_defaults(func=cmd_manifest)

    p = sub.add_parser("make-fixtures")
    p.add_argument("--dst", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_make_fixtures)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except VrukitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
