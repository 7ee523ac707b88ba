"""Source dataset -> unified YOLO tree conversion."""

from __future__ import annotations

import shutil
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

from PIL import Image

from .errors import ConfigError, DatasetIOError, ValidationError
from .formats import read_classes
from .geometry import Modality, to_normalized
from .ingest import (
    IMAGE_EXTENSIONS,
    SourceAnnotation,
    SourceDataset,
    _by_stem,
    _walk,
    parse_bdd100k_json,
    parse_coco_json,
    parse_kitti_label_file,
    write_yolo_label_file,
)
from .labels import ClassFilter, LabelMap, SkipReport, apply_class_filter, apply_label_map

SOURCE_FORMATS = {"kitti": SourceDataset.KITTI, "bdd100k": SourceDataset.BDD100K, "flir": SourceDataset.FLIR}


@dataclass
class ConversionReport:
    dataset: str
    split: str
    modality: str
    classes: tuple[str, ...]
    images: int = 0
    label_files: int = 0
    ignore_files: int = 0
    source_annotations: int = 0
    instances: Counter = field(default_factory=Counter)
    dont_care: int = 0
    filtered_out: int = 0
    skipped_no_box: Counter = field(default_factory=Counter)
    mapping: SkipReport = field(default_factory=SkipReport)
    errors: int = 0

    def to_dict(self) -> dict:
        return {
            "dataset": self.dataset,
            "split": self.split,
            "modality": self.modality,
            "classes": list(self.classes),
            "images": self.images,
            "label_files": self.label_files,
            "ignore_files": self.ignore_files,
            "source_annotations": self.source_annotations,
            "instances": {c: self.instances[c] for c in self.classes},
            "dont_care": self.dont_care,
            "filtered_out": self.filtered_out,
            "skipped_no_box": dict(sorted(self.skipped_no_box.items())),
            "mapping": self.mapping.to_dict(),
            "errors": self.errors,
        }


def _read_source(
    root: Path, dataset: SourceDataset, modality: Modality, skipped: Counter
) -> dict[str, list[SourceAnnotation]]:
    frames: dict[str, list[SourceAnnotation]] = {}
    if dataset is SourceDataset.KITTI:
        label_dir = root / "label_2" if (root / "label_2").is_dir() else root
        for path in sorted(_walk(label_dir, (".txt",))):
            try:
                frames[path.stem] = parse_kitti_label_file(path.read_text(encoding="utf-8"), path.stem, modality)
            except ValidationError as exc:
                raise type(exc)(f"{path.name}: {exc}") from None
        return frames
    for path in sorted(_walk(root, (".json",))):
        text = path.read_text(encoding="utf-8")
        try:
            if dataset is SourceDataset.BDD100K:
                parsed = parse_bdd100k_json(text, modality, skipped)
            else:
                parsed = parse_coco_json(text, modality, dataset)
        except ValidationError as exc:
            raise type(exc)(f"{path.name}: {exc}") from None
        for fid, annos in parsed:
            if fid in frames:
                raise ValidationError(f"frame {fid!r} labelled twice ({path.name})")
            frames[fid] = annos
    return frames


def _image_size(path: Path) -> tuple[int, int]:
    try:
        with Image.open(path) as im:
            return im.size
    except OSError as exc:
        raise DatasetIOError(f"cannot read image header of {path.name}: {exc}") from None


def convert_dataset(
    src_root: str | Path,
    source: str,
    modality: Modality | str,
    label_map: LabelMap,
    class_filter: ClassFilter,
    dst_root: str | Path,
    split: str = "train",
) -> ConversionReport:
    """Convert one source dataset into (or onto) a YOLO tree.

    Everything is parsed, mapped and checked before the first file is
    written, so a failing conversion leaves ``dst_root`` untouched.
    """
    src_root, dst_root = Path(src_root), Path(dst_root)
    modality = Modality(modality)
    try:
        dataset = SOURCE_FORMATS[source]
    except KeyError:
        raise ConfigError(f"unknown source format {source!r}") from None
    if not src_root.is_dir():
        raise DatasetIOError(f"source root {src_root} is not a directory")

    kept = class_filter.kept
    report = ConversionReport(dataset.value, split, modality.value, kept)
    images = _by_stem(_walk(src_root, IMAGE_EXTENSIONS), "image")
    source_frames = _read_source(src_root, dataset, modality, report.skipped_no_box)
    orphans = sorted(set(source_frames) - set(images))
    if orphans:
        raise DatasetIOError(f"labels without images: {orphans[:10]}")

    all_source = [a for fid in sorted(source_frames) for a in source_frames[fid]]
    report.source_annotations = len(all_source)
    mapped, report.mapping = apply_label_map(all_source, label_map)
    filtered = apply_class_filter(mapped, class_filter, label_map.classes)
    report.filtered_out = len(mapped) - len(filtered)
    by_frame: dict[str, list] = {}
    for a in filtered:
        by_frame.setdefault(a.frame_id, []).append(a)

    dirs = {name: dst_root / name / split for name in ("images", "labels", "ignore")}
    classes_file = dst_root / "classes.txt"
    if classes_file.exists() and read_classes(dst_root) != kept:
        raise ConfigError(f"{classes_file} lists a different class set")

    plan = []
    for stem in sorted(images):
        img = images[stem]
        annos = by_frame.get(stem, [])
        w, h = _image_size(img) if annos else (0, 0)
        trainable = [(a.class_id, to_normalized(a.box, w, h)) for a in annos if not a.ignore]
        ignore = [(a.class_id, to_normalized(a.box, w, h)) for a in annos if a.ignore]
        plan.append((stem, img, trainable, ignore))
        for cls, _ in trainable:
            report.instances[kept[cls]] += 1
        report.dont_care += len(ignore)

    targets = [dirs["images"] / img.name for _, img, _, _ in plan]
    targets += [dirs["labels"] / f"{stem}.txt" for stem, _, tr, _ in plan if tr]
    targets += [dirs["ignore"] / f"{stem}.txt" for stem, _, _, ig in plan if ig]
    clashes = [str(t.relative_to(dst_root)) for t in targets if t.exists()]
    if clashes:
        raise DatasetIOError(f"destination already holds {clashes[:5]}")

    for d in dirs.values():
        d.mkdir(parents=True, exist_ok=True)
    if not classes_file.exists():
        classes_file.write_text("".join(f"{c}\n" for c in kept), encoding="utf-8")
    for stem, img, trainable, ignore in plan:
        shutil.copyfile(img, dirs["images"] / img.name)
        report.images += 1
        if trainable:
            (dirs["labels"] / f"{stem}.txt").write_text(write_yolo_label_file(trainable), encoding="utf-8")
            report.label_files += 1
        if ignore:
            (dirs["ignore"] / f"{stem}.txt").write_text(write_yolo_label_file(ignore), encoding="utf-8")
            report.ignore_files += 1
    return report
