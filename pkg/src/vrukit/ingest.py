"""Readers for KITTI, BDD100K and COCO-style (FLIR) labels, YOLO label I/O,
and dataset directory scanning.

Parsers are policy-free: class strings are kept verbatim and routed later by
:mod:`vrukit.labels`. Records that carry no 2D box are skipped and tallied in
an optional ``skipped`` counter so callers can account for every input record.
"""

from __future__ import annotations

import enum
import functools
import json
import os
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .errors import AmbiguityError, DatasetIOError, ParseError, ValidationError
from .geometry import BoundingBox, Modality, NormalizedBox

IMAGE_EXTENSIONS = (".jpg", ".jpeg", ".png")


class SourceDataset(str, enum.Enum):
    KITTI = "kitti"
    BDD100K = "bdd100k"
    FLIR = "flir"


class LabelFormat(str, enum.Enum):
    YOLO = "yolo"
    KITTI = "kitti"
    BDD100K = "bdd100k"
    COCO = "coco"


@dataclass(frozen=True)
class SourceAnnotation:
    source_dataset: SourceDataset
    source_class: str
    box: BoundingBox
    frame_id: str = ""
    modality: Modality = Modality.RGB
    truncated: float | None = None
    occluded: int | None = None


@dataclass(frozen=True)
class Frame:
    frame_id: str
    image_path: Path
    label_path: Path | None
    modality: Modality


@dataclass
class DatasetIndex:
    image_count: int
    label_file_count: int
    frames: list[Frame] = field(default_factory=list)
    split: str = "train"
    modality: Modality = Modality.RGB


def _make_box(x0: float, y0: float, x1: float, y1: float, where: str) -> BoundingBox:
    if x1 < x0 or y1 < y0:
        raise ValidationError(f"{where}: inverted box ({x0}, {y0}, {x1}, {y1})")
    if x1 == x0 or y1 == y0:
        raise ValidationError(f"{where}: zero-area box ({x0}, {y0}, {x1}, {y1})")
    try:
        return BoundingBox(x0, y0, x1, y1)
    except ValidationError as exc:
        raise ValidationError(f"{where}: {exc}") from None


def _total(fn):
    """Turn stray structural exceptions from odd inputs into ParseError."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except (KeyError, TypeError, AttributeError, OverflowError, IndexError) as exc:
            raise ParseError(f"malformed input ({type(exc).__name__}: {exc})") from None

    return wrapper


# --------------------------------------------------------------------------
# KITTI


@_total
def parse_kitti_label_file(
    text: str, frame_id: str = "", modality: Modality = Modality.RGB
) -> list[SourceAnnotation]:
    """Parse a KITTI object label file (15 fields per line, 16 with a score)."""
    out: list[SourceAnnotation] = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        fields = line.split()
        if not fields:
            continue
        if len(fields) not in (15, 16):
            raise ParseError(f"expected 15 or 16 fields, got {len(fields)}", lineno)
        try:
            truncated = float(fields[1])
            occluded = int(float(fields[2]))
            left, top, right, bottom = (float(v) for v in fields[4:8])
        except ValueError as exc:
            raise ParseError(f"non-numeric field ({exc})", lineno) from None
        box = _make_box(left, top, right, bottom, f"{frame_id or 'kitti'} line {lineno}")
        out.append(
            SourceAnnotation(
                SourceDataset.KITTI, fields[0], box, frame_id, modality,
                truncated=truncated, occluded=occluded,
            )
        )
    return out


# --------------------------------------------------------------------------
# BDD100K


def _load_json(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"malformed JSON: {exc.msg}", exc.lineno) from None


def _stem(name: str) -> str:
    return Path(name).stem


@_total
def parse_bdd100k_json(
    text: str, modality: Modality = Modality.RGB, skipped: Counter | None = None
) -> list[tuple[str, list[SourceAnnotation]]]:
    """Parse a BDD100K detection label file.

    Labels without ``box2d`` (lanes, drivable area) are skipped and counted in
    ``skipped`` under their category.
    """
    data = _load_json(text)
    if isinstance(data, dict) and "frames" in data:
        data = data["frames"]
    if not isinstance(data, list):
        raise ParseError("expected a JSON array of frames")
    frames: list[tuple[str, list[SourceAnnotation]]] = []
    for i, entry in enumerate(data):
        if not isinstance(entry, dict) or "name" not in entry:
            raise ParseError(f"frame #{i} lacks a 'name'")
        frame_id = _stem(str(entry["name"]))
        annos: list[SourceAnnotation] = []
        for label in entry.get("labels") or []:
            if not isinstance(label, dict) or "category" not in label:
                raise ParseError(f"frame {entry['name']}: label without category")
            box2d = label.get("box2d")
            if box2d is None:
                if skipped is not None:
                    skipped[str(label["category"])] += 1
                continue
            try:
                x0, y0, x1, y1 = (float(box2d[k]) for k in ("x1", "y1", "x2", "y2"))
            except (KeyError, TypeError, ValueError):
                raise ParseError(f"frame {entry['name']}: malformed box2d {box2d!r}") from None
            box = _make_box(x0, y0, x1, y1, f"frame {entry['name']}")
            annos.append(
                SourceAnnotation(SourceDataset.BDD100K, str(label["category"]), box, frame_id, modality)
            )
        frames.append((frame_id, annos))
    return frames


# --------------------------------------------------------------------------
# COCO / FLIR


@_total
def parse_coco_json(
    text: str,
    modality: Modality = Modality.THERMAL,
    dataset: SourceDataset = SourceDataset.FLIR,
) -> list[tuple[str, list[SourceAnnotation]]]:
    data = _load_json(text)
    if not isinstance(data, dict):
        raise ParseError("expected a COCO JSON object")
    for key in ("images", "annotations", "categories"):
        if not isinstance(data.get(key), list):
            raise ParseError(f"missing or malformed '{key}' array")
    try:
        categories = {c["id"]: str(c["name"]) for c in data["categories"]}
        images = {img["id"]: _stem(str(img["file_name"])) for img in data["images"]}
    except (KeyError, TypeError):
        raise ParseError("category or image entry missing id/name/file_name") from None

    per_image: dict = {img_id: [] for img_id in images}
    for ann in data["annotations"]:
        try:
            img_id, cat_id = ann["image_id"], ann["category_id"]
            x, y, w, h = (float(v) for v in ann["bbox"])
        except (KeyError, TypeError, ValueError):
            raise ParseError(f"malformed annotation {ann.get('id', '?')!r}") from None
        if img_id not in images:
            raise ValidationError(f"annotation {ann.get('id', '?')} references unknown image_id {img_id}")
        if cat_id not in categories:
            raise ValidationError(f"annotation {ann.get('id', '?')} references unknown category_id {cat_id}")
        if w < 0 or h < 0:
            raise ValidationError(f"annotation {ann.get('id', '?')}: negative width/height")
        frame_id = images[img_id]
        box = _make_box(x, y, x + w, y + h, f"annotation {ann.get('id', '?')}")
        per_image[img_id].append(SourceAnnotation(dataset, categories[cat_id], box, frame_id, modality))
    return [(images[img_id], annos) for img_id, annos in per_image.items()]


# --------------------------------------------------------------------------
# YOLO labels


def _fmt(v: float) -> str:
    return f"{v:.6f}"


def write_yolo_label_file(annotations: Iterable[tuple[int, NormalizedBox]]) -> str:
    lines = []
    for class_id, nb in annotations:
        lines.append(" ".join([str(int(class_id)), _fmt(nb.cx), _fmt(nb.cy), _fmt(nb.w), _fmt(nb.h)]))
    return "".join(line + "\n" for line in lines)


@_total
def read_yolo_label_file(text: str, allow_ignore: bool = False) -> list[tuple[int, NormalizedBox]]:
    """Parse ``class cx cy w h`` lines.

    ``allow_ignore`` admits class ``-1``, used by the ignore-region sidecar files.
    """
    out: list[tuple[int, NormalizedBox]] = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        fields = line.split()
        if not fields:
            continue
        if len(fields) != 5:
            raise ParseError(f"expected 5 fields, got {len(fields)}", lineno)
        try:
            cls_f = float(fields[0])
            vals = [float(v) for v in fields[1:]]
        except ValueError as exc:
            raise ParseError(f"non-numeric field ({exc})", lineno) from None
        if cls_f != int(cls_f) or (cls_f < 0 and not (allow_ignore and cls_f == -1)):
            raise ParseError(f"invalid class id {fields[0]!r}", lineno)
        if any(not (-0.01 <= v <= 1.01) for v in vals):
            raise ValidationError(f"line {lineno}: value outside [-0.01, 1.01]: {vals}")
        try:
            out.append((int(cls_f), NormalizedBox(*vals)))
        except ValidationError as exc:
            raise ValidationError(f"line {lineno}: {exc}") from None
    return out


# --------------------------------------------------------------------------
# Directory scanning


def _walk(root: Path, suffixes: Sequence[str]) -> list[Path]:
    found = []
    def _onerror(exc: OSError) -> None:
        raise DatasetIOError(f"cannot read directory {exc.filename}: {exc.strerror}")
    for dirpath, _dirnames, filenames in os.walk(root, onerror=_onerror):
        for name in filenames:
            if name.lower().endswith(tuple(suffixes)):
                found.append(Path(dirpath) / name)
    return found


def _by_stem(paths: Iterable[Path], kind: str) -> dict[str, Path]:
    table: dict[str, Path] = {}
    for p in paths:
        if p.stem in table:
            a, b = sorted([str(table[p.stem]), str(p)])
            raise AmbiguityError(f"duplicate {kind} stem {p.stem!r}: {a} and {b}")
        table[p.stem] = p
    return table


def _image_and_label_dirs(root: Path, fmt: LabelFormat, split: str | None) -> tuple[Path, Path]:
    sub = {LabelFormat.YOLO: ("images", "labels"), LabelFormat.KITTI: ("image_2", "label_2")}
    img_name, lbl_name = sub.get(fmt, ("", ""))
    if img_name and (root / img_name).is_dir():
        img_dir, lbl_dir = root / img_name, root / lbl_name
        if split is not None and fmt is LabelFormat.YOLO:
            img_dir, lbl_dir = img_dir / split, lbl_dir / split
        return img_dir, lbl_dir
    return root, root


def _json_labelled_frames(root: Path, fmt: LabelFormat) -> dict[str, Path]:
    labelled: dict[str, Path] = {}
    for path in sorted(_walk(root, (".json",))):
        text = path.read_text(encoding="utf-8")
        if fmt is LabelFormat.BDD100K:
            frames = parse_bdd100k_json(text)
        else:
            frames = parse_coco_json(text)
        labelled.update((fid, path) for fid, annos in frames if annos)
    return labelled


def scan_dataset(
    root: str | Path,
    fmt: LabelFormat | str = LabelFormat.YOLO,
    modality: Modality | str = Modality.RGB,
    split: str | None = None,
) -> DatasetIndex:
    """Index images and their label files without decoding any pixels.

    For text label formats a frame is labelled when a ``.txt`` with the same
    stem exists; for JSON formats when the JSON gives it at least one box.
    Frames come back sorted by frame id.
    """
    root = Path(root)
    fmt = LabelFormat(fmt)
    modality = Modality(modality)
    if not root.is_dir():
        raise DatasetIOError(f"dataset root {root} is not a directory")
    img_dir, lbl_dir = _image_and_label_dirs(root, fmt, split)
    images = _by_stem(_walk(img_dir, IMAGE_EXTENSIONS), "image") if img_dir.is_dir() else {}

    frames: list[Frame] = []
    if fmt in (LabelFormat.YOLO, LabelFormat.KITTI):
        labels = _by_stem(_walk(lbl_dir, (".txt",)), "label") if lbl_dir.is_dir() else {}
        for stem in sorted(images):
            frames.append(Frame(stem, images[stem], labels.get(stem), modality))
    else:
        labelled = _json_labelled_frames(root, fmt)
        for stem in sorted(images):
            frames.append(Frame(stem, images[stem], labelled.get(stem), modality))

    n_labels = sum(1 for f in frames if f.label_path is not None)
    return DatasetIndex(len(frames), n_labels, frames, split or "train", modality)
