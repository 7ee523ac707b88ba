"""Detection files and YOLO dataset trees on disk.

Text detection files hold one object per line, ``class_id confidence cx cy w
h`` with normalized coordinates. Normalized boxes are mapped into a unit frame
(a 1x1 "image"): IoU, NMS and box averaging are unchanged by per-axis scaling,
so nothing downstream needs the real image size.

A YOLO tree as written by ``convert`` looks like::

    root/classes.txt
    root/images/<split>/<stem>.<ext>
    root/labels/<split>/<stem>.txt      # trainable objects
    root/ignore/<split>/<stem>.txt      # ignore regions, class -1
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .errors import DatasetIOError, ParseError, ValidationError
from .geometry import (
    IGNORE_CLASS_ID,
    Annotation,
    BoundingBox,
    Detection,
    Modality,
    NormalizedBox,
    from_normalized,
    to_normalized,
)
from .ingest import IMAGE_EXTENSIONS, read_yolo_label_file

UNIT = 1.0


def parse_detection_text(text: str, modality: Modality = Modality.RGB) -> list[Detection]:
    out = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        fields = line.split()
        if not fields:
            continue
        if len(fields) != 6:
            raise ParseError(f"expected 6 fields, got {len(fields)}", lineno)
        try:
            cls_f = float(fields[0])
            conf = float(fields[1])
            vals = [float(v) for v in fields[2:]]
        except ValueError as exc:
            raise ParseError(f"non-numeric field ({exc})", lineno) from None
        if cls_f != int(cls_f) or cls_f < 0:
            raise ParseError(f"invalid class id {fields[0]!r}", lineno)
        try:
            box = from_normalized(NormalizedBox(*vals), UNIT, UNIT)
            out.append(Detection(int(cls_f), box, conf, modality))
        except ValidationError as exc:
            raise ValidationError(f"line {lineno}: {exc}") from None
    return out


def format_detections(dets: Iterable) -> str:
    """Render detections (or fused detections) living in the unit frame."""
    lines = []
    for d in dets:
        nb = to_normalized(d.box, UNIT, UNIT)
        lines.append(
            f"{d.class_id} {d.confidence:.6f} {nb.cx:.6f} {nb.cy:.6f} {nb.w:.6f} {nb.h:.6f}\n"
        )
    return "".join(lines)


def read_detection_dir(path: str | Path, modality: Modality = Modality.RGB) -> dict[str, list[Detection]]:
    path = Path(path)
    if not path.is_dir():
        raise DatasetIOError(f"detection directory {path} not found")
    out = {}
    for f in sorted(path.glob("*.txt")):
        try:
            out[f.stem] = parse_detection_text(f.read_text(encoding="utf-8"), modality)
        except (ParseError, ValidationError) as exc:
            raise type(exc)(f"{f.name}: {exc}") from None
    return out


def parse_detection_json(text: str, modality: Modality = Modality.RGB) -> dict[str, list[Detection]]:
    """Read the JSON detection variant with absolute corner boxes.

    Shape: ``{"frames": [{"frame_id", "width", "height", "detections":
    [{"class_id", "confidence", "bbox": [x1, y1, x2, y2]}]}]}``. Boxes are
    divided by the frame size so they share the unit frame of text files.
    """
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"malformed JSON: {exc.msg}", exc.lineno) from None
    out: dict[str, list[Detection]] = {}
    try:
        for frame in data["frames"]:
            fid = str(frame["frame_id"])
            if fid in out:
                raise ValidationError(f"duplicate frame id {fid!r}")
            w, h = float(frame["width"]), float(frame["height"])
            if w <= 0 or h <= 0:
                raise ValidationError(f"frame {fid}: non-positive size")
            dets = []
            for d in frame.get("detections", []):
                x0, y0, x1, y1 = (float(v) for v in d["bbox"])
                box = BoundingBox(min(x0 / w, 1.0), min(y0 / h, 1.0), min(x1 / w, 1.0), min(y1 / h, 1.0))
                dets.append(Detection(int(d["class_id"]), box, float(d["confidence"]), modality))
            out[fid] = dets
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ValidationError):
            raise
        raise ParseError(f"malformed detection JSON ({type(exc).__name__}: {exc})") from None
    return out


def read_detections(path: str | Path, modality: Modality = Modality.RGB) -> dict[str, list[Detection]]:
    path = Path(path)
    if path.is_file() and path.suffix.lower() == ".json":
        return parse_detection_json(path.read_text(encoding="utf-8"), modality)
    return read_detection_dir(path, modality)


def write_detection_dir(path: str | Path, frames: Mapping[str, Sequence]) -> None:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    for fid in sorted(frames):
        (path / f"{fid}.txt").write_text(format_detections(frames[fid]), encoding="utf-8")


def read_classes(root: str | Path) -> tuple[str, ...]:
    path = Path(root) / "classes.txt"
    if not path.is_file():
        raise DatasetIOError(f"{path} not found")
    return tuple(line.strip() for line in path.read_text(encoding="utf-8").splitlines() if line.strip())


def split_frames(root: str | Path, split: str) -> list[str]:
    img_dir = Path(root) / "images" / split
    if not img_dir.is_dir():
        raise DatasetIOError(f"{img_dir} not found")
    return sorted(p.stem for p in img_dir.iterdir() if p.suffix.lower() in IMAGE_EXTENSIONS)


def list_splits(root: str | Path) -> list[str]:
    img_root = Path(root) / "images"
    if not img_root.is_dir():
        raise DatasetIOError(f"{img_root} not found")
    return sorted(p.name for p in img_root.iterdir() if p.is_dir())


def read_ground_truth(root: str | Path, split: str) -> dict[str, list[Annotation]]:
    """Load one split of a YOLO tree as unit-frame annotations, ignore regions included."""
    root = Path(root)
    out: dict[str, list[Annotation]] = {}
    for fid in split_frames(root, split):
        annos = []
        for sub, allow_ignore in (("labels", False), ("ignore", True)):
            f = root / sub / split / f"{fid}.txt"
            if not f.is_file():
                continue
            try:
                rows = read_yolo_label_file(f.read_text(encoding="utf-8"), allow_ignore=allow_ignore)
            except (ParseError, ValidationError) as exc:
                raise type(exc)(f"{f.name}: {exc}") from None
            for cls, nb in rows:
                ignore = cls == IGNORE_CLASS_ID
                annos.append(Annotation(cls, from_normalized(nb, UNIT, UNIT), ignore, None, fid))
        out[fid] = annos
    return out
