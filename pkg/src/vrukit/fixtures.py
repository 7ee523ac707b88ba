"""Synthetic mini-corpus used by the end-to-end tests.

Writes 30 frames split across the three source formats (10 KITTI, 10 BDD100K,
10 FLIR thermal) plus detection files for scoring and fusion::

    dst/kitti/image_2, dst/kitti/label_2
    dst/bdd100k/images, dst/bdd100k/labels/det_val.json
    dst/flir/data, dst/flir/coco.json
    dst/dets/rgb         # detections for the BDD100K frames
    dst/dets/flir_rgb    # paired RGB detections for the FLIR frames
    dst/dets/thermal     # thermal detections for the FLIR frames

Everything derives from ``seed``; the same seed gives byte-identical files.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
from PIL import Image

from .geometry import BoundingBox, to_normalized
from .ingest import SourceDataset
from .labels import IGNORE, UNIFIED_CLASSES, default_label_map

KITTI_SIZE = (160, 48)
BDD_SIZE = (128, 72)
FLIR_SIZE = (128, 96)

KITTI_CLASSES = ("Car", "Van", "Pedestrian", "Person_sitting", "Cyclist", "Truck", "Tram", "Misc", "DontCare")
BDD_CLASSES = ("car", "person", "rider", "bike", "bus", "truck", "motor", "train", "traffic sign", "traffic light")
FLIR_CLASSES = (
    "person", "people", "stroller", "bike", "car", "bus", "truck", "dog", "motor",
    "scooter", "train", "other vehicle", "skateboard", "light", "hydrant", "sign",
)


def _image(rng: np.random.Generator, size: tuple[int, int], gray: bool = False) -> Image.Image:
    w, h = size
    base = np.linspace(40, 200, w)[None, :, None] + rng.normal(0, 12, (h, w, 1 if gray else 3))
    arr = np.clip(np.rint(np.broadcast_to(base, (h, w, 1 if gray else 3))), 0, 255).astype(np.uint8)
    return Image.fromarray(arr[..., 0] if gray else arr)


def _box(rng: np.random.Generator, size: tuple[int, int]) -> tuple[float, float, float, float]:
    w, h = size
    bw = int(rng.integers(6, w // 3))
    bh = int(rng.integers(6, h // 2))
    x0 = int(rng.integers(0, w - bw))
    y0 = int(rng.integers(0, h - bh))
    return float(x0), float(y0), float(x0 + bw), float(y0 + bh)


def _jitter(rng, box, size, scale=1.5):
    w, h = size
    x0, y0, x1, y1 = (v + rng.normal(0, scale) for v in box)
    x0, x1 = sorted((min(max(x0, 0), w), min(max(x1, 0), w)))
    y0, y1 = sorted((min(max(y0, 0), h), min(max(y1, 0), h)))
    if x1 - x0 < 1 or y1 - y0 < 1:
        return box
    return x0, y0, x1, y1


def _det_line(class_id: int, conf: float, box, size) -> str:
    nb = to_normalized(BoundingBox(*box), *size)
    return f"{class_id} {conf:.6f} {nb.cx:.6f} {nb.cy:.6f} {nb.w:.6f} {nb.h:.6f}\n"


def _detections(rng, objects, size, n_classes, miss=0.15, false_pos=1) -> str:
    """Noisy detector output for ``objects`` = [(unified class id, box)]."""
    lines = []
    for cls, box in objects:
        if rng.random() < miss:
            continue
        lines.append(_det_line(cls, float(rng.uniform(0.3, 0.99)), _jitter(rng, box, size), size))
    for _ in range(int(rng.integers(0, false_pos + 1))):
        lines.append(_det_line(int(rng.integers(0, n_classes)), float(rng.uniform(0.05, 0.6)), _box(rng, size), size))
    return "".join(lines)


def make_fixtures(dst: str | Path, seed: int = 0) -> dict:
    dst = Path(dst)
    rng = np.random.default_rng(seed)
    lmap = default_label_map()

    def unified(ds: SourceDataset, name: str) -> int | None:
        target = lmap.lookup(ds, name)
        return None if target == IGNORE else UNIFIED_CLASSES.index(target)

    # KITTI
    img_dir, lbl_dir = dst / "kitti" / "image_2", dst / "kitti" / "label_2"
    img_dir.mkdir(parents=True)
    lbl_dir.mkdir(parents=True)
    for i in range(10):
        stem = f"{i:06d}"
        _image(rng, KITTI_SIZE).save(img_dir / f"{stem}.png")
        lines = []
        for k in range(int(rng.integers(1, 5))):
            cls = KITTI_CLASSES[(i + 3 * k) % len(KITTI_CLASSES)]
            x0, y0, x1, y1 = _box(rng, KITTI_SIZE)
            trunc, occ = (-1, -1) if cls == "DontCare" else (round(float(rng.uniform(0, 0.5)), 2), int(rng.integers(0, 3)))
            lines.append(
                f"{cls} {trunc:.2f} {occ} -10 {x0:.2f} {y0:.2f} {x1:.2f} {y1:.2f} "
                f"1.50 1.60 3.90 1.00 1.00 10.00 0.00\n"
            )
        (lbl_dir / f"{stem}.txt").write_text("".join(lines), encoding="utf-8")

    # BDD100K
    img_dir = dst / "bdd100k" / "images"
    img_dir.mkdir(parents=True)
    (dst / "bdd100k" / "labels").mkdir()
    rgb_dets = dst / "dets" / "rgb"
    rgb_dets.mkdir(parents=True)
    frames = []
    for i in range(10):
        name = f"b{seed:02d}c{i:02d}-0a1b2c3d.jpg"
        _image(rng, BDD_SIZE).save(img_dir / name, quality=90)
        labels, objects = [], []
        for k in range(int(rng.integers(1, 6))):
            cls = BDD_CLASSES[(2 * i + k) % len(BDD_CLASSES)]
            x0, y0, x1, y1 = _box(rng, BDD_SIZE)
            labels.append({"category": cls, "id": 100 * i + k, "box2d": {"x1": x0, "y1": y0, "x2": x1, "y2": y1}})
            uid = unified(SourceDataset.BDD100K, cls)
            if uid is not None:
                objects.append((uid, (x0, y0, x1, y1)))
        if i % 3 == 0:
            labels.append({"category": "lane", "id": 100 * i + 50, "poly2d": [{"vertices": [[0, 70], [60, 40]]}]})
        if i % 4 == 1:
            labels.append({"category": "drivable area", "id": 100 * i + 51, "poly2d": [{"vertices": [[0, 70], [120, 70]]}]})
        frames.append({"name": name, "attributes": {"weather": "clear"}, "labels": labels})
        (rgb_dets / f"{Path(name).stem}.txt").write_text(
            _detections(rng, objects, BDD_SIZE, len(UNIFIED_CLASSES)), encoding="utf-8"
        )
    (dst / "bdd100k" / "labels" / "det_val.json").write_text(json.dumps(frames, indent=1), encoding="utf-8")

    # FLIR (thermal), COCO-style; the last frame has no objects
    img_dir = dst / "flir" / "data"
    img_dir.mkdir(parents=True)
    tir_dets, pair_dets = dst / "dets" / "thermal", dst / "dets" / "flir_rgb"
    tir_dets.mkdir(parents=True)
    pair_dets.mkdir(parents=True)
    categories = [{"id": n + 1, "name": c, "supercategory": "unknown"} for n, c in enumerate(FLIR_CLASSES)]
    images, annotations = [], []
    for i in range(10):
        fname = f"data/video-{seed:02d}-frame-{i:06d}.jpg"
        _image(rng, FLIR_SIZE, gray=True).save(dst / "flir" / fname, quality=90)
        images.append({"id": i, "file_name": fname, "width": FLIR_SIZE[0], "height": FLIR_SIZE[1]})
        objects = []
        n_obj = 0 if i == 9 else int(rng.integers(1, 5))
        for k in range(n_obj):
            cat = (3 * i + k) % len(FLIR_CLASSES)
            x0, y0, x1, y1 = _box(rng, FLIR_SIZE)
            annotations.append(
                {"id": len(annotations) + 1, "image_id": i, "category_id": cat + 1,
                 "bbox": [x0, y0, x1 - x0, y1 - y0], "area": (x1 - x0) * (y1 - y0), "iscrowd": 0}
            )
            uid = unified(SourceDataset.FLIR, FLIR_CLASSES[cat])
            if uid is not None:
                objects.append((uid, (x0, y0, x1, y1)))
        stem = Path(fname).stem
        (tir_dets / f"{stem}.txt").write_text(
            _detections(rng, objects, FLIR_SIZE, len(UNIFIED_CLASSES), miss=0.1), encoding="utf-8"
        )
        (pair_dets / f"{stem}.txt").write_text(
            _detections(rng, objects, FLIR_SIZE, len(UNIFIED_CLASSES), miss=0.3), encoding="utf-8"
        )
    coco = {"info": {"description": "synthetic"}, "images": images, "annotations": annotations, "categories": categories}
    (dst / "flir" / "coco.json").write_text(json.dumps(coco, indent=1), encoding="utf-8")

    return {"frames": 30, "kitti": 10, "bdd100k": 10, "flir": 10}
