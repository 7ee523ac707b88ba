"""Box types, coordinate conversions, IoU and greedy NMS.

Corner boxes are half-open pixel rectangles, so a box's area is simply
``(x_max - x_min) * (y_max - y_min)``. Normalized boxes follow the YOLO label
convention (center x/y, width, height as fractions of the image size).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Iterable, Sequence, TypeVar

from .errors import ValidationError

EDGE_EPS = 1e-6


class Modality(str, enum.Enum):
    RGB = "rgb"
    THERMAL = "thermal"


@dataclass(frozen=True, order=True)
class BoundingBox:
    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self) -> None:
        coords = (self.x_min, self.y_min, self.x_max, self.y_max)
        if not all(math.isfinite(c) for c in coords):
            raise ValidationError(f"non-finite box coordinates {coords}")
        if min(coords) < 0:
            raise ValidationError(f"negative box coordinates {coords}")
        if self.x_max < self.x_min or self.y_max < self.y_min:
            raise ValidationError(f"inverted box {coords}")

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def height(self) -> float:
        return self.y_max - self.y_min

    @property
    def area(self) -> float:
        return self.width * self.height

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.x_min, self.y_min, self.x_max, self.y_max)


@dataclass(frozen=True)
class NormalizedBox:
    """YOLO-style box; edges poking outside the unit square are clamped."""

    cx: float
    cy: float
    w: float
    h: float

    def __post_init__(self) -> None:
        vals = (self.cx, self.cy, self.w, self.h)
        if not all(math.isfinite(v) for v in vals):
            raise ValidationError(f"non-finite normalized box {vals}")
        cx, w = _clamp_span(self.cx, self.w)
        cy, h = _clamp_span(self.cy, self.h)
        if w <= 0 or h <= 0:
            raise ValidationError(f"normalized box has no area: {vals}")
        object.__setattr__(self, "cx", cx)
        object.__setattr__(self, "cy", cy)
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "h", h)

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.cx, self.cy, self.w, self.h)


def _clamp_span(center: float, size: float) -> tuple[float, float]:
    lo = center - size / 2.0
    hi = center + size / 2.0
    if lo >= 0.0 and hi <= 1.0:
        return center, size
    lo = min(max(lo, 0.0), 1.0)
    hi = min(max(hi, 0.0), 1.0)
    return (lo + hi) / 2.0, hi - lo


@dataclass(frozen=True)
class Detection:
    class_id: int
    box: BoundingBox
    confidence: float
    modality: Modality = Modality.RGB

    def __post_init__(self) -> None:
        if not (0.0 <= self.confidence <= 1.0):
            raise ValidationError(f"confidence {self.confidence} outside [0, 1]")
        if self.class_id < 0:
            raise ValidationError(f"negative class id {self.class_id}")


IGNORE_CLASS_ID = -1


@dataclass(frozen=True)
class Annotation:
    """Ground-truth object after label mapping.

    Ignore regions carry ``ignore=True`` and ``class_id == IGNORE_CLASS_ID``;
    they suppress penalties for any class during evaluation.
    """

    class_id: int
    box: BoundingBox
    ignore: bool = False
    source_dataset: str | None = None
    frame_id: str = ""


def iou(a: BoundingBox, b: BoundingBox) -> float:
    iw = min(a.x_max, b.x_max) - max(a.x_min, b.x_min)
    ih = min(a.y_max, b.y_max) - max(a.y_min, b.y_min)
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    union = a.area + b.area - inter
    if union <= 0:
        return 0.0
    return min(1.0, inter / union)


def _check_dims(img_w: float, img_h: float) -> None:
    if not (img_w > 0 and img_h > 0):
        raise ValidationError(f"image dimensions must be positive, got {img_w}x{img_h}")


def to_normalized(box: BoundingBox, img_w: float, img_h: float) -> NormalizedBox:
    _check_dims(img_w, img_h)
    x0 = min(box.x_min / img_w, 1.0)
    x1 = min(box.x_max / img_w, 1.0)
    y0 = min(box.y_min / img_h, 1.0)
    y1 = min(box.y_max / img_h, 1.0)
    return NormalizedBox((x0 + x1) / 2.0, (y0 + y1) / 2.0, x1 - x0, y1 - y0)


def from_normalized(nbox: NormalizedBox, img_w: float, img_h: float) -> BoundingBox:
    _check_dims(img_w, img_h)
    x0 = max(0.0, (nbox.cx - nbox.w / 2.0) * img_w)
    x1 = min(float(img_w), (nbox.cx + nbox.w / 2.0) * img_w)
    y0 = max(0.0, (nbox.cy - nbox.h / 2.0) * img_h)
    y1 = min(float(img_h), (nbox.cy + nbox.h / 2.0) * img_h)
    return BoundingBox(x0, y0, max(x0, x1), max(y0, y1))


D = TypeVar("D")


def score_order_key(det) -> tuple:
    """Sort key: descending confidence, then class and box corners."""
    b = det.box
    return (-det.confidence, det.class_id, b.x_min, b.y_min, b.x_max, b.y_max)


def nms(dets: Iterable[D], iou_threshold: float, class_aware: bool = True) -> list[D]:
    """Greedy non-maximum suppression.

    Works on anything exposing ``class_id``, ``box`` and ``confidence``.
    Survivors come back sorted by :func:`score_order_key`, which makes the
    result independent of input order.
    """
    if not (0.0 < iou_threshold < 1.0):
        raise ValidationError(f"iou_threshold must be in (0, 1), got {iou_threshold}")
    ordered: Sequence[D] = sorted(dets, key=score_order_key)
    kept: list[D] = []
    for det in ordered:
        suppressed = False
        for k in kept:
            if class_aware and k.class_id != det.class_id:
                continue
            if iou(k.box, det.box) > iou_threshold:
                suppressed = True
                break
        if not suppressed:
            kept.append(det)
    return kept
