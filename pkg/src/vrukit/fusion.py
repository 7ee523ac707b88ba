"""Late fusion of per-frame RGB and thermal detections.

Each modality's detector runs on its own; fusion pairs same-class boxes
across modalities, blends the confidences of each pair with fixed weights,
discounts unpaired detections, and cleans up with class-aware NMS. The two
image planes must already be registered to shared coordinates.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Sequence

from .errors import ConfigError, ValidationError
from .geometry import BoundingBox, Detection, Modality, iou, nms, score_order_key


class Support(str, enum.Enum):
    RGB_ONLY = "rgb_only"
    TIR_ONLY = "tir_only"
    BOTH = "both"


class BoxMode(str, enum.Enum):
    WEIGHTED = "weighted"
    KEEP_BEST = "keep_best"


@dataclass(frozen=True)
class FusionConfig:
    w_rgb: float = 0.5
    w_tir: float = 0.5
    iou_match_threshold: float = 0.55
    unmatched_penalty_rgb: float = 1.0
    unmatched_penalty_tir: float = 1.0
    final_nms_iou: float = 0.65
    confidence_floor: float = 0.05
    box_mode: BoxMode = BoxMode.WEIGHTED

    def __post_init__(self) -> None:
        if self.w_rgb < 0 or self.w_tir < 0:
            raise ConfigError("modality weights must be non-negative")
        if self.w_rgb + self.w_tir <= 0:
            raise ConfigError("at least one modality weight must be positive")
        if not (0 < self.iou_match_threshold < 1):
            raise ConfigError("iou_match_threshold must be in (0, 1)")
        for name in ("unmatched_penalty_rgb", "unmatched_penalty_tir"):
            if not (0 < getattr(self, name) <= 1):
                raise ConfigError(f"{name} must be in (0, 1]")
        if not (0 < self.final_nms_iou < 1):
            raise ConfigError("final_nms_iou must be in (0, 1)")
        if not (0 <= self.confidence_floor < 1):
            raise ConfigError("confidence_floor must be in [0, 1)")
        object.__setattr__(self, "box_mode", BoxMode(self.box_mode))

    def swapped(self) -> "FusionConfig":
        """The same config with the roles of the two modalities exchanged."""
        return replace(
            self,
            w_rgb=self.w_tir,
            w_tir=self.w_rgb,
            unmatched_penalty_rgb=self.unmatched_penalty_tir,
            unmatched_penalty_tir=self.unmatched_penalty_rgb,
        )

    @classmethod
    def from_dict(cls, data: Mapping) -> "FusionConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown fusion config keys {sorted(unknown)}")
        try:
            return cls(**data)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad fusion config: {exc}") from None

    @classmethod
    def load(cls, path: str | Path) -> "FusionConfig":
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"fusion config {path}: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError("fusion config must be a JSON object")
        return cls.from_dict(data)


@dataclass(frozen=True)
class FusedDetection:
    class_id: int
    box: BoundingBox
    confidence: float
    support: Support
    rgb_confidence: float | None = None
    tir_confidence: float | None = None

    def __post_init__(self) -> None:
        if self.support is Support.BOTH and (self.rgb_confidence is None or self.tir_confidence is None):
            raise ValidationError("a BOTH-supported detection needs both source confidences")


@dataclass
class AuditEntry:
    modality: str
    index: int
    outcome: str
    candidate: int
    partner: int | None = None


@dataclass
class FusionResult:
    detections: list[FusedDetection]
    candidates: list[FusedDetection]
    audit: list[AuditEntry] = field(default_factory=list)


def _blend_box(a: BoundingBox, wa: float, b: BoundingBox, wb: float) -> BoundingBox:
    s = wa + wb
    if s <= 0:
        wa = wb = s = 1.0
    coords = [(wa * p + wb * q) / s for p, q in zip(a.as_tuple(), b.as_tuple())]
    x0, y0, x1, y1 = coords
    return BoundingBox(x0, y0, max(x0, x1), max(y0, y1))


def _match_pairs(rgb: Sequence[Detection], tir: Sequence[Detection], thr: float) -> list[tuple[int, int]]:
    candidates = []
    for i, r in enumerate(rgb):
        for j, t in enumerate(tir):
            if r.class_id != t.class_id:
                continue
            v = iou(r.box, t.box)
            if v >= thr:
                kr, kt = score_order_key(r), score_order_key(t)
                candidates.append((-v, min(kr, kt), max(kr, kt), i, j))
    candidates.sort(key=lambda c: c[:3])
    used_r: set[int] = set()
    used_t: set[int] = set()
    pairs = []
    for _, _, _, i, j in candidates:
        if i in used_r or j in used_t:
            continue
        used_r.add(i)
        used_t.add(j)
        pairs.append((i, j))
    return pairs


def fuse_frame_with_audit(
    dets_rgb: Iterable[Detection], dets_tir: Iterable[Detection], cfg: FusionConfig
) -> FusionResult:
    """Fuse one frame and record what happened to every input detection.

    Audit indices refer to each input list after sorting it by descending
    confidence (the order :func:`vrukit.geometry.score_order_key` defines).
    """
    rgb = sorted(dets_rgb, key=score_order_key)
    tir = sorted(dets_tir, key=score_order_key)
    w_sum = cfg.w_rgb + cfg.w_tir

    candidates: list[FusedDetection] = []
    owners: list[list[tuple[str, int]]] = []
    matched_r: set[int] = set()
    matched_t: set[int] = set()
    for i, j in _match_pairs(rgb, tir, cfg.iou_match_threshold):
        r, t = rgb[i], tir[j]
        conf = (cfg.w_rgb * r.confidence + cfg.w_tir * t.confidence) / w_sum
        conf = min(max(conf, min(r.confidence, t.confidence)), max(r.confidence, t.confidence))
        if cfg.box_mode is BoxMode.WEIGHTED:
            box = _blend_box(r.box, cfg.w_rgb * r.confidence, t.box, cfg.w_tir * t.confidence)
        else:
            br, bt = cfg.w_rgb * r.confidence, cfg.w_tir * t.confidence
            if br != bt:
                box = r.box if br > bt else t.box
            else:
                box = min(r.box, t.box)
        candidates.append(FusedDetection(r.class_id, box, conf, Support.BOTH, r.confidence, t.confidence))
        owners.append([("rgb", i), ("tir", j)])
        matched_r.add(i)
        matched_t.add(j)
    for i, r in enumerate(rgb):
        if i not in matched_r:
            c = r.confidence * cfg.unmatched_penalty_rgb
            candidates.append(FusedDetection(r.class_id, r.box, c, Support.RGB_ONLY, r.confidence, None))
            owners.append([("rgb", i)])
    for j, t in enumerate(tir):
        if j not in matched_t:
            c = t.confidence * cfg.unmatched_penalty_tir
            candidates.append(FusedDetection(t.class_id, t.box, c, Support.TIR_ONLY, None, t.confidence))
            owners.append([("tir", j)])

    above = [k for k, c in enumerate(candidates) if c.confidence >= cfg.confidence_floor]
    survivors = nms([candidates[k] for k in above], cfg.final_nms_iou, class_aware=True)
    kept_ids = {id(s) for s in survivors}

    audit: list[AuditEntry] = []
    for k, cand in enumerate(candidates):
        if cand.confidence < cfg.confidence_floor:
            outcome = "floor_dropped"
        elif id(cand) in kept_ids:
            outcome = "fused" if cand.support is Support.BOTH else "kept"
        else:
            outcome = "nms_suppressed"
        own = owners[k]
        for n, (mod, idx) in enumerate(own):
            partner = own[1 - n][1] if len(own) == 2 else None
            audit.append(AuditEntry(mod, idx, outcome, k, partner))
    audit.sort(key=lambda e: (e.modality, e.index))
    return FusionResult(survivors, candidates, audit)


def fuse_frame(
    dets_rgb: Iterable[Detection], dets_tir: Iterable[Detection], cfg: FusionConfig
) -> list[FusedDetection]:
    return fuse_frame_with_audit(dets_rgb, dets_tir, cfg).detections


def fuse_stream(
    frames: Iterable[tuple[str, Sequence[Detection] | None, Sequence[Detection] | None]],
    cfg: FusionConfig,
) -> Iterator[tuple[str, list[FusedDetection]]]:
    """Fuse a sequence of ``(frame_id, rgb_dets, tir_dets)`` in input order.

    A missing modality (``None``) is treated as an empty list. Repeated frame
    ids are rejected.
    """
    seen: set[str] = set()
    for frame_id, rgb, tir in frames:
        if frame_id in seen:
            raise ValidationError(f"duplicate frame id {frame_id!r} in fusion stream")
        seen.add(frame_id)
        yield frame_id, fuse_frame(rgb or (), tir or (), cfg)


def pair_streams(
    rgb: Mapping[str, Sequence[Detection]], tir: Mapping[str, Sequence[Detection]]
) -> list[tuple[str, Sequence[Detection] | None, Sequence[Detection] | None]]:
    """Join two per-frame detection maps on frame id (sorted)."""
    return [(fid, rgb.get(fid), tir.get(fid)) for fid in sorted(set(rgb) | set(tir))]


def to_detection(f: FusedDetection, modality: Modality = Modality.RGB) -> Detection:
    return Detection(f.class_id, f.box, f.confidence, modality)
