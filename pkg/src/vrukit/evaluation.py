"""Detection scoring: greedy matching, 101-point AP, mAP50 and mAP50:95.

Detections sharing a confidence value are scored as one block: the
precision/recall curve only has points at distinct confidence thresholds, so
the result does not depend on the order tied detections arrive in.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import AlignmentError, ValidationError
from .geometry import Annotation, Detection, iou, score_order_key
from .stats import render_table

RECALL_POINTS = tuple(i / 100 for i in range(101))
COCO_IOU_THRESHOLDS = tuple(round(0.5 + 0.05 * i, 2) for i in range(10))

TP, FP, IGNORED = "tp", "fp", "ignored"


@dataclass
class MatchResult:
    """Outcome of matching one frame's detections of one class."""

    scores: list[float]
    statuses: list[str]
    n_gt: int

    @property
    def tp(self) -> int:
        return self.statuses.count(TP)

    @property
    def fp(self) -> int:
        return self.statuses.count(FP)

    @property
    def fn(self) -> int:
        return self.n_gt - self.tp


def _gt_key(a: Annotation) -> tuple:
    return (a.box.x_min, a.box.y_min, a.box.x_max, a.box.y_max)


def _iou_matrix(dets: Sequence[Detection], gts: Sequence[Annotation]) -> np.ndarray:
    m = np.zeros((len(dets), len(gts)))
    for i, d in enumerate(dets):
        for j, g in enumerate(gts):
            m[i, j] = iou(d.box, g.box)
    return m


def _greedy(ious: np.ndarray, is_ignore: np.ndarray, thr: float) -> list[str]:
    n_det = ious.shape[0]
    taken = is_ignore.copy()
    statuses = []
    for i in range(n_det):
        row = np.where(taken, -1.0, ious[i])
        j = int(np.argmax(row)) if row.size else -1
        if j >= 0 and row[j] >= thr:
            taken[j] = True
            statuses.append(TP)
        elif np.any(is_ignore & (ious[i] >= thr)):
            statuses.append(IGNORED)
        else:
            statuses.append(FP)
    return statuses


def match_detections(
    dets: Iterable[Detection], gts: Iterable[Annotation], iou_threshold: float
) -> MatchResult:
    """Greedily match one frame's detections of a single class.

    ``gts`` holds that class's objects plus any ignore regions. Detections
    are taken in descending confidence; each claims the best remaining
    object at IoU >= threshold, otherwise it is dropped from scoring if it
    overlaps an ignore region that much, otherwise it is a false positive.
    """
    dets = sorted(dets, key=score_order_key)
    gts = sorted(gts, key=lambda a: (a.ignore, _gt_key(a)))
    is_ignore = np.array([g.ignore for g in gts], dtype=bool)
    statuses = _greedy(_iou_matrix(dets, gts), is_ignore, iou_threshold)
    return MatchResult([d.confidence for d in dets], statuses, int((~is_ignore).sum()))


def _pr_points(scores: np.ndarray, tp: np.ndarray, n_gt: int):
    """Cumulative TP/FP at the end of each block of equal confidence."""
    order = np.argsort(-scores, kind="stable")
    s = scores[order]
    t = tp[order]
    ctp = np.cumsum(t)
    cfp = np.cumsum(~t)
    ends = np.flatnonzero(np.append(s[1:] != s[:-1], True)) if s.size else np.array([], dtype=int)
    return s[ends], ctp[ends], cfp[ends]


def _interpolated_precision(scores: np.ndarray, tp: np.ndarray, n_gt: int) -> np.ndarray:
    _, ctp, cfp = _pr_points(scores, tp, n_gt)
    out = np.zeros(len(RECALL_POINTS))
    if ctp.size == 0:
        return out
    recall = ctp / n_gt
    precision = ctp / (ctp + cfp)
    envelope = np.maximum.accumulate(precision[::-1])[::-1]
    idx = np.searchsorted(recall, np.asarray(RECALL_POINTS), side="left")
    valid = idx < recall.size
    out[valid] = envelope[idx[valid]]
    return out


def _scored(matches: Iterable[MatchResult]) -> tuple[np.ndarray, np.ndarray, int]:
    scores: list[float] = []
    flags: list[bool] = []
    n_gt = 0
    for m in matches:
        n_gt += m.n_gt
        for s, st in zip(m.scores, m.statuses):
            if st != IGNORED:
                scores.append(s)
                flags.append(st == TP)
    return np.asarray(scores, dtype=np.float64), np.asarray(flags, dtype=bool), n_gt


def average_precision(matches: Iterable[MatchResult]) -> float | None:
    """101-point interpolated AP over a class's matches; None without ground truth."""
    scores, flags, n_gt = _scored(matches)
    if n_gt == 0:
        return None
    return float(_interpolated_precision(scores, flags, n_gt).mean())


@dataclass
class EvalConfig:
    class_names: tuple[str, ...]
    iou_thresholds: tuple[float, ...] = COCO_IOU_THRESHOLDS
    primary_iou: float = 0.5

    def __post_init__(self) -> None:
        if not self.class_names:
            raise ValidationError("evaluation needs at least one class")
        if not self.iou_thresholds or any(not (0 < t <= 1) for t in self.iou_thresholds):
            raise ValidationError(f"invalid IoU thresholds {self.iou_thresholds}")


@dataclass
class ClassCounts:
    tp: int
    fp: int
    fn: int


@dataclass
class EvalReport:
    class_names: tuple[str, ...]
    ap50: dict[str, float | None]
    ap50_95: dict[str, float | None]
    map50: float
    map50_95: float
    precision: float
    recall: float
    f1: float
    confidence_threshold: float | None
    precision_defined: bool
    counts: dict[str, ClassCounts]
    n_gt: dict[str, int]
    pr_curves: dict[str, list[float]] = field(default_factory=dict)
    iou_thresholds: tuple[float, ...] = COCO_IOU_THRESHOLDS

    def to_dict(self) -> dict:
        return {
            "iou_thresholds": list(self.iou_thresholds),
            "mAP50": self.map50,
            "mAP50_95": self.map50_95,
            "precision": self.precision,
            "precision_defined": self.precision_defined,
            "recall": self.recall,
            "f1": self.f1,
            "confidence_threshold": self.confidence_threshold,
            "classes": {
                name: {
                    "ap50": self.ap50[name],
                    "ap50_95": self.ap50_95[name],
                    "n_gt": self.n_gt[name],
                    "tp": self.counts[name].tp,
                    "fp": self.counts[name].fp,
                    "fn": self.counts[name].fn,
                    "pr_curve": self.pr_curves.get(name, []),
                }
                for name in self.class_names
            },
        }

    def to_text(self) -> str:
        def f(v: float | None) -> str:
            return "-" if v is None else f"{v:.3f}"

        rows = [
            (name, self.n_gt[name], f(self.ap50[name]), f(self.ap50_95[name]))
            for name in self.class_names
        ]
        per_class = render_table(["class", "gt", "AP50", "AP50:95"], rows)
        summary = render_table(
            ["model", "precision", "recall", "mAP50", "mAP50:95"],
            [("all", f(self.precision), f(self.recall), f(self.map50), f(self.map50_95))],
        )
        return summary + "\n" + per_class


def _best_f1(scores: np.ndarray, flags: np.ndarray, n_gt: int):
    """Threshold maximizing F1; ties go to the highest confidence."""
    thresholds, ctp, cfp = _pr_points(scores, flags, n_gt)
    if thresholds.size == 0:
        return None, 0.0, 0.0, 0.0
    precision = ctp / (ctp + cfp)
    recall = ctp / n_gt if n_gt else np.zeros_like(precision)
    # one rounded division, so equal F1 values compare equal
    f1 = 2 * ctp / (ctp + cfp + n_gt)
    k = int(np.argmax(f1))
    return float(thresholds[k]), float(precision[k]), float(recall[k]), float(f1[k])


def evaluate(
    dets_by_frame: Mapping[str, Sequence[Detection]],
    gts_by_frame: Mapping[str, Sequence[Annotation]],
    config: EvalConfig,
) -> EvalReport:
    """Score detections against ground truth frame by frame.

    Every detection frame must exist in the ground truth; ground-truth frames
    without detections count as frames where nothing was detected.
    """
    extra = sorted(set(dets_by_frame) - set(gts_by_frame))
    if extra:
        raise AlignmentError(f"detections for frames missing from ground truth: {extra[:10]}", extra)
    n_cls = len(config.class_names)
    thresholds = tuple(config.iou_thresholds)
    if config.primary_iou not in thresholds:
        thresholds = (config.primary_iou, *thresholds)
    primary = thresholds.index(config.primary_iou)

    per_class: list[list[list[MatchResult]]] = [[[] for _ in thresholds] for _ in range(n_cls)]
    for frame_id in sorted(gts_by_frame):
        gts = gts_by_frame[frame_id]
        dets = dets_by_frame.get(frame_id, ())
        for a in gts:
            if not a.ignore and not (0 <= a.class_id < n_cls):
                raise ValidationError(f"frame {frame_id}: ground-truth class {a.class_id} out of range")
        for d in dets:
            if not (0 <= d.class_id < n_cls):
                raise ValidationError(f"frame {frame_id}: detection class {d.class_id} out of range")
        ignores = [a for a in gts if a.ignore]
        for c in range(n_cls):
            c_dets = sorted((d for d in dets if d.class_id == c), key=score_order_key)
            c_gts = sorted((a for a in gts if not a.ignore and a.class_id == c), key=_gt_key)
            c_gts += sorted(ignores, key=_gt_key)
            if not c_dets and not c_gts:
                continue
            is_ignore = np.array([g.ignore for g in c_gts], dtype=bool)
            ious = _iou_matrix(c_dets, c_gts)
            scores = [d.confidence for d in c_dets]
            n_gt = int((~is_ignore).sum())
            for t_i, thr in enumerate(thresholds):
                per_class[c][t_i].append(MatchResult(scores, _greedy(ious, is_ignore, thr), n_gt))

    ap50: dict[str, float | None] = {}
    ap_mean: dict[str, float | None] = {}
    pr_curves: dict[str, list[float]] = {}
    n_gt_by_class: dict[str, int] = {}
    for c, name in enumerate(config.class_names):
        scores, flags, n_gt = _scored(per_class[c][primary])
        n_gt_by_class[name] = n_gt
        if n_gt == 0:
            ap50[name] = None
            ap_mean[name] = None
            pr_curves[name] = []
            continue
        curve = _interpolated_precision(scores, flags, n_gt)
        pr_curves[name] = [float(v) for v in curve]
        ap50[name] = float(curve.mean())
        aps = [average_precision(per_class[c][t_i]) for t_i, t in enumerate(thresholds) if t in config.iou_thresholds]
        ap_mean[name] = float(np.mean(aps))

    present = [n for n in config.class_names if ap50[n] is not None]
    map50 = float(np.mean([ap50[n] for n in present])) if present else 0.0
    map50_95 = float(np.mean([ap_mean[n] for n in present])) if present else 0.0

    pooled = [m for c in range(n_cls) for m in per_class[c][primary]]
    p_scores, p_flags, p_gt = _scored(pooled)
    conf, precision, recall, f1 = _best_f1(p_scores, p_flags, p_gt)

    counts: dict[str, ClassCounts] = {}
    for c, name in enumerate(config.class_names):
        scores, flags, n_gt = _scored(per_class[c][primary])
        if conf is None:
            tp = fp = 0
        else:
            sel = scores >= conf
            tp = int(flags[sel].sum())
            fp = int((~flags[sel]).sum())
        counts[name] = ClassCounts(tp, fp, n_gt - tp)

    return EvalReport(
        class_names=tuple(config.class_names),
        ap50=ap50,
        ap50_95=ap_mean,
        map50=map50,
        map50_95=map50_95,
        precision=precision,
        recall=recall,
        f1=f1,
        confidence_threshold=conf,
        precision_defined=conf is not None,
        counts=counts,
        n_gt=n_gt_by_class,
        pr_curves=pr_curves,
        iou_thresholds=tuple(config.iou_thresholds),
    )
