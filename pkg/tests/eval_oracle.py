"""Naive reference evaluator used as a test oracle.

Written without numpy and without any helper from the library: plain loops,
integer recall comparisons, and the precision envelope built by brute force
(for each recall point, the max precision over every threshold reaching it).
The matching rules are the documented ones: detections in descending
confidence (ties by class then box corners), each claiming the highest-IoU
unclaimed object at IoU >= t (ties by object box corners), else ignored if
it overlaps an ignore region at IoU >= t, else a false positive.
"""

import random

from vrukit.geometry import Annotation, BoundingBox, Detection


def box_iou(a, b):
    ax0, ay0, ax1, ay1 = a
    bx0, by0, bx1, by1 = b
    iw = min(ax1, bx1) - max(ax0, bx0)
    ih = min(ay1, by1) - max(ay0, by0)
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    union = (ax1 - ax0) * (ay1 - ay0) + (bx1 - bx0) * (by1 - by0) - inter
    return inter / union if union > 0 else 0.0


def corners(b):
    return (b.x_min, b.y_min, b.x_max, b.y_max)


def match_frame(dets, objects, ignores, thr):
    """Return [(score, 'tp'|'fp'|'ignored')] for one frame and class."""
    dets = sorted(dets, key=lambda d: (-d.confidence, d.class_id) + corners(d.box))
    objects = sorted(objects, key=lambda a: corners(a.box))
    claimed = [False] * len(objects)
    out = []
    for d in dets:
        best, best_iou = None, -1.0
        for j, g in enumerate(objects):
            if claimed[j]:
                continue
            v = box_iou(corners(d.box), corners(g.box))
            if v > best_iou:
                best, best_iou = j, v
        if best is not None and best_iou >= thr:
            claimed[best] = True
            out.append((d.confidence, "tp"))
        elif any(box_iou(corners(d.box), corners(g.box)) >= thr for g in ignores):
            out.append((d.confidence, "ignored"))
        else:
            out.append((d.confidence, "fp"))
    return out


def curve_points(scored):
    """(tp, fp) counts at every distinct confidence threshold."""
    pts = []
    for tau in sorted({s for s, _ in scored}, reverse=True):
        tp = sum(1 for s, st in scored if s >= tau and st == "tp")
        fp = sum(1 for s, st in scored if s >= tau and st == "fp")
        pts.append((tau, tp, fp))
    return pts


def ap_101(scored, n_gt):
    scored = [x for x in scored if x[1] != "ignored"]
    pts = curve_points(scored)
    total = 0.0
    for i in range(101):
        best = 0.0
        for _, tp, fp in pts:
            if tp * 100 >= i * n_gt and tp + fp > 0:
                best = max(best, tp / (tp + fp))
        total += best
    return total / 101


def reference_evaluate(dets_by_frame, gts_by_frame, n_classes, thresholds, primary=0.5):
    """Dict with ap50, ap50_95 (per class, None without objects), map50, map50_95, precision, recall."""
    all_thr = list(thresholds) if primary in thresholds else [primary] + list(thresholds)
    scored = {(c, t): [] for c in range(n_classes) for t in all_thr}
    n_gt = [0] * n_classes
    for fid, gts in gts_by_frame.items():
        dets = dets_by_frame.get(fid, [])
        ignores = [g for g in gts if g.ignore]
        for c in range(n_classes):
            objs = [g for g in gts if not g.ignore and g.class_id == c]
            n_gt[c] += len(objs)
            cd = [d for d in dets if d.class_id == c]
            for t in all_thr:
                scored[(c, t)] += match_frame(cd, objs, ignores, t)
    ap50, ap_avg = [], []
    for c in range(n_classes):
        if n_gt[c] == 0:
            ap50.append(None)
            ap_avg.append(None)
            continue
        ap50.append(ap_101(scored[(c, primary)], n_gt[c]))
        per_t = [ap_101(scored[(c, t)], n_gt[c]) for t in thresholds]
        ap_avg.append(sum(per_t) / len(per_t))
    present = [c for c in range(n_classes) if n_gt[c] > 0]
    map50 = sum(ap50[c] for c in present) / len(present) if present else 0.0
    map50_95 = sum(ap_avg[c] for c in present) / len(present) if present else 0.0

    pooled = [x for c in range(n_classes) for x in scored[(c, primary)] if x[1] != "ignored"]
    total_gt = sum(n_gt)
    best = None  # (2tp, denominator, tau, tp, fp): exact F1 comparison, highest tau wins ties
    for tau, tp, fp in curve_points(pooled):
        if best is None or 2 * tp * best[1] > best[0] * (tp + fp + total_gt):
            best = (2 * tp, tp + fp + total_gt, tau, tp, fp)
    if best is None:
        precision = recall = 0.0
    else:
        _, _, _, tp, fp = best
        precision = tp / (tp + fp)
        recall = tp / total_gt if total_gt else 0.0
    return {"ap50": ap50, "ap50_95": ap_avg, "map50": map50, "map50_95": map50_95,
            "precision": precision, "recall": recall}


def random_frame(rng: random.Random, n_classes=5, max_dets=20, max_gts=10, size=100.0):
    """One frame of ground truth plus detections, some matching it and some not."""
    gts = []
    for _ in range(rng.randint(0, max_gts)):
        x, y = rng.uniform(0, size * 0.8), rng.uniform(0, size * 0.8)
        w, h = rng.uniform(2, size * 0.2), rng.uniform(2, size * 0.2)
        ignore = rng.random() < 0.15
        cls = -1 if ignore else rng.randrange(n_classes)
        gts.append(Annotation(cls, BoundingBox(x, y, x + w, y + h), ignore))
    coarse = rng.random() < 0.5
    dets = []
    for _ in range(rng.randint(0, max_dets)):
        conf = round(rng.random(), 1) if coarse else rng.random()
        if gts and rng.random() < 0.6:
            g = rng.choice(gts)
            j = [rng.gauss(0, 2.5) for _ in range(4)]
            b = g.box
            x0, x1 = sorted((max(0.0, b.x_min + j[0]), max(0.0, b.x_max + j[2])))
            y0, y1 = sorted((max(0.0, b.y_min + j[1]), max(0.0, b.y_max + j[3])))
            if x1 - x0 < 0.5 or y1 - y0 < 0.5:
                x0, y0, x1, y1 = corners(b)
            cls = g.class_id if g.class_id >= 0 and rng.random() < 0.85 else rng.randrange(n_classes)
        else:
            x0, y0 = rng.uniform(0, size * 0.8), rng.uniform(0, size * 0.8)
            x1, y1 = x0 + rng.uniform(2, size * 0.2), y0 + rng.uniform(2, size * 0.2)
            cls = rng.randrange(n_classes)
        dets.append(Detection(cls, BoundingBox(x0, y0, x1, y1), conf))
    return dets, gts


def random_dataset(rng: random.Random, n_frames: int, n_classes=5):
    dets, gts = {}, {}
    for i in range(n_frames):
        d, g = random_frame(rng, n_classes)
        gts[f"f{i:04d}"] = g
        if d or rng.random() < 0.5:
            dets[f"f{i:04d}"] = d
    return dets, gts
