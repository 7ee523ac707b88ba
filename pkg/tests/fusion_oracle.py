"""Reference late fusion written from the documented rules, for tests.

Pairing is found by repeatedly scanning every remaining same-class
cross-modality pair for the highest IoU (ties broken by the two detections'
rank keys, smaller first), instead of sorting a candidate list once.
"""

import random

from vrukit.geometry import BoundingBox, Detection


def _iou(a, b):
    iw = min(a[2], b[2]) - max(a[0], b[0])
    ih = min(a[3], b[3]) - max(a[1], b[1])
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    union = (a[2] - a[0]) * (a[3] - a[1]) + (b[2] - b[0]) * (b[3] - b[1]) - inter
    return inter / union if union > 0 else 0.0


def _c(d):
    return (d.box.x_min, d.box.y_min, d.box.x_max, d.box.y_max)


def _key(cls, conf, box):
    return (-conf, cls) + tuple(box)


def reference_fuse(rgb, tir, cfg):
    """List of (class_id, box tuple, confidence, support) sorted like the library output."""
    rgb, tir = list(rgb), list(tir)
    free_r, free_t = set(range(len(rgb))), set(range(len(tir)))
    pairs = []
    while True:
        best = None
        for i in free_r:
            for j in free_t:
                r, t = rgb[i], tir[j]
                if r.class_id != t.class_id:
                    continue
                v = _iou(_c(r), _c(t))
                if v < cfg.iou_match_threshold:
                    continue
                kr, kt = _key(r.class_id, r.confidence, _c(r)), _key(t.class_id, t.confidence, _c(t))
                rank = (-v, min(kr, kt), max(kr, kt))
                if best is None or rank < best[0]:
                    best = (rank, i, j)
        if best is None:
            break
        _, i, j = best
        free_r.discard(i)
        free_t.discard(j)
        pairs.append((i, j))

    out = []
    ws = cfg.w_rgb + cfg.w_tir
    for i, j in pairs:
        r, t = rgb[i], tir[j]
        conf = (cfg.w_rgb * r.confidence + cfg.w_tir * t.confidence) / ws
        conf = min(max(conf, min(r.confidence, t.confidence)), max(r.confidence, t.confidence))
        a, b = cfg.w_rgb * r.confidence, cfg.w_tir * t.confidence
        if cfg.box_mode.value == "weighted":
            if a + b <= 0:
                a = b = 1.0
            box = tuple((a * p + b * q) / (a + b) for p, q in zip(_c(r), _c(t)))
            box = (box[0], box[1], max(box[0], box[2]), max(box[1], box[3]))
        else:
            box = _c(r) if a > b else _c(t) if b > a else min(_c(r), _c(t))
        out.append((r.class_id, box, conf, "both"))
    for i in sorted(free_r):
        out.append((rgb[i].class_id, _c(rgb[i]), rgb[i].confidence * cfg.unmatched_penalty_rgb, "rgb_only"))
    for j in sorted(free_t):
        out.append((tir[j].class_id, _c(tir[j]), tir[j].confidence * cfg.unmatched_penalty_tir, "tir_only"))

    out = [o for o in out if o[2] >= cfg.confidence_floor]
    out.sort(key=lambda o: _key(o[0], o[2], o[1]))
    kept = []
    for o in out:
        if all(k[0] != o[0] or _iou(k[1], o[1]) <= cfg.final_nms_iou for k in kept):
            kept.append(o)
    return kept


def random_modalities(rng: random.Random, n=6, n_classes=3, size=100.0):
    """Two detection lists over shared objects, with jitter, misses and clutter."""
    objects = []
    for _ in range(rng.randint(0, n)):
        x, y = rng.uniform(0, size * 0.8), rng.uniform(0, size * 0.8)
        objects.append((rng.randrange(n_classes), (x, y, x + rng.uniform(3, 20), y + rng.uniform(3, 20))))

    def one_side():
        dets = []
        for cls, (x0, y0, x1, y1) in objects:
            if rng.random() < 0.25:
                continue
            j = [rng.gauss(0, 1.5) for _ in range(4)]
            a0, a1 = sorted((max(0.0, x0 + j[0]), max(0.0, x1 + j[2])))
            b0, b1 = sorted((max(0.0, y0 + j[1]), max(0.0, y1 + j[3])))
            if a1 - a0 < 0.5 or b1 - b0 < 0.5:
                a0, b0, a1, b1 = x0, y0, x1, y1
            c = cls if rng.random() < 0.9 else rng.randrange(n_classes)
            dets.append(Detection(c, BoundingBox(a0, b0, a1, b1), rng.random()))
        for _ in range(rng.randint(0, 2)):
            x, y = rng.uniform(0, size * 0.8), rng.uniform(0, size * 0.8)
            dets.append(Detection(rng.randrange(n_classes), BoundingBox(x, y, x + rng.uniform(3, 20), y + rng.uniform(3, 20)),
                                  rng.random()))
        rng.shuffle(dets)
        return dets

    return one_side(), one_side()
