"""Independent reference implementations the tests use as oracles.

Everything here is deliberately slow and simple: exhaustive search instead of
greedy matching, explicit loops instead of vectorized interpolation, pixel
rasterization instead of interval arithmetic. Nothing is shared with the
package beyond its public data types.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from tigaug import Detection, LightBox, LightState


def ref_iou(a: LightBox, b: LightBox) -> float:
    w = min(a.x2, b.x2) - max(a.x1, b.x1)
    h = min(a.y2, b.y2) - max(a.y1, b.y1)
    if w <= 0.0 or h <= 0.0:
        return 0.0
    inter = w * h
    area_a = (a.x2 - a.x1) * (a.y2 - a.y1)
    area_b = (b.x2 - b.x1) * (b.y2 - b.y1)
    return inter / (area_a + area_b - inter)


def raster_iou(a: LightBox, b: LightBox) -> float:
    """IoU by counting unit cells; exact for integer-coordinate boxes."""
    x_hi = int(max(a.x2, b.x2))
    y_hi = int(max(a.y2, b.y2))
    grid_a = np.zeros((y_hi, x_hi), dtype=bool)
    grid_b = np.zeros((y_hi, x_hi), dtype=bool)
    grid_a[int(a.y1):int(a.y2), int(a.x1):int(a.x2)] = True
    grid_b[int(b.y1):int(b.y2), int(b.x1):int(b.x2)] = True
    inter = int(np.count_nonzero(grid_a & grid_b))
    union = int(np.count_nonzero(grid_a | grid_b))
    return inter / union if union else 0.0


def ref_match(gt: list[LightBox], dets: list[Detection], theta: float) -> dict[int, int]:
    """Exhaustive search over every score-order-respecting matching.

    Detections are visited in descending score (ties by input order); each may
    take any still-free same-state ground truth with IoU >= theta, or stay
    unmatched. Among all complete matchings the one whose per-detection
    outcome sequence (matched, IoU, -gt index) is lexicographically greatest
    wins. Returns {detection index: ground-truth index}.
    """
    order = sorted(range(len(dets)), key=lambda i: (-dets[i].score, i))
    best_key: tuple | None = None
    best: dict[int, int] = {}

    def walk(pos: int, free: list[bool], key: list, assign: dict[int, int]) -> None:
        nonlocal best_key, best
        if pos == len(order):
            k = tuple(key)
            if best_key is None or k > best_key:
                best_key, best = k, dict(assign)
            return
        di = order[pos]
        d = dets[di]
        for gi, g in enumerate(gt):
            if not free[gi] or g.state is not d.box.state:
                continue
            v = ref_iou(d.box, g)
            if v < theta:
                continue
            free[gi] = False
            key.append((1, v, -gi))
            assign[di] = gi
            walk(pos + 1, free, key, assign)
            del assign[di]
            key.pop()
            free[gi] = True
        key.append((0, 0.0, 0))
        walk(pos + 1, free, key, assign)
        key.pop()

    walk(0, [True] * len(gt), [], {})
    return best


def ref_ap(flags: list[bool], n_gt: int, protocol: str = "coco101") -> float:
    """AP from first principles: precision/recall by counting, interpolated
    precision as the max precision over every point at recall >= r."""
    if n_gt <= 0:
        raise ValueError("reference AP needs at least one ground truth")
    if not flags:
        return 0.0
    prec: list[float] = []
    rec: list[float] = []
    tp = fp = 0
    for f in flags:
        if f:
            tp += 1
        else:
            fp += 1
        prec.append(tp / (tp + fp))
        rec.append(tp / n_gt)
    if protocol == "coco101":
        total = 0.0
        for i in range(101):
            r = i / 100
            best = 0.0
            for p, q in zip(prec, rec):
                if q >= r and p > best:
                    best = p
            total += best
        return total / 101
    if protocol != "allpoint":
        raise ValueError(f"unknown protocol {protocol!r}")
    total = 0.0
    prev = 0.0
    for j, q in enumerate(rec):
        if q > prev:
            total += (q - prev) * max(prec[j:])
            prev = q
    return total


def ref_map(
    gt_by_image: dict[str, list[LightBox]],
    det_by_image: dict[str, list[Detection]],
    thresholds: tuple[float, ...],
    protocol: str = "coco101",
) -> float:
    """Full mAP pipeline on plain dicts via ref_match and ref_ap."""
    n_gt: dict[LightState, int] = {}
    for boxes in gt_by_image.values():
        for b in boxes:
            n_gt[b.state] = n_gt.get(b.state, 0) + 1
    classes = [s for s in LightState if n_gt.get(s, 0) > 0]
    if not classes:
        return 0.0
    per_threshold: list[float] = []
    for theta in thresholds:
        pooled: dict[LightState, list[tuple[float, int, int, bool]]] = {s: [] for s in classes}
        for img_order, image_id in enumerate(gt_by_image):
            gt = list(gt_by_image[image_id])
            dets = list(det_by_image.get(image_id, []))
            assign = ref_match(gt, dets, theta)
            for di, d in enumerate(dets):
                if d.box.state in pooled:
                    pooled[d.box.state].append((-d.score, img_order, di, di in assign))
        aps = []
        for s in classes:
            entries = sorted(pooled[s], key=lambda e: e[:3])
            aps.append(ref_ap([e[3] for e in entries], n_gt[s], protocol))
        per_threshold.append(sum(aps) / len(aps))
    return sum(per_threshold) / len(per_threshold)


REF_THRESHOLDS = (0.50, 0.55, 0.60, 0.65, 0.70, 0.75, 0.80, 0.85, 0.90, 0.95)


def ref_map_full(
    gt_by_image: dict[str, list[LightBox]],
    det_by_image: dict[str, list[Detection]],
    thresholds: tuple[float, ...] = REF_THRESHOLDS,
    protocol: str = "coco101",
) -> dict:
    """Like ref_map but also reports fp/fn at the first threshold (counting
    every unmatched detection, whatever its class) and the per-class AP grid."""
    n_gt: dict[LightState, int] = {}
    for boxes in gt_by_image.values():
        for b in boxes:
            n_gt[b.state] = n_gt.get(b.state, 0) + 1
    classes = [s for s in LightState if n_gt.get(s, 0) > 0]

    fp = fn = 0
    for image_id, gt in gt_by_image.items():
        dets = list(det_by_image.get(image_id, []))
        assign = ref_match(list(gt), dets, thresholds[0])
        fp += len(dets) - len(assign)
        fn += len(gt) - len(assign)

    per_class: dict[LightState, dict[float, float]] = {s: {} for s in classes}
    per_threshold: list[float] = []
    for theta in thresholds:
        pooled: dict[LightState, list[tuple[float, int, int, bool]]] = {s: [] for s in classes}
        for img_order, image_id in enumerate(gt_by_image):
            gt = list(gt_by_image[image_id])
            dets = list(det_by_image.get(image_id, []))
            assign = ref_match(gt, dets, theta)
            for di, d in enumerate(dets):
                if d.box.state in pooled:
                    pooled[d.box.state].append((-d.score, img_order, di, di in assign))
        aps = []
        for s in classes:
            entries = sorted(pooled[s], key=lambda e: e[:3])
            ap = ref_ap([e[3] for e in entries], n_gt[s], protocol)
            per_class[s][theta] = ap
            aps.append(ap)
        per_threshold.append(sum(aps) / len(aps) if aps else 0.0)
    overall = sum(per_threshold) / len(per_threshold) if classes else 0.0
    return {"map": overall, "fp": fp, "fn": fn, "per_class": per_class}


def perfect_detections(boxes, score: float = 0.9) -> list[Detection]:
    """What an ideal detector reports on an image with these ground truths."""
    return [Detection(b, score) for b in boxes]


def tree_bytes(root: Path, exclude: tuple[str, ...] = ("timings.json",)) -> dict[str, bytes]:
    """relative path -> file bytes for a whole directory tree, minus the
    excluded basenames (wall-clock measurements are not outputs)."""
    out: dict[str, bytes] = {}
    for p in sorted(Path(root).rglob("*")):
        if p.is_file() and p.name not in exclude:
            out[p.relative_to(root).as_posix()] = p.read_bytes()
    return out
