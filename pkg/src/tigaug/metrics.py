"""Intersection over union, greedy detection matching, average precision, and mAP@[.50,.95]."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence, Union

import numpy as np

from .dataset_io import Dataset, Detection, DetectionSet
from .model import LightBox, LightState, TigaugError

DEFAULT_THRESHOLDS = (0.50, 0.55, 0.60, 0.65, 0.70, 0.75, 0.80, 0.85, 0.90, 0.95)

PROTOCOLS = ("coco101", "allpoint")


class NoGroundTruth(TigaugError):
    """AP was requested for a class with no ground truth boxes."""

    def __init__(self, state: LightState | None = None):
        self.state = state
        super().__init__(f"no ground truth for class {state.value if state else '?'}")


class UnknownImageId(TigaugError):
    """A detection references an image id absent from the ground truth."""

    def __init__(self, image_id: str):
        self.image_id = image_id
        super().__init__(f"detections reference unknown image id {image_id!r}")


@dataclass(frozen=True)
class EvalConfig:
    """Evaluation knobs: the IoU threshold sweep, a score floor, and the AP protocol."""

    iou_thresholds: tuple[float, ...] = DEFAULT_THRESHOLDS
    score_floor: float = 0.0
    protocol: str = "coco101"

    def __post_init__(self) -> None:
        object.__setattr__(self, "iou_thresholds", tuple(float(t) for t in self.iou_thresholds))
        ts = self.iou_thresholds
        if not ts or any(not (0.0 < t <= 1.0) for t in ts):
            raise ValueError("iou thresholds must lie in (0, 1]")
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise ValueError("iou thresholds must be strictly increasing")
        if not (0.0 <= self.score_floor <= 1.0):
            raise ValueError("score_floor must lie in [0, 1]")
        if self.protocol not in PROTOCOLS:
            raise ValueError(f"protocol must be one of {PROTOCOLS}")


@dataclass(frozen=True)
class DetMatch:
    """One detection's verdict at a given threshold.

    gt_index is None for a false positive; iou is the IoU with the matched
    ground truth, or the best same-state IoU seen when unmatched (0.0 if none).
    """

    det_index: int
    score: float
    state: LightState
    gt_index: int | None
    iou: float

    @property
    def is_tp(self) -> bool:
        return self.gt_index is not None


@dataclass(frozen=True)
class ImageMatches:
    """Per-image matching evidence: detection verdicts in score order plus
    the unmatched (false negative) ground-truth indices."""

    pairs: tuple[DetMatch, ...]
    unmatched_gt: tuple[int, ...]


@dataclass(frozen=True)
class EvalResult:
    map: float
    per_class_ap: dict[LightState, dict[float, float]]
    matches: dict[str, ImageMatches]  # taken at the first configured threshold
    fp: int
    fn: int

    def to_json_dict(self) -> dict:
        return {
            "map": self.map,
            "per_class": {
                state.value: {f"{t:.2f}": ap for t, ap in sorted(aps.items())}
                for state, aps in sorted(self.per_class_ap.items(), key=lambda kv: kv[0].value)
            },
            "errors": {"fp": self.fp, "fn": self.fn},
        }


def iou(a: LightBox, b: LightBox) -> float:
    """Intersection over union of the two boxes; states are ignored."""
    ix = min(a.x2, b.x2) - max(a.x1, b.x1)
    iy = min(a.y2, b.y2) - max(a.y1, b.y1)
    if ix <= 0.0 or iy <= 0.0:
        return 0.0
    inter = ix * iy
    union = a.area() + b.area() - inter
    return inter / union


def match_detections(
    gt: Sequence[LightBox], det: Sequence[Detection], theta: float
) -> ImageMatches:
    """Greedy matching: detections in descending score order (ties by input
    order) each take the unmatched same-state ground truth of highest IoU,
    provided that IoU is at least theta (equal-IoU ties go to the lowest
    ground-truth index)."""
    order = sorted(range(len(det)), key=lambda i: (-det[i].score, i))
    free = [True] * len(gt)
    pairs: list[DetMatch] = []
    for i in order:
        d = det[i]
        best_iou = 0.0
        best_j: int | None = None
        for j, g in enumerate(gt):
            if not free[j] or g.state is not d.box.state:
                continue
            v = iou(g, d.box)
            if v > best_iou:
                best_iou = v
                best_j = j
        if best_j is not None and best_iou >= theta:
            free[best_j] = False
            pairs.append(DetMatch(i, d.score, d.box.state, best_j, best_iou))
        else:
            pairs.append(DetMatch(i, d.score, d.box.state, None, best_iou))
    unmatched = tuple(j for j, f in enumerate(free) if f)
    return ImageMatches(tuple(pairs), unmatched)


def average_precision(
    tp_flags: Sequence[bool], n_gt: int, protocol: str = "coco101", state: LightState | None = None
) -> float:
    """AP for one class at one threshold from the score-ordered TP/FP flags.

    coco101 samples the interpolated precision at the 101 recall points
    0.00, 0.01, ..., 1.00; allpoint integrates precision over every recall step.
    """
    if n_gt <= 0:
        raise NoGroundTruth(state)
    if protocol not in PROTOCOLS:
        raise ValueError(f"protocol must be one of {PROTOCOLS}")
    if not tp_flags:
        return 0.0
    flags = np.asarray(tp_flags, dtype=np.float64)
    tp_cum = np.cumsum(flags)
    ranks = np.arange(1, len(flags) + 1, dtype=np.float64)
    precision = tp_cum / ranks
    recall = tp_cum / float(n_gt)
    # interpolated precision: max precision at any recall >= r
    p_interp = np.maximum.accumulate(precision[::-1])[::-1]
    if protocol == "coco101":
        grid = np.arange(101, dtype=np.float64) / 100.0
        idx = np.searchsorted(recall, grid, side="left")
        vals = np.where(idx < len(flags), p_interp[np.minimum(idx, len(flags) - 1)], 0.0)
        return float(np.mean(vals))
    # allpoint: sum precision over each recall increment
    prev = np.concatenate(([0.0], recall[:-1]))
    return float(np.sum((recall - prev) * p_interp))


GtLike = Union[Dataset, Mapping[str, Sequence[LightBox]]]
DetLike = Union[Sequence[DetectionSet], Mapping[str, Sequence[Detection]]]


def _as_gt_mapping(gt: GtLike) -> dict[str, tuple[LightBox, ...]]:
    if isinstance(gt, Dataset):
        return {im.id: im.lights for im in gt.images}
    return {k: tuple(v) for k, v in gt.items()}


def _as_det_mapping(det: DetLike) -> dict[str, tuple[Detection, ...]]:
    if isinstance(det, Mapping):
        return {k: tuple(v) for k, v in det.items()}
    return {ds.image_id: ds.detections for ds in det}


def map_5095(gt: GtLike, detections: DetLike, cfg: EvalConfig = EvalConfig()) -> EvalResult:
    """mAP over the configured thresholds: mean over thresholds of the mean AP
    over the classes that have ground truth. Images without detections count
    as empty detection sets; detections for unknown images raise."""
    gt_map = _as_gt_mapping(gt)
    det_map = _as_det_mapping(detections)
    for image_id in det_map:
        if image_id not in gt_map:
            raise UnknownImageId(image_id)
    image_ids = list(gt_map.keys())
    dets: dict[str, tuple[Detection, ...]] = {
        i: tuple(d for d in det_map.get(i, ()) if d.score >= cfg.score_floor)
        for i in image_ids
    }

    n_gt_per_class: dict[LightState, int] = {}
    for boxes in gt_map.values():
        for b in boxes:
            n_gt_per_class[b.state] = n_gt_per_class.get(b.state, 0) + 1
    classes = [s for s in LightState if n_gt_per_class.get(s, 0) > 0]

    per_class_ap: dict[LightState, dict[float, float]] = {s: {} for s in classes}
    first_matches: dict[str, ImageMatches] = {}
    fp = fn = 0
    threshold_means: list[float] = []
    for t_index, theta in enumerate(cfg.iou_thresholds):
        # pooled per-class sweep entries: (score, image order, det index, is_tp)
        pooled: dict[LightState, list[tuple[float, int, int, bool]]] = {s: [] for s in classes}
        for img_order, image_id in enumerate(image_ids):
            m = match_detections(gt_map[image_id], dets[image_id], theta)
            if t_index == 0:
                first_matches[image_id] = m
                fp += sum(1 for p in m.pairs if not p.is_tp)
                fn += len(m.unmatched_gt)
            for p in m.pairs:
                if p.state in pooled:
                    pooled[p.state].append((p.score, img_order, p.det_index, p.is_tp))
                # detections of a class with no ground truth anywhere cannot
                # contribute: their class is excluded from the mean entirely
        aps: list[float] = []
        for s in classes:
            entries = sorted(pooled[s], key=lambda e: (-e[0], e[1], e[2]))
            flags = [e[3] for e in entries]
            ap = average_precision(flags, n_gt_per_class[s], cfg.protocol, s)
            per_class_ap[s][theta] = ap
            aps.append(ap)
        threshold_means.append(sum(aps) / len(aps) if aps else 0.0)

    overall = sum(threshold_means) / len(threshold_means) if classes else 0.0
    return EvalResult(overall, per_class_ap, first_matches, fp, fn)
