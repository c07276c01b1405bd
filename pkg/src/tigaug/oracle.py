"""Metamorphic-relation checking.

Given detector outputs on original and augmented images, this module computes
mAP on both sides, the relative drop, and a per-light violation breakdown at
IoU 0.5. Dataset-level equality uses the full mAP@[.50,.95] average (small
box drift can cancel out there); per-image violations give engineers concrete
evidence. Original-image errors are reported separately so a model that was
already wrong before augmentation is distinguishable from one the
augmentation broke.
"""

from __future__ import annotations

from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field

from .dataset_io import Dataset, Detection, DetectionSet
from .metrics import EvalConfig, iou, map_5095
from .model import Family, LightBox, TigaugError, TransformKind, TransformParams, clamp_box
from .transforms import LightNote, TransformOutcome, mp_label, rt_label, sc_label

# Actions that change a light's box, state, or existence.
TOUCHED = frozenset({"moved", "recolored", "rotated", "added", "scaled"})

MISSED_LIGHT = "MissedLight"
WRONG_STATE = "WrongState"
PHANTOM_LIGHT = "PhantomLight"
MISSED_TRANSFORMED_LIGHT = "MissedTransformedLight"
BROKEN_UNCHANGED_LIGHT = "BrokenUnchangedLight"
DRIFTED_BOX = "DriftedBox"

CATEGORIES = (
    MISSED_LIGHT,
    WRONG_STATE,
    PHANTOM_LIGHT,
    MISSED_TRANSFORMED_LIGHT,
    BROKEN_UNCHANGED_LIGHT,
    DRIFTED_BOX,
)

# per-light violation threshold; dataset-level equality uses the full
# mAP@[.50,.95] sweep instead
VIOLATION_IOU = 0.5


class MismatchedIds(TigaugError):
    """Detection image ids do not line up with the dataset's image ids."""


def _box_dict(box: LightBox) -> dict:
    return {"x1": box.x1, "y1": box.y1, "x2": box.x2, "y2": box.y2,
            "state": box.state.wire}


def _det_dict(det: Detection) -> dict:
    out = _box_dict(det.box)
    out["score"] = det.score
    return out


@dataclass(frozen=True)
class MrViolation:
    """One per-light relation violation with its offending boxes."""

    image_id: str
    category: str
    detail: dict

    def __post_init__(self) -> None:
        if self.category not in CATEGORIES:
            raise ValueError(f"unknown category {self.category!r}")

    def to_json_dict(self) -> dict:
        return {"image_id": self.image_id, "category": self.category,
                "detail": self.detail}


@dataclass(frozen=True)
class MrReport:
    """Outcome of checking one metamorphic relation over a dataset."""

    kind: TransformKind
    map_original: float
    map_augmented: float
    map_drop: float | None
    violations: tuple[MrViolation, ...] = field(default=())
    original_fp: int = 0
    original_fn: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", TransformKind(self.kind))
        object.__setattr__(self, "violations", tuple(self.violations))

    def to_json_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "map_original": self.map_original,
            "map_augmented": self.map_augmented,
            "map_drop": self.map_drop,
            "original_errors": {"fp": self.original_fp, "fn": self.original_fn},
            "violations": [v.to_json_dict() for v in self.violations],
        }

    def to_table(self) -> str:
        drop = "n/a (map_original = 0)" if self.map_drop is None else f"{self.map_drop:.2%}"
        lines = [
            f"relation check: {self.kind.value}",
            f"  map original   {self.map_original:.6f}",
            f"  map augmented  {self.map_augmented:.6f}",
            f"  map drop       {drop}",
            f"  original errors: fp={self.original_fp} fn={self.original_fn}",
            f"  violations     {len(self.violations)}",
        ]
        by_cat: dict[str, int] = {}
        for v in self.violations:
            by_cat[v.category] = by_cat.get(v.category, 0) + 1
        for cat in CATEGORIES:
            if cat in by_cat:
                lines.append(f"    {cat:<24} {by_cat[cat]}")
        for v in self.violations:
            lines.append(f"  {v.image_id}  {v.category}  {_detail_summary(v.detail)}")
        return "\n".join(lines)


def _detail_summary(detail: dict) -> str:
    parts = []
    for key in ("ground_truth", "detection"):
        if key in detail:
            b = detail[key]
            parts.append(f"{key}=({b['x1']:.1f},{b['y1']:.1f},{b['x2']:.1f},{b['y2']:.1f},{b['state']})")
    if "iou" in detail:
        parts.append(f"iou={detail['iou']:.3f}")
    return " ".join(parts)


# ---------------------------------------------------------------------------
# expected labels and their independent recomputation

def expected_labels(kind: TransformKind | str, outcome: TransformOutcome) -> list[LightBox]:
    """Labels a correct detector should produce on the augmented image.

    For weather/camera kinds these are the original labels (which the
    transform left untouched); for light kinds they are the co-transformed
    labels the transform wrote.
    """
    TransformKind(kind)
    return list(outcome.image.lights)


def touched_flags(outcome: TransformOutcome) -> tuple[bool, ...]:
    """Per output light: was its box, state, or existence changed?"""
    n = len(outcome.image.lights)
    flags = [False] * n
    for note in outcome.notes:
        if note.action in TOUCHED and note.index is not None:
            flags[note.index] = True
    return tuple(flags)


def recompute_labels(
    kind: TransformKind | str,
    original_lights: Sequence[LightBox],
    notes: Sequence[LightNote],
    width: int,
    height: int,
    params: TransformParams,
) -> tuple[LightBox, ...]:
    """Rebuild the co-transformed labels from the original labels and the
    recorded notes alone, without the transform's pixels or RNG. Used to
    verify that the label rewrite is a pure function of its inputs."""
    kind = TransformKind(kind)
    if kind.family is not Family.LIGHT:
        return tuple(original_lights)
    if kind is TransformKind.SC:
        return tuple(sc_label(b, width, height, params) for b in original_lights)

    out: list[LightBox | None] = list(original_lights)
    for note in notes:
        if note.action == "recolored":
            b = original_lights[note.index]
            out[note.index] = LightBox(b.x1, b.y1, b.x2, b.y2, b.state.opposite())
        elif note.action == "moved":
            out[note.index] = mp_label(original_lights[note.index], note.direction)
        elif note.action == "rotated":
            rebuilt = clamp_box(rt_label(original_lights[note.index]), width, height)
            if rebuilt is None:
                raise ValueError(f"rotated note {note.index} rebuilds to a degenerate box")
            out[note.index] = rebuilt
        elif note.action == "added":
            if note.index != len(out):
                raise ValueError(
                    f"added note index {note.index} does not extend the label list"
                )
            out.append(mp_label(original_lights[note.source], note.direction))
    return tuple(out)  # type: ignore[arg-type]


# ---------------------------------------------------------------------------
# violation extraction

def _as_detection_map(
    detections: Sequence[DetectionSet] | Mapping[str, Sequence[Detection]],
) -> dict[str, list[Detection]]:
    if isinstance(detections, Mapping):
        return {str(k): list(v) for k, v in detections.items()}
    out: dict[str, list[Detection]] = {}
    for ds in detections:
        if ds.image_id in out:
            raise MismatchedIds(f"duplicate detections for image {ds.image_id!r}")
        out[ds.image_id] = list(ds.detections)
    return out


def _classify_image(
    image_id: str,
    expected: Sequence[LightBox],
    touched: Sequence[bool],
    dets: Sequence[Detection],
    light_family: bool,
) -> list[MrViolation]:
    """Partition the FP/FN evidence at IoU 0.5 into violation categories.

    Pass 1 mirrors the metrics matcher: score-descending greedy same-state
    matching. Pass 2 explains each leftover detection (wrong state, drifted
    box, phantom) and each leftover ground truth (missed), consuming each
    piece of evidence exactly once.
    """
    order = sorted(range(len(dets)), key=lambda i: (-dets[i].score, i))
    taken = [False] * len(expected)
    leftovers: list[int] = []

    for di in order:
        d = dets[di]
        best, best_iou = None, 0.0
        for gi, g in enumerate(expected):
            if taken[gi] or g.state is not d.box.state:
                continue
            v = iou(d.box, g)
            if v > best_iou:
                best, best_iou = gi, v
        if best is not None and best_iou >= VIOLATION_IOU:
            taken[best] = True
        else:
            leftovers.append(di)

    violations: list[MrViolation] = []
    for di in leftovers:
        d = dets[di]
        wrong, wrong_iou = None, 0.0
        near, near_iou = None, 0.0
        for gi, g in enumerate(expected):
            if taken[gi]:
                continue
            v = iou(d.box, g)
            if g.state is not d.box.state:
                if v > wrong_iou:
                    wrong, wrong_iou = gi, v
            elif v > near_iou:
                near, near_iou = gi, v
        if wrong is not None and wrong_iou >= VIOLATION_IOU:
            taken[wrong] = True
            violations.append(MrViolation(image_id, WRONG_STATE, {
                "detection": _det_dict(d),
                "ground_truth": _box_dict(expected[wrong]),
                "iou": wrong_iou,
            }))
        elif near is not None and 0.0 < near_iou < VIOLATION_IOU:
            detail = {
                "detection": _det_dict(d),
                "ground_truth": _box_dict(expected[near]),
                "iou": near_iou,
            }
            if touched[near]:
                taken[near] = True
                violations.append(MrViolation(image_id, DRIFTED_BOX, detail))
            elif light_family:
                taken[near] = True
                violations.append(MrViolation(image_id, BROKEN_UNCHANGED_LIGHT, detail))
            else:
                violations.append(MrViolation(image_id, PHANTOM_LIGHT,
                                              {"detection": _det_dict(d)}))
        else:
            violations.append(MrViolation(image_id, PHANTOM_LIGHT,
                                          {"detection": _det_dict(d)}))

    for gi, g in enumerate(expected):
        if taken[gi]:
            continue
        detail = {"ground_truth": _box_dict(g)}
        if touched[gi]:
            violations.append(MrViolation(image_id, MISSED_TRANSFORMED_LIGHT, detail))
        elif light_family:
            violations.append(MrViolation(image_id, BROKEN_UNCHANGED_LIGHT, detail))
        else:
            violations.append(MrViolation(image_id, MISSED_LIGHT, detail))
    return violations


def check_mr_records(
    kind: TransformKind | str,
    original_gt: Mapping[str, Sequence[LightBox]],
    expected: Mapping[str, tuple[Sequence[LightBox], Sequence[bool]]],
    det_original: Sequence[DetectionSet] | Mapping[str, Sequence[Detection]],
    det_augmented: Sequence[DetectionSet] | Mapping[str, Sequence[Detection]],
    cfg: EvalConfig | None = None,
) -> MrReport:
    """Check one relation from plain label records (no pixels needed).

    `expected` carries, per augmented image id, the expected labels and a
    per-light touched flag.
    """
    kind = TransformKind(kind)
    cfg = cfg or EvalConfig()
    det_orig = _as_detection_map(det_original)
    det_aug = _as_detection_map(det_augmented)
    if set(det_orig) != set(original_gt):
        raise MismatchedIds(
            "original detections cover "
            f"{len(det_orig)} ids, dataset has {len(original_gt)}; sets differ"
        )
    if set(det_aug) != set(expected):
        raise MismatchedIds(
            "augmented detections cover "
            f"{len(det_aug)} ids, augmented dataset has {len(expected)}; sets differ"
        )

    res_orig = map_5095({k: list(v) for k, v in original_gt.items()}, det_orig, cfg)
    res_aug = map_5095({k: list(v[0]) for k, v in expected.items()}, det_aug, cfg)
    drop: float | None = None
    if res_orig.map > 0.0:
        drop = (res_orig.map - res_aug.map) / res_orig.map

    light_family = kind.family is Family.LIGHT
    violations: list[MrViolation] = []
    for image_id in sorted(expected):
        boxes, touched = expected[image_id]
        if len(boxes) != len(touched):
            raise ValueError(f"touched flags for {image_id!r} do not match labels")
        violations.extend(_classify_image(
            image_id, list(boxes), list(touched), det_aug[image_id], light_family))

    return MrReport(
        kind=kind,
        map_original=res_orig.map,
        map_augmented=res_aug.map,
        map_drop=drop,
        violations=tuple(violations),
        original_fp=res_orig.fp,
        original_fn=res_orig.fn,
    )


def check_mr(
    kind: TransformKind | str,
    original_gt: Dataset,
    outcomes: Sequence[TransformOutcome],
    det_original: Sequence[DetectionSet] | Mapping[str, Sequence[Detection]],
    det_augmented: Sequence[DetectionSet] | Mapping[str, Sequence[Detection]],
    cfg: EvalConfig | None = None,
) -> MrReport:
    """Check one relation from a dataset and its transform outcomes."""
    original = {img.id: list(img.lights) for img in original_gt.images}
    expected: dict[str, tuple[list[LightBox], list[bool]]] = {}
    for outcome in outcomes:
        image_id = outcome.image.id
        if image_id not in original:
            raise MismatchedIds(f"outcome for unknown image {image_id!r}")
        expected[image_id] = (list(outcome.image.lights), list(touched_flags(outcome)))
    return check_mr_records(kind, original, expected, det_original, det_augmented, cfg)
