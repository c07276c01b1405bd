"""IoU, greedy matching, average precision, and the mAP sweep."""

import numpy as np
import pytest

import tigaug as tg
from reference import raster_iou, ref_ap, ref_iou, ref_match

GO = tg.LightState.GO
STOP = tg.LightState.STOP


def box(x1, y1, x2, y2, state=GO):
    return tg.LightBox(x1, y1, x2, y2, state)


def det(b, score):
    return tg.Detection(b, score)


# ---------------------------------------------------------------------------
# iou

def test_iou_worked_examples():
    assert tg.iou(box(0, 0, 10, 10), box(0, 0, 10, 10)) == 1.0
    assert tg.iou(box(0, 0, 10, 10), box(20, 0, 30, 10)) == 0.0
    assert tg.iou(box(0, 0, 10, 10), box(10, 0, 20, 10)) == 0.0  # edge contact
    assert tg.iou(box(0, 0, 2, 2), box(1, 1, 3, 3)) == pytest.approx(1 / 7)
    assert tg.iou(box(0, 0, 10, 10), box(0, 0, 10, 20)) == 0.5


def test_iou_ignores_state_and_is_symmetric():
    a, b = box(0, 0, 4, 4, GO), box(2, 0, 6, 4, STOP)
    assert tg.iou(a, b) == tg.iou(b, a) > 0.0


def test_iou_matches_rasterized_reference_on_integer_boxes():
    rng = np.random.default_rng(3)
    for _ in range(300):
        x1, y1 = rng.integers(0, 20, 2)
        a = box(x1, y1, x1 + rng.integers(1, 15), y1 + rng.integers(1, 15))
        x1, y1 = rng.integers(0, 20, 2)
        b = box(x1, y1, x1 + rng.integers(1, 15), y1 + rng.integers(1, 15))
        assert tg.iou(a, b) == pytest.approx(raster_iou(a, b), abs=1e-12)
        assert tg.iou(a, b) == pytest.approx(ref_iou(a, b), abs=0)


# ---------------------------------------------------------------------------
# greedy matching

def test_matching_is_inclusive_at_the_threshold():
    gt = [box(0, 0, 10, 10)]
    m = tg.match_detections(gt, [det(box(0, 0, 10, 20), 0.9)], 0.5)
    assert m.pairs[0].is_tp and m.pairs[0].iou == 0.5
    m = tg.match_detections(gt, [det(box(0, 0, 10, 20), 0.9)], 0.55)
    assert not m.pairs[0].is_tp
    assert m.unmatched_gt == (0,)


def test_matching_visits_detections_in_score_order_ties_by_input():
    gt = [box(0, 0, 10, 10)]
    dets = [det(box(0, 0, 10, 12), 0.8), det(box(0, 0, 10, 10), 0.9)]
    m = tg.match_detections(gt, dets, 0.5)
    by_det = {p.det_index: p for p in m.pairs}
    assert by_det[1].is_tp  # higher score wins the only gt
    assert not by_det[0].is_tp
    # equal scores: input order decides
    dets = [det(box(0, 0, 10, 12), 0.9), det(box(0, 0, 10, 10), 0.9)]
    m = tg.match_detections(gt, dets, 0.5)
    by_det = {p.det_index: p for p in m.pairs}
    assert by_det[0].is_tp and not by_det[1].is_tp


def test_matching_iou_ties_go_to_the_lowest_gt_index():
    gt = [box(0, 0, 10, 10), box(0, 0, 10, 10, STOP), box(0, 10, 10, 20)]
    # det overlaps gt0 and gt2 equally; gt1 has the wrong state
    d = det(box(0, 5, 10, 15), 0.9)
    m = tg.match_detections(gt, [d], 1 / 3)
    assert m.pairs[0].gt_index == 0


def test_matching_respects_state():
    gt = [box(0, 0, 10, 10, STOP)]
    m = tg.match_detections(gt, [det(box(0, 0, 10, 10, GO), 0.9)], 0.5)
    assert not m.pairs[0].is_tp
    assert m.unmatched_gt == (0,)


def test_matching_greedy_can_leave_later_detections_unmatched():
    gt = [box(0, 0, 10, 10)]
    dets = [det(box(0, 0, 10, 11), 0.9), det(box(0, 0, 10, 10), 0.8)]
    m = tg.match_detections(gt, dets, 0.5)
    verdicts = {p.det_index: p.is_tp for p in m.pairs}
    assert verdicts == {0: True, 1: False}


def test_matching_agrees_with_exhaustive_search_on_random_instances():
    rng = np.random.default_rng(17)
    for _ in range(150):
        gt = [
            box(x * 5.0, y * 5.0, x * 5.0 + w * 5.0, y * 5.0 + h * 5.0,
                GO if rng.random() < 0.7 else STOP)
            for x, y, w, h in rng.integers(1, 4, (rng.integers(0, 5), 4))
        ]
        dets = [
            det(box(x * 5.0, y * 5.0, x * 5.0 + w * 5.0, y * 5.0 + h * 5.0,
                    GO if rng.random() < 0.7 else STOP),
                round(float(rng.random()), 1))
            for x, y, w, h in rng.integers(1, 4, (rng.integers(0, 5), 4))
        ]
        for theta in (0.3, 0.5, 0.75):
            got = tg.match_detections(gt, dets, theta)
            want = ref_match(gt, dets, theta)
            assert {p.det_index: p.gt_index for p in got.pairs if p.is_tp} == want
            assert set(got.unmatched_gt) == set(range(len(gt))) - set(want.values())


# ---------------------------------------------------------------------------
# average precision

def test_ap_leading_false_positive_halves_precision():
    # FP ranked first, TP second, one gt: interpolated precision is 0.5 everywhere
    assert tg.average_precision([False, True], 1) == pytest.approx(0.5)
    assert tg.average_precision([False, True], 1, "allpoint") == pytest.approx(0.5)


def test_ap_perfect_and_empty():
    assert tg.average_precision([True, True], 2) == 1.0
    assert tg.average_precision([], 5) == 0.0
    assert tg.average_precision([False, False], 2) == 0.0


def test_ap_protocols_differ_on_a_partial_curve():
    flags, n_gt = [True, False, True], 2
    got101 = tg.average_precision(flags, n_gt)
    gotall = tg.average_precision(flags, n_gt, "allpoint")
    assert got101 == pytest.approx((51 * 1.0 + 50 * (2 / 3)) / 101)
    assert gotall == pytest.approx(0.5 * 1.0 + 0.5 * (2 / 3))
    assert got101 != gotall


def test_ap_requires_ground_truth_and_a_known_protocol():
    with pytest.raises(tg.NoGroundTruth):
        tg.average_precision([True], 0)
    with pytest.raises(ValueError):
        tg.average_precision([True], 1, "vocstyle")


def test_ap_matches_reference_on_random_flag_vectors():
    rng = np.random.default_rng(23)
    for _ in range(200):
        n_gt = int(rng.integers(1, 8))
        n_det = int(rng.integers(0, 10))
        tps = min(n_gt, n_det)
        flags = [bool(rng.random() < 0.5) and tps > 0 for _ in range(n_det)]
        # never report more TPs than ground truths
        while sum(flags) > n_gt:
            flags[flags.index(True)] = False
        for protocol in ("coco101", "allpoint"):
            assert tg.average_precision(flags, n_gt, protocol) == pytest.approx(
                ref_ap(flags, n_gt, protocol), abs=1e-9)


# ---------------------------------------------------------------------------
# the mAP sweep

def test_map_iou_exactly_half_scores_one_tenth():
    # matched at theta 0.50 only, so the ten-threshold mean is 1/10
    gt = {"im": [box(0, 0, 10, 10)]}
    dets = {"im": [det(box(0, 0, 10, 20), 0.9)]}
    assert tg.map_5095(gt, dets).map == pytest.approx(0.1, abs=1e-9)


def test_map_perfect_detections_score_one(mini):
    gt = {im.id: list(im.lights) for im in mini.images}
    dets = {im.id: [det(b, 0.9) for b in im.lights] for im in mini.images}
    res = tg.map_5095(gt, dets)
    assert res.map == 1.0
    assert res.fp == 0 and res.fn == 0


def test_map_no_detections_scores_zero(mini):
    gt = {im.id: list(im.lights) for im in mini.images}
    res = tg.map_5095(gt, {})
    assert res.map == 0.0
    assert res.fp == 0
    assert res.fn == sum(len(im.lights) for im in mini.images)


def test_map_excludes_classes_without_ground_truth():
    gt = {"im": [box(0, 0, 10, 10, GO)]}
    dets = {"im": [det(box(0, 0, 10, 10, GO), 0.9), det(box(20, 0, 30, 10, STOP), 0.8)]}
    res = tg.map_5095(gt, dets)
    assert res.map == 1.0  # the STOP detection has no class to count against
    assert set(res.per_class_ap) == {GO}
    assert res.fp == 1  # but it is still a per-image false positive


def test_map_rejects_unknown_image_ids():
    gt = {"a": [box(0, 0, 10, 10)]}
    with pytest.raises(tg.UnknownImageId):
        tg.map_5095(gt, {"b": [det(box(0, 0, 10, 10), 0.9)]})


def test_map_score_floor_filters_detections():
    gt = {"a": [box(0, 0, 10, 10)]}
    dets = {"a": [det(box(0, 0, 10, 10), 0.2)]}
    assert tg.map_5095(gt, dets).map == 1.0
    cfg = tg.EvalConfig(score_floor=0.5)
    assert tg.map_5095(gt, dets, cfg).map == 0.0


def test_map_missing_detection_entries_count_as_empty():
    gt = {"a": [box(0, 0, 10, 10)], "b": [box(0, 0, 10, 10)]}
    dets = {"a": [det(box(0, 0, 10, 10), 0.9)]}
    res = tg.map_5095(gt, dets)
    assert 0.0 < res.map < 1.0
    assert res.fn == 1


def test_eval_config_validation():
    with pytest.raises(ValueError):
        tg.EvalConfig(iou_thresholds=())
    with pytest.raises(ValueError):
        tg.EvalConfig(iou_thresholds=(0.5, 0.5))
    with pytest.raises(ValueError):
        tg.EvalConfig(iou_thresholds=(0.0, 0.5))
    with pytest.raises(ValueError):
        tg.EvalConfig(score_floor=1.5)
    with pytest.raises(ValueError):
        tg.EvalConfig(protocol="x")
    assert tg.DEFAULT_THRESHOLDS[0] == 0.50 and tg.DEFAULT_THRESHOLDS[-1] == 0.95
    assert len(tg.DEFAULT_THRESHOLDS) == 10


def test_eval_result_json_shape():
    gt = {"a": [box(0, 0, 10, 10)]}
    obj = tg.map_5095(gt, {"a": [det(box(0, 0, 10, 10), 0.9)]}).to_json_dict()
    assert set(obj) == {"map", "per_class", "errors"}
    assert obj["map"] == 1.0
    assert obj["per_class"]["go"]["0.50"] == 1.0
    assert obj["errors"] == {"fp": 0, "fn": 0}
