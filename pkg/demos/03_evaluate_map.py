"""
Scoring a detector with mAP
===========================

Build a tiny ground truth, invent three detectors of decreasing quality, and
score each one. The metric sweeps IoU thresholds 0.50 to 0.95 in steps of
0.05, averages per-class average precision, then averages over thresholds.
"""

import json

import tigaug as tg

GO, STOP = tg.LightState.GO, tg.LightState.STOP

gt = {
    "a": [tg.LightBox(10, 10, 30, 70, STOP), tg.LightBox(100, 20, 118, 65, GO)],
    "b": [tg.LightBox(40, 5, 58, 50, GO)],
    "c": [],
}


def shifted(box, dx, dy):
    return tg.LightBox(box.x1 + dx, box.y1 + dy, box.x2 + dx, box.y2 + dy, box.state)


# Detector one reports every ground truth exactly.
perfect = {i: [tg.Detection(b, 0.9) for b in boxes] for i, boxes in gt.items()}

# Detector two is sloppy: every box lands four pixels off. The boxes still
# match at low thresholds but fail the strict ones, so the mAP drops even
# though nothing is missing.
sloppy = {i: [tg.Detection(shifted(b, 4, 4), 0.8) for b in boxes] for i, boxes in gt.items()}

# Detector three misses the go light on image a and hallucinates a stop
# light on the empty image c.
flawed = {
    "a": [tg.Detection(gt["a"][0], 0.9)],
    "b": [tg.Detection(gt["b"][0], 0.9)],
    "c": [tg.Detection(tg.LightBox(5, 5, 25, 60, STOP), 0.7)],
}

for name, det in (("perfect", perfect), ("sloppy", sloppy), ("flawed", flawed)):
    res = tg.map_5095(gt, det)
    print(f"{name:8s} map {res.map:.4f}  false positives {res.fp}  false negatives {res.fn}")
print()

# Per-class numbers live on the result too. The sloppy detector's stop AP
# decays threshold by threshold as the 4-pixel offset stops clearing the bar.
res = tg.map_5095(gt, sloppy)
print("sloppy per-class AP by threshold:")
for state, per_t in res.per_class_ap.items():
    row = "  ".join(f"{t:.2f}:{ap:.2f}" for t, ap in sorted(per_t.items()))
    print(f"  {state.value:5s} {row}")
print()

# Underneath, each image is matched greedily: detections in score order,
# each taking the free same-state ground truth with the best IoU at or above
# the threshold. Loosening the threshold lets the sloppy boxes match.
for theta in (0.5, 0.75, 0.9):
    m = tg.match_detections(gt["a"], sloppy["a"], theta)
    matched = sum(p.gt_index is not None for p in m.pairs)
    print(f"image a at theta {theta:.2f}: {matched} of {len(m.pairs)} detections matched,"
          f" unmatched ground truths {list(m.unmatched_gt)}")
print()

# The same result serializes to the JSON the command line tool prints.
print("flawed detector as JSON:")
print(json.dumps(tg.map_5095(gt, flawed).to_json_dict(), indent=2)[:400], "...")
