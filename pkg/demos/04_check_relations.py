"""
Metamorphic relation checking
=============================

The augmentations come with an oracle: run a detector on original and
augmented images, and the outputs must agree once labels are co-transformed.
This script checks one robust detector and one brittle one against two kinds
and prints the violation report the brittle one earns.
"""

import tigaug as tg

mini = tg.mini_dataset(8, seed=9)
params = tg.TransformParams()


def perfect(boxes):
    return [tg.Detection(b, 0.9) for b in boxes]


det_orig = {im.id: perfect(im.lights) for im in mini.images}

for kind in ("FG", "MP"):
    outcomes = [tg.apply(kind, im, params, tg.image_seed(11, im.id)) for im in mini.images]

    # A robust detector keeps finding every light after augmentation. Its
    # report is clean: no mAP drop and no violations.
    det_good = {oc.image.id: perfect(oc.image.lights) for oc in outcomes}
    report = tg.check_mr(kind, mini, outcomes, det_orig, det_good)
    print(f"{kind} robust detector:   map {report.map_original:.2f} -> "
          f"{report.map_augmented:.2f}, {len(report.violations)} violations")

    # A brittle detector loses exactly the lights the transform touched (for
    # fog nothing is touched, so drop the first detection instead).
    det_bad = {}
    for oc in outcomes:
        dets = perfect(oc.image.lights)
        touched = tg.touched_flags(oc)
        if any(touched):
            dets = [d for d, t in zip(dets, touched) if not t]
        else:
            dets = dets[1:]
        det_bad[oc.image.id] = dets
    report = tg.check_mr(kind, mini, outcomes, det_orig, det_bad)
    print(f"{kind} brittle detector:  map {report.map_original:.2f} -> "
          f"{report.map_augmented:.2f}, {len(report.violations)} violations")
    print()

# The last report in full. Every violation names its image, its category,
# and the boxes involved, so a failing light is easy to pull up.
print(report.to_table())
print()
print("first two violations in detail:")
for v in report.violations[:2]:
    print(f"  {v.image_id}: {v.category} {v.detail}")
print()

# The six categories the classifier can assign:
for name in tg.CATEGORIES:
    print(" ", name)
