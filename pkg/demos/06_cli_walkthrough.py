"""
The command line, end to end
============================

Everything the library does is reachable from the `tigaug` console script.
This script drives the four subcommands in order on a synthetic dataset:
ingest, augment, evaluate, and check-mr. Each call here is exactly what you
would type in a shell, minus the program name.
"""

import json
import tempfile
from pathlib import Path

import tigaug as tg
from tigaug.cli import main

root = Path(tempfile.mkdtemp(prefix="tigaug-demo-"))

# Start from a canonical dataset on disk. ingest revalidates it, optionally
# dedups, and can assign a seeded train/val/test split on the way through.
src = root / "src"
tg.write_canonical(tg.mini_dataset(10, seed=4), src)
ds = root / "dataset"
print("$ tigaug ingest --format canonical --input src --out dataset --split-seed 3")
rc = main(["ingest", "--format", "canonical", "--input", str(src),
           "--out", str(ds), "--split-seed", "3"])
print(f"(exit {rc})\n")

# Augment the whole dataset with one kind. The output directory gains an
# MP+ subdirectory that is itself a canonical dataset, plus a manifest
# recording the seeds, parameters, and per-light notes of the run.
aug = root / "aug"
print("$ tigaug augment --dataset dataset --transform MP --seed 5 --out aug")
rc = main(["augment", "--dataset", str(ds), "--transform", "MP",
           "--seed", "5", "--out", str(aug)])
print(f"(exit {rc})\n")

manifest = json.loads((aug / "MP+" / "manifest.json").read_text())
first = sorted(manifest["images"])[0]
print(f"manifest covers {len(manifest['images'])} images;"
      f" entry for {first}:")
print(" ", json.dumps(manifest["images"][first]))
print()

# Simulate a detector. On the originals it is perfect; on the augmented
# images it keeps finding every light too, because the labels in the MP+
# annotations already sit where the transform moved them.
original = tg.read_canonical(ds)
augmented = tg.read_canonical(aug / "MP+")


def detections_file(dataset, path):
    sets = [tg.DetectionSet(im.id, tuple(tg.Detection(b, 0.9) for b in im.lights))
            for im in dataset.images]
    tg.write_detections(path, "demo-detector", sets)
    return path


det_orig = detections_file(original, root / "det_orig.json")
det_aug = detections_file(augmented, root / "det_aug.json")

print("$ tigaug evaluate --ground-truth dataset --detections det_orig.json")
rc = main(["evaluate", "--ground-truth", str(ds), "--detections", str(det_orig)])
print(f"(exit {rc})\n")

print("$ tigaug check-mr --original dataset --augmented aug/MP+ \\")
print("      --det-original det_orig.json --det-augmented det_aug.json")
rc = main(["check-mr", "--original", str(ds), "--augmented", str(aug / "MP+"),
           "--det-original", str(det_orig), "--det-augmented", str(det_aug)])
print(f"(exit {rc})\n")

# Now break the detector: on every augmented image, drop the detections for
# the lights the manifest says were moved. check-mr exits nonzero and names
# each missing light.
by_id = {im.id: im for im in augmented.images}
sets = []
for image_id, entry in manifest["images"].items():
    moved = {n["index"] for n in entry["notes"] if n["action"] == "moved"}
    im = by_id[image_id]
    sets.append(tg.DetectionSet(im.id, tuple(
        tg.Detection(b, 0.9) for i, b in enumerate(im.lights) if i not in moved)))
det_bad = root / "det_bad.json"
tg.write_detections(det_bad, "demo-detector-broken", sets)

print("$ tigaug check-mr ... --det-augmented det_bad.json")
rc = main(["check-mr", "--original", str(ds), "--augmented", str(aug / "MP+"),
           "--det-original", str(det_orig), "--det-augmented", str(det_bad)])
print(f"(exit {rc})")
