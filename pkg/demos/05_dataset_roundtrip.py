"""
From raw annotation dumps to one canonical layout
=================================================

Two common traffic-light datasets ship in very different shapes: one as
semicolon CSV files next to frame folders, the other as one YAML list over
an image tree. This script writes a miniature copy of each, parses both
into the same in-memory form, cleans them up, and round-trips the result
through the on-disk canonical layout.
"""

import dataclasses
import tempfile
from pathlib import Path

import numpy as np
from PIL import Image

import tigaug as tg

root = Path(tempfile.mkdtemp(prefix="tigaug-demo-"))


def write_frame(path, seed, size=(64, 48)):
    path.parent.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    Image.fromarray(rng.integers(0, 256, (size[1], size[0], 3), dtype=np.uint8)).save(path)


# A miniature CSV-per-clip tree: one clip, two annotated frames, and one
# frame with no row at all (kept as an empty image, useful as negatives).
lisa = root / "lisa"
write_frame(lisa / "clipA" / "frames" / "f1.png", 1)
write_frame(lisa / "clipA" / "frames" / "f2.png", 2)
write_frame(lisa / "clipA" / "frames" / "f3.png", 3)
(lisa / "clipA" / "frameAnnotationsBOX.csv").write_text(
    "Filename;Annotation tag;Upper left corner X;Upper left corner Y;"
    "Lower right corner X;Lower right corner Y;Origin file\n"
    "frames/f1.png;go;10;8;18;26;clipA\n"
    "frames/f1.png;stop;30;6;38;24;clipA\n"
    "frames/f2.png;goLeft;12;10;20;28;clipA\n"
)
ds_a, warnings = tg.parse_lisa(lisa)
print(f"csv tree:  {len(ds_a.images)} images, {sum(len(i.lights) for i in ds_a.images)} lights,"
      f" {len(warnings)} warnings")
for im in ds_a.images:
    print(f"  {im.id}: {[b.state.value for b in im.lights]}")
print()

# The same content as a YAML manifest. Vendor tags are richer here (RedLeft,
# GreenStraight, ...) and 'off' lights carry no state, so they are dropped
# with a warning rather than invented.
bosch = root / "bosch"
write_frame(bosch / "rgb" / "x.png", 4)
write_frame(bosch / "rgb" / "y.png", 5)
(bosch / "boxes.yaml").write_text(
    "- path: ./rgb/x.png\n"
    "  boxes:\n"
    "  - {label: Red, occluded: false, x_min: 4, y_min: 2, x_max: 10, y_max: 14}\n"
    "  - {label: 'off', occluded: false, x_min: 30, y_min: 2, x_max: 34, y_max: 10}\n"
    "- path: ./rgb/y.png\n"
    "  boxes:\n"
    "  - {label: GreenLeft, occluded: true, x_min: 8, y_min: 8, x_max: 14, y_max: 20}\n"
)
ds_b, warnings = tg.parse_bosch(bosch / "boxes.yaml")
print(f"yaml tree: {len(ds_b.images)} images, warnings: {warnings}")
print()

# Cleanup pass: exact-duplicate frames out, optionally monochrome frames
# too, then a seeded 4:1:1 split once the dataset is big enough.
copy = dataclasses.replace(ds_a.images[0], id="clipA/frames/f1-copy.png")
doubled = tg.Dataset(ds_a.name, ds_a.images + (copy,))
deduped, stats = tg.preprocess(doubled)
print(f"preprocess: {len(doubled.images)} images in, {len(deduped.images)} out"
      f" ({stats.duplicates} duplicate, {stats.monochrome} monochrome)")
big = tg.mini_dataset(12, seed=3)
tagged = tg.split_441(big, seed=5)
counts = {name: list(tagged.split.values()).count(name) for name in ("train", "val", "test")}
print(f"seeded split over {len(big.images)} images: {counts}")
print()

# The canonical layout is images/ plus annotations.json (plus splits.json
# when a split was assigned). Writing and reading it back is lossless.
out = root / "canonical"
tg.write_canonical(tagged, out, split_seed=5)
back = tg.read_canonical(out)
print("files:", sorted(p.name for p in out.iterdir()))
print("images and labels survive the roundtrip:",
      all(a == b for a, b in zip(back.images, tagged.images)))
print("split survives too:", back.split == tagged.split)
print()

# A digest over the directory pins a dataset to its exact bytes: rewriting
# the same dataset reproduces it, moving one box corner by one pixel does
# not.
rewrite = root / "canonical-rewrite"
tg.write_canonical(tagged, rewrite, split_seed=5)
im0 = tagged.images[0]
nudged = dataclasses.replace(
    im0, lights=(dataclasses.replace(im0.lights[0], x1=im0.lights[0].x1 + 1.0),)
    + im0.lights[1:])
edited = root / "canonical-edited"
tg.write_canonical(tg.Dataset(tagged.name, (nudged,) + tagged.images[1:], tagged.split),
                   edited, split_seed=5)
print("digest:           ", tg.dataset_digest(out))
print("digest of rewrite:", tg.dataset_digest(rewrite))
print("digest after nudging one corner:", tg.dataset_digest(edited))
