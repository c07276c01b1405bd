"""Dataset ingestion, preprocessing, and the canonical annotation and detection wire formats.

The canonical on-disk layout of a dataset directory is:

    annotations.json   strict schema, see annotations_json_bytes
    splits.json        optional train/val/test assignment
    images/<id>.png    lossless copy of every frame, id keeps its original extension
"""

from __future__ import annotations

import hashlib
import json
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
import yaml
from PIL import Image

from .model import LabeledImage, LightBox, LightState, RasterImage, TigaugError
from .utils import stable_hash64

IMAGE_EXTS = (".png", ".jpg", ".jpeg", ".bmp")

_STATES = {s.value for s in LightState}
_SPLIT_TAGS = ("train", "val", "test")


class MalformedRow(TigaugError):
    """An annotation CSV line that cannot be parsed."""

    def __init__(self, content: str, file: str | None = None, lineno: int | None = None):
        self.content = content
        self.file = file
        self.lineno = lineno
        where = f"{file}:{lineno}: " if file else ""
        super().__init__(f"{where}malformed row: {content}")


class MalformedEntry(TigaugError):
    """A YAML annotation entry that cannot be parsed."""

    def __init__(self, index: int, message: str = ""):
        self.index = index
        suffix = f": {message}" if message else ""
        super().__init__(f"malformed entry at index {index}{suffix}")


class UnknownTag(TigaugError):
    """A dataset state tag with no canonical mapping."""

    def __init__(self, tag: str):
        self.tag = tag
        super().__init__(f"unknown state tag {tag!r}")


class TooSmall(TigaugError):
    """Dataset has too few images to split 4:1:1."""

    def __init__(self, n: int):
        self.n = n
        super().__init__(f"need at least 6 images to split, got {n}")


class SchemaError(TigaugError):
    """A JSON file violating the canonical schema; field is a JSON pointer."""

    def __init__(self, path: str, field: str, message: str = ""):
        self.path = str(path)
        self.field = field
        suffix = f": {message}" if message else ""
        super().__init__(f"{path}: {field}{suffix}")


@dataclass(frozen=True)
class Dataset:
    """A named, ordered collection of labeled images with an optional split."""

    name: str
    images: tuple[LabeledImage, ...]
    split: dict[str, str] | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "images", tuple(self.images))
        ids = [im.id for im in self.images]
        if len(set(ids)) != len(ids):
            raise ValueError("image ids must be unique within a dataset")
        if self.split is not None:
            object.__setattr__(self, "split", dict(self.split))
            if set(self.split) != set(ids):
                raise ValueError("split tags must cover exactly the dataset's images")
            bad = {t for t in self.split.values() if t not in _SPLIT_TAGS}
            if bad:
                raise ValueError(f"unknown split tags {sorted(bad)}")

    def by_id(self, image_id: str) -> LabeledImage:
        for im in self.images:
            if im.id == image_id:
                return im
        raise KeyError(image_id)


@dataclass(frozen=True)
class Detection:
    """One scored detection."""

    box: LightBox
    score: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "score", float(self.score))
        if not (0.0 <= self.score <= 1.0):
            raise ValueError(f"score must lie in [0, 1], got {self.score}")


@dataclass(frozen=True)
class DetectionSet:
    """A model's output on one image."""

    image_id: str
    detections: tuple[Detection, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "detections", tuple(self.detections))


@dataclass(frozen=True)
class PreprocessStats:
    duplicates: int
    monochrome: int


# ---------------------------------------------------------------------------
# source-format parsers

LISA_TAG_MAP = {
    "go": LightState.GO,
    "goForward": LightState.GO,
    "goLeft": LightState.GO_LEFT,
    "stop": LightState.STOP,
    "stopLeft": LightState.STOP_LEFT,
    "warning": LightState.WARNING,
    "warningLeft": LightState.WARNING,
}

BOSCH_TAG_MAP = {
    "Red": LightState.STOP,
    "RedLeft": LightState.STOP_LEFT,
    "RedRight": LightState.STOP,
    "RedStraight": LightState.STOP,
    "RedStraightLeft": LightState.STOP,
    "Yellow": LightState.WARNING,
    "Green": LightState.GO,
    "GreenLeft": LightState.GO_LEFT,
    "GreenRight": LightState.GO,
    "GreenStraight": LightState.GO,
    "GreenStraightLeft": LightState.GO,
}


def _load_rgb(path: Path) -> np.ndarray:
    with Image.open(path) as im:
        return np.asarray(im.convert("RGB"), dtype=np.uint8)


def _save_png(arr: np.ndarray, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(arr, mode="RGB").save(path, format="PNG")


def parse_lisa(root: str | Path) -> tuple[Dataset, list[str]]:
    """Ingest a LISA-style directory: semicolon CSV annotations plus frame images.

    Every image file found under root becomes a LabeledImage (frames without
    annotation rows keep an empty lights list). Frames referenced by a CSV but
    missing on disk are reported in the returned warning list, not as errors.
    The first line of each CSV is treated as a header when its coordinate
    fields are not integers.
    """
    rootp = Path(root)
    if not rootp.is_dir():
        raise FileNotFoundError(f"LISA root directory not found: {rootp}")
    warnings: list[str] = []
    boxes: dict[str, list[LightBox]] = defaultdict(list)

    for csv_path in sorted(rootp.rglob("*.csv")):
        lines = csv_path.read_text(encoding="utf-8").splitlines()
        for lineno, raw in enumerate(lines, start=1):
            line = raw.strip()
            if not line:
                continue
            fields = [f.strip() for f in line.split(";")]
            if len(fields) < 6:
                if lineno == 1:
                    continue  # short header line
                raise MalformedRow(raw, str(csv_path), lineno)
            name, tag, c1, c2, c3, c4 = fields[:6]
            try:
                x1, y1, x2, y2 = int(c1), int(c2), int(c3), int(c4)
            except ValueError:
                if lineno == 1:
                    continue  # header row
                raise MalformedRow(raw, str(csv_path), lineno) from None
            if tag not in LISA_TAG_MAP:
                raise UnknownTag(tag)
            if not (x1 < x2 and y1 < y2):
                raise MalformedRow(raw, str(csv_path), lineno)
            frame = (csv_path.parent / Path(name.replace("\\", "/"))).resolve()
            try:
                image_id = frame.relative_to(rootp.resolve()).as_posix()
            except ValueError:
                raise MalformedRow(raw, str(csv_path), lineno) from None
            if not frame.is_file():
                warnings.append(f"{csv_path.name}:{lineno}: frame {image_id} missing on disk")
                continue
            boxes[image_id].append(LightBox(x1, y1, x2, y2, LISA_TAG_MAP[tag]))

    images: list[LabeledImage] = []
    for f in sorted(p for p in rootp.rglob("*") if p.is_file() and p.suffix.lower() in IMAGE_EXTS):
        image_id = f.relative_to(rootp).as_posix()
        arr = _load_rgb(f)
        try:
            images.append(LabeledImage(image_id, RasterImage(arr), tuple(boxes.pop(image_id, []))))
        except ValueError as e:
            raise MalformedRow(f"{image_id}: {e}", str(rootp), None) from None
    for leftover in sorted(boxes):
        warnings.append(f"annotated frame {leftover} not readable as an image")
    return Dataset("lisa", tuple(images)), warnings


def parse_bosch(yaml_path: str | Path) -> tuple[Dataset, list[str]]:
    """Ingest a Bosch-style YAML annotation file.

    Lights labeled "off" are dropped; their count is reported in the warning
    list. Entries whose image file is missing are skipped with a warning.
    """
    ypath = Path(yaml_path)
    if not ypath.is_file():
        raise FileNotFoundError(f"Bosch annotation file not found: {ypath}")
    data = yaml.safe_load(ypath.read_text(encoding="utf-8"))
    if not isinstance(data, list):
        raise MalformedEntry(-1, "top-level YAML value must be a list of entries")

    base = ypath.parent
    warnings: list[str] = []
    off_count = 0
    images: list[LabeledImage] = []
    index_of: dict[str, int] = {}

    for idx, entry in enumerate(data):
        if not isinstance(entry, dict) or "path" not in entry:
            raise MalformedEntry(idx, "entry must be a mapping with a 'path' key")
        rel = str(entry["path"]).replace("\\", "/")
        if rel.startswith("./"):
            rel = rel[2:]
        fpath = base / rel
        if not fpath.is_file():
            warnings.append(f"entry {idx}: image {rel} missing on disk")
            continue
        raw_boxes = entry.get("boxes") or []
        if not isinstance(raw_boxes, list):
            raise MalformedEntry(idx, "'boxes' must be a list")
        arr = _load_rgb(fpath)
        h, w = arr.shape[:2]
        lights: list[LightBox] = []
        for b in raw_boxes:
            if not isinstance(b, dict) or "label" not in b:
                raise MalformedEntry(idx, "box must be a mapping with a 'label' key")
            label = str(b["label"])
            if label == "off":
                off_count += 1
                continue
            if label not in BOSCH_TAG_MAP:
                raise UnknownTag(label)
            try:
                x1 = float(b["x_min"])
                y1 = float(b["y_min"])
                x2 = float(b["x_max"])
                y2 = float(b["y_max"])
            except (KeyError, TypeError, ValueError):
                raise MalformedEntry(idx, "box coordinates must be numeric") from None
            if not (x1 < x2 and y1 < y2):
                raise MalformedEntry(idx, f"zero-size box for {rel}")
            if x1 < 0 or y1 < 0 or x2 > w or y2 > h:
                raise MalformedEntry(idx, f"box outside the {w}x{h} frame of {rel}")
            lights.append(LightBox(x1, y1, x2, y2, BOSCH_TAG_MAP[label]))
        if rel in index_of:
            prev = images[index_of[rel]]
            images[index_of[rel]] = LabeledImage(rel, prev.pixels, prev.lights + tuple(lights))
            warnings.append(f"entry {idx}: duplicate path {rel}, boxes merged")
        else:
            index_of[rel] = len(images)
            images.append(LabeledImage(rel, RasterImage(arr), tuple(lights)))

    if off_count:
        warnings.append(f"dropped {off_count} 'off' light(s)")
    return Dataset("bosch", tuple(images)), warnings


# ---------------------------------------------------------------------------
# preprocessing

def preprocess(
    d: Dataset, drop_monochrome: bool = False, *, dedup: bool = True
) -> tuple[Dataset, PreprocessStats]:
    """Remove exact-duplicate images (keeping the first) and, when asked,
    monochrome images where all three channels match at every pixel."""
    duplicates = 0
    monochrome = 0
    kept: list[LabeledImage] = []
    seen: dict[tuple, LabeledImage] = {}
    for im in d.images:
        if dedup:
            key = (
                im.pixels.pixels.shape,
                hashlib.blake2b(im.pixels.data, digest_size=16).digest(),
            )
            prior = seen.get(key)
            if prior is not None and prior.pixels == im.pixels:
                duplicates += 1
                continue
            seen.setdefault(key, im)
        if drop_monochrome:
            px = im.pixels.pixels
            if bool(np.all(px[..., 0] == px[..., 1]) and np.all(px[..., 1] == px[..., 2])):
                monochrome += 1
                continue
        kept.append(im)
    split = None
    if d.split is not None:
        surviving = {im.id for im in kept}
        split = {k: v for k, v in d.split.items() if k in surviving}
    return Dataset(d.name, tuple(kept), split), PreprocessStats(duplicates, monochrome)


def split_441(d: Dataset, seed: int) -> Dataset:
    """Assign train/val/test tags 4:1:1 after a deterministic seed-keyed shuffle.

    The shuffle orders images by a stable 64-bit hash of (seed, image id), so
    the assignment is reproducible across platforms and library versions.
    """
    n = len(d.images)
    if n < 6:
        raise TooSmall(n)
    order = sorted(d.images, key=lambda im: (stable_hash64(int(seed), im.id), im.id))
    n_train = (4 * n) // 6
    n_val = n // 6
    split: dict[str, str] = {}
    for i, im in enumerate(order):
        split[im.id] = "train" if i < n_train else ("val" if i < n_train + n_val else "test")
    return Dataset(d.name, d.images, split)


# ---------------------------------------------------------------------------
# canonical wire formats

def _dumps(obj) -> bytes:
    return (json.dumps(obj, ensure_ascii=False, indent=2) + "\n").encode("utf-8")


def _box_obj(b: LightBox) -> dict:
    return {
        "x1": float(b.x1),
        "y1": float(b.y1),
        "x2": float(b.x2),
        "y2": float(b.y2),
        "state": b.state.value,
    }


def annotations_json_bytes(d: Dataset) -> bytes:
    """Canonical annotations.json bytes; key order and layout are fixed so that
    equal datasets always serialize byte-identically."""
    obj = {
        "dataset": d.name,
        "images": [
            {
                "id": im.id,
                "width": im.pixels.width,
                "height": im.pixels.height,
                "lights": [_box_obj(b) for b in im.lights],
            }
            for im in d.images
        ],
    }
    return _dumps(obj)


def image_file(root: str | Path, image_id: str) -> Path:
    """Where a frame lives inside a canonical dataset directory."""
    return Path(root) / "images" / (image_id + ".png")


def write_canonical(d: Dataset, out_dir: str | Path, split_seed: int | None = None) -> None:
    """Write annotations.json, the PNG frames, and splits.json when a split is set."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "annotations.json").write_bytes(annotations_json_bytes(d))
    if d.split is not None:
        obj = {
            "seed": split_seed,
            "splits": {
                tag: [im.id for im in d.images if d.split[im.id] == tag]
                for tag in _SPLIT_TAGS
            },
        }
        (out / "splits.json").write_bytes(_dumps(obj))
    for im in d.images:
        _save_png(im.pixels.pixels, image_file(out, im.id))


def _require_mapping(obj, path: str, ptr: str, allowed: set[str]) -> None:
    if not isinstance(obj, dict):
        raise SchemaError(path, ptr, "expected an object")
    unknown = set(obj) - allowed
    if unknown:
        raise SchemaError(path, f"{ptr}/{sorted(unknown)[0]}", "unknown field")
    missing = allowed - set(obj)
    if missing:
        raise SchemaError(path, f"{ptr}/{sorted(missing)[0]}", "missing field")


def _num(obj, path: str, ptr: str) -> float:
    if isinstance(obj, bool) or not isinstance(obj, (int, float)):
        raise SchemaError(path, ptr, "expected a number")
    return float(obj)


def _parse_light(obj, path: str, ptr: str, width: int, height: int) -> LightBox:
    _require_mapping(obj, path, ptr, {"x1", "y1", "x2", "y2", "state"})
    x1 = _num(obj["x1"], path, ptr + "/x1")
    y1 = _num(obj["y1"], path, ptr + "/y1")
    x2 = _num(obj["x2"], path, ptr + "/x2")
    y2 = _num(obj["y2"], path, ptr + "/y2")
    state = obj["state"]
    if state not in _STATES:
        raise SchemaError(path, ptr + "/state", f"unknown state {state!r}")
    if not (x1 < x2 and y1 < y2):
        raise SchemaError(path, ptr, "degenerate box")
    if x1 < 0 or y1 < 0 or x2 > width or y2 > height:
        raise SchemaError(path, ptr, f"box outside the {width}x{height} frame")
    return LightBox(x1, y1, x2, y2, LightState(state))


def read_annotations(path: str | Path) -> tuple[str, list[tuple[str, int, int, tuple[LightBox, ...]]]]:
    """Parse and validate annotations.json without touching the image files.

    Returns (dataset name, rows), each row being (id, width, height, lights).
    """
    p = Path(path)
    if not p.is_file():
        raise FileNotFoundError(f"annotations file not found: {p}")
    try:
        obj = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise SchemaError(str(p), "", f"invalid JSON: {e}") from None
    _require_mapping(obj, str(p), "", {"dataset", "images"})
    if not isinstance(obj["dataset"], str):
        raise SchemaError(str(p), "/dataset", "expected a string")
    if not isinstance(obj["images"], list):
        raise SchemaError(str(p), "/images", "expected a list")
    rows: list[tuple[str, int, int, tuple[LightBox, ...]]] = []
    seen: set[str] = set()
    for i, imo in enumerate(obj["images"]):
        ptr = f"/images/{i}"
        _require_mapping(imo, str(p), ptr, {"id", "width", "height", "lights"})
        image_id = imo["id"]
        if not isinstance(image_id, str) or not image_id:
            raise SchemaError(str(p), ptr + "/id", "expected a non-empty string")
        if image_id in seen:
            raise SchemaError(str(p), ptr + "/id", f"duplicate image id {image_id!r}")
        seen.add(image_id)
        width, height = imo["width"], imo["height"]
        for field, v in (("width", width), ("height", height)):
            if isinstance(v, bool) or not isinstance(v, int) or v < 1:
                raise SchemaError(str(p), f"{ptr}/{field}", "expected a positive integer")
        if not isinstance(imo["lights"], list):
            raise SchemaError(str(p), ptr + "/lights", "expected a list")
        lights = tuple(
            _parse_light(lo, str(p), f"{ptr}/lights/{j}", width, height)
            for j, lo in enumerate(imo["lights"])
        )
        rows.append((image_id, width, height, lights))
    return obj["dataset"], rows


def read_canonical(root: str | Path) -> Dataset:
    """Read a canonical dataset directory back into memory (lossless)."""
    rootp = Path(root)
    name, rows = read_annotations(rootp / "annotations.json")
    images: list[LabeledImage] = []
    for image_id, width, height, lights in rows:
        f = image_file(rootp, image_id)
        if not f.is_file():
            raise SchemaError(str(rootp / "annotations.json"), f"/images/{len(images)}/id",
                              f"image file missing: {f}")
        arr = _load_rgb(f)
        if arr.shape[0] != height or arr.shape[1] != width:
            raise SchemaError(str(rootp / "annotations.json"), f"/images/{len(images)}/width",
                              f"file is {arr.shape[1]}x{arr.shape[0]}, annotations say {width}x{height}")
        images.append(LabeledImage(image_id, RasterImage(arr), lights))

    split = None
    spath = rootp / "splits.json"
    if spath.is_file():
        try:
            sobj = json.loads(spath.read_text(encoding="utf-8"))
        except json.JSONDecodeError as e:
            raise SchemaError(str(spath), "", f"invalid JSON: {e}") from None
        _require_mapping(sobj, str(spath), "", {"seed", "splits"})
        if sobj["seed"] is not None and (isinstance(sobj["seed"], bool) or not isinstance(sobj["seed"], int)):
            raise SchemaError(str(spath), "/seed", "expected an integer or null")
        _require_mapping(sobj["splits"], str(spath), "/splits", set(_SPLIT_TAGS))
        split = {}
        for tag in _SPLIT_TAGS:
            ids = sobj["splits"][tag]
            if not isinstance(ids, list):
                raise SchemaError(str(spath), f"/splits/{tag}", "expected a list")
            for image_id in ids:
                if image_id in split:
                    raise SchemaError(str(spath), f"/splits/{tag}", f"{image_id!r} assigned twice")
                split[image_id] = tag
        if set(split) != {im.id for im in images}:
            raise SchemaError(str(spath), "/splits", "split must cover exactly the dataset's images")
    return Dataset(name, tuple(images), split)


def detections_json_bytes(model: str, sets: Sequence[DetectionSet]) -> bytes:
    obj = {
        "model": model,
        "results": [
            {
                "id": ds.image_id,
                "detections": [
                    {**_box_obj(det.box), "score": float(det.score)} for det in ds.detections
                ],
            }
            for ds in sets
        ],
    }
    return _dumps(obj)


def write_detections(path: str | Path, model: str, sets: Sequence[DetectionSet]) -> None:
    Path(path).write_bytes(detections_json_bytes(model, sets))


def read_detections(path: str | Path) -> list[DetectionSet]:
    """Read one model run's detections; the schema is strict and scores must
    lie in [0, 1]."""
    p = Path(path)
    if not p.is_file():
        raise FileNotFoundError(f"detections file not found: {p}")
    try:
        obj = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise SchemaError(str(p), "", f"invalid JSON: {e}") from None
    _require_mapping(obj, str(p), "", {"model", "results"})
    if not isinstance(obj["model"], str):
        raise SchemaError(str(p), "/model", "expected a string")
    if not isinstance(obj["results"], list):
        raise SchemaError(str(p), "/results", "expected a list")
    out: list[DetectionSet] = []
    seen: set[str] = set()
    for i, entry in enumerate(obj["results"]):
        ptr = f"/results/{i}"
        _require_mapping(entry, str(p), ptr, {"id", "detections"})
        image_id = entry["id"]
        if not isinstance(image_id, str) or not image_id:
            raise SchemaError(str(p), ptr + "/id", "expected a non-empty string")
        if image_id in seen:
            raise SchemaError(str(p), ptr + "/id", f"duplicate image id {image_id!r}")
        seen.add(image_id)
        if not isinstance(entry["detections"], list):
            raise SchemaError(str(p), ptr + "/detections", "expected a list")
        dets: list[Detection] = []
        for j, do in enumerate(entry["detections"]):
            dptr = f"{ptr}/detections/{j}"
            _require_mapping(do, str(p), dptr, {"x1", "y1", "x2", "y2", "state", "score"})
            x1 = _num(do["x1"], str(p), dptr + "/x1")
            y1 = _num(do["y1"], str(p), dptr + "/y1")
            x2 = _num(do["x2"], str(p), dptr + "/x2")
            y2 = _num(do["y2"], str(p), dptr + "/y2")
            if do["state"] not in _STATES:
                raise SchemaError(str(p), dptr + "/state", f"unknown state {do['state']!r}")
            score = _num(do["score"], str(p), dptr + "/score")
            if not (0.0 <= score <= 1.0):
                raise SchemaError(str(p), dptr + "/score", f"score {score} outside [0, 1]")
            if not (x1 < x2 and y1 < y2):
                raise SchemaError(str(p), dptr, "degenerate box")
            dets.append(Detection(LightBox(x1, y1, x2, y2, LightState(do["state"])), score))
        out.append(DetectionSet(image_id, tuple(dets)))
    return out


def dataset_digest(root: str | Path) -> str:
    """Content digest of a canonical dataset directory: annotations bytes plus
    every frame's PNG bytes in annotation order."""
    rootp = Path(root)
    ann = rootp / "annotations.json"
    h = hashlib.blake2b(digest_size=16)
    h.update(ann.read_bytes())
    _, rows = read_annotations(ann)
    for image_id, _, _, _ in rows:
        h.update(image_file(rootp, image_id).read_bytes())
    return h.hexdigest()
