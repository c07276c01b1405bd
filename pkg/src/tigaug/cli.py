"""Command-line batch front-end: ingest datasets, augment them, evaluate
detections, and check metamorphic relations.

Exit codes: 0 success (or no violations), 1 violations found (or every image
failed to augment), 2 usage/input error, 3 data mismatch.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
import uuid
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import yaml
from PIL import Image

from . import __version__
from .dataset_io import (
    SchemaError,
    dataset_digest,
    image_file,
    parse_bosch,
    parse_lisa,
    preprocess,
    read_annotations,
    read_canonical,
    read_detections,
    split_441,
    write_canonical,
    _load_rgb,
)
from .metrics import EvalConfig, PROTOCOLS, UnknownImageId, map_5095
from .model import (
    Family,
    LabeledImage,
    LightBox,
    RasterImage,
    TigaugError,
    TransformKind,
    TransformParams,
)
from .oracle import TOUCHED, MismatchedIds, check_mr_records
from .transforms import LightNote, apply
from .utils import image_seed

# recorded in every manifest: policies that shape outputs but are not params
_POLICIES = {
    "lf_brightness_lift": {"factor": 1.1, "region": "flare-half"},
    "mb_angle_range_deg": [-15.0, 15.0],
    "mp_direction_order": [1, -1],
    "subset_probability": 0.5,
}


def _dumps(obj) -> bytes:
    return (json.dumps(obj, ensure_ascii=False, indent=2) + "\n").encode("utf-8")


def _print_json(obj) -> None:
    sys.stdout.write(json.dumps(obj, ensure_ascii=False, indent=2) + "\n")


# ---------------------------------------------------------------------------
# ingest

def cmd_ingest(args: argparse.Namespace) -> int:
    if args.format == "lisa":
        dataset, warnings = parse_lisa(args.input)
    elif args.format == "bosch":
        dataset, warnings = parse_bosch(args.input)
    else:
        dataset, warnings = read_canonical(args.input), []
    for w in warnings:
        print(f"warning: {w}", file=sys.stderr)

    dataset, stats = preprocess(dataset, drop_monochrome=args.drop_monochrome,
                                dedup=args.dedup)
    if args.split_seed is not None:
        dataset = split_441(dataset, args.split_seed)
    write_canonical(dataset, args.out, split_seed=args.split_seed)
    print(
        f"ingested {len(dataset.images)} image(s) into {args.out} "
        f"({stats.duplicates} duplicate(s) removed, "
        f"{stats.monochrome} monochrome removed)"
    )
    return 0


# ---------------------------------------------------------------------------
# augment

def _augment_worker(task: tuple) -> tuple[str, tuple[LightBox, ...], list[dict], dict[str, float]]:
    """Process one image: read its frame, apply the transform, write the PNG
    via a unique temp file and an atomic rename."""
    dataset_root, out_root, kind, params_dict, image_id, lights, seed = task
    t0 = time.perf_counter()
    arr = _load_rgb(image_file(dataset_root, image_id))
    t1 = time.perf_counter()
    labeled = LabeledImage(image_id, RasterImage(arr), lights)
    outcome = apply(kind, labeled, TransformParams.from_dict(params_dict), seed)
    t2 = time.perf_counter()
    dest = image_file(out_root, image_id)
    dest.parent.mkdir(parents=True, exist_ok=True)
    tmp = dest.with_name(f".tmp-{os.getpid()}-{uuid.uuid4().hex}.png")
    Image.fromarray(outcome.image.pixels.pixels, mode="RGB").save(tmp, format="PNG")
    os.replace(tmp, dest)
    t3 = time.perf_counter()
    timings = {"read": t1 - t0, "transform": t2 - t1, "write": t3 - t2}
    return image_id, outcome.image.lights, [n.as_dict() for n in outcome.notes], timings


def _run_kind(
    dataset_dir: Path,
    out_dir: Path,
    kind: TransformKind,
    rows: list[tuple[str, int, int, tuple[LightBox, ...]]],
    dataset_name: str,
    params: TransformParams,
    global_seed: int,
    digest: str,
    jobs: int,
) -> tuple[int, int]:
    """Augment one dataset with one kind. Returns (successes, failures)."""
    kind_dir = out_dir / f"{kind.value}+"
    kind_dir.mkdir(parents=True, exist_ok=True)

    skipped: dict[str, str] = {}
    tasks = []
    for image_id, _, _, lights in rows:
        if kind.family is Family.LIGHT and not lights:
            skipped[image_id] = "no lights"
            continue
        tasks.append((str(dataset_dir), str(kind_dir), kind.value, params.as_dict(),
                      image_id, lights, image_seed(global_seed, image_id)))

    results: dict[str, tuple[tuple[LightBox, ...], list[dict], dict[str, float]]] = {}
    failures: dict[str, str] = {}

    def _record(task, payload=None, error=None):
        image_id = task[4]
        if error is not None:
            failures[image_id] = error
            print(f"error: {kind.value}+ {image_id}: {error}", file=sys.stderr)
        else:
            results[image_id] = payload

    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [(task, pool.submit(_augment_worker, task)) for task in tasks]
            for task, fut in futures:
                try:
                    image_id, lights, notes, timings = fut.result()
                    _record(task, (lights, notes, timings))
                except Exception as e:  # noqa: BLE001 - per-image failures must not stop the run
                    _record(task, error=f"{type(e).__name__}: {e}")
    else:
        for task in tasks:
            try:
                image_id, lights, notes, timings = _augment_worker(task)
                _record(task, (lights, notes, timings))
            except Exception as e:  # noqa: BLE001
                _record(task, error=f"{type(e).__name__}: {e}")

    # annotations for the images that succeeded, in input annotation order
    dims = {image_id: (w, h) for image_id, w, h, _ in rows}
    ann_images = []
    manifest_images: dict[str, dict] = {}
    stage_totals = {"read": 0.0, "transform": 0.0, "write": 0.0}
    image_timings: dict[str, dict[str, float]] = {}
    for image_id, w, h, _ in rows:
        if image_id not in results:
            continue
        lights, notes, timings = results[image_id]
        ann_images.append({
            "id": image_id,
            "width": w,
            "height": h,
            "lights": [
                {"x1": float(b.x1), "y1": float(b.y1), "x2": float(b.x2),
                 "y2": float(b.y2), "state": b.state.value}
                for b in lights
            ],
        })
        manifest_images[image_id] = {
            "seed": image_seed(global_seed, image_id),
            "notes": notes,
        }
        for stage in stage_totals:
            stage_totals[stage] += timings[stage]
        image_timings[image_id] = {
            "transform": timings["transform"],
            "write": timings["write"],
        }

    (kind_dir / "annotations.json").write_bytes(
        _dumps({"dataset": dataset_name, "images": ann_images}))
    manifest = {
        "tool": "tigaug",
        "version": __version__,
        "kind": kind.value,
        "seed": global_seed,
        "params": params.as_dict(),
        "input_digest": digest,
        "policies": _POLICIES,
        "images": manifest_images,
        "skipped": skipped,
    }
    (kind_dir / "manifest.json").write_bytes(_dumps(manifest))
    (kind_dir / "timings.json").write_bytes(
        _dumps({"stages": stage_totals, "images": image_timings}))

    n_ok, n_fail = len(results), len(failures)
    print(f"{kind.value}+: {n_ok} augmented, {len(skipped)} skipped, "
          f"{n_fail} failed -> {kind_dir}")
    if not tasks and skipped:
        print(f"warning: every image lacks lights; nothing to augment for "
              f"{kind.value}", file=sys.stderr)
    return n_ok, n_fail


def cmd_augment(args: argparse.Namespace) -> int:
    jobs = args.jobs
    if jobs is None:
        env = os.environ.get("TIGAUG_JOBS", "").strip()
        jobs = int(env) if env else 1
    if jobs < 1:
        print("error: --jobs must be at least 1", file=sys.stderr)
        return 2

    if args.transform == "all":
        kinds = list(TransformKind)
    else:
        try:
            kinds = [TransformKind(args.transform)]
        except ValueError:
            valid = ", ".join(k.value for k in TransformKind)
            print(f"error: unknown transform {args.transform!r} "
                  f"(choose one of {valid}, or all)", file=sys.stderr)
            return 2

    params = TransformParams()
    if args.params is not None:
        ppath = Path(args.params)
        if not ppath.is_file():
            raise FileNotFoundError(f"params file not found: {ppath}")
        try:
            params = TransformParams.from_dict(json.loads(ppath.read_text(encoding="utf-8")))
        except (json.JSONDecodeError, TypeError, ValueError) as e:
            raise SchemaError(str(ppath), "", str(e)) from None

    dataset_dir = Path(args.dataset)
    ann_path = dataset_dir / "annotations.json"
    dataset_name, rows = read_annotations(ann_path)
    for image_id, _, _, _ in rows:
        if not image_file(dataset_dir, image_id).is_file():
            raise SchemaError(str(ann_path), "/images",
                              f"image file missing for id {image_id!r}")
    digest = dataset_digest(dataset_dir)

    out_dir = Path(args.out)
    successes = failures = 0
    for kind in kinds:
        ok, fail = _run_kind(dataset_dir, out_dir, kind, rows, dataset_name,
                             params, args.seed, digest, jobs)
        successes += ok
        failures += fail
    if failures and not successes:
        print("error: every image failed to augment", file=sys.stderr)
        return 1
    return 0


# ---------------------------------------------------------------------------
# evaluate

def cmd_evaluate(args: argparse.Namespace) -> int:
    _, rows = read_annotations(Path(args.ground_truth) / "annotations.json")
    gt = {image_id: list(lights) for image_id, _, _, lights in rows}
    detections = read_detections(args.detections)
    cfg = EvalConfig(protocol=args.protocol)
    result = map_5095(gt, detections, cfg)
    _print_json(result.to_json_dict())
    return 0


# ---------------------------------------------------------------------------
# check-mr

def _load_manifest(aug_dir: Path) -> dict:
    mpath = aug_dir / "manifest.json"
    if not mpath.is_file():
        raise MismatchedIds(
            f"no manifest.json in {aug_dir}; the augmented directory must be "
            "one produced by the augment command (it names the transform kind)"
        )
    try:
        manifest = json.loads(mpath.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise MismatchedIds(f"{mpath}: invalid JSON: {e}") from None
    if not isinstance(manifest, dict) or "kind" not in manifest or "images" not in manifest:
        raise MismatchedIds(f"{mpath}: not a run manifest (missing kind/images)")
    return manifest


def cmd_check_mr(args: argparse.Namespace) -> int:
    _, orig_rows = read_annotations(Path(args.original) / "annotations.json")
    _, aug_rows = read_annotations(Path(args.augmented) / "annotations.json")
    manifest = _load_manifest(Path(args.augmented))
    try:
        kind = TransformKind(manifest["kind"])
    except ValueError:
        raise MismatchedIds(
            f"manifest names unknown transform kind {manifest['kind']!r}") from None

    original = {image_id: list(lights) for image_id, _, _, lights in orig_rows}
    expected: dict[str, tuple[list[LightBox], list[bool]]] = {}
    for image_id, _, _, lights in aug_rows:
        entry = manifest["images"].get(image_id)
        if entry is None:
            raise MismatchedIds(f"manifest has no entry for image {image_id!r}")
        flags = [False] * len(lights)
        for note_obj in entry.get("notes", []):
            note = LightNote.from_dict(note_obj)
            if note.action in TOUCHED and note.index is not None:
                if not 0 <= note.index < len(lights):
                    raise MismatchedIds(
                        f"manifest note index {note.index} out of range for {image_id!r}")
                flags[note.index] = True
        expected[image_id] = (list(lights), flags)

    det_orig = read_detections(args.det_original)
    det_aug = read_detections(args.det_augmented)
    report = check_mr_records(kind, original, expected, det_orig, det_aug, EvalConfig())
    _print_json(report.to_json_dict())
    print(report.to_table(), file=sys.stderr)
    return 1 if report.violations else 0


# ---------------------------------------------------------------------------
# entry point

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tigaug",
        description="Augment labeled traffic-light images and check detector "
                    "outputs against metamorphic relations.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="convert a source dataset to the canonical layout")
    p.add_argument("--format", required=True, choices=["lisa", "bosch", "canonical"])
    p.add_argument("--input", required=True,
                   help="LISA root directory, Bosch YAML file, or canonical directory")
    p.add_argument("--out", required=True, help="output canonical dataset directory")
    p.add_argument("--dedup", action=argparse.BooleanOptionalAction, default=True,
                   help="drop exact-duplicate frames (default on)")
    p.add_argument("--drop-monochrome", action="store_true",
                   help="drop frames whose three channels are identical")
    p.add_argument("--split-seed", type=int, default=None,
                   help="assign a seeded 4:1:1 train/val/test split")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("augment", help="write augmented copies of a canonical dataset")
    p.add_argument("--dataset", required=True, help="canonical dataset directory")
    p.add_argument("--transform", required=True,
                   help="one of RN SW FG LF OE UE MB CC MP AD RT SC, or all")
    p.add_argument("--seed", type=int, default=0, help="global seed (default 0)")
    p.add_argument("--params", default=None,
                   help="JSON file overriding transform parameters")
    p.add_argument("--out", required=True, help="output directory (gets KIND+ subdirs)")
    p.add_argument("--jobs", type=int, default=None,
                   help="worker processes (default: $TIGAUG_JOBS or 1)")
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("evaluate", help="score a detections file against ground truth")
    p.add_argument("--ground-truth", required=True, help="canonical dataset directory")
    p.add_argument("--detections", required=True, help="detections JSON file")
    p.add_argument("--protocol", choices=list(PROTOCOLS), default="coco101",
                   help="AP interpolation protocol (default coco101)")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("check-mr", help="check a metamorphic relation between two runs")
    p.add_argument("--original", required=True, help="original canonical dataset directory")
    p.add_argument("--augmented", required=True, help="augmented KIND+ directory")
    p.add_argument("--det-original", required=True, help="detections on the original images")
    p.add_argument("--det-augmented", required=True, help="detections on the augmented images")
    p.set_defaults(func=cmd_check_mr)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UnknownImageId, MismatchedIds) as e:
        print(f"error: {e}", file=sys.stderr)
        return 3
    except (TigaugError, FileNotFoundError, NotADirectoryError, yaml.YAMLError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
