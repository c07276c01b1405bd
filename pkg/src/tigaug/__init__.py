"""tigaug: traffic-light image augmentation with co-transformed labels and a
metamorphic-testing oracle for detector outputs.

Twelve transformations cover weather (rain, snow, fog, lens flare), camera
(over/underexposure, motion blur), and traffic-light edits (color change,
move, add, rotate, scale). Weather and camera transformations must not change
what a detector reports; traffic-light transformations must change it in
exactly the co-transformed way. The oracle scores both statements with
mAP@[.50,.95] and classifies per-light violations.
"""

__version__ = "0.1.0"

from .dataset_io import (
    Dataset,
    Detection,
    DetectionSet,
    MalformedEntry,
    MalformedRow,
    PreprocessStats,
    SchemaError,
    TooSmall,
    UnknownTag,
    dataset_digest,
    parse_bosch,
    parse_lisa,
    preprocess,
    read_annotations,
    read_canonical,
    read_detections,
    split_441,
    write_canonical,
    write_detections,
)
from .imaging import (
    MaskCoversImage,
    Patch,
    PatchOutOfBounds,
    adjust_lightness_hsl,
    convolve_motion_blur,
    hsv_to_rgb,
    inpaint,
    motion_kernel,
    poisson_blend,
    render_flare,
    render_fog,
    render_rain,
    render_snow,
    resample_bilinear,
    rgb_to_hsv,
)
from .metrics import (
    DEFAULT_THRESHOLDS,
    EvalConfig,
    EvalResult,
    NoGroundTruth,
    UnknownImageId,
    average_precision,
    iou,
    map_5095,
    match_detections,
)
from .model import (
    Family,
    LabeledImage,
    LightBox,
    LightState,
    RasterImage,
    TigaugError,
    TransformKind,
    TransformParams,
    box_center,
    clamp_box,
)
from .oracle import (
    CATEGORIES,
    TOUCHED,
    MismatchedIds,
    MrReport,
    MrViolation,
    check_mr,
    check_mr_records,
    expected_labels,
    recompute_labels,
    touched_flags,
)
from .scenes import draw_scene, mini_dataset, perf_image
from .transforms import (
    LightNote,
    NoLights,
    TransformOutcome,
    apply,
    mp_label,
    rt_label,
    sc_label,
)
from .utils import image_seed, stable_hash64

__all__ = [
    "__version__",
    # model
    "Family", "LabeledImage", "LightBox", "LightState", "RasterImage",
    "TigaugError", "TransformKind", "TransformParams", "box_center", "clamp_box",
    # dataset io
    "Dataset", "Detection", "DetectionSet", "MalformedEntry", "MalformedRow",
    "PreprocessStats", "SchemaError", "TooSmall", "UnknownTag",
    "dataset_digest", "parse_bosch", "parse_lisa", "preprocess",
    "read_annotations", "read_canonical", "read_detections", "split_441",
    "write_canonical", "write_detections",
    # imaging
    "MaskCoversImage", "Patch", "PatchOutOfBounds", "adjust_lightness_hsl",
    "convolve_motion_blur", "hsv_to_rgb", "inpaint", "motion_kernel",
    "poisson_blend", "render_flare", "render_fog", "render_rain",
    "render_snow", "resample_bilinear", "rgb_to_hsv",
    # metrics
    "DEFAULT_THRESHOLDS", "EvalConfig", "EvalResult", "NoGroundTruth",
    "UnknownImageId", "average_precision", "iou", "map_5095", "match_detections",
    # transforms
    "LightNote", "NoLights", "TransformOutcome", "apply",
    "mp_label", "rt_label", "sc_label",
    # oracle
    "CATEGORIES", "TOUCHED", "MismatchedIds", "MrReport", "MrViolation",
    "check_mr", "check_mr_records", "expected_labels", "recompute_labels",
    "touched_flags",
    # scenes
    "draw_scene", "mini_dataset", "perf_image",
    # utils
    "image_seed", "stable_hash64",
]
