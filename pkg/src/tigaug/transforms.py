"""The twelve image transformations with their label co-transforms.

Weather (rain, snow, fog, lens flare) and camera (over/underexposure, motion
blur) transformations leave labels untouched. Traffic-light transformations
(color change, move, add, rotate, scale) rewrite pixels and labels together
and record one note per affected light so the label rewrite can be recomputed
independently from the notes alone.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import imaging
from .metrics import iou
from .model import (
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
from .utils import stable_hash64


class NoLights(TigaugError):
    """A light transformation was asked to run on an image with no lights."""


_ACTIONS = ("moved", "recolored", "rotated", "added", "scaled", "kept", "skipped")
_SKIP_REASONS = ("not-selected", "blocked", "offscreen", "warning")


@dataclass(frozen=True)
class LightNote:
    """One per-light action record inside a TransformOutcome.

    action: moved | recolored | rotated | added | scaled | kept | skipped
    index: index of the light in the *output* label list (None for a skipped
        addition that produced no light).
    reason: for skipped actions, one of not-selected | blocked | offscreen | warning.
    direction: +1 or -1 for horizontal-offset actions (moved, added).
    source: for additions, index of the copied input light.
    """

    action: str
    index: int | None = None
    reason: str | None = None
    direction: int | None = None
    source: int | None = None

    def __post_init__(self) -> None:
        if self.action not in _ACTIONS:
            raise ValueError(f"unknown action {self.action!r}")
        if self.action == "skipped":
            if self.reason not in _SKIP_REASONS:
                raise ValueError(f"unknown skip reason {self.reason!r}")
        elif self.reason is not None:
            raise ValueError("reason is only valid for skipped notes")
        if self.direction not in (None, 1, -1):
            raise ValueError("direction must be +1 or -1")

    def as_dict(self) -> dict:
        out: dict = {"action": self.action}
        for key in ("index", "reason", "direction", "source"):
            val = getattr(self, key)
            if val is not None:
                out[key] = val
        return out

    @staticmethod
    def from_dict(data: dict) -> "LightNote":
        allowed = {"action", "index", "reason", "direction", "source"}
        unknown = set(data) - allowed
        if unknown:
            raise ValueError(f"unknown note fields {sorted(unknown)}")
        if "action" not in data:
            raise ValueError("note missing 'action'")
        return LightNote(
            action=data["action"],
            index=data.get("index"),
            reason=data.get("reason"),
            direction=data.get("direction"),
            source=data.get("source"),
        )


@dataclass(frozen=True)
class TransformOutcome:
    """Result of applying one transformation to one labeled image."""

    image: LabeledImage
    kind: TransformKind
    seed: int
    notes: tuple[LightNote, ...] = field(default=())

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", TransformKind(self.kind))
        object.__setattr__(self, "notes", tuple(self.notes))


# ---------------------------------------------------------------------------
# label co-transforms (pure geometry, reused by the oracle)

def mp_label(box: LightBox, direction: int) -> LightBox:
    """Shift a box horizontally by its own width."""
    delta = direction * box.width
    return LightBox(box.x1 + delta, box.y1, box.x2 + delta, box.y2, box.state)


def rt_label(box: LightBox) -> LightBox:
    """Swap a box's width and height about its fixed center and straighten
    arrow states (GoLeft becomes Go, StopLeft becomes Stop)."""
    cx, cy = box_center(box)
    half_w = (box.y2 - box.y1) / 2.0
    half_h = (box.x2 - box.x1) / 2.0
    return LightBox(cx - half_w, cy - half_h, cx + half_w, cy + half_h,
                    box.state.straightened())


def sc_label(box: LightBox, width: int, height: int, params: TransformParams) -> LightBox:
    """Map a box through the canvas-pad-then-resize pixel map.

    In 'affine' mode every coordinate goes through
    x' = (x + pad_w/2) * W / (W + pad_w) (and likewise for y), so centers move
    toward the image center. In 'fixed_center' mode the box keeps its center
    and its half-extents shrink by the box-relative factors w/(w+pad_w) and
    h/(h+pad_h).
    """
    pw, ph = params.sc_pad_w, params.sc_pad_h
    if params.sc_label_mode == "affine":
        fx = lambda x: (x + pw / 2.0) * width / (width + pw)
        fy = lambda y: (y + ph / 2.0) * height / (height + ph)
        return LightBox(fx(box.x1), fy(box.y1), fx(box.x2), fy(box.y2), box.state)
    cx, cy = box_center(box)
    half_w = box.width / 2.0 * (box.width / (box.width + pw))
    half_h = box.height / 2.0 * (box.height / (box.height + ph))
    return LightBox(cx - half_w, cy - half_h, cx + half_w, cy + half_h, box.state)


# ---------------------------------------------------------------------------
# pixel helpers

def _int_bounds(box: LightBox, width: int, height: int) -> tuple[int, int, int, int]:
    """Integer pixel rectangle covering a float box, clipped to the frame."""
    x0 = max(0, int(math.floor(box.x1)))
    y0 = max(0, int(math.floor(box.y1)))
    x1 = min(width, int(math.ceil(box.x2)))
    y1 = min(height, int(math.ceil(box.y2)))
    return x0, y0, x1, y1


def _paste(canvas: np.ndarray, patch: np.ndarray, x0: int, y0: int) -> None:
    """Copy a patch onto the canvas at (x0, y0), cropping to the frame."""
    H, W = canvas.shape[:2]
    ph, pw = patch.shape[:2]
    dx0, dy0 = max(0, x0), max(0, y0)
    dx1, dy1 = min(W, x0 + pw), min(H, y0 + ph)
    if dx1 <= dx0 or dy1 <= dy0:
        return
    sx0, sy0 = dx0 - x0, dy0 - y0
    canvas[dy0:dy1, dx0:dx1] = patch[sy0:sy0 + (dy1 - dy0), sx0:sx0 + (dx1 - dx0)]


def _nonempty_subset(rng: np.random.Generator, n: int) -> np.ndarray:
    """Each light selected independently with p = 0.5; rerolled while empty."""
    sel = rng.random(n) < 0.5
    while not sel.any():
        sel = rng.random(n) < 0.5
    return sel


def _offset_fits(cand: LightBox, width: int, others: list[LightBox]) -> bool:
    if cand.x1 < 0.0 or cand.x2 > width:
        return False
    return all(iou(cand, other) == 0.0 for other in others)


# ---------------------------------------------------------------------------
# per-kind operations

def rn_rain(input: LabeledImage, params: TransformParams, seed: int) -> TransformOutcome:
    out = imaging.render_rain(input.pixels, params.rain_drop_size, params.rain_speed, seed)
    return TransformOutcome(LabeledImage(input.id, out, input.lights), TransformKind.RN, seed)


def sw_snow(input: LabeledImage, params: TransformParams, seed: int) -> TransformOutcome:
    out = imaging.render_snow(input.pixels, params.snow_severity, seed)
    return TransformOutcome(LabeledImage(input.id, out, input.lights), TransformKind.SW, seed)


def fg_fog(input: LabeledImage, params: TransformParams, seed: int) -> TransformOutcome:
    out = imaging.render_fog(input.pixels, params.fog_severity, seed)
    return TransformOutcome(LabeledImage(input.id, out, input.lights), TransformKind.FG, seed)


def lf_lens_flare(input: LabeledImage, params: TransformParams, seed: int) -> TransformOutcome:
    """Flare centered in the upper image half at a seeded-uniform position."""
    rng = np.random.default_rng(seed)
    w, h = input.pixels.width, input.pixels.height
    cx = rng.uniform(0.15 * w, 0.85 * w)
    cy = rng.uniform(0.08 * h, 0.42 * h)
    out = imaging.render_flare(input.pixels, (cx, cy), stable_hash64(seed, "flare"))
    return TransformOutcome(LabeledImage(input.id, out, input.lights), TransformKind.LF, seed)


def oe_overexpose(input: LabeledImage, params: TransformParams, seed: int) -> TransformOutcome:
    out = imaging.adjust_lightness_hsl(input.pixels, params.oe_severity, "brighten")
    return TransformOutcome(LabeledImage(input.id, out, input.lights), TransformKind.OE, seed)


def ue_underexpose(input: LabeledImage, params: TransformParams, seed: int) -> TransformOutcome:
    out = imaging.adjust_lightness_hsl(input.pixels, params.ue_severity, "darken")
    return TransformOutcome(LabeledImage(input.id, out, input.lights), TransformKind.UE, seed)


def mb_motion_blur(input: LabeledImage, params: TransformParams, seed: int) -> TransformOutcome:
    angle = float(np.random.default_rng(seed).uniform(-15.0, 15.0))
    out = imaging.convolve_motion_blur(input.pixels, params.mb_kernel, angle)
    return TransformOutcome(LabeledImage(input.id, out, input.lights), TransformKind.MB, seed)


_RED_LOW, _RED_HIGH = 330.0, 30.0
_GREEN_LOW, _GREEN_HIGH = 75.0, 165.0
_SAT_GATE, _VAL_GATE = 0.3, 0.25


def _remap_bulb_hues(patch: np.ndarray) -> np.ndarray:
    """Rotate red bulb hues +120 degrees and green bulb hues -120 degrees.
    Gates: red h in [330,360)+[0,30), green h in [75,165), s >= 0.3, v >= 0.25."""
    hsv = imaging.rgb_to_hsv(patch)
    h, s, v = hsv[..., 0], hsv[..., 1], hsv[..., 2]
    gates = (s >= _SAT_GATE) & (v >= _VAL_GATE)
    red = ((h >= _RED_LOW) | (h < _RED_HIGH)) & gates
    green = (h >= _GREEN_LOW) & (h < _GREEN_HIGH) & gates
    h2 = h.copy()
    h2[red] = (h[red] + 120.0) % 360.0
    h2[green] = (h[green] - 120.0) % 360.0
    return imaging.hsv_to_rgb(np.stack([h2, s, v], axis=-1))


def cc_change_color(input: LabeledImage, seed: int) -> TransformOutcome:
    """Swap every Stop/Go light to its opposite state: extract the light,
    inpaint the hole, remap bulb hues, flip so the red bulb ends up on the
    top or left, and blend the patch back at the original box. Warning
    lights keep their pixels and state."""
    if not input.lights:
        raise NoLights(f"image {input.id!r} has no lights")
    W, H = input.pixels.width, input.pixels.height
    canvas = input.pixels
    notes: list[LightNote] = []
    new_lights: list[LightBox] = []
    for i, light in enumerate(input.lights):
        if light.state is LightState.WARNING:
            notes.append(LightNote("skipped", index=i, reason="warning"))
            new_lights.append(light)
            continue
        x0, y0, x1, y1 = _int_bounds(light, W, H)
        patch = canvas.pixels[y0:y1, x0:x1].copy()
        hole = np.zeros((H, W), dtype=bool)
        hole[y0:y1, x0:x1] = True
        canvas = imaging.inpaint(canvas, hole)
        remapped = _remap_bulb_hues(patch)
        flipped = np.fliplr(remapped) if (x1 - x0) > (y1 - y0) else np.flipud(remapped)
        canvas = imaging.poisson_blend(
            canvas,
            imaging.Patch(RasterImage(flipped), (x0, y0), np.ones(flipped.shape[:2])),
        )
        new_lights.append(LightBox(light.x1, light.y1, light.x2, light.y2,
                                   light.state.opposite()))
        notes.append(LightNote("recolored", index=i))
    return TransformOutcome(LabeledImage(input.id, canvas, new_lights),
                            TransformKind.CC, seed, tuple(notes))


def mp_move_position(input: LabeledImage, seed: int) -> TransformOutcome:
    """Move a seeded nonempty subset of lights horizontally by their own
    width: +x if that stays in frame and clear of every other box, else -x,
    else the light is left in place and marked skipped(blocked)."""
    if not input.lights:
        raise NoLights(f"image {input.id!r} has no lights")
    rng = np.random.default_rng(seed)
    n = len(input.lights)
    W, H = input.pixels.width, input.pixels.height
    sel = _nonempty_subset(rng, n)

    current: list[LightBox] = list(input.lights)
    notes: list[LightNote] = []
    moves: list[tuple[int, int]] = []  # (light index, direction)
    for i in range(n):
        if not sel[i]:
            notes.append(LightNote("skipped", index=i, reason="not-selected"))
            continue
        box = current[i]
        others = current[:i] + current[i + 1:]
        placed = None
        for direction in (1, -1):
            cand = mp_label(box, direction)
            if _offset_fits(cand, W, others):
                placed = (cand, direction)
                break
        if placed is None:
            notes.append(LightNote("skipped", index=i, reason="blocked"))
            continue
        current[i] = placed[0]
        moves.append((i, placed[1]))
        notes.append(LightNote("moved", index=i, direction=placed[1]))

    if moves:
        src = input.pixels.pixels
        hole = np.zeros((H, W), dtype=bool)
        patches: list[tuple[np.ndarray, int, int]] = []
        for i, direction in moves:
            box = input.lights[i]
            x0, y0, x1, y1 = _int_bounds(box, W, H)
            hole[y0:y1, x0:x1] = True
            dx = int(round(direction * box.width))
            patches.append((src[y0:y1, x0:x1].copy(), x0 + dx, y0))
        out = imaging.inpaint(input.pixels, hole).pixels.copy()
        for patch, px, py in patches:
            _paste(out, patch, px, py)
        pixels = RasterImage(out)
    else:
        pixels = input.pixels

    return TransformOutcome(LabeledImage(input.id, pixels, current),
                            TransformKind.MP, seed, tuple(notes))


def ad_add_lights(input: LabeledImage, seed: int) -> TransformOutcome:
    """Copy k seeded-random lights (k uniform in [1, max(1, ceil(n/2))],
    sources drawn with replacement) to a horizontal offset of one source
    width, keeping the originals in place. Collision rules match MP."""
    if not input.lights:
        raise NoLights(f"image {input.id!r} has no lights")
    rng = np.random.default_rng(seed)
    n = len(input.lights)
    W, H = input.pixels.width, input.pixels.height
    hi = max(1, math.ceil(n / 2))
    k = int(rng.integers(1, hi + 1))
    sources = [int(s) for s in rng.integers(0, n, size=k)]

    notes: list[LightNote] = [LightNote("kept", index=i) for i in range(n)]
    current: list[LightBox] = list(input.lights)
    pastes: list[tuple[int, int, int]] = []  # (source index, direction, output index)
    for src_idx in sources:
        box = input.lights[src_idx]
        placed = None
        for direction in (1, -1):
            cand = mp_label(box, direction)
            if _offset_fits(cand, W, current):
                placed = (cand, direction)
                break
        if placed is None:
            notes.append(LightNote("skipped", reason="blocked", source=src_idx))
            continue
        current.append(placed[0])
        out_idx = len(current) - 1
        pastes.append((src_idx, placed[1], out_idx))
        notes.append(LightNote("added", index=out_idx, direction=placed[1], source=src_idx))

    if pastes:
        src = input.pixels.pixels
        out = src.copy()
        for src_idx, direction, _ in pastes:
            box = input.lights[src_idx]
            x0, y0, x1, y1 = _int_bounds(box, W, H)
            dx = int(round(direction * box.width))
            _paste(out, src[y0:y1, x0:x1].copy(), x0 + dx, y0)
        pixels = RasterImage(out)
    else:
        pixels = input.pixels

    return TransformOutcome(LabeledImage(input.id, pixels, current),
                            TransformKind.AD, seed, tuple(notes))


def rt_rotate(input: LabeledImage, seed: int) -> TransformOutcome:
    """Rotate a seeded subset of lights a quarter turn about their centers:
    clockwise for horizontal lights, counterclockwise for vertical ones.
    Box width and height swap about the fixed center; arrow states
    straighten. A swapped box is clamped to the frame; if clamping would
    degenerate it the light is skipped."""
    if not input.lights:
        raise NoLights(f"image {input.id!r} has no lights")
    rng = np.random.default_rng(seed)
    n = len(input.lights)
    W, H = input.pixels.width, input.pixels.height
    sel = _nonempty_subset(rng, n)

    current: list[LightBox] = list(input.lights)
    notes: list[LightNote] = []
    rotated: list[int] = []
    for i in range(n):
        if not sel[i]:
            notes.append(LightNote("skipped", index=i, reason="not-selected"))
            continue
        cand = clamp_box(rt_label(current[i]), W, H)
        if cand is None:
            notes.append(LightNote("skipped", index=i, reason="offscreen"))
            continue
        current[i] = cand
        rotated.append(i)
        notes.append(LightNote("rotated", index=i))

    if rotated:
        src = input.pixels.pixels
        hole = np.zeros((H, W), dtype=bool)
        patches: list[tuple[np.ndarray, int, int]] = []
        for i in rotated:
            box = input.lights[i]
            x0, y0, x1, y1 = _int_bounds(box, W, H)
            hole[y0:y1, x0:x1] = True
            spun = np.rot90(src[y0:y1, x0:x1], k=-1 if (x1 - x0) > (y1 - y0) else 1)
            cx, cy = box_center(box)
            px = int(round(cx - spun.shape[1] / 2.0))
            py = int(round(cy - spun.shape[0] / 2.0))
            patches.append((spun.copy(), px, py))
        out = imaging.inpaint(input.pixels, hole).pixels.copy()
        for patch, px, py in patches:
            _paste(out, patch, px, py)
        pixels = RasterImage(out)
    else:
        pixels = input.pixels

    return TransformOutcome(LabeledImage(input.id, pixels, current),
                            TransformKind.RT, seed, tuple(notes))


def sc_scale(input: LabeledImage, params: TransformParams, seed: int = 0) -> TransformOutcome:
    """Mimic shooting from farther away: pad the canvas symmetrically by
    (sc_pad_w, sc_pad_h), fill the border band by diffusion from the image
    edges, and resample back to the original size. Labels go through the
    matching coordinate map. Zero-light images are allowed here."""
    W, H = input.pixels.width, input.pixels.height
    pw, ph = params.sc_pad_w, params.sc_pad_h
    if pw == 0 and ph == 0:
        pixels = input.pixels
    else:
        canvas = np.zeros((H + ph, W + pw, 3), dtype=np.uint8)
        oy, ox = ph // 2, pw // 2
        canvas[oy:oy + H, ox:ox + W] = input.pixels.pixels
        band = np.ones((H + ph, W + pw), dtype=bool)
        band[oy:oy + H, ox:ox + W] = False
        padded = imaging.inpaint(RasterImage(canvas), band)
        pixels = imaging.resample_bilinear(padded, W, H)
    new_lights = [sc_label(b, W, H, params) for b in input.lights]
    notes = tuple(LightNote("scaled", index=i) for i in range(len(input.lights)))
    return TransformOutcome(LabeledImage(input.id, pixels, new_lights),
                            TransformKind.SC, seed, notes)


# ---------------------------------------------------------------------------
# dispatch

def apply(kind: TransformKind | str, input: LabeledImage, params: TransformParams,
          seed: int) -> TransformOutcome:
    """Apply one transformation. Light transformations require at least one
    light and raise NoLights otherwise; callers batch-processing a dataset
    skip such images."""
    kind = TransformKind(kind)
    if kind.family.value == "light" and not input.lights:
        raise NoLights(f"image {input.id!r} has no lights")
    if kind is TransformKind.RN:
        return rn_rain(input, params, seed)
    if kind is TransformKind.SW:
        return sw_snow(input, params, seed)
    if kind is TransformKind.FG:
        return fg_fog(input, params, seed)
    if kind is TransformKind.LF:
        return lf_lens_flare(input, params, seed)
    if kind is TransformKind.OE:
        return oe_overexpose(input, params, seed)
    if kind is TransformKind.UE:
        return ue_underexpose(input, params, seed)
    if kind is TransformKind.MB:
        return mb_motion_blur(input, params, seed)
    if kind is TransformKind.CC:
        return cc_change_color(input, seed)
    if kind is TransformKind.MP:
        return mp_move_position(input, seed)
    if kind is TransformKind.AD:
        return ad_add_lights(input, seed)
    if kind is TransformKind.RT:
        return rt_rotate(input, seed)
    return sc_scale(input, params, seed)
