"""Synthetic street scenes with programmatically drawn traffic lights.

The painter exists so tests and demos have labeled images with known
geometry: bulb colors sit safely inside the color-change hue gates, housings
and poles sit safely outside them, and the default layouts keep every light
far enough from frame edges and neighbors that move/add/rotate placements
never get blocked.
"""

from __future__ import annotations

import numpy as np

from .dataset_io import Dataset
from .model import LabeledImage, LightBox, LightState, RasterImage
from .utils import stable_hash64

_SKY_TOP = (118.0, 160.0, 208.0)
_SKY_HORIZON = (196.0, 214.0, 232.0)
_GROUND = (90.0, 84.0, 70.0)
_POLE = (70.0, 72.0, 76.0)
_HOUSING = (38.0, 40.0, 44.0)

# lit bulbs: hues well inside the red/green remap gates, yellow outside both
_LIT = {0: (230.0, 40.0, 40.0), 1: (250.0, 200.0, 40.0), 2: (40.0, 220.0, 80.0)}
# unlit bulbs: value below the remap gate, so they never get recolored
_DIM = {0: (50.0, 36.0, 36.0), 1: (52.0, 50.0, 34.0), 2: (36.0, 50.0, 40.0)}

_STATE_CYCLE = (LightState.STOP, LightState.GO, LightState.WARNING,
                LightState.STOP_LEFT, LightState.GO_LEFT)


def _lit_cell(state: LightState) -> int:
    if state in (LightState.STOP, LightState.STOP_LEFT):
        return 0
    if state is LightState.WARNING:
        return 1
    return 2


def _fill_disk(img: np.ndarray, cx: float, cy: float, r: float,
               color: tuple[float, float, float]) -> None:
    h, w = img.shape[:2]
    y0, y1 = max(0, int(cy - r) - 1), min(h, int(cy + r) + 2)
    x0, x1 = max(0, int(cx - r) - 1), min(w, int(cx + r) + 2)
    if y0 >= y1 or x0 >= x1:
        return
    yy = np.arange(y0, y1, dtype=np.float64)[:, None] - cy
    xx = np.arange(x0, x1, dtype=np.float64)[None, :] - cx
    inside = yy * yy + xx * xx <= r * r
    img[y0:y1, x0:x1][inside] = color


def draw_scene(width: int, height: int, boxes: list[LightBox], seed: int) -> RasterImage:
    """Paint a sky/ground scene with one traffic light per box plus mild
    seeded sensor noise. Each box becomes the light's housing; the lit bulb
    matches the box's state (red top-or-left, yellow middle, green
    bottom-or-right)."""
    img = np.zeros((height, width, 3), dtype=np.float64)
    ground_y = int(round(0.72 * height))

    rows = np.arange(height, dtype=np.float64) / max(1, ground_y)
    t = np.clip(rows, 0.0, 1.0)[:, None]
    top = np.array(_SKY_TOP)
    hor = np.array(_SKY_HORIZON)
    img[:] = (top[None, :] * (1.0 - t) + hor[None, :] * t)[:, None, :]
    img[ground_y:] = _GROUND

    for box in boxes:
        x0, y0 = int(round(box.x1)), int(round(box.y1))
        x1, y1 = int(round(box.x2)), int(round(box.y2))
        w, h = x1 - x0, y1 - y0
        pole_w = max(2, w // 5)
        px = (x0 + x1) // 2 - pole_w // 2
        img[y1:ground_y, px:px + pole_w] = _POLE
        img[y0:y1, x0:x1] = _HOUSING

        horizontal = w > h
        for cell in range(3):
            if horizontal:
                cw = w / 3.0
                cx = x0 + cw * (cell + 0.5)
                cy = y0 + h / 2.0
                r = min(cw, h) * 0.32
            else:
                ch = h / 3.0
                cx = x0 + w / 2.0
                cy = y0 + ch * (cell + 0.5)
                r = min(w, ch) * 0.32
            color = _LIT[cell] if cell == _lit_cell(box.state) else _DIM[cell]
            _fill_disk(img, cx, cy, max(1.0, r), color)

    rng = np.random.default_rng(seed)
    img += rng.normal(0.0, 2.0, img.shape)
    return RasterImage(np.clip(np.rint(img), 0, 255).astype(np.uint8))


def _build_image(
    image_id: str,
    width: int,
    height: int,
    specs: list[tuple[float, LightState, bool]],
    seed: int,
    light_w: int,
    light_h: int,
) -> LabeledImage:
    """specs: (x-center fraction, state, horizontal) per light."""
    rng = np.random.default_rng(stable_hash64(seed, image_id, "layout"))
    boxes = []
    for frac, state, horizontal in specs:
        bw, bh = (light_h, light_w) if horizontal else (light_w, light_h)
        cx = frac * width
        cy = rng.uniform(0.18 * height, 0.42 * height)
        boxes.append(LightBox(round(cx - bw / 2), round(cy - bh / 2),
                              round(cx - bw / 2) + bw, round(cy - bh / 2) + bh, state))
    pixels = draw_scene(width, height, boxes, stable_hash64(seed, image_id, "noise"))
    return LabeledImage(image_id, pixels, boxes)


_SLOTS = (0.20, 0.50, 0.80)


def mini_dataset(n: int = 20, width: int = 320, height: int = 180,
                 name: str = "mini", seed: int = 9) -> Dataset:
    """A small labeled dataset for tests and demos: 1 to 3 lights per image,
    all five states represented, at least one non-warning light per image,
    and layouts that never block a move/add/rotate placement."""
    images = []
    state_i = 0
    for i in range(n):
        k = 1 + i % 3
        specs: list[tuple[float, LightState, bool]] = []
        for j in range(k):
            state = _STATE_CYCLE[state_i % len(_STATE_CYCLE)]
            state_i += 1
            if k == 1 and state is LightState.WARNING:
                state = _STATE_CYCLE[state_i % len(_STATE_CYCLE)]
                state_i += 1
            horizontal = (i + j) % 4 == 3
            specs.append((_SLOTS[j], state, horizontal))
        images.append(_build_image(f"{name}-{i:03d}", width, height, specs,
                                   seed, light_w=10, light_h=24))
    return Dataset(name, images)


def perf_image(width: int = 1280, height: int = 720, image_id: str = "perf-000") -> LabeledImage:
    """One full-HD-ish frame with three lights, for throughput measurement."""
    specs = [
        (_SLOTS[0], LightState.STOP, False),
        (_SLOTS[1], LightState.GO, True),
        (_SLOTS[2], LightState.WARNING, False),
    ]
    return _build_image(image_id, width, height, specs, seed=41,
                        light_w=30, light_h=72)
