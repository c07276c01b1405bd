"""Shared domain types: light states, boxes, labeled images, transform kinds and parameters."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np


class TigaugError(Exception):
    """Base class for every error this package raises on purpose."""


class LightState(str, enum.Enum):
    """Canonical traffic-light states covering both source datasets' tag sets."""

    STOP = "stop"
    GO = "go"
    WARNING = "warning"
    STOP_LEFT = "stop_left"
    GO_LEFT = "go_left"

    @property
    def wire(self) -> str:
        """Name used in JSON files."""
        return self.value

    def opposite(self) -> "LightState":
        """Color-swapped partner; warning maps to itself."""
        return _OPPOSITE[self]

    def straightened(self) -> "LightState":
        """Arrow states lose their direction; plain states are unchanged."""
        return _STRAIGHT[self]

    @property
    def is_arrow(self) -> bool:
        return self in (LightState.STOP_LEFT, LightState.GO_LEFT)


_OPPOSITE = {
    LightState.STOP: LightState.GO,
    LightState.GO: LightState.STOP,
    LightState.STOP_LEFT: LightState.GO_LEFT,
    LightState.GO_LEFT: LightState.STOP_LEFT,
    LightState.WARNING: LightState.WARNING,
}

_STRAIGHT = {
    LightState.STOP: LightState.STOP,
    LightState.GO: LightState.GO,
    LightState.WARNING: LightState.WARNING,
    LightState.STOP_LEFT: LightState.STOP,
    LightState.GO_LEFT: LightState.GO,
}


class Family(str, enum.Enum):
    """The three transformation families."""

    WEATHER = "weather"
    CAMERA = "camera"
    LIGHT = "light"


class TransformKind(str, enum.Enum):
    """The twelve transformations, each belonging to exactly one family."""

    RN = "RN"
    SW = "SW"
    FG = "FG"
    LF = "LF"
    OE = "OE"
    UE = "UE"
    MB = "MB"
    CC = "CC"
    MP = "MP"
    AD = "AD"
    RT = "RT"
    SC = "SC"

    @property
    def family(self) -> Family:
        return _FAMILY[self]


_FAMILY = {
    TransformKind.RN: Family.WEATHER,
    TransformKind.SW: Family.WEATHER,
    TransformKind.FG: Family.WEATHER,
    TransformKind.LF: Family.WEATHER,
    TransformKind.OE: Family.CAMERA,
    TransformKind.UE: Family.CAMERA,
    TransformKind.MB: Family.CAMERA,
    TransformKind.CC: Family.LIGHT,
    TransformKind.MP: Family.LIGHT,
    TransformKind.AD: Family.LIGHT,
    TransformKind.RT: Family.LIGHT,
    TransformKind.SC: Family.LIGHT,
}

WEATHER_KINDS = tuple(k for k in TransformKind if k.family is Family.WEATHER)
CAMERA_KINDS = tuple(k for k in TransformKind if k.family is Family.CAMERA)
LIGHT_KINDS = tuple(k for k in TransformKind if k.family is Family.LIGHT)


@dataclass(frozen=True, eq=False)
class RasterImage:
    """Immutable RGB8 raster.

    Attributes:
        pixels: array of shape (height, width, 3), dtype uint8, read-only.
    """

    pixels: np.ndarray

    def __post_init__(self) -> None:
        arr = np.array(self.pixels, dtype=np.uint8, copy=True)
        if arr.ndim != 3 or arr.shape[2] != 3:
            raise ValueError(f"expected (h, w, 3) pixel array, got shape {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError("image must be at least 1x1")
        arr.setflags(write=False)
        object.__setattr__(self, "pixels", arr)

    @property
    def height(self) -> int:
        return int(self.pixels.shape[0])

    @property
    def width(self) -> int:
        return int(self.pixels.shape[1])

    @property
    def data(self) -> bytes:
        """Row-major RGB8 samples, length width*height*3."""
        return self.pixels.tobytes()

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, RasterImage):
            return NotImplemented
        return self.pixels.shape == other.pixels.shape and bool(
            np.array_equal(self.pixels, other.pixels)
        )

    __hash__ = None  # mutable-sized payload; identity hashing would be misleading


@dataclass(frozen=True)
class LightBox:
    """Axis-aligned traffic-light box with its state.

    Attributes:
        x1, y1: top-left corner in pixel coordinates.
        x2, y2: bottom-right corner; x1 < x2 and y1 < y2 are required.
        state: the light's canonical state.
    """

    x1: float
    y1: float
    x2: float
    y2: float
    state: LightState

    def __post_init__(self) -> None:
        object.__setattr__(self, "x1", float(self.x1))
        object.__setattr__(self, "y1", float(self.y1))
        object.__setattr__(self, "x2", float(self.x2))
        object.__setattr__(self, "y2", float(self.y2))
        if isinstance(self.state, str) and not isinstance(self.state, LightState):
            object.__setattr__(self, "state", LightState(self.state))
        if not isinstance(self.state, LightState):
            raise ValueError(f"state must be a LightState, got {self.state!r}")
        if not (self.x1 < self.x2 and self.y1 < self.y2):
            raise ValueError(
                f"degenerate box ({self.x1}, {self.y1}, {self.x2}, {self.y2})"
            )

    @property
    def width(self) -> float:
        return self.x2 - self.x1

    @property
    def height(self) -> float:
        return self.y2 - self.y1

    def area(self) -> float:
        return self.width * self.height


def box_center(b: LightBox) -> tuple[float, float]:
    """Center point ((x1+x2)/2, (y1+y2)/2)."""
    return ((b.x1 + b.x2) / 2.0, (b.y1 + b.y2) / 2.0)


def clamp_box(b: LightBox, w_img: int, h_img: int) -> LightBox | None:
    """Intersect the box with [0, w_img] x [0, h_img].

    Returns None when the intersection has zero width or height, which signals
    that the box left the image entirely and the caller must skip or drop it.
    """
    if w_img < 1 or h_img < 1:
        raise ValueError("image dimensions must be at least 1")
    x1 = max(0.0, b.x1)
    y1 = max(0.0, b.y1)
    x2 = min(float(w_img), b.x2)
    y2 = min(float(h_img), b.y2)
    if x1 >= x2 or y1 >= y2:
        return None
    return LightBox(x1, y1, x2, y2, b.state)


@dataclass(frozen=True)
class LabeledImage:
    """An image with its ordered set of annotated lights.

    The lights list may be empty: frames without traffic lights are kept in a
    dataset, they are only skipped by the light-family transforms.
    """

    id: str
    pixels: RasterImage
    lights: tuple[LightBox, ...]

    def __post_init__(self) -> None:
        if not isinstance(self.id, str) or not self.id:
            raise ValueError("image id must be a non-empty string")
        object.__setattr__(self, "lights", tuple(self.lights))
        w, h = self.pixels.width, self.pixels.height
        for i, b in enumerate(self.lights):
            if b.x1 < 0 or b.y1 < 0 or b.x2 > w or b.y2 > h:
                raise ValueError(
                    f"light {i} of image {self.id!r} lies outside the {w}x{h} frame"
                )


_ALL_SEVERITIES = range(1, 6)


@dataclass(frozen=True)
class TransformParams:
    """Tunable parameters of the twelve transforms, with their default values."""

    rain_drop_size: tuple[float, float] = (0.1, 0.2)
    rain_speed: tuple[float, float] = (0.2, 0.3)
    snow_severity: int = 2
    fog_severity: int = 2
    oe_severity: int = 4
    ue_severity: int = 1
    mb_kernel: int = 15
    sc_pad_w: int = 320
    sc_pad_h: int = 180
    sc_label_mode: str = "affine"

    def __post_init__(self) -> None:
        object.__setattr__(self, "rain_drop_size", _interval(self.rain_drop_size, "rain_drop_size"))
        object.__setattr__(self, "rain_speed", _interval(self.rain_speed, "rain_speed"))
        for name in ("snow_severity", "fog_severity", "oe_severity", "ue_severity"):
            v = getattr(self, name)
            if not isinstance(v, int) or v not in _ALL_SEVERITIES:
                raise ValueError(f"{name} must be an integer in 1..5, got {v!r}")
        if not isinstance(self.mb_kernel, int) or self.mb_kernel < 3 or self.mb_kernel % 2 == 0:
            raise ValueError(f"mb_kernel must be an odd integer >= 3, got {self.mb_kernel!r}")
        for name in ("sc_pad_w", "sc_pad_h"):
            v = getattr(self, name)
            if not isinstance(v, int) or v < 0 or v % 2 != 0:
                raise ValueError(f"{name} must be an even nonnegative integer, got {v!r}")
        if self.sc_label_mode not in ("affine", "fixed_center"):
            raise ValueError(f"sc_label_mode must be 'affine' or 'fixed_center', got {self.sc_label_mode!r}")

    def as_dict(self) -> dict:
        """JSON-ready mapping; intervals become two-element lists."""
        return {
            "rain_drop_size": list(self.rain_drop_size),
            "rain_speed": list(self.rain_speed),
            "snow_severity": self.snow_severity,
            "fog_severity": self.fog_severity,
            "oe_severity": self.oe_severity,
            "ue_severity": self.ue_severity,
            "mb_kernel": self.mb_kernel,
            "sc_pad_w": self.sc_pad_w,
            "sc_pad_h": self.sc_pad_h,
            "sc_label_mode": self.sc_label_mode,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TransformParams":
        known = {
            "rain_drop_size", "rain_speed", "snow_severity", "fog_severity",
            "oe_severity", "ue_severity", "mb_kernel", "sc_pad_w", "sc_pad_h",
            "sc_label_mode",
        }
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown parameter names: {sorted(unknown)}")
        kwargs = dict(d)
        for key in ("rain_drop_size", "rain_speed"):
            if key in kwargs:
                kwargs[key] = tuple(kwargs[key])
        return cls(**kwargs)


def _interval(v: Iterable[float], name: str) -> tuple[float, float]:
    pair = tuple(float(x) for x in v)
    if len(pair) != 2 or not all(math.isfinite(x) for x in pair):
        raise ValueError(f"{name} must be a (lo, hi) pair")
    lo, hi = pair
    if lo > hi or lo < 0:
        raise ValueError(f"{name} must satisfy 0 <= lo <= hi, got {pair}")
    return (lo, hi)
