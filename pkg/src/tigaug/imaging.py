"""Raster primitives the transforms compose: color conversion, motion blur,
Poisson blending, diffusion inpainting, resampling, and procedural weather layers.

All operations are pure, preserve image dimensions, and are deterministic
given their explicit seed; there is no hidden global RNG.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from PIL import Image
from scipy.ndimage import distance_transform_cdt

from .model import RasterImage, TigaugError


class PatchOutOfBounds(TigaugError):
    """A patch does not fit inside the destination image."""


class MaskCoversImage(TigaugError):
    """Inpainting mask leaves no known pixels to diffuse from."""


@dataclass(frozen=True)
class Patch:
    """Pixels to place into a destination image.

    Attributes:
        pixels: the patch content.
        origin: (x, y) of the patch's top-left corner in the destination.
        mask: per-pixel alpha in [0, 1], same height and width as pixels.
    """

    pixels: RasterImage
    origin: tuple[int, int]
    mask: np.ndarray

    def __post_init__(self) -> None:
        m = np.array(self.mask, dtype=np.float64, copy=True)
        if m.shape != (self.pixels.height, self.pixels.width):
            raise ValueError(
                f"mask shape {m.shape} does not match patch {self.pixels.height}x{self.pixels.width}"
            )
        if m.min() < 0.0 or m.max() > 1.0:
            raise ValueError("mask values must lie in [0, 1]")
        m.setflags(write=False)
        object.__setattr__(self, "mask", m)
        object.__setattr__(self, "origin", (int(self.origin[0]), int(self.origin[1])))


# ---------------------------------------------------------------------------
# color spaces

def rgb_to_hsv(rgb: np.ndarray) -> np.ndarray:
    """Hexcone HSV for an (..., 3) RGB array. Returns float32 (..., 3) with
    h in [0, 360), s and v in [0, 1]. Gray pixels get h = 0 by convention."""
    arr = np.asarray(rgb, dtype=np.float32)
    if arr.shape[-1] != 3:
        raise ValueError("expected an (..., 3) array")
    if np.issubdtype(np.asarray(rgb).dtype, np.integer):
        arr = arr / 255.0
    r, g, b = arr[..., 0], arr[..., 1], arr[..., 2]
    mx = np.max(arr, axis=-1)
    mn = np.min(arr, axis=-1)
    c = mx - mn
    safe_c = np.where(c > 0, c, 1.0)
    h = np.select(
        [c <= 0, mx == r, mx == g],
        [0.0, ((g - b) / safe_c) % 6.0, (b - r) / safe_c + 2.0],
        default=(r - g) / safe_c + 4.0,
    ) * 60.0
    h = h % 360.0
    s = np.where(mx > 0, c / np.where(mx > 0, mx, 1.0), 0.0)
    return np.stack([h, s, mx], axis=-1).astype(np.float32)


def hsv_to_rgb(hsv: np.ndarray) -> np.ndarray:
    """Inverse of rgb_to_hsv; returns uint8. Round trip is exact to within
    one 8-bit step per channel."""
    arr = np.asarray(hsv, dtype=np.float32)
    h, s, v = arr[..., 0] % 360.0, arr[..., 1], arr[..., 2]
    c = v * s
    hp = h / 60.0
    x = c * (1.0 - np.abs(hp % 2.0 - 1.0))
    z = np.zeros_like(c)
    sextant = np.floor(hp).astype(np.int32) % 6
    r = np.choose(sextant, [c, x, z, z, x, c])
    g = np.choose(sextant, [x, c, c, x, z, z])
    b = np.choose(sextant, [z, z, x, c, c, x])
    m = v - c
    out = np.stack([r + m, g + m, b + m], axis=-1)
    return np.clip(np.rint(out * 255.0), 0, 255).astype(np.uint8)


def _rgb_to_hsl(arr01: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    r, g, b = arr01[..., 0], arr01[..., 1], arr01[..., 2]
    mx = np.max(arr01, axis=-1)
    mn = np.min(arr01, axis=-1)
    c = mx - mn
    lum = (mx + mn) / 2.0
    safe_c = np.where(c > 0, c, 1.0)
    h = np.select(
        [c <= 0, mx == r, mx == g],
        [0.0, ((g - b) / safe_c) % 6.0, (b - r) / safe_c + 2.0],
        default=(r - g) / safe_c + 4.0,
    ) * 60.0
    denom = 1.0 - np.abs(2.0 * lum - 1.0)
    s = np.where((c > 0) & (denom > 0), c / np.where(denom > 0, denom, 1.0), 0.0)
    return h % 360.0, s, lum


def _hsl_to_rgb(h: np.ndarray, s: np.ndarray, lum: np.ndarray) -> np.ndarray:
    c = (1.0 - np.abs(2.0 * lum - 1.0)) * s
    hp = h / 60.0
    x = c * (1.0 - np.abs(hp % 2.0 - 1.0))
    z = np.zeros_like(c)
    sextant = np.floor(hp).astype(np.int32) % 6
    r = np.choose(sextant, [c, x, z, z, x, c])
    g = np.choose(sextant, [x, c, c, x, z, z])
    b = np.choose(sextant, [z, z, x, c, c, x])
    m = lum - c / 2.0
    return np.stack([r + m, g + m, b + m], axis=-1)


def adjust_lightness_hsl(img: RasterImage, severity: int, direction: str) -> RasterImage:
    """Shift every pixel's HSL lightness by gain(severity) = 0.1*severity + 0.1,
    clamped to [0, 1]; hue and saturation survive up to rounding."""
    if direction not in ("brighten", "darken"):
        raise ValueError("direction must be 'brighten' or 'darken'")
    if not 1 <= int(severity) <= 5:
        raise ValueError("severity must lie in 1..5")
    gain = 0.1 * int(severity) + 0.1
    if direction == "darken":
        gain = -gain
    arr = img.pixels.astype(np.float32) / 255.0
    h, s, lum = _rgb_to_hsl(arr)
    out = _hsl_to_rgb(h, s, np.clip(lum + gain, 0.0, 1.0))
    return RasterImage(np.clip(np.rint(out * 255.0), 0, 255).astype(np.uint8))


# ---------------------------------------------------------------------------
# motion blur

def motion_kernel(k: int, angle_deg: float) -> np.ndarray:
    """k x k kernel whose support is a one-pixel-wide line through the center
    at the given angle; uniform weights summing to one."""
    if k < 3 or k % 2 == 0:
        raise ValueError("kernel size must be odd and >= 3")
    half = (k - 1) / 2.0
    t = np.arange(k, dtype=np.float64) - half
    rad = math.radians(angle_deg)
    dx = np.rint(t * math.cos(rad)).astype(int)
    dy = np.rint(t * math.sin(rad)).astype(int)
    taps = sorted(set(zip(dy.tolist(), dx.tolist())))
    kernel = np.zeros((k, k), dtype=np.float64)
    c = (k - 1) // 2
    for oy, ox in taps:
        kernel[c + oy, c + ox] = 1.0
    return kernel / kernel.sum()


def convolve_motion_blur(img: RasterImage, k: int, angle_deg: float) -> RasterImage:
    """Correlate each channel with the line kernel; borders use edge replication.
    Constant images are exact fixed points."""
    kernel = motion_kernel(k, angle_deg)
    c = (k - 1) // 2
    taps = [(oy - c, ox - c) for oy, ox in zip(*np.nonzero(kernel))]
    src = img.pixels.astype(np.float64)
    h, w = src.shape[:2]
    ys = np.arange(h)
    xs = np.arange(w)
    acc = np.zeros_like(src)
    for dy, dx in taps:
        rows = np.clip(ys + dy, 0, h - 1)
        cols = np.clip(xs + dx, 0, w - 1)
        acc += src[rows][:, cols]
    out = acc / len(taps)
    return RasterImage(np.clip(np.rint(out), 0, 255).astype(np.uint8))


# ---------------------------------------------------------------------------
# gradient-domain blending

_N4 = ((-1, 0), (1, 0), (0, -1), (0, 1))


def poisson_blend(dst: RasterImage, patch: Patch) -> RasterImage:
    """Solve the discrete Poisson equation on the masked region with the patch
    gradients as guidance and the destination as Dirichlet boundary.

    Gauss-Seidel (red-black, fixed sweep order) runs until the residual drops
    below 1e-3 per channel or 500 iterations. Pixels outside the mask are
    byte-identical to the input.
    """
    x0, y0 = patch.origin
    ph, pw = patch.pixels.height, patch.pixels.width
    H, W = dst.height, dst.width
    if x0 < 0 or y0 < 0 or x0 + pw > W or y0 + ph > H:
        raise PatchOutOfBounds(
            f"patch {pw}x{ph} at ({x0}, {y0}) does not fit in {W}x{H}"
        )
    interior = patch.mask >= 0.5
    if not interior.any():
        return dst

    # Work on a one-pixel frame around the patch so Dirichlet values are local.
    fy0, fx0 = y0 - 1, x0 - 1
    fh, fw = ph + 2, pw + 2
    valid = np.zeros((fh, fw), dtype=bool)  # inside the destination image
    gy0, gy1 = max(0, fy0), min(H, fy0 + fh)
    gx0, gx1 = max(0, fx0), min(W, fx0 + fw)
    valid[gy0 - fy0: gy1 - fy0, gx0 - fx0: gx1 - fx0] = True

    unknown = np.zeros((fh, fw), dtype=bool)
    unknown[1:-1, 1:-1] = interior
    known = valid & ~unknown

    # guidance field: patch pixels with edge replication across the frame ring
    g = np.pad(patch.pixels.pixels.astype(np.float64), ((1, 1), (1, 1), (0, 0)), mode="edge")

    f = np.zeros((fh, fw, 3), dtype=np.float64)
    f[valid] = 0.0
    dst_region = np.zeros((fh, fw, 3), dtype=np.float64)
    dst_region[gy0 - fy0: gy1 - fy0, gx0 - fx0: gx1 - fx0] = dst.pixels[gy0:gy1, gx0:gx1].astype(np.float64)
    f[known] = dst_region[known]
    f[unknown] = g[unknown]  # initial guess

    # per-pixel neighbor bookkeeping on the frame grid
    deg = np.zeros((fh, fw), dtype=np.float64)
    guide = np.zeros((fh, fw, 3), dtype=np.float64)
    for dy, dx in _N4:
        nb_valid = np.zeros((fh, fw), dtype=bool)
        nb_valid[1:-1, 1:-1] = valid[1 + dy: fh - 1 + dy, 1 + dx: fw - 1 + dx]
        deg[1:-1, 1:-1] += nb_valid[1:-1, 1:-1]
        shifted_g = np.roll(g, (-dy, -dx), axis=(0, 1))
        guide[1:-1, 1:-1] += np.where(
            nb_valid[1:-1, 1:-1, None], g[1:-1, 1:-1] - shifted_g[1:-1, 1:-1], 0.0
        )

    yy, xx = np.nonzero(unknown)
    red = (yy + xx) % 2 == 0
    groups = [(yy[red], xx[red]), (yy[~red], xx[~red])]

    def neighbor_sum(field: np.ndarray, ys: np.ndarray, xs: np.ndarray) -> np.ndarray:
        total = np.zeros((len(ys), field.shape[-1]), dtype=np.float64)
        for dy, dx in _N4:
            ny, nx = ys + dy, xs + dx
            ok = valid[ny, nx]
            total[ok] += field[ny[ok], nx[ok]]
        return total

    for _ in range(500):
        for ys, xs in groups:
            if len(ys) == 0:
                continue
            f[ys, xs] = (guide[ys, xs] + neighbor_sum(f, ys, xs)) / deg[ys, xs, None]
        resid = guide[yy, xx] + neighbor_sum(f, yy, xx) - deg[yy, xx, None] * f[yy, xx]
        if np.abs(resid).max() < 1e-3:
            break

    out = dst.pixels.copy()
    vals = np.clip(np.rint(f[1:-1, 1:-1]), 0, 255).astype(np.uint8)
    region = out[y0: y0 + ph, x0: x0 + pw]
    region[interior] = vals[interior]
    return RasterImage(out)


# ---------------------------------------------------------------------------
# inpainting

def inpaint(img: RasterImage, region: np.ndarray, smooth_iters: int = 4) -> RasterImage:
    """Diffusion inpainting: march inward ring by ring (taxicab distance to the
    known region), filling each pixel with the mean of its already-known
    4-neighbors, then run a few smoothing sweeps over the filled region.
    Unmasked pixels are byte-identical to the input."""
    mask = np.asarray(region, dtype=bool)
    H, W = img.height, img.width
    if mask.shape != (H, W):
        raise ValueError(f"mask shape {mask.shape} does not match image {H}x{W}")
    if not mask.any():
        return img
    if mask.all():
        raise MaskCoversImage("mask covers the whole image")

    vals = img.pixels.astype(np.float64)
    dist = distance_transform_cdt(mask, metric="taxicab")
    my, mx = np.nonzero(mask)
    dists = dist[my, mx]
    order = np.argsort(dists, kind="stable")
    my, mx, dists = my[order], mx[order], dists[order]
    boundaries = np.searchsorted(dists, np.arange(1, dists.max() + 1), side="right")
    known = ~mask

    start = 0
    for level, stop in enumerate(boundaries, start=1):
        ys, xs = my[start:stop], mx[start:stop]
        if len(ys) == 0:
            start = stop
            continue
        acc = np.zeros((len(ys), 3), dtype=np.float64)
        cnt = np.zeros(len(ys), dtype=np.float64)
        for dy, dx in _N4:
            ny, nx = ys + dy, xs + dx
            ok = (ny >= 0) & (ny < H) & (nx >= 0) & (nx < W)
            ok[ok] &= known[ny[ok], nx[ok]]
            acc[ok] += vals[ny[ok], nx[ok]]
            cnt[ok] += 1.0
        # every ring pixel touches the previous ring, so cnt >= 1 always
        vals[ys, xs] = acc / cnt[:, None]
        known[ys, xs] = True
        start = stop

    for _ in range(smooth_iters):
        acc = np.zeros((len(my), 3), dtype=np.float64)
        cnt = np.zeros(len(my), dtype=np.float64)
        for dy, dx in _N4:
            ny, nx = my + dy, mx + dx
            ok = (ny >= 0) & (ny < H) & (nx >= 0) & (nx < W)
            acc[ok] += vals[ny[ok], nx[ok]]
            cnt[ok] += 1.0
        vals[my, mx] = acc / cnt[:, None]

    out = img.pixels.copy()
    out[mask] = np.clip(np.rint(vals[mask]), 0, 255).astype(np.uint8)
    return RasterImage(out)


# ---------------------------------------------------------------------------
# resampling

def resample_bilinear(img: RasterImage, new_w: int, new_h: int) -> RasterImage:
    """Edge-aligned bilinear resize (continuous coordinates scale by
    new/old, so box edges map through x' = x * new_w / old_w)."""
    if new_w < 1 or new_h < 1:
        raise ValueError("target dimensions must be at least 1")
    pil = Image.fromarray(img.pixels, mode="RGB")
    out = pil.resize((new_w, new_h), Image.Resampling.BILINEAR)
    return RasterImage(np.asarray(out, dtype=np.uint8))


# ---------------------------------------------------------------------------
# procedural layers

def _composite(base: np.ndarray, color: tuple[float, float, float], alpha: np.ndarray) -> np.ndarray:
    col = np.array(color, dtype=np.float64)
    return base * (1.0 - alpha[..., None]) + col[None, None, :] * alpha[..., None]


def _value_noise(h: int, w: int, rng: np.random.Generator, octaves: int = 3) -> np.ndarray:
    """Seeded low-frequency value noise in [0, 1]: bilinearly upsampled random
    grids summed over octaves with halving amplitude."""
    total = np.zeros((h, w), dtype=np.float64)
    norm = 0.0
    cell = max(8.0, min(h, w) / 4.0)
    amp = 1.0
    for _ in range(octaves):
        gh = max(2, int(math.ceil(h / cell)) + 1)
        gw = max(2, int(math.ceil(w / cell)) + 1)
        grid = rng.random((gh, gw))
        yy = np.linspace(0.0, gh - 1.0, h)
        xx = np.linspace(0.0, gw - 1.0, w)
        y0 = np.minimum(yy.astype(int), gh - 2)
        x0 = np.minimum(xx.astype(int), gw - 2)
        fy = (yy - y0)[:, None]
        fx = (xx - x0)[None, :]
        g00 = grid[y0][:, x0]
        g01 = grid[y0][:, x0 + 1]
        g10 = grid[y0 + 1][:, x0]
        g11 = grid[y0 + 1][:, x0 + 1]
        layer = g00 * (1 - fy) * (1 - fx) + g01 * (1 - fy) * fx + g10 * fy * (1 - fx) + g11 * fy * fx
        total += amp * layer
        norm += amp
        amp /= 2.0
        cell = max(2.0, cell / 2.0)
    return total / norm


def render_rain(
    img: RasterImage,
    drop_size: tuple[float, float],
    speed: tuple[float, float],
    seed: int,
) -> RasterImage:
    """Seeded rain streaks. Streak count and length scale with the speed
    interval, streak thickness with drop size. A degenerate (0, 0) speed
    interval yields zero particles and returns the image unchanged."""
    h, w = img.height, img.width
    rng = np.random.default_rng(seed)
    mean_speed = (speed[0] + speed[1]) / 2.0
    n = int(round(w * h * 0.0010 * mean_speed))
    if n <= 0:
        return img
    slant = math.radians(rng.uniform(-8.0, 8.0))
    xs0 = rng.uniform(0, w, n)
    ys0 = rng.uniform(0, h, n)
    sp = rng.uniform(speed[0], speed[1], n)
    lengths = np.maximum(2.0, sp * h * 0.12)
    sizes = rng.uniform(drop_size[0], drop_size[1], n)
    thick = np.maximum(1, np.rint(sizes * 10.0).astype(int))

    alpha = np.zeros((h, w), dtype=np.float64)
    dx, dy = math.sin(slant), math.cos(slant)
    pts_y: list[np.ndarray] = []
    pts_x: list[np.ndarray] = []
    for i in range(n):
        steps = np.arange(int(lengths[i]))
        py = np.rint(ys0[i] + steps * dy).astype(int)
        px = np.rint(xs0[i] + steps * dx).astype(int)
        for off in range(thick[i]):
            pts_y.append(py)
            pts_x.append(px + off)
    ally = np.concatenate(pts_y)
    allx = np.concatenate(pts_x)
    ok = (ally >= 0) & (ally < h) & (allx >= 0) & (allx < w)
    np.add.at(alpha, (ally[ok], allx[ok]), 0.18)
    alpha = np.clip(alpha, 0.0, 0.55)
    out = _composite(img.pixels.astype(np.float64), (215.0, 222.0, 232.0), alpha)
    return RasterImage(np.clip(np.rint(out), 0, 255).astype(np.uint8))


def render_snow(img: RasterImage, severity: int, seed: int) -> RasterImage:
    """Seeded snowflakes: soft white disks, count and radius grow with severity."""
    if not 1 <= int(severity) <= 5:
        raise ValueError("severity must lie in 1..5")
    h, w = img.height, img.width
    rng = np.random.default_rng(seed)
    n = int(round(w * h * 0.0004 * severity))
    alpha = np.zeros((h, w), dtype=np.float64)
    if n > 0:
        xs = rng.uniform(0, w, n)
        ys = rng.uniform(0, h, n)
        radii = rng.integers(1, 2 + severity, n)
        strengths = rng.uniform(0.5, 0.85, n)
        for i in range(n):
            r = int(radii[i])
            cy, cx = ys[i], xs[i]
            y0, y1 = max(0, int(cy) - r), min(h, int(cy) + r + 1)
            x0, x1 = max(0, int(cx) - r), min(w, int(cx) + r + 1)
            if y0 >= y1 or x0 >= x1:
                continue
            gy = np.arange(y0, y1)[:, None] - cy
            gx = np.arange(x0, x1)[None, :] - cx
            d2 = gy * gy + gx * gx
            blob = np.maximum(0.0, 1.0 - d2 / (r * r + 1e-9)) * strengths[i]
            np.maximum(alpha[y0:y1, x0:x1], blob, out=alpha[y0:y1, x0:x1])
    out = _composite(img.pixels.astype(np.float64), (248.0, 250.0, 252.0), alpha)
    return RasterImage(np.clip(np.rint(out), 0, 255).astype(np.uint8))


def render_fog(img: RasterImage, severity: int, seed: int) -> RasterImage:
    """White layer whose per-pixel opacity comes from seeded low-frequency value
    noise scaled by severity; opacity is strictly positive everywhere, so mean
    luminance strictly increases on any image that is not already white."""
    if not 1 <= int(severity) <= 5:
        raise ValueError("severity must lie in 1..5")
    h, w = img.height, img.width
    rng = np.random.default_rng(seed)
    noise = _value_noise(h, w, rng, octaves=3)
    alpha = np.clip(0.08 * severity + 0.18 * severity * noise, 0.0, 0.95)
    out = _composite(img.pixels.astype(np.float64), (255.0, 255.0, 255.0), alpha)
    return RasterImage(np.clip(np.rint(out), 0, 255).astype(np.uint8))


def render_flare(img: RasterImage, center: tuple[float, float], seed: int) -> RasterImage:
    """Lens flare: additive radial glare at `center`, ghost disks along the line
    through the image center, and a fixed 10% brightness lift applied to the
    image half (top or bottom) that contains the flare."""
    h, w = img.height, img.width
    cx, cy = float(center[0]), float(center[1])
    rng = np.random.default_rng(seed)
    yy = np.arange(h, dtype=np.float64)[:, None]
    xx = np.arange(w, dtype=np.float64)[None, :]
    d2 = (xx - cx) ** 2 + (yy - cy) ** 2
    sigma = 0.16 * min(w, h)
    alpha = 0.85 * np.exp(-d2 / (2.0 * sigma * sigma))
    alpha += 0.25 * np.exp(-d2 / (2.0 * (3.0 * sigma) ** 2))

    # ghost disks on the far side of the image center
    vx, vy = (w / 2.0 - cx), (h / 2.0 - cy)
    for t, rfrac, a in ((0.9, 0.030, 0.16), (1.4, 0.018, 0.12), (1.8, 0.045, 0.13), (2.2, 0.024, 0.10)):
        gx = cx + t * vx
        gy = cy + t * vy
        r = rfrac * min(w, h) * rng.uniform(0.8, 1.2)
        gd2 = (xx - gx) ** 2 + (yy - gy) ** 2
        alpha += a * np.maximum(0.0, 1.0 - gd2 / (r * r))

    out = img.pixels.astype(np.float64)
    warm = np.array([255.0, 246.0, 228.0])
    out = out + warm[None, None, :] * np.clip(alpha, 0.0, 1.0)[..., None]

    half = slice(0, h // 2) if cy < h / 2.0 else slice(h // 2, h)
    out[half] = out[half] * 1.10
    return RasterImage(np.clip(np.rint(out), 0, 255).astype(np.uint8))
