"""
Label geometry, worked by hand
==============================

The three light transforms that change labels do so with closed-form box
arithmetic. This script walks one concrete box through each equation and
prints every number so you can check them with a calculator.
"""

import tigaug as tg

W, H = 1280.0, 720.0
b = tg.LightBox(600.0, 300.0, 680.0, 420.0, tg.LightState.GO_LEFT)
print(f"box: ({b.x1}, {b.y1}, {b.x2}, {b.y2})  {b.width}x{b.height}  state {b.state.value}")
print()

# Moving a light shifts it horizontally by exactly its own width, so the
# moved copy never overlaps where it used to be.
for direction in (1, -1):
    m = tg.mp_label(b, direction)
    print(f"mp direction {direction:+d}: ({m.x1}, {m.y1}, {m.x2}, {m.y2})"
          f"  overlap with original: {tg.iou(b, m):.1f}")
print()

# Rotating a light swaps width and height about the box center and
# straightens arrow states, since a sideways arrow no longer points left.
r = tg.rt_label(b)
print(f"rt: ({r.x1}, {r.y1}, {r.x2}, {r.y2})  {r.width}x{r.height}  state {r.state.value}")
print(f"    center kept: {tg.box_center(b)} -> {tg.box_center(r)}")
print(f"    area kept:   {b.area()} -> {r.area()}")
print("    straightened states:",
      {s.value: s.straightened().value for s in tg.LightState})
print()

# Scaling pads the frame by pad_w columns in total (half on each side, same
# for rows) and resizes back to the original size, so every coordinate
# contracts toward the image center: x -> (x + pad_w / 2) * W / (W + pad_w).
params = tg.TransformParams()
s = tg.sc_label(b, W, H, params)
print(f"sc with pads ({params.sc_pad_w}, {params.sc_pad_h}):"
      f" ({s.x1:.2f}, {s.y1:.2f}, {s.x2:.2f}, {s.y2:.2f})")
print(f"    x1 check: ({b.x1} + {params.sc_pad_w // 2}) * {W} / {W + params.sc_pad_w}"
      f" = {(b.x1 + params.sc_pad_w / 2) * W / (W + params.sc_pad_w):.2f}")

# A box sitting exactly on the image center only shrinks, it does not drift.
c = tg.LightBox(W / 2 - 40, H / 2 - 60, W / 2 + 40, H / 2 + 60, tg.LightState.GO)
sc = tg.sc_label(c, W, H, params)
print(f"    centered box keeps its center: {tg.box_center(sc)} (image center {(W / 2, H / 2)})")
print()

# Two small helpers the transforms lean on: clamping to the frame and IoU.
wild = tg.LightBox(-20.0, -10.0, 50.0, 200.0, tg.LightState.STOP)
clamped = tg.clamp_box(wild, 320.0, 180.0)
print(f"clamp ({wild.x1}, {wild.y1}, {wild.x2}, {wild.y2}) into 320x180:"
      f" ({clamped.x1}, {clamped.y1}, {clamped.x2}, {clamped.y2})")
a = tg.LightBox(0, 0, 10, 30, tg.LightState.GO)
d = tg.LightBox(0, 10, 10, 40, tg.LightState.GO)
print(f"iou of two 10x30 boxes offset by 10: {tg.iou(a, d)}")
print()

# State flips used by the color change: stop <-> go, arrows pair with
# arrows, and warning has no opposite so it maps to itself.
print("opposite states:", {s.value: s.opposite().value for s in tg.LightState})
print("opposite twice is the identity:",
      all(s.opposite().opposite() is s for s in tg.LightState))
