"""Minimal line-plot rasterizer.

Renders stacked curve panels straight into a grayscale pixel array and
writes them as PNG, so plots need no plotting dependency.  CSV files remain
the canonical analysis output; these images are quick-look companions.
No text is drawn: each panel shows its curves, an axes frame, and optional
vertical marker lines (dashed).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

MARGIN = 12
FRAME_GRAY = 120
CURVE_GRAYS = (0, 90, 160)


@dataclass
class Panel:
    curves: list[tuple[np.ndarray, np.ndarray]]
    vlines: list[float] = field(default_factory=list)
    y_range: tuple[float, float] | None = None


def _finite_xy(x: np.ndarray, y: np.ndarray):
    m = np.isfinite(x) & np.isfinite(y)
    return x[m], y[m]


def _data_ranges(panel: Panel):
    xs, ys = [], []
    for x, y in panel.curves:
        fx, fy = _finite_xy(np.asarray(x, float), np.asarray(y, float))
        if fx.size:
            xs.append(fx)
            ys.append(fy)
    if not xs:
        return (0.0, 1.0), (0.0, 1.0)
    ax = np.concatenate(xs)
    ay = np.concatenate(ys)
    x0, x1 = float(ax.min()), float(ax.max())
    if panel.y_range is not None:
        y0, y1 = panel.y_range
    else:
        y0, y1 = float(ay.min()), float(ay.max())
    if x1 - x0 < 1e-12:
        x0, x1 = x0 - 0.5, x1 + 0.5
    if y1 - y0 < 1e-12:
        y0, y1 = y0 - 0.5, y1 + 0.5
    return (x0, x1), (y0, y1)


def _draw_line(canvas, r0, c0, r1, c1, value):
    n = int(max(abs(r1 - r0), abs(c1 - c0))) + 1
    rr = np.rint(np.linspace(r0, r1, n)).astype(int)
    cc = np.rint(np.linspace(c0, c1, n)).astype(int)
    ok = (rr >= 0) & (rr < canvas.shape[0]) & (cc >= 0) & (cc < canvas.shape[1])
    canvas[rr[ok], cc[ok]] = value


def render_panels(panels: list[Panel], width: int = 560,
                  panel_height: int = 200) -> np.ndarray:
    """Rasterize panels stacked vertically; returns a uint8 canvas."""
    height = panel_height * len(panels)
    canvas = np.full((height, width), 255, dtype=np.uint8)
    for pi, panel in enumerate(panels):
        top = pi * panel_height + MARGIN
        bottom = (pi + 1) * panel_height - MARGIN
        left, right = MARGIN, width - MARGIN
        canvas[top, left:right + 1] = FRAME_GRAY
        canvas[bottom, left:right + 1] = FRAME_GRAY
        canvas[top:bottom + 1, left] = FRAME_GRAY
        canvas[top:bottom + 1, right] = FRAME_GRAY
        (x0, x1), (y0, y1) = _data_ranges(panel)

        def to_px(x, y):
            c = left + (x - x0) / (x1 - x0) * (right - left)
            r = bottom - (y - y0) / (y1 - y0) * (bottom - top)
            return r, c

        for ci, (x, y) in enumerate(panel.curves):
            fx, fy = _finite_xy(np.asarray(x, float), np.asarray(y, float))
            if fx.size < 1:
                continue
            shade = CURVE_GRAYS[ci % len(CURVE_GRAYS)]
            rs, cs = to_px(fx, np.clip(fy, y0, y1))
            for i in range(len(fx) - 1):
                _draw_line(canvas, rs[i], cs[i], rs[i + 1], cs[i + 1], shade)
            if len(fx) == 1:
                _draw_line(canvas, rs[0], cs[0], rs[0], cs[0], shade)
        for vx in panel.vlines:
            if not np.isfinite(vx) or not (x0 <= vx <= x1):
                continue
            _, c = to_px(vx, y0)
            col = int(round(c))
            rows = np.arange(top + 1, bottom)
            rows = rows[(rows // 3) % 2 == 0]  # dashed
            canvas[rows, col] = 60
    return canvas


def save_plot(panels: list[Panel], path, width: int = 560,
              panel_height: int = 200) -> None:
    from .image import _save_png_l

    _save_png_l(render_panels(panels, width, panel_height), path)
