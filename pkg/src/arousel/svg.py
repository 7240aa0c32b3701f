"""Minimal deterministic SVG drawer for the pipeline's two figures.

No plotting dependency: the figures the pipeline emits are a bar chart
(percent of features selected vs target FDR) and scatter panels with a
fitted line (response vs each selected feature).  Output is plain SVG text
with no timestamps, so identical inputs produce byte-identical files; the
producing config hash is embedded as an XML comment.
"""

from __future__ import annotations

import math
from pathlib import Path

_PALETTE = ("#4878d0", "#ee854a", "#6acc64", "#d65f5f", "#956cb4", "#8c613c")
_AXIS = "#444444"
_GRID = "#dddddd"


def _fmt(v: float) -> str:
    out = f"{v:.2f}".rstrip("0").rstrip(".")
    return "0" if out == "-0" else out


def _nice_ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if not math.isfinite(lo) or not math.isfinite(hi):
        return [0.0, 1.0]
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / max(n, 1)
    mag = 10.0 ** math.floor(math.log10(raw))
    step = next(s * mag for s in (1, 2, 5, 10) if s * mag >= raw)
    first = math.ceil(lo / step) * step
    ticks = []
    t = first
    while t <= hi + 1e-12 * step:
        ticks.append(0.0 if abs(t) < 1e-12 else t)
        t += step
    return ticks or [lo, hi]


class _Canvas:
    def __init__(self, width: int, height: int, config_hash: str):
        self.width, self.height = width, height
        self.parts = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
            f'height="{height}" viewBox="0 0 {width} {height}">',
            f"<!-- config-hash: {config_hash or 'none'} -->",
            f'<rect width="{width}" height="{height}" fill="white"/>',
        ]

    def line(self, x1, y1, x2, y2, color=_AXIS, width=1.0):
        self.parts.append(
            f'<line x1="{_fmt(x1)}" y1="{_fmt(y1)}" x2="{_fmt(x2)}" y2="{_fmt(y2)}" '
            f'stroke="{color}" stroke-width="{_fmt(width)}"/>'
        )

    def rect(self, x, y, w, h, color):
        self.parts.append(
            f'<rect x="{_fmt(x)}" y="{_fmt(y)}" width="{_fmt(w)}" height="{_fmt(h)}" '
            f'fill="{color}"/>'
        )

    def circle(self, x, y, r, color):
        self.parts.append(
            f'<circle cx="{_fmt(x)}" cy="{_fmt(y)}" r="{_fmt(r)}" fill="{color}" '
            f'fill-opacity="0.75"/>'
        )

    def text(self, x, y, s, size=11, anchor="middle", color="#000000", rotate=None):
        transform = f' transform="rotate({rotate} {_fmt(x)} {_fmt(y)})"' if rotate else ""
        self.parts.append(
            f'<text x="{_fmt(x)}" y="{_fmt(y)}" font-family="sans-serif" '
            f'font-size="{size}" text-anchor="{anchor}" fill="{color}"{transform}>'
            f"{_escape(s)}</text>"
        )

    def save(self, path) -> None:
        self.parts.append("</svg>")
        Path(path).write_text("\n".join(self.parts) + "\n")


def _escape(s: str) -> str:
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def _frame(cv: _Canvas, box, xlabel, ylabel, title):
    x0, y0, x1, y1 = box
    cv.line(x0, y1, x1, y1)
    cv.line(x0, y0, x0, y1)
    if title:
        cv.text((x0 + x1) / 2, y0 - 8, title, size=13)
    if xlabel:
        cv.text((x0 + x1) / 2, y1 + 32, xlabel)
    if ylabel:
        cv.text(x0 - 38, (y0 + y1) / 2, ylabel, rotate=-90)


def bar_chart(
    path,
    categories: list[str],
    values: list[float],
    *,
    title: str = "",
    xlabel: str = "",
    ylabel: str = "",
    config_hash: str = "",
    width: int = 560,
    height: int = 360,
) -> None:
    """Vertical bar chart with value labels above each bar."""
    cv = _Canvas(width, height, config_hash)
    box = (60.0, 30.0, width - 20.0, height - 45.0)
    x0, y0, x1, y1 = box
    vmax = max([v for v in values if math.isfinite(v)] + [0.0])
    ticks = _nice_ticks(0.0, vmax * 1.15 if vmax > 0 else 1.0)
    top = ticks[-1]

    def sy(v):
        return y1 - (v / top) * (y1 - y0) if top > 0 else y1

    for t in ticks:
        cv.line(x0, sy(t), x1, sy(t), color=_GRID)
        cv.text(x0 - 6, sy(t) + 4, _fmt(t), anchor="end", size=10)
    slot = (x1 - x0) / max(len(values), 1)
    bw = slot * 0.6
    for i, (cat, v) in enumerate(zip(categories, values)):
        cx = x0 + (i + 0.5) * slot
        if math.isfinite(v):
            cv.rect(cx - bw / 2, sy(v), bw, y1 - sy(v), _PALETTE[0])
            cv.text(cx, sy(v) - 4, _fmt(v), size=10)
        cv.text(cx, y1 + 16, str(cat), size=10)
    _frame(cv, box, xlabel, ylabel, title)
    cv.save(path)


def effects_plot(
    path,
    panels: list[dict],
    *,
    title: str = "",
    config_hash: str = "",
    panel_width: int = 320,
    panel_height: int = 300,
) -> None:
    """Scatter panels with a fitted line; points colored by class label.

    Each panel dict: ``name``, ``x``, ``y`` (sequences), ``slope``,
    ``intercept``, optional ``classes`` (one label per point).
    """
    n = max(len(panels), 1)
    cols = min(n, 3)
    rows = (n + cols - 1) // cols
    width = 40 + cols * panel_width
    height = 40 + rows * panel_height + (30 if _class_names(panels) else 0)
    cv = _Canvas(width, height, config_hash)
    if title:
        cv.text(width / 2, 20, title, size=14)

    class_names = _class_names(panels)
    colors = {c: _PALETTE[i % len(_PALETTE)] for i, c in enumerate(class_names)}

    for k, panel in enumerate(panels):
        r, c = divmod(k, cols)
        px0 = 40 + c * panel_width + 45.0
        py0 = 40 + r * panel_height + 15.0
        px1 = 40 + (c + 1) * panel_width - 20.0
        py1 = 40 + (r + 1) * panel_height - 45.0
        box = (px0, py0, px1, py1)

        xs = [float(v) for v in panel["x"]]
        ys = [float(v) for v in panel["y"]]
        xt = _nice_ticks(min(xs), max(xs), 4)
        yt = _nice_ticks(min(ys), max(ys), 4)
        xlo, xhi = min(xt[0], min(xs)), max(xt[-1], max(xs))
        ylo, yhi = min(yt[0], min(ys)), max(yt[-1], max(ys))

        def sx(v):
            return px0 + (v - xlo) / (xhi - xlo or 1.0) * (px1 - px0)

        def sy(v):
            return py1 - (v - ylo) / (yhi - ylo or 1.0) * (py1 - py0)

        for t in xt:
            cv.line(sx(t), py1, sx(t), py1 + 4)
            cv.text(sx(t), py1 + 16, _fmt(t), size=9)
        for t in yt:
            cv.line(px0 - 4, sy(t), px0, sy(t))
            cv.text(px0 - 7, sy(t) + 3, _fmt(t), anchor="end", size=9)

        labels = panel.get("classes")
        for i, (xv, yv) in enumerate(zip(xs, ys)):
            color = colors.get(str(labels[i]), _PALETTE[0]) if labels else _PALETTE[0]
            cv.circle(sx(xv), sy(yv), 3.0, color)

        slope, intercept = float(panel["slope"]), float(panel["intercept"])
        ya, yb = intercept + slope * xlo, intercept + slope * xhi
        cv.line(sx(xlo), sy(ya), sx(xhi), sy(yb), color="#222222", width=1.6)
        _frame(cv, box, panel["name"], "response" if c == 0 else "", "")

    if class_names:
        lx = 50.0
        ly = height - 12.0
        for cname in class_names:
            cv.circle(lx, ly - 4, 4.0, colors[cname])
            cv.text(lx + 9, ly, cname, anchor="start", size=10)
            lx += 9 + 7.0 * len(cname) + 26
    cv.save(path)


def _class_names(panels: list[dict]) -> list[str]:
    names: dict[str, None] = {}
    for panel in panels:
        for lab in panel.get("classes") or ():
            names.setdefault(str(lab), None)
    return sorted(names)
