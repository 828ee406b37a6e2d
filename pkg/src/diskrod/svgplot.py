"""Minimal deterministic SVG line plots (no plotting library, byte-stable)."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

_COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]


@dataclass
class Series:
    x: np.ndarray
    y: np.ndarray
    label: str = ""
    color: str | None = None
    dashed: bool = False


@dataclass
class Panel:
    title: str
    xlabel: str
    ylabel: str
    series: list[Series] = field(default_factory=list)
    vlines: list[float] = field(default_factory=list)
    hlines: list[float] = field(default_factory=list)
    equal_aspect: bool = False


def _fmt(v: float) -> str:
    return f"{v:.3f}"


def _limits(panel: Panel):
    xs = np.concatenate([np.asarray(s.x, float) for s in panel.series])
    ys = np.concatenate([np.asarray(s.y, float) for s in panel.series])
    if panel.vlines:
        xs = np.concatenate([xs, np.asarray(panel.vlines, float)])
    if panel.hlines:
        ys = np.concatenate([ys, np.asarray(panel.hlines, float)])
    x0, x1 = float(xs.min()), float(xs.max())
    y0, y1 = float(ys.min()), float(ys.max())
    dx = (x1 - x0) or 1.0
    dy = (y1 - y0) or 1.0
    return x0 - 0.05 * dx, x1 + 0.05 * dx, y0 - 0.05 * dy, y1 + 0.05 * dy


def render_panels(panels: list[Panel], panel_width: int = 440,
                  panel_height: int = 300) -> str:
    """Stack panels side by side into one SVG document string."""
    margin = dict(left=64, right=16, top=32, bottom=44)
    total_w = panel_width * len(panels)
    total_h = panel_height
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{total_w}" '
        f'height="{total_h}" viewBox="0 0 {total_w} {total_h}">',
        f'<rect width="{total_w}" height="{total_h}" fill="white"/>',
    ]
    for p_idx, panel in enumerate(panels):
        ox = p_idx * panel_width
        x0, x1, y0, y1 = _limits(panel)
        if panel.equal_aspect:
            plot_w = panel_width - margin["left"] - margin["right"]
            plot_h = panel_height - margin["top"] - margin["bottom"]
            span = max((x1 - x0) / plot_w, (y1 - y0) / plot_h)
            cx, cy = 0.5 * (x0 + x1), 0.5 * (y0 + y1)
            x0, x1 = cx - 0.5 * span * plot_w, cx + 0.5 * span * plot_w
            y0, y1 = cy - 0.5 * span * plot_h, cy + 0.5 * span * plot_h

        def sx(v):
            return ox + margin["left"] + (v - x0) / (x1 - x0) * (
                panel_width - margin["left"] - margin["right"])

        def sy(v):
            return panel_height - margin["bottom"] - (v - y0) / (y1 - y0) * (
                panel_height - margin["top"] - margin["bottom"])

        # frame and labels
        fx0, fy0 = sx(x0), sy(y1)
        fw = panel_width - margin["left"] - margin["right"]
        fh = panel_height - margin["top"] - margin["bottom"]
        out.append(f'<rect x="{_fmt(fx0)}" y="{_fmt(fy0)}" width="{_fmt(fw)}" '
                   f'height="{_fmt(fh)}" fill="none" stroke="#333" stroke-width="1"/>')
        out.append(f'<text x="{_fmt(ox + panel_width / 2)}" y="20" text-anchor="middle" '
                   f'font-family="sans-serif" font-size="13">{panel.title}</text>')
        out.append(f'<text x="{_fmt(ox + panel_width / 2)}" y="{panel_height - 10}" '
                   f'text-anchor="middle" font-family="sans-serif" font-size="11">'
                   f'{panel.xlabel}</text>')
        out.append(f'<text x="{ox + 14}" y="{_fmt(panel_height / 2)}" text-anchor="middle" '
                   f'font-family="sans-serif" font-size="11" '
                   f'transform="rotate(-90 {ox + 14} {_fmt(panel_height / 2)})">'
                   f'{panel.ylabel}</text>')
        # axis extremes
        for v, anchor in ((x0, "start"), (x1, "end")):
            out.append(f'<text x="{_fmt(sx(v))}" y="{panel_height - 26}" '
                       f'text-anchor="{anchor}" font-family="sans-serif" '
                       f'font-size="10">{_fmt(v)}</text>')
        for v in (y0, y1):
            out.append(f'<text x="{_fmt(ox + margin["left"] - 4)}" y="{_fmt(sy(v) + 3)}" '
                       f'text-anchor="end" font-family="sans-serif" font-size="10">'
                       f'{_fmt(v)}</text>')
        for v in panel.vlines:
            out.append(f'<line x1="{_fmt(sx(v))}" y1="{_fmt(sy(y0))}" '
                       f'x2="{_fmt(sx(v))}" y2="{_fmt(sy(y1))}" '
                       f'stroke="#bbb" stroke-width="0.7" stroke-dasharray="3,3"/>')
        for v in panel.hlines:
            out.append(f'<line x1="{_fmt(sx(x0))}" y1="{_fmt(sy(v))}" '
                       f'x2="{_fmt(sx(x1))}" y2="{_fmt(sy(v))}" '
                       f'stroke="#bbb" stroke-width="0.7" stroke-dasharray="3,3"/>')
        for s_idx, series in enumerate(panel.series):
            color = series.color or _COLORS[s_idx % len(_COLORS)]
            pts = " ".join(f"{_fmt(sx(px))},{_fmt(sy(py))}"
                           for px, py in zip(series.x, series.y))
            dash = ' stroke-dasharray="5,4"' if series.dashed else ""
            out.append(f'<polyline points="{pts}" fill="none" stroke="{color}" '
                       f'stroke-width="1.5"{dash}/>')
            if series.label:
                lx = ox + margin["left"] + 8
                ly = margin["top"] + 14 + 14 * s_idx
                out.append(f'<line x1="{lx}" y1="{ly - 4}" x2="{lx + 18}" y2="{ly - 4}" '
                           f'stroke="{color}" stroke-width="1.5"{dash}/>')
                out.append(f'<text x="{lx + 22}" y="{ly}" font-family="sans-serif" '
                           f'font-size="10">{series.label}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
