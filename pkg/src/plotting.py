"""
SVG figures drawn from primitives (rect, polyline, text).

Two kinds are supported:
- histogram: occupation samples, with the Lamperti density overlaid for d = 2
- loglog: tail or decay sequences, with the fitted slope annotated
"""

from __future__ import annotations

import math
import os
from html import escape

import numpy as np

from .arcsine import lamperti_pdf
from .asymptotics import fit_loglog
from .config import SVG_HEIGHT, SVG_HISTOGRAM_BINS, SVG_MARGIN, SVG_WIDTH
from .output_writer import SchemaError, read_csv

PLOT_KINDS: dict[str, tuple[str, ...]] = {
    "histogram": ("occupation", "samples"),
    "loglog": ("tails", "decay"),
}

_COLOURS: tuple[str, ...] = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


class _Canvas:
    """Data-to-pixel transform plus the accumulated SVG parts."""

    def __init__(self, x_range: tuple[float, float], y_range: tuple[float, float], title: str) -> None:
        self.x0, self.x1 = x_range
        self.y0, self.y1 = y_range
        self.parts = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{SVG_WIDTH}" height="{SVG_HEIGHT}" '
            f'viewBox="0 0 {SVG_WIDTH} {SVG_HEIGHT}">',
            f'<rect x="0" y="0" width="{SVG_WIDTH}" height="{SVG_HEIGHT}" fill="white"/>',
            f'<text x="{SVG_WIDTH / 2:.1f}" y="24" text-anchor="middle" font-family="sans-serif" '
            f'font-size="15">{escape(title)}</text>',
        ]

    def xy(self, x: float, y: float) -> tuple[float, float]:
        width = SVG_WIDTH - 2 * SVG_MARGIN
        height = SVG_HEIGHT - 2 * SVG_MARGIN
        px = SVG_MARGIN + (x - self.x0) / (self.x1 - self.x0) * width
        py = SVG_HEIGHT - SVG_MARGIN - (y - self.y0) / (self.y1 - self.y0) * height
        return px, py

    def axes(self, x_label: str, y_label: str, x_ticks: list[tuple[float, str]], y_ticks: list[tuple[float, str]]) -> None:
        left, bottom = self.xy(self.x0, self.y0)
        right, top = self.xy(self.x1, self.y1)
        self.parts.append(f'<polyline points="{left:.2f},{top:.2f} {left:.2f},{bottom:.2f} {right:.2f},{bottom:.2f}" '
                          'fill="none" stroke="black" stroke-width="1"/>')
        for value, label in x_ticks:
            x, _ = self.xy(value, self.y0)
            self.parts.append(f'<text x="{x:.1f}" y="{bottom + 16:.1f}" text-anchor="middle" '
                              f'font-family="sans-serif" font-size="11">{escape(label)}</text>')
        for value, label in y_ticks:
            _, y = self.xy(self.x0, value)
            self.parts.append(f'<text x="{left - 6:.1f}" y="{y + 4:.1f}" text-anchor="end" '
                              f'font-family="sans-serif" font-size="11">{escape(label)}</text>')
        self.parts.append(f'<text x="{(left + right) / 2:.1f}" y="{SVG_HEIGHT - 12}" text-anchor="middle" '
                          f'font-family="sans-serif" font-size="12">{escape(x_label)}</text>')
        self.parts.append(f'<text x="14" y="{(top + bottom) / 2:.1f}" text-anchor="middle" font-family="sans-serif" '
                          f'font-size="12" transform="rotate(-90 14 {(top + bottom) / 2:.1f})">{escape(y_label)}</text>')

    def rect(self, x0: float, x1: float, height: float, colour: str) -> None:
        a, top = self.xy(x0, height)
        b, bottom = self.xy(x1, self.y0)
        self.parts.append(f'<rect x="{a:.2f}" y="{top:.2f}" width="{max(b - a, 0.0):.2f}" '
                          f'height="{max(bottom - top, 0.0):.2f}" fill="{colour}" fill-opacity="0.55" stroke="none"/>')

    def polyline(self, xs: np.ndarray, ys: np.ndarray, colour: str, dashed: bool = False) -> None:
        points = " ".join("{:.2f},{:.2f}".format(*self.xy(x, y)) for x, y in zip(xs, ys))
        dash = ' stroke-dasharray="6,4"' if dashed else ""
        self.parts.append(f'<polyline points="{points}" fill="none" stroke="{colour}" stroke-width="1.6"{dash}/>')

    def label(self, x: float, y: float, text: str, colour: str = "black") -> None:
        self.parts.append(f'<text x="{x:.1f}" y="{y:.1f}" font-family="sans-serif" font-size="12" '
                          f'fill="{colour}">{escape(text)}</text>')

    def render(self) -> str:
        return "\n".join([*self.parts, "</svg>"]) + "\n"


def _format_slope(slope: float) -> str:
    return f"{slope:.2f}".replace("-", "−")


def histogram_svg(
    samples: np.ndarray,
    title: str,
    *,
    bins: int = SVG_HISTOGRAM_BINS,
    overlay: tuple[np.ndarray, np.ndarray] | None = None,
    x_label: str = "S_n^1 / n",
) -> str:
    """Density histogram of ``samples`` on ``[0, 1]`` with an optional overlay curve."""
    samples = np.asarray(samples, dtype=float)
    if samples.size == 0:
        raise ValueError("cannot plot an empty sample")
    heights, edges = np.histogram(samples, bins=bins, range=(0.0, 1.0), density=True)
    top = float(heights.max())
    if overlay is not None:
        finite = overlay[1][np.isfinite(overlay[1])]
        # the Lamperti density has integrable poles at 0 and 1; cap the view
        top = max(top, float(np.percentile(finite, 90)) if finite.size else 0.0)
    top = top * 1.1 if top > 0.0 else 1.0
    canvas = _Canvas((0.0, 1.0), (0.0, top), title)
    canvas.axes(x_label, "density", [(v, f"{v:g}") for v in (0.0, 0.25, 0.5, 0.75, 1.0)],
                [(v, f"{v:.2g}") for v in np.linspace(0.0, top, 5)])
    for a, b, h in zip(edges[:-1], edges[1:], heights):
        canvas.rect(a, b, h, _COLOURS[0])
    if overlay is not None:
        xs, ys = overlay
        canvas.polyline(xs, np.minimum(ys, top), _COLOURS[1])
    return canvas.render()


def loglog_svg(
    series: dict[str, tuple[np.ndarray, np.ndarray]],
    title: str,
    *,
    fit_series: str | None = None,
    fit_window: tuple[float, float] | None = None,
) -> tuple[str, float | None]:
    """Log-log line plot; returns the SVG and the slope fitted on ``fit_series``."""
    cleaned = {}
    for name, (n, v) in series.items():
        keep = (n > 0) & (v > 0) & np.isfinite(v)
        if keep.any():
            cleaned[name] = (np.log10(n[keep]), np.log10(v[keep]))
    if not cleaned:
        raise ValueError("no positive data to plot on log-log axes")
    xs = np.concatenate([x for x, _ in cleaned.values()])
    ys = np.concatenate([y for _, y in cleaned.values()])
    x_range = (float(xs.min()), float(xs.max()) if xs.max() > xs.min() else float(xs.min()) + 1.0)
    y_range = (float(ys.min()), float(ys.max()) if ys.max() > ys.min() else float(ys.min()) + 1.0)
    canvas = _Canvas(x_range, y_range, title)
    x_ticks = [(v, f"1e{v:g}") for v in range(math.ceil(x_range[0]), math.floor(x_range[1]) + 1)]
    y_ticks = [(v, f"1e{v:g}") for v in range(math.ceil(y_range[0]), math.floor(y_range[1]) + 1)]
    canvas.axes("n", "value", x_ticks, y_ticks)
    for i, (name, (x, y)) in enumerate(cleaned.items()):
        colour = _COLOURS[i % len(_COLOURS)]
        canvas.polyline(x, y, colour)
        canvas.label(SVG_WIDTH - SVG_MARGIN - 90, SVG_MARGIN + 16 * i, name, colour)

    slope = None
    target = fit_series if fit_series is not None else next(iter(series))
    if target in series:
        n, v = series[target]
        keep = (n > 0) & (v > 0)
        if fit_window is not None:
            keep &= (n >= fit_window[0]) & (n <= fit_window[1])
        if keep.sum() >= 2:
            fit = fit_loglog(n[keep], v[keep])
            slope = fit.slope
            line_x = np.log10(np.array([n[keep].min(), n[keep].max()]))
            canvas.polyline(line_x, fit.intercept / math.log(10.0) + slope * line_x, "black", dashed=True)
            canvas.label(SVG_MARGIN + 12, SVG_MARGIN + 4, f"slope {_format_slope(slope)}")
    return canvas.render(), slope


def plot_csv(csv_path: str, kind: str, output: str | None = None) -> str:
    """Render an artifact CSV as SVG next to it (or at ``output``).

    Raises:
        SchemaError: Unknown kind, unsupported schema or version, empty data.
    """
    if kind not in PLOT_KINDS:
        raise SchemaError(f"unknown plot kind {kind!r}; expected one of {sorted(PLOT_KINDS)}")
    table = read_csv(csv_path)
    if table.schema not in PLOT_KINDS[kind]:
        raise SchemaError(f"a {kind} plot needs one of the schemas {PLOT_KINDS[kind]}, got {table.schema!r}")
    if not table.rows:
        raise SchemaError(f"{csv_path} has no data rows")

    title = os.path.splitext(os.path.basename(csv_path))[0]
    if kind == "histogram":
        column = "S1" if "S1" in table.header else table.header[2 if table.schema == "occupation" else 0]
        samples = table.column(column)
        overlay = None
        if table.meta.get("d") == "2" and "alpha" in table.meta and "p1" in table.meta:
            alpha, p1 = float(table.meta["alpha"]), float(table.meta["p1"])
            if alpha < 1.0 and 0.0 < p1 < 1.0:
                t = np.linspace(0.0025, 0.9975, 400)
                overlay = (t, np.asarray(lamperti_pdf(alpha, p1, t)))
        svg = histogram_svg(samples, title, overlay=overlay, x_label=column)
    else:
        n = table.column("n")
        values = table.column("value")
        if "series" in table.header:
            labels = table.text_column("series")
            series: dict[str, tuple[np.ndarray, np.ndarray]] = {}
            for name in dict.fromkeys(labels):
                mask = np.array([lab == name for lab in labels])
                series[name] = (n[mask], values[mask])
        else:
            series = {table.schema: (n, values)}
        window = None
        if "fit_min" in table.meta and "fit_max" in table.meta:
            window = (float(table.meta["fit_min"]), float(table.meta["fit_max"]))
        svg, _ = loglog_svg(series, title, fit_window=window)

    target = output or os.path.splitext(csv_path)[0] + ".svg"
    with open(target, "w") as handle:
        handle.write(svg)
    return target
