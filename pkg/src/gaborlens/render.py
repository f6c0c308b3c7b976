"""Deterministic renderings: binary PGM kernel images and SVG 1.1 charts
(box plots per layer, residual histograms, calibration curves)."""
from __future__ import annotations

import math

import numpy as np

from .stats import CalibrationPoint, HistogramResult, LayerSummary

__all__ = [
    "render_kernel_image",
    "render_boxplot_svg",
    "render_histogram_svg",
    "render_curve_svg",
]


def render_kernel_image(kernel, out_side: int) -> bytes:
    """Binary PGM (P5, maxval 255) of a kernel, affine-mapped to [0, 255].

    Constant kernels map to mid-gray 128; upsampling to ``out_side`` is
    nearest-neighbor.
    """
    kernel = np.asarray(kernel, dtype=float)
    side = kernel.shape[0]
    if out_side < side:
        raise ValueError(f"out_side {out_side} smaller than kernel side {side}")
    low = float(kernel.min())
    high = float(kernel.max())
    if high > low:
        levels = np.rint((kernel - low) / (high - low) * 255.0).astype(np.uint8)
    else:
        levels = np.full(kernel.shape, 128, dtype=np.uint8)
    idx = (np.arange(out_side) * side) // out_side
    image = levels[np.ix_(idx, idx)]
    header = f"P5\n{out_side} {out_side}\n255\n".encode("ascii")
    return header + image.tobytes()


_SVG_OPEN = (
    '<?xml version="1.0" encoding="UTF-8"?>\n'
    '<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
    'width="{w}" height="{h}" viewBox="0 0 {w} {h}">\n'
)


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _axes(width, height, margin, title):
    parts = [
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>\n',
        f'<text x="{width / 2:.0f}" y="16" text-anchor="middle" font-family="sans-serif" '
        f'font-size="13">{title}</text>\n',
        f'<line x1="{margin}" y1="{height - margin}" x2="{width - margin}" y2="{height - margin}" '
        'stroke="black" stroke-width="1"/>\n',
        f'<line x1="{margin}" y1="{margin}" x2="{margin}" y2="{height - margin}" '
        'stroke="black" stroke-width="1"/>\n',
    ]
    return "".join(parts)


def _y_ticks(low, high, margin, height, to_y, count=5):
    out = []
    for i in range(count):
        value = low + (high - low) * i / (count - 1)
        y = to_y(value)
        out.append(
            f'<line x1="{margin - 4}" y1="{_fmt(y)}" x2="{margin}" y2="{_fmt(y)}" stroke="black"/>\n'
            f'<text x="{margin - 6}" y="{_fmt(y + 3)}" text-anchor="end" font-family="sans-serif" '
            f'font-size="9">{value:.3g}</text>\n'
        )
    return "".join(out)


def render_boxplot_svg(summaries: list[LayerSummary], aggregate: LayerSummary) -> str:
    """Per-layer box plots plus a final all-layers column.

    Boxes span q1..q3 with a median line; whiskers reach p5/p95. The
    aggregate column must be computed from the pooled fits (per-layer
    summaries alone cannot reproduce pooled percentiles).
    """
    if not summaries:
        raise ValueError("no layer summaries to plot")
    columns = list(summaries) + [aggregate]
    margin = 46
    column_width = 64
    width = margin * 2 + column_width * len(columns)
    height = 320
    top = max((c.p95 for c in columns if c.p95 is not None), default=1.0)
    top = top * 1.1 if top > 0 else 1.0

    def to_y(value):
        return height - margin - (value / top) * (height - 2 * margin)

    body = [_axes(width, height, margin, "RMS residual by layer")]
    body.append(_y_ticks(0.0, top, margin, height, to_y))
    for position, summary in enumerate(columns):
        cx = margin + column_width * (position + 0.5)
        label = summary.layer_name if position < len(summaries) else "all"
        group = [f'<g class="column" data-layer="{_escape(label)}">\n']
        if summary.median is not None:
            half = column_width * 0.3
            y_q1, y_q3 = to_y(summary.q1), to_y(summary.q3)
            y_med = to_y(summary.median)
            y_p5, y_p95 = to_y(summary.p5), to_y(summary.p95)
            group.append(
                f'<line x1="{_fmt(cx)}" y1="{_fmt(y_p95)}" x2="{_fmt(cx)}" y2="{_fmt(y_q3)}" stroke="black"/>\n'
                f'<line x1="{_fmt(cx)}" y1="{_fmt(y_q1)}" x2="{_fmt(cx)}" y2="{_fmt(y_p5)}" stroke="black"/>\n'
                f'<line x1="{_fmt(cx - half / 2)}" y1="{_fmt(y_p95)}" x2="{_fmt(cx + half / 2)}" y2="{_fmt(y_p95)}" stroke="black"/>\n'
                f'<line x1="{_fmt(cx - half / 2)}" y1="{_fmt(y_p5)}" x2="{_fmt(cx + half / 2)}" y2="{_fmt(y_p5)}" stroke="black"/>\n'
                f'<rect x="{_fmt(cx - half)}" y="{_fmt(y_q3)}" width="{_fmt(2 * half)}" '
                f'height="{_fmt(max(y_q1 - y_q3, 0.0))}" fill="#9ecae1" stroke="black"/>\n'
                f'<line x1="{_fmt(cx - half)}" y1="{_fmt(y_med)}" x2="{_fmt(cx + half)}" y2="{_fmt(y_med)}" '
                'stroke="black" stroke-width="2"/>\n'
            )
        group.append(
            f'<text x="{_fmt(cx)}" y="{height - margin + 14}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="9">{_escape(label)}</text>\n'
            f'<text x="{_fmt(cx)}" y="{height - margin + 26}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="8">n={summary.count}</text>\n'
        )
        group.append("</g>\n")
        body.append("".join(group))
    return _SVG_OPEN.format(w=width, h=height) + "".join(body) + "</svg>\n"


def render_histogram_svg(hist: HistogramResult, title: str = "Residual histogram") -> str:
    """Bar chart of histogram counts, one equal-width bar per bin."""
    bins = len(hist.counts)
    margin = 46
    width = max(margin * 2 + 8 * bins, 320)
    height = 300
    peak = max(max(hist.counts, default=0), 1)
    bar_width = (width - 2 * margin) / bins

    def to_y(count):
        return height - margin - (count / peak) * (height - 2 * margin)

    body = [_axes(width, height, margin, _escape(title))]
    body.append(_y_ticks(0.0, float(peak), margin, height, to_y))
    for index, count in enumerate(hist.counts):
        x = margin + index * bar_width
        y = to_y(count)
        body.append(
            f'<rect class="bin" x="{_fmt(x)}" y="{_fmt(y)}" width="{_fmt(bar_width)}" '
            f'height="{_fmt(height - margin - y)}" fill="#6baed6" stroke="none"/>\n'
        )
    for index in range(0, bins + 1, max(bins // 5, 1)):
        x = margin + index * bar_width
        body.append(
            f'<text x="{_fmt(x)}" y="{height - margin + 14}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="8">{hist.edges[index]:.2g}</text>\n'
        )
    body.append(
        f'<text x="{width - margin}" y="{height - margin + 26}" text-anchor="end" '
        f'font-family="sans-serif" font-size="8">underflow={hist.underflow} overflow={hist.overflow}</text>\n'
    )
    return _SVG_OPEN.format(w=width, h=height) + "".join(body) + "</svg>\n"


def render_curve_svg(points: list[CalibrationPoint], title: str = "RMS vs corruption") -> str:
    """Polyline of mean RMS against noise fraction."""
    if not points:
        raise ValueError("no calibration points to plot")
    margin = 46
    width, height = 420, 300
    x_top = max(p.noise_fraction for p in points) or 1.0
    y_top = max(p.mean_rms for p in points) or 1.0
    y_top *= 1.1

    def to_x(a):
        return margin + (a / x_top) * (width - 2 * margin)

    def to_y(value):
        return height - margin - (value / y_top) * (height - 2 * margin)

    body = [_axes(width, height, margin, _escape(title))]
    body.append(_y_ticks(0.0, y_top, margin, height, to_y))
    coords = " ".join(f"{_fmt(to_x(p.noise_fraction))},{_fmt(to_y(p.mean_rms))}" for p in points)
    body.append(f'<polyline points="{coords}" fill="none" stroke="#d73027" stroke-width="2"/>\n')
    for p in points:
        body.append(
            f'<circle cx="{_fmt(to_x(p.noise_fraction))}" cy="{_fmt(to_y(p.mean_rms))}" r="2.5" fill="#d73027"/>\n'
        )
    ticks = max(len(points) // 5, 1)
    for p in points[::ticks]:
        body.append(
            f'<text x="{_fmt(to_x(p.noise_fraction))}" y="{height - margin + 14}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="8">{p.noise_fraction:.2f}</text>\n'
        )
    return _SVG_OPEN.format(w=width, h=height) + "".join(body) + "</svg>\n"


def _escape(text: str) -> str:
    return (
        str(text)
        .replace("&", "&amp;")
        .replace("<", "&lt;")
        .replace(">", "&gt;")
        .replace('"', "&quot;")
    )
