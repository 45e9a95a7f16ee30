"""Small deterministic SVG line charts for run artifacts.

No plotting dependency: the CLI needs three simple date-series charts whose
bytes are identical across runs and machines, which rules out library
version drift. Coordinates are formatted with fixed precision.
"""

from __future__ import annotations

import math
from typing import Optional

import numpy as np

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")

_MARGIN_L, _MARGIN_R, _MARGIN_T, _MARGIN_B = 64, 16, 34, 46


def _nice_step(span: float, target: int = 5) -> float:
    if span <= 0:
        return 1.0
    raw = span / target
    mag = 10.0 ** math.floor(math.log10(raw))
    for mult in (1.0, 2.0, 5.0, 10.0):
        if raw <= mult * mag:
            return mult * mag
    return 10.0 * mag


def _fmt(v: float) -> str:
    if v == int(v) and abs(v) < 1e15:
        return str(int(v))
    return f"{v:.4g}"


def _escape(s: str) -> str:
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def line_chart(
    dates,
    series,
    title: str,
    ylabel: str,
    width: int = 880,
    height: int = 360,
    guide_y: Optional[float] = None,
) -> str:
    """Render labeled line series over a shared date axis.

    Args:
        dates: list of datetime.date, ascending.
        series: list of (label, values) with values aligned to dates; NaN
            entries break the line.
        guide_y: optional horizontal reference line (e.g. ratio 1.0).

    Returns:
        Complete SVG document as a string.
    """
    n = len(dates)
    plot_w = width - _MARGIN_L - _MARGIN_R
    plot_h = height - _MARGIN_T - _MARGIN_B

    finite = [v for _, vals in series for v in np.asarray(vals, dtype=float) if math.isfinite(v)]
    if guide_y is not None:
        finite.append(guide_y)
    lo = min(finite) if finite else 0.0
    hi = max(finite) if finite else 1.0
    if lo == hi:
        lo, hi = lo - 1.0, hi + 1.0
    pad = 0.05 * (hi - lo)
    lo, hi = lo - pad, hi + pad

    def sx(i: int) -> float:
        if n <= 1:
            return _MARGIN_L + plot_w / 2.0
        return _MARGIN_L + plot_w * i / (n - 1)

    def sy(v: float) -> float:
        return _MARGIN_T + plot_h * (1.0 - (v - lo) / (hi - lo))

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{_MARGIN_L}" y="20" font-size="14" font-weight="bold">{_escape(title)}</text>',
        f'<rect x="{_MARGIN_L}" y="{_MARGIN_T}" width="{plot_w}" height="{plot_h}" '
        f'fill="none" stroke="#999"/>',
    ]

    step = _nice_step(hi - lo)
    tick = math.ceil(lo / step) * step
    while tick <= hi:
        y = sy(tick)
        out.append(
            f'<line x1="{_MARGIN_L}" y1="{y:.2f}" x2="{width - _MARGIN_R}" y2="{y:.2f}" '
            f'stroke="#e0e0e0"/>'
        )
        out.append(
            f'<text x="{_MARGIN_L - 6}" y="{y + 4:.2f}" text-anchor="end">{_fmt(tick)}</text>'
        )
        tick += step

    n_xticks = min(6, n)
    for k in range(n_xticks):
        i = round(k * (n - 1) / max(1, n_xticks - 1)) if n > 1 else 0
        x = sx(i)
        out.append(
            f'<text x="{x:.2f}" y="{height - _MARGIN_B + 18}" text-anchor="middle">'
            f"{dates[i].isoformat()}</text>"
        )

    out.append(
        f'<text x="14" y="{_MARGIN_T + plot_h / 2:.2f}" text-anchor="middle" '
        f'transform="rotate(-90 14 {_MARGIN_T + plot_h / 2:.2f})">{_escape(ylabel)}</text>'
    )

    if guide_y is not None and lo <= guide_y <= hi:
        y = sy(guide_y)
        out.append(
            f'<line x1="{_MARGIN_L}" y1="{y:.2f}" x2="{width - _MARGIN_R}" y2="{y:.2f}" '
            f'stroke="#666" stroke-dasharray="5,4"/>'
        )

    for k, (label, vals) in enumerate(series):
        color = PALETTE[k % len(PALETTE)]
        vals = np.asarray(vals, dtype=float)
        run = []
        segments = []
        for i, v in enumerate(vals):
            if math.isfinite(v):
                run.append(f"{sx(i):.2f},{sy(v):.2f}")
            elif run:
                segments.append(run)
                run = []
        if run:
            segments.append(run)
        for seg in segments:
            if len(seg) == 1:
                x, y = seg[0].split(",")
                out.append(f'<circle cx="{x}" cy="{y}" r="2" fill="{color}"/>')
            else:
                out.append(
                    f'<polyline points="{" ".join(seg)}" fill="none" '
                    f'stroke="{color}" stroke-width="1.5"/>'
                )
        lx = _MARGIN_L + 8 + 150 * k
        ly = _MARGIN_T + 14
        out.append(f'<line x1="{lx}" y1="{ly - 4}" x2="{lx + 18}" y2="{ly - 4}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{lx + 22}" y="{ly}">{_escape(label)}</text>')

    out.append("</svg>")
    return "\n".join(out) + "\n"


def overlay_chart(dates, actual, predictions: dict) -> str:
    """Actual vs per-model predictions over the held-out test range."""
    series = [("actual", actual)] + [(name, vals) for name, vals in predictions.items()]
    return line_chart(dates, series, "Held-out test: actual vs predicted", "kWh/day")


def dlr_chart(dates, ratio) -> str:
    """Daily load ratio over the study range, with the no-change guide at 1."""
    return line_chart(dates, [("actual / counterfactual", ratio)],
                      "Daily load ratio", "ratio", guide_y=1.0)


def cumulative_chart(dates, cum_actual, cum_predicted) -> str:
    """Cumulative actual vs counterfactual consumption over the study range."""
    return line_chart(
        dates,
        [("actual", cum_actual), ("counterfactual", cum_predicted)],
        "Cumulative consumption over study range",
        "kWh",
    )
