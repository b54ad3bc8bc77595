"""Minimal SVG line charts (one <polyline> per series)."""
from xml.sax.saxutils import escape

import numpy as np

PALETTE = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f")


def _ticks(lo, hi, n=5):
    if hi == lo:
        return [lo]
    return list(np.linspace(lo, hi, n))


def _num(v):
    return f"{v:.2f}"


def line_chart(series, title="", xlabel="", ylabel="", width=720, height=360, styles=None, legend=True,
               xticks=None):
    """Render ``series`` = [(label, xs, ys), ...] as an SVG document string.

    ``styles`` optionally maps a label to a dict with ``stroke``,
    ``stroke_width``, ``opacity`` and ``hide_legend``.  ``xticks`` is an
    optional list of ``(position, label)`` pairs.
    """
    styles = styles or {}
    left, right, top, bottom = 60, 20, 30 if title else 10, 40
    pw, ph = width - left - right, height - top - bottom

    xs_all = np.concatenate([np.asarray(x, float) for _, x, _ in series]) if series else np.zeros(1)
    ys_all = np.concatenate([np.asarray(y, float) for _, _, y in series]) if series else np.zeros(1)
    x0, x1 = float(np.min(xs_all)), float(np.max(xs_all))
    y0, y1 = float(np.min(ys_all)), float(np.max(ys_all))
    xr = (x1 - x0) or 1.0
    yr = (y1 - y0) or 1.0

    def px(v):
        return left + (v - x0) / xr * pw

    def py(v):
        return top + ph - (v - y0) / yr * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
    ]
    if title:
        out.append(f'<text x="{width / 2:.1f}" y="18" text-anchor="middle" font-size="13">{escape(title)}</text>')
    out.append(
        f'<rect class="frame" x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="#999"/>'
    )
    for v in _ticks(y0, y1):
        out.append(f'<text x="{left - 4}" y="{py(v) + 4:.1f}" text-anchor="end">{v:.3g}</text>')
    for v, lab in xticks if xticks is not None else ((v, f"{v:.4g}") for v in _ticks(x0, x1)):
        out.append(f'<text x="{px(v):.1f}" y="{top + ph + 14}" text-anchor="middle">{escape(str(lab))}</text>')
    if xlabel:
        out.append(f'<text x="{left + pw / 2:.1f}" y="{height - 6}" text-anchor="middle">{escape(xlabel)}</text>')
    if ylabel:
        out.append(
            f'<text x="14" y="{top + ph / 2:.1f}" text-anchor="middle" '
            f'transform="rotate(-90 14 {top + ph / 2:.1f})">{escape(ylabel)}</text>'
        )
    for i, (label, xs, ys) in enumerate(series):
        st = styles.get(label, {})
        stroke = st.get("stroke", PALETTE[i % len(PALETTE)])
        sw = st.get("stroke_width", 1.5)
        op = st.get("opacity", 1.0)
        pts = " ".join(f"{_num(px(float(a)))},{_num(py(float(b)))}" for a, b in zip(xs, ys))
        out.append(
            f'<polyline data-label="{escape(str(label))}" points="{pts}" fill="none" '
            f'stroke="{stroke}" stroke-width="{sw}" stroke-opacity="{op}"/>'
        )
    if legend and series:
        shown = [(i, lab) for i, (lab, _, _) in enumerate(series) if not styles.get(lab, {}).get("hide_legend")]
        for row, (i, label) in enumerate(shown):
            stroke = styles.get(label, {}).get("stroke", PALETTE[i % len(PALETTE)])
            y = top + 12 + 14 * row
            out.append(f'<line x1="{left + pw - 110}" y1="{y - 4}" x2="{left + pw - 95}" y2="{y - 4}" stroke="{stroke}" stroke-width="2"/>')
            out.append(f'<text x="{left + pw - 90}" y="{y}">{escape(str(label))}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
