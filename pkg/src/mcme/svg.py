"""Tiny SVG line plots for sweep summaries."""

import math
from xml.sax.saxutils import escape

PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf"]


def _ticks(lo, hi, n=5):
    if hi <= lo:
        return [lo]
    return [lo + (hi - lo) * k / (n - 1) for k in range(n)]


def line_plot(series, title="", xlabel="", ylabel="", logy=False, width=640, height=420):
    """Return an SVG document plotting ``series`` (name -> (xs, ys)).

    Non-finite points are skipped; with ``logy`` non-positive values are too.
    """
    ml, mr, mt, mb = 70, 150, 40, 50
    pw, ph = width - ml - mr, height - mt - mb

    def ok(y):
        return math.isfinite(y) and (y > 0 or not logy)

    xs = [x for xs_, _ in series.values() for x in xs_]
    ys = [y for _, ys_ in series.values() for y in ys_ if ok(y)]
    if not xs or not ys:
        xs, ys = [0.0, 1.0], [1.0, 2.0]
    f = (lambda v: math.log10(v)) if logy else (lambda v: v)
    x0, x1 = min(xs), max(xs)
    y0, y1 = f(min(ys)), f(max(ys))
    if x1 == x0:
        x1 = x0 + 1.0
    if y1 == y0:
        y1 = y0 + 1.0

    def px(x):
        return ml + (x - x0) / (x1 - x0) * pw

    def py(y):
        return mt + ph - (f(y) - y0) / (y1 - y0) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'font-family="sans-serif" font-size="12">',
           f'<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" stroke="#333"/>',
           f'<text x="{ml + pw / 2:.1f}" y="{mt - 14}" text-anchor="middle" font-size="14">{escape(title)}</text>',
           f'<text x="{ml + pw / 2:.1f}" y="{height - 10}" text-anchor="middle">{escape(xlabel)}</text>',
           f'<text x="16" y="{mt + ph / 2:.1f}" text-anchor="middle" '
           f'transform="rotate(-90 16 {mt + ph / 2:.1f})">{escape(ylabel)}</text>']
    for t in _ticks(x0, x1):
        out.append(f'<text x="{px(t):.1f}" y="{mt + ph + 16}" text-anchor="middle">{t:.3g}</text>')
    for t in _ticks(y0, y1):
        lab = 10 ** t if logy else t
        yy = mt + ph - (t - y0) / (y1 - y0) * ph
        out.append(f'<text x="{ml - 6}" y="{yy + 4:.1f}" text-anchor="end">{lab:.3g}</text>')
        out.append(f'<line x1="{ml}" x2="{ml + pw}" y1="{yy:.1f}" y2="{yy:.1f}" stroke="#ddd"/>')
    for k, (name, (sx, sy)) in enumerate(series.items()):
        color = PALETTE[k % len(PALETTE)]
        pts = [(px(x), py(y)) for x, y in zip(sx, sy) if ok(y)]
        if pts:
            path = " ".join(f"{a:.1f},{b:.1f}" for a, b in pts)
            out.append(f'<polyline points="{path}" fill="none" stroke="{color}" stroke-width="2"/>')
            for a, b in pts:
                out.append(f'<circle cx="{a:.1f}" cy="{b:.1f}" r="3" fill="{color}"/>')
        ly = mt + 16 * (k + 1)
        out.append(f'<line x1="{ml + pw + 10}" x2="{ml + pw + 30}" y1="{ly - 4}" y2="{ly - 4}" '
                   f'stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{ml + pw + 36}" y="{ly}">{escape(name)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
