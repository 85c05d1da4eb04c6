"""Minimal dependency-free SVG curve rendering for AP-vs-distance plots."""

from __future__ import annotations

from pathlib import Path

_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def curve_svg(series: list, path, xlabel: str = "distance (m)",
              ylabel: str = "AP", width: int = 640, height: int = 420,
              y_range: tuple = (0.0, 1.0)) -> None:
    """Render [(label, [(x, y), ...]), ...] as polylines with axes."""
    ml, mr, mt, mb = 60, 20, 20, 50
    pw, ph = width - ml - mr, height - mt - mb
    xs = [x for _, pts in series for x, _ in pts]
    x_lo, x_hi = (min(xs), max(xs)) if xs else (0.0, 1.0)
    if x_hi <= x_lo:
        x_hi = x_lo + 1.0
    y_lo, y_hi = y_range

    def sx(x):
        return ml + (x - x_lo) / (x_hi - x_lo) * pw

    def sy(y):
        return mt + (1.0 - (y - y_lo) / (y_hi - y_lo)) * ph

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<line x1="{ml}" y1="{mt + ph}" x2="{ml + pw}" y2="{mt + ph}" stroke="black"/>',
        f'<line x1="{ml}" y1="{mt}" x2="{ml}" y2="{mt + ph}" stroke="black"/>',
        f'<text x="{ml + pw / 2:.0f}" y="{height - 12}" text-anchor="middle" '
        f'font-size="13">{xlabel}</text>',
        f'<text x="16" y="{mt + ph / 2:.0f}" text-anchor="middle" font-size="13" '
        f'transform="rotate(-90 16 {mt + ph / 2:.0f})">{ylabel}</text>',
    ]
    for k in range(5):
        y = y_lo + (y_hi - y_lo) * k / 4
        parts.append(f'<text x="{ml - 8}" y="{sy(y) + 4:.1f}" text-anchor="end" '
                     f'font-size="11">{y:.2f}</text>')
        parts.append(f'<line x1="{ml}" y1="{sy(y):.1f}" x2="{ml + pw}" y2="{sy(y):.1f}" '
                     f'stroke="#dddddd"/>')
    for k in range(6):
        x = x_lo + (x_hi - x_lo) * k / 5
        parts.append(f'<text x="{sx(x):.1f}" y="{mt + ph + 18}" text-anchor="middle" '
                     f'font-size="11">{x:.0f}</text>')
    for idx, (label, pts) in enumerate(series):
        color = _COLORS[idx % len(_COLORS)]
        if pts:
            coords = " ".join(f"{sx(x):.1f},{sy(y):.1f}" for x, y in pts)
            parts.append(f'<polyline points="{coords}" fill="none" stroke="{color}" '
                         f'stroke-width="2"/>')
        parts.append(f'<text x="{ml + pw - 6}" y="{mt + 16 + 16 * idx}" text-anchor="end" '
                     f'font-size="12" fill="{color}">{label}</text>')
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts))
