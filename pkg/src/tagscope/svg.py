"""Horizontal bar charts as plain SVG text, byte-identical for identical input."""

from __future__ import annotations

from xml.sax.saxutils import escape, quoteattr

MAX_BARS = 20
WIDTH = 720
BAR_HEIGHT = 22
BAR_GAP = 6
LABEL_WIDTH = 220
TOP = 48
POS_COLOR = "#c0392b"
NEG_COLOR = "#2e6da4"


def ordered(scores: dict, limit: int = MAX_BARS) -> list:
    """(name, value) pairs by descending |value|; ties broken by name."""
    items = sorted(scores.items(), key=lambda kv: (-abs(float(kv[1])), kv[0]))
    return [(str(k), float(v)) for k, v in items[:limit]]


def emit_bar_svg(scores: dict, title: str, limit: int = MAX_BARS) -> str:
    if not scores:
        raise ValueError("emit_bar_svg needs at least one entry")
    bars = ordered(scores, limit)
    has_neg = any(v < 0 for _, v in bars)
    span = max(abs(v) for _, v in bars) or 1.0
    plot_w = WIDTH - LABEL_WIDTH - 80
    # with negative values the axis sits mid-plot
    zero_x = LABEL_WIDTH + (plot_w / 2 if has_neg else 0)
    scale = (plot_w / 2 if has_neg else plot_w) / span
    height = TOP + len(bars) * (BAR_HEIGHT + BAR_GAP) + 20

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height}" '
        f'viewBox="0 0 {WIDTH} {height}">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{height}" fill="#ffffff"/>',
        f'<text x="{WIDTH / 2:.1f}" y="28" text-anchor="middle" font-family="sans-serif" '
        f'font-size="16">{escape(title)}</text>',
    ]
    for i, (name, v) in enumerate(bars):
        y = TOP + i * (BAR_HEIGHT + BAR_GAP)
        w = abs(v) * scale
        x = zero_x if v >= 0 else zero_x - w
        color = POS_COLOR if v >= 0 else NEG_COLOR
        mid = y + BAR_HEIGHT / 2 + 4
        out.append(
            f'<g class="bar" data-name={quoteattr(name)}>'
            f'<text x="{LABEL_WIDTH - 8}" y="{mid:.1f}" text-anchor="end" font-family="sans-serif" '
            f'font-size="12">{escape(name)}</text>'
            f'<rect x="{x:.2f}" y="{y}" width="{w:.2f}" height="{BAR_HEIGHT}" fill="{color}"/>'
            f'<text x="{max(x + w, zero_x) + 4:.2f}" y="{mid:.1f}" font-family="sans-serif" '
            f'font-size="11">{v:.4g}</text></g>'
        )
    out.append(
        f'<line x1="{zero_x:.2f}" y1="{TOP - 4}" x2="{zero_x:.2f}" y2="{height - 16}" stroke="#333333"/>'
    )
    out.append("</svg>")
    return "\n".join(out) + "\n"


def count_bars(svg: str) -> int:
    return svg.count('<g class="bar"')
