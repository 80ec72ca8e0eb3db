"""Minimal SVG line charts.

Series are drawn inside a group flipped with ``scale(1,-1)``, so polyline
``y`` coordinates grow with the data value. Labels live outside the flipped
group so text is not mirrored.
"""

from xml.sax.saxutils import escape

WIDTH, HEIGHT = 800, 360
MARGIN = 50
PALETTE = ("#2ca02c", "#d62728", "#1f77b4", "#ff7f0e", "#9467bd", "#8c564b")


def _fmt(v):
    return f"{v:.3f}".rstrip("0").rstrip(".")


def line_chart(series, title="", x_label="t", y_label=""):
    """``series`` is a list of ``(name, xs, ys)``; returns the SVG document as text."""
    xs_all = [x for _, xs, _ in series for x in xs]
    ys_all = [y for _, _, ys in series for y in ys]
    x0, x1 = (min(xs_all), max(xs_all)) if xs_all else (0.0, 1.0)
    y0, y1 = (min(ys_all), max(ys_all)) if ys_all else (0.0, 1.0)
    if x1 == x0:
        x1 = x0 + 1.0
    if y1 == y0:
        y1 = y0 + 1.0
    pw, ph = WIDTH - 2 * MARGIN, HEIGHT - 2 * MARGIN

    def px(x):
        return (x - x0) / (x1 - x0) * pw

    def py(y):
        return (y - y0) / (y1 - y0) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2}" y="{MARGIN / 2}" text-anchor="middle" font-size="14">{escape(title)}</text>',
        f'<text x="{WIDTH / 2}" y="{HEIGHT - 8}" text-anchor="middle" font-size="11">{escape(x_label)}</text>',
        f'<text x="12" y="{HEIGHT / 2}" font-size="11" transform="rotate(-90 12 {HEIGHT / 2})"'
        f' text-anchor="middle">{escape(y_label)}</text>',
        f'<text x="{MARGIN - 4}" y="{HEIGHT - MARGIN}" text-anchor="end" font-size="10">{_fmt(y0)}</text>',
        f'<text x="{MARGIN - 4}" y="{MARGIN + 4}" text-anchor="end" font-size="10">{_fmt(y1)}</text>',
        f'<text x="{MARGIN}" y="{HEIGHT - MARGIN + 14}" font-size="10">{_fmt(x0)}</text>',
        f'<text x="{WIDTH - MARGIN}" y="{HEIGHT - MARGIN + 14}" text-anchor="end" font-size="10">{_fmt(x1)}</text>',
        f'<g transform="translate({MARGIN},{HEIGHT - MARGIN}) scale(1,-1)">',
        f'<rect width="{pw}" height="{ph}" fill="none" stroke="#999"/>',
    ]
    for k, (name, xs, ys) in enumerate(series):
        pts = " ".join(f"{_fmt(px(x))},{_fmt(py(y))}" for x, y in zip(xs, ys))
        color = PALETTE[k % len(PALETTE)]
        out.append(
            f'<polyline data-series="{escape(name)}" fill="none" stroke="{color}" stroke-width="1.2" points="{pts}"/>'
        )
    out.append("</g>")
    for k, (name, _, _) in enumerate(series):
        color = PALETTE[k % len(PALETTE)]
        y = MARGIN + 14 * k
        out.append(f'<line x1="{WIDTH - MARGIN - 150}" y1="{y}" x2="{WIDTH - MARGIN - 130}" y2="{y}" stroke="{color}"/>')
        out.append(f'<text x="{WIDTH - MARGIN - 125}" y="{y + 4}" font-size="11">{escape(name)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write(path, text):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)
