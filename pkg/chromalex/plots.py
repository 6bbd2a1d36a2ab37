"""
SVG line charts and bar charts with confidence whiskers, written as plain text
"""
from pathlib import Path
from typing import List, Sequence, Tuple

import numpy as np

COLORS = [
    "#1f77b4",
    "#d62728",
    "#2ca02c",
    "#ff7f0e",
    "#9467bd",
    "#8c564b",
]

WIDTH, HEIGHT = 960, 600
MARGIN_LEFT, MARGIN_RIGHT, MARGIN_TOP, MARGIN_BOTTOM = 90, 220, 70, 90
TICK_COUNT = 5


def _escape(text):
    return (
        str(text).replace("&", "&amp;")
        .replace("<", "&lt;")
        .replace(">", "&gt;")
        .replace('"', "&quot;")
        .replace("'", "&#39;")
    )


def _format_tick(value):
    if value == 0.0:
        return "0"
    if abs(value) >= 1000 or abs(value) < 0.01:
        return f"{value:.2e}"
    return f"{value:.3g}"


def _padded_range(low, high):
    if high == low:
        pad = abs(low) * 0.1 or 1.0
    else:
        pad = 0.05 * (high - low)
    return low - pad, high + pad


class _Frame(object):
    def __init__(self, x_range, y_range):
        self.left, self.right = MARGIN_LEFT, WIDTH - MARGIN_RIGHT
        self.top, self.bottom = MARGIN_TOP, HEIGHT - MARGIN_BOTTOM
        self.x_range, self.y_range = x_range, y_range

    def x(self, value):
        low, high = self.x_range
        return self.left + (value - low) / (high - low) * (self.right - self.left)

    def y(self, value):
        low, high = self.y_range
        return self.bottom - (value - low) / (high - low) * (self.bottom - self.top)


def _header(title, x_label, y_label):
    return [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">',
        '<rect x="0" y="0" width="100%" height="100%" fill="#ffffff"/>',
        f'<text x="{WIDTH / 2:.1f}" y="36" text-anchor="middle" font-size="22" font-family="Arial">{_escape(title)}</text>',
        f'<text x="{(MARGIN_LEFT + WIDTH - MARGIN_RIGHT) / 2:.1f}" y="{HEIGHT - 30}" text-anchor="middle" '
        f'font-size="15" font-family="Arial">{_escape(x_label)}</text>',
        f'<text x="24" y="{(MARGIN_TOP + HEIGHT - MARGIN_BOTTOM) / 2:.1f}" text-anchor="middle" font-size="15" '
        f'font-family="Arial" transform="rotate(-90 24 {(MARGIN_TOP + HEIGHT - MARGIN_BOTTOM) / 2:.1f})">'
        f'{_escape(y_label)}</text>',
    ]


def _axes(frame, lines, x_ticks=True):
    for i in range(TICK_COUNT + 1):
        value = frame.y_range[0] + (frame.y_range[1] - frame.y_range[0]) * i / TICK_COUNT
        y = frame.y(value)
        lines.append(f'<line x1="{frame.left}" y1="{y:.2f}" x2="{frame.right}" y2="{y:.2f}" stroke="#d9d9d9" stroke-width="1"/>')
        lines.append(f'<text x="{frame.left - 10}" y="{y + 5:.2f}" text-anchor="end" font-size="12" '
                     f'font-family="Arial">{_format_tick(value)}</text>')
        if x_ticks:
            value = frame.x_range[0] + (frame.x_range[1] - frame.x_range[0]) * i / TICK_COUNT
            x = frame.x(value)
            lines.append(f'<line x1="{x:.2f}" y1="{frame.bottom}" x2="{x:.2f}" y2="{frame.bottom + 6}" '
                         f'stroke="#000000" stroke-width="1"/>')
            lines.append(f'<text x="{x:.2f}" y="{frame.bottom + 24}" text-anchor="middle" font-size="12" '
                         f'font-family="Arial">{_format_tick(value)}</text>')
    lines.append(f'<line x1="{frame.left}" y1="{frame.bottom}" x2="{frame.right}" y2="{frame.bottom}" '
                 f'stroke="#000000" stroke-width="2"/>')
    lines.append(f'<line x1="{frame.left}" y1="{frame.top}" x2="{frame.left}" y2="{frame.bottom}" '
                 f'stroke="#000000" stroke-width="2"/>')


def _write(path, lines):
    lines.append('</svg>')
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text('\n'.join(lines) + '\n', encoding='utf-8')
    return path


def write_line_chart_svg(path, title, x_label, y_label, series: Sequence[Tuple[str, Sequence[float], Sequence[float]]]):
    """
    Line chart of one or more (label, x values, y values) series on shared numeric axes
    :return: Path written
    """
    if not series or not any(len(xs) for _, xs, _ in series):
        raise ValueError('nothing to plot.')
    xs_all = np.concatenate([np.asarray(xs, dtype=np.float64) for _, xs, _ in series])
    ys_all = np.concatenate([np.asarray(ys, dtype=np.float64) for _, _, ys in series])
    frame = _Frame(_padded_range(float(np.min(xs_all)), float(np.max(xs_all))),
                   _padded_range(float(np.min(ys_all)), float(np.max(ys_all))))
    lines = _header(title, x_label, y_label)
    _axes(frame, lines)
    legend_x, legend_y = frame.right + 22, frame.top + 22
    for idx, (label, xs, ys) in enumerate(series):
        color = COLORS[idx % len(COLORS)]
        points = sorted(zip((float(x) for x in xs), (float(y) for y in ys)))
        poly_points = " ".join(f"{frame.x(x):.2f},{frame.y(y):.2f}" for x, y in points)
        lines.append(f'<polyline fill="none" stroke="{color}" stroke-width="2" points="{poly_points}"/>')
        for x, y in points:
            lines.append(f'<circle cx="{frame.x(x):.2f}" cy="{frame.y(y):.2f}" r="3" fill="{color}"/>')
        ly = legend_y + idx * 26
        lines.append(f'<line x1="{legend_x}" y1="{ly}" x2="{legend_x + 26}" y2="{ly}" stroke="{color}" stroke-width="3"/>')
        lines.append(f'<text x="{legend_x + 34}" y="{ly + 5}" text-anchor="start" font-size="13" '
                     f'font-family="Arial">{_escape(label)}</text>')
    return _write(path, lines)


def write_bar_chart_svg(path, title, y_label, bars: List[Tuple[str, float, float]]):
    """
    Bar chart of group means with symmetric error whiskers
    :param bars: List of (label, mean, whisker half-width), e.g. from `analysis.group_summary`
    :return: Path written
    """
    if not bars:
        raise ValueError('nothing to plot.')
    lows = [mean - half for _, mean, half in bars] + [0.0]
    highs = [mean + half for _, mean, half in bars] + [0.0]
    frame = _Frame((0.0, float(len(bars))), _padded_range(min(lows), max(highs)))
    lines = _header(title, '', y_label)
    _axes(frame, lines, x_ticks=False)
    slot = (frame.right - frame.left) / len(bars)
    zero = frame.y(0.0)
    for idx, (label, mean, half) in enumerate(bars):
        color = COLORS[idx % len(COLORS)]
        x = frame.left + slot * idx + slot * 0.2
        top = min(frame.y(mean), zero)
        lines.append(f'<rect x="{x:.2f}" y="{top:.2f}" width="{slot * 0.6:.2f}" height="{abs(zero - frame.y(mean)):.2f}" '
                     f'fill="{color}" fill-opacity="0.8"/>')
        center = x + slot * 0.3
        y_low, y_high = frame.y(mean - half), frame.y(mean + half)
        lines.append(f'<line x1="{center:.2f}" y1="{y_low:.2f}" x2="{center:.2f}" y2="{y_high:.2f}" '
                     f'stroke="#000000" stroke-width="1.5"/>')
        for y in (y_low, y_high):
            lines.append(f'<line x1="{center - 8:.2f}" y1="{y:.2f}" x2="{center + 8:.2f}" y2="{y:.2f}" '
                         f'stroke="#000000" stroke-width="1.5"/>')
        lines.append(f'<text x="{center:.2f}" y="{frame.bottom + 24}" text-anchor="middle" font-size="13" '
                     f'font-family="Arial">{_escape(label)}</text>')
    return _write(path, lines)
