"""Minimal native SVG emission: line plots with a shaded band (1D) and
cell heatmaps (2D). No plotting toolkit involved; output is deterministic
for identical inputs."""

import numpy as np

__all__ = ["render_curve", "render_heatmap"]

_W, _H = 640, 360
_MARGIN = 45


def _fmt(v):
    return f"{v:.3f}".rstrip("0").rstrip(".")


def _scale(values, lo, hi, out_lo, out_hi):
    span = hi - lo if hi > lo else 1.0
    return out_lo + (np.asarray(values, float) - lo) * (out_hi - out_lo) / span


def render_curve(path, x, mean, lower, upper, title="", points=None):
    """One curve with a shaded uncertainty band, written as an SVG file.

    `points` may carry (x, y) scatter locations to overlay (training data).
    """
    x = np.asarray(x, float).reshape(-1)
    mean = np.asarray(mean, float).reshape(-1)
    lower = np.asarray(lower, float).reshape(-1)
    upper = np.asarray(upper, float).reshape(-1)
    ys = [mean, lower, upper] + ([np.asarray(points[1], float)] if points else [])
    y_lo = min(float(np.min(v)) for v in ys if v.size)
    y_hi = max(float(np.max(v)) for v in ys if v.size)
    if y_hi <= y_lo:
        y_hi = y_lo + 1.0
    pad = 0.05 * (y_hi - y_lo)
    y_lo, y_hi = y_lo - pad, y_hi + pad
    x_lo, x_hi = float(np.min(x)), float(np.max(x))

    def to_px(xs, ys_):
        px = _scale(xs, x_lo, x_hi, _MARGIN, _W - _MARGIN)
        py = _scale(ys_, y_lo, y_hi, _H - _MARGIN, _MARGIN)
        return px, py

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
        f'viewBox="0 0 {_W} {_H}">',
        f'<rect width="{_W}" height="{_H}" fill="white"/>',
    ]
    bx, b_up = to_px(x, upper)
    _, b_lo = to_px(x, lower)
    band = " ".join(f"{_fmt(px)},{_fmt(py)}" for px, py in zip(bx, b_up))
    band += " " + " ".join(
        f"{_fmt(px)},{_fmt(py)}" for px, py in zip(bx[::-1], b_lo[::-1])
    )
    parts.append(f'<polygon points="{band}" fill="#9ecae1" fill-opacity="0.5"/>')
    mx, my = to_px(x, mean)
    line = " ".join(f"{_fmt(px)},{_fmt(py)}" for px, py in zip(mx, my))
    parts.append(f'<polyline points="{line}" fill="none" stroke="#08519c" stroke-width="1.5"/>')
    if points is not None:
        sx, sy = to_px(np.asarray(points[0], float), np.asarray(points[1], float))
        for px, py in zip(sx, sy):
            parts.append(f'<circle cx="{_fmt(px)}" cy="{_fmt(py)}" r="2" fill="#636363"/>')
    parts.append(_axes(x_lo, x_hi, y_lo, y_hi))
    if title:
        parts.append(f'<text x="{_W // 2}" y="20" text-anchor="middle" '
                     f'font-family="sans-serif" font-size="13">{title}</text>')
    parts.append("</svg>")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(parts) + "\n")


def _axes(x_lo, x_hi, y_lo, y_hi):
    parts = [
        f'<line x1="{_MARGIN}" y1="{_H - _MARGIN}" x2="{_W - _MARGIN}" '
        f'y2="{_H - _MARGIN}" stroke="black"/>',
        f'<line x1="{_MARGIN}" y1="{_MARGIN}" x2="{_MARGIN}" '
        f'y2="{_H - _MARGIN}" stroke="black"/>',
    ]
    for frac in (0.0, 0.5, 1.0):
        xv = x_lo + frac * (x_hi - x_lo)
        px = _MARGIN + frac * (_W - 2 * _MARGIN)
        parts.append(f'<text x="{_fmt(px)}" y="{_H - _MARGIN + 16}" text-anchor="middle" '
                     f'font-family="sans-serif" font-size="10">{_fmt(xv)}</text>')
        yv = y_lo + frac * (y_hi - y_lo)
        py = _H - _MARGIN - frac * (_H - 2 * _MARGIN)
        parts.append(f'<text x="{_MARGIN - 6}" y="{_fmt(py + 3)}" text-anchor="end" '
                     f'font-family="sans-serif" font-size="10">{_fmt(yv)}</text>')
    return "".join(parts)


def _ramp(t):
    """Simple blue-to-yellow color ramp on [0, 1]."""
    anchors = [(68, 1, 84), (59, 82, 139), (33, 145, 140), (94, 201, 98), (253, 231, 37)]
    t = min(max(float(t), 0.0), 1.0) * (len(anchors) - 1)
    k = min(int(t), len(anchors) - 2)
    f = t - k
    rgb = [round(a + (b - a) * f) for a, b in zip(anchors[k], anchors[k + 1])]
    return f"rgb({rgb[0]},{rgb[1]},{rgb[2]})"


def render_heatmap(path, values, extent, title=""):
    """Cell heatmap of a (nx, ny) value grid over extent (x_lo, x_hi, y_lo, y_hi)."""
    values = np.asarray(values, float)
    nx, ny = values.shape
    v_lo, v_hi = float(np.min(values)), float(np.max(values))
    span = v_hi - v_lo if v_hi > v_lo else 1.0
    cw = (_W - 2 * _MARGIN) / nx
    ch = (_H - 2 * _MARGIN) / ny
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
        f'viewBox="0 0 {_W} {_H}">',
        f'<rect width="{_W}" height="{_H}" fill="white"/>',
    ]
    for ix in range(nx):
        for iy in range(ny):
            color = _ramp((values[ix, iy] - v_lo) / span)
            px = _MARGIN + ix * cw
            py = _H - _MARGIN - (iy + 1) * ch
            parts.append(
                f'<rect x="{_fmt(px)}" y="{_fmt(py)}" width="{_fmt(cw + 0.5)}" '
                f'height="{_fmt(ch + 0.5)}" fill="{color}"/>'
            )
    parts.append(_axes(extent[0], extent[1], extent[2], extent[3]))
    if title:
        parts.append(f'<text x="{_W // 2}" y="20" text-anchor="middle" '
                     f'font-family="sans-serif" font-size="13">{title}</text>')
    parts.append("</svg>")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(parts) + "\n")
