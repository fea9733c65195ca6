"""Deterministic CSV, JSON and SVG emitters.

Floats are written with ``repr``-exact 17 significant digits so identical
inputs give byte-identical files.
"""
from __future__ import annotations

import csv
import json
import math
from xml.sax.saxutils import escape

import numpy as np

CSV_SCHEMAS = {
    "omega": ("t", "omega"),
    "log_probe": ("ell", "ratio"),
    "gamma": ("beta", "gamma"),
    "norm": ("part", "value", "argmax_corner_x", "argmax_corner_y", "argmax_side"),
    "approx": ("scheme", "index_or_param", "bmo_error", "sup_norm", "lip_const"),
    "witness": ("x_0", "x_1", "y_0", "y_1", "result", "arclength", "bound", "clearance_margin"),
    "example1": ("n", "ell", "sup_average", "total", "ratio", "unmatched_cubes"),
    "example2": ("n", "window_side", "total_lam", "average_lam", "total_lam_prime", "gamma_min",
                 "gamma_max"),
}


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return format(v, ".17g")
    return str(v)


def write_csv(path, schema: str, rows) -> None:
    header = CSV_SCHEMAS[schema]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            if len(r) != len(header):
                raise ValueError(f"row {r!r} does not match schema {schema}")
            w.writerow([_fmt(v) for v in r])


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else ("inf" if v > 0 else "-inf" if v < 0 else "nan")
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def write_json(path, doc) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_jsonable(doc), fh, indent=2, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------------------
# SVG


class _Canvas:
    def __init__(self, window, size=800):
        self.x0, self.y0 = window.corner
        self.side = window.side
        self.size = size
        self.items = []

    def px(self, x, y):
        s = self.size / self.side
        return (x - self.x0) * s, self.size - (y - self.y0) * s

    def rect(self, x0, y0, side_x, side_y, **attrs):
        a, b = self.px(x0, y0 + side_y)
        s = self.size / self.side
        self.items.append(_tag("rect", x=a, y=b, width=side_x * s, height=side_y * s, **attrs))

    def line(self, x0, y0, x1, y1, **attrs):
        a, b = self.px(x0, y0)
        c, d = self.px(x1, y1)
        self.items.append(_tag("line", x1=a, y1=b, x2=c, y2=d, **attrs))

    def circle(self, cx, cy, r, **attrs):
        a, b = self.px(cx, cy)
        self.items.append(_tag("circle", cx=a, cy=b, r=r * self.size / self.side, **attrs))

    def polyline(self, pts, **attrs):
        txt = " ".join(f"{_num(a)},{_num(b)}" for a, b in (self.px(x, y) for x, y in pts))
        self.items.append(_tag("polyline", points=txt, **attrs))

    def text(self, x, y, s, **attrs):
        a, b = self.px(x, y)
        self.items.append(f'<text x="{_num(a)}" y="{_num(b)}" font-size="12">{escape(s)}</text>')

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write('<?xml version="1.0" encoding="UTF-8"?>\n')
            fh.write(f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
                     f'width="{self.size}" height="{self.size}" viewBox="0 0 {self.size} {self.size}">\n')
            for it in self.items:
                fh.write(it + "\n")
            fh.write("</svg>\n")


def _num(v):
    return format(float(v), ".6g")


def _tag(name, **attrs):
    parts = []
    for k, v in attrs.items():
        k = k.replace("_", "-")
        parts.append(f'{k}="{_num(v) if isinstance(v, (int, float, np.floating)) else escape(str(v))}"')
    return f"<{name} {' '.join(parts)}/>"


def draw_boundary(cv: _Canvas, D, color="black"):
    if D.segments is not None:
        for s in D.segments:
            cv.line(*s, stroke=color, stroke_width=1.5)
    for cx, cy, r in D.circles:
        cv.circle(cx, cy, r, fill="none", stroke=color, stroke_width=1.5)


def whitney_svg(path, decompositions, D=None, matching=None, size=800):
    """One rectangle per Whitney cube: stroke by level parity, fill by owner."""
    W0 = decompositions[0]
    cv = _Canvas(W0.window, size)
    fills = {"interior": "#dbe9f6", "exterior": "#f6e3d4"}
    for W in decompositions:
        fill = fills["exterior" if "complement" in W.owner else "interior"]
        for (x, y), s, k in zip(W.corners, W.sides, W.levels):
            cv.rect(x, y, s, s, fill=fill, stroke="#333333" if k % 2 == 0 else "#999999",
                    stroke_width=0.4)
    if matching is not None and len(decompositions) == 2:
        Ep, E = decompositions[1], decompositions[0]
        for a, b in sorted(matching.pairs.items()):
            ca, cb = Ep.centers[a], E.centers[b]
            cv.line(ca[0], ca[1], cb[0], cb[1], stroke="#b2182b", stroke_width=0.4)
    if D is not None:
        draw_boundary(cv, D)
    cv.save(path)


def heatmap_svg(path, g, D=None, overlay=None, size=800, max_cells=256):
    """Coarse heatmap of a grid function with optional Whitney overlay."""
    n = g.shape[0]
    step = max(1, -(-n // max_cells))
    v = g.values[: n // step * step, : n // step * step]
    v = v.reshape(n // step, step, -1, step).mean(axis=(1, 3))
    lo, hi = float(np.min(v)), float(np.max(v))
    span = hi - lo if hi > lo else 1.0
    cv = _Canvas(g.window, size)
    hs = g.spacing * step
    for i in range(v.shape[0]):
        for j in range(v.shape[1]):
            t = (v[i, j] - lo) / span
            col = "#%02x%02x%02x" % (int(255 * t), int(80 + 100 * (1 - abs(2 * t - 1))), int(255 * (1 - t)))
            cv.rect(g.origin[0] + i * hs, g.origin[1] + j * hs, hs, hs, fill=col, stroke="none")
    if overlay is not None:
        for (x, y), s in zip(overlay.corners, overlay.sides):
            cv.rect(x, y, s, s, fill="none", stroke="#222222", stroke_width=0.3)
    if D is not None:
        draw_boundary(cv, D, "white")
    cv.text(g.origin[0] + 0.02 * g.window.side, g.origin[1] + 0.02 * g.window.side,
            f"min {lo:.4g}  max {hi:.4g}")
    cv.save(path)


def cigars_svg(path, D, certificates, size=800):
    """Domain outline with failed pairs (red) and certified paths (green)."""
    cv = _Canvas(D.window, size)
    draw_boundary(cv, D)
    for c in certificates:
        if c.success and len(c.path):
            cv.polyline(c.path, fill="none", stroke="#1a9850", stroke_width=0.8)
        elif not c.success:
            cv.line(c.x[0], c.x[1], c.y[0], c.y[1], stroke="#d73027", stroke_width=1.2,
                    stroke_dasharray="4,2")
    cv.save(path)
