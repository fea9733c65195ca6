"""Cubes, dyadic cubes and planar domain models with exact boundary distance.

Every builder describes its boundary by axis-parallel segments and circles.
That single representation gives exact values for the distance to the
boundary of a point, of a box, and an exact containment test for closed
cubes (a closed cube lies in the open domain iff its center does and the
cube does not meet the boundary).

Strip placement for the two strip examples: strips are stacked upward in
the order they are listed, the first one with base ordinate 0 and every
following base at ``previous base + previous width + gap`` rounded up to a
multiple of 1/2 (``gap`` = 1 by default, never below 1). Half-integer bases
let lattice cubes of dyadic side up to 1 sit flush on every strip floor. All strips start at ``x = 0`` and are attached to
the left half-plane ``{x < 0}``. For ``strips-example-2`` the order is
group by group, ``S_{1,1}, S_{2,1}, S_{2,2}, S_{3,1}, ...``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .errors import ValidationError

# Stand-in for infinity in the half-plane rectangles; far outside any window.
FAR = 1.0e6

KINDS = ("square", "disk", "half-plane", "rect-union", "strips-example-1", "strips-example-2")


@dataclass(frozen=True)
class Cube:
    """Closed axis-parallel cube ``corner + [0, side]^n``."""

    corner: tuple
    side: float

    def __post_init__(self):
        corner = tuple(float(c) for c in self.corner)
        object.__setattr__(self, "corner", corner)
        object.__setattr__(self, "side", float(self.side))
        if not (math.isfinite(self.side) and self.side > 0):
            raise ValidationError("side", f"must be positive and finite, got {self.side}")
        if not all(math.isfinite(c) for c in corner):
            raise ValidationError("corner", "coordinates must be finite")

    @property
    def dim(self) -> int:
        return len(self.corner)

    @property
    def center(self) -> tuple:
        return tuple(c + self.side / 2 for c in self.corner)

    @property
    def volume(self) -> float:
        return self.side ** self.dim

    @property
    def diam(self) -> float:
        return self.side * math.sqrt(self.dim)

    @property
    def upper(self) -> tuple:
        return tuple(c + self.side for c in self.corner)

    def contains_point(self, p) -> bool:
        return all(c <= x <= c + self.side for c, x in zip(self.corner, p))

    def contains_cube(self, other: "Cube") -> bool:
        return all(
            a <= b and b + other.side <= a + self.side
            for a, b in zip(self.corner, other.corner)
        )

    def distance_to(self, other: "Cube") -> float:
        """Set distance between the two closed cubes."""
        gaps = [
            max(0.0, b - (a + self.side), a - (b + other.side))
            for a, b in zip(self.corner, other.corner)
        ]
        return math.hypot(*gaps)

    def distance_to_origin(self) -> float:
        gaps = [max(0.0, c, -(c + self.side)) for c in self.corner]
        return math.hypot(*gaps)

    def scaled(self, factor: float) -> "Cube":
        """Concentric cube with side multiplied by ``factor`` (``2Q`` for factor 2)."""
        side = self.side * factor
        return Cube(tuple(c - side / 2 for c in self.center), side)

    def to_json(self) -> dict:
        return {"corner": list(self.corner), "side": self.side}


@dataclass(frozen=True, order=True)
class DyadicCube:
    """The cube ``index * 2**-level + [0, 2**-level]^n``."""

    level: int
    index: tuple

    @property
    def side(self) -> float:
        return math.ldexp(1.0, -self.level)

    def to_cube(self) -> Cube:
        s = self.side
        return Cube(tuple(i * s for i in self.index), s)

    def parent(self) -> "DyadicCube":
        return DyadicCube(self.level - 1, tuple(i >> 1 for i in self.index))

    def children(self) -> list:
        out = []
        n = len(self.index)
        for bits in range(2 ** n):
            idx = tuple(2 * i + ((bits >> d) & 1) for d, i in enumerate(self.index))
            out.append(DyadicCube(self.level + 1, idx))
        return out

    def contains(self, other: "DyadicCube") -> bool:
        if other.level < self.level:
            return False
        shift = other.level - self.level
        return all((j >> shift) == i for i, j in zip(self.index, other.index))


# ---------------------------------------------------------------------------
# vectorized distance primitives


def _as_points(points):
    arr = np.asarray(points, dtype=float)
    single = arr.ndim == 1
    return np.atleast_2d(arr), single


def _box_gap(lo_a, hi_a, lo_b, hi_b):
    return np.maximum(0.0, np.maximum(lo_b - hi_a, lo_a - hi_b))


def _segments_distance_direct(pts, segs):
    px = pts[:, 0:1]
    py = pts[:, 1:2]
    dx = np.maximum(0.0, np.maximum(segs[None, :, 0] - px, px - segs[None, :, 2]))
    dy = np.maximum(0.0, np.maximum(segs[None, :, 1] - py, py - segs[None, :, 3]))
    return np.sqrt(dx * dx + dy * dy).min(axis=1)


def segments_distance(pts, segs, tile_points=4096):
    """Exact distance from each point to the nearest axis-parallel segment.

    Large point sets are bucketed into square tiles; per tile only segments
    that can beat the tile's upper bound are evaluated.
    """
    pts = np.asarray(pts, dtype=float)
    m = len(pts)
    if m == 0 or len(segs) == 0:
        return np.full(m, np.inf)
    if m * len(segs) <= 4_000_000:
        return _segments_distance_direct(pts, segs)
    lo = pts.min(axis=0)
    hi = pts.max(axis=0)
    extent = max(float((hi - lo).max()), 1e-12)
    ntiles = max(1, int(math.sqrt(m / tile_points)))
    tile = extent / ntiles * (1 + 1e-9)
    key = np.floor((pts - lo) / tile).astype(np.int64)
    key = key[:, 0] * (ntiles + 1) + key[:, 1]
    order = np.argsort(key, kind="stable")
    keys_sorted = key[order]
    bounds = np.flatnonzero(np.diff(keys_sorted)) + 1
    starts = np.concatenate(([0], bounds))
    stops = np.concatenate((bounds, [m]))
    out = np.empty(m)
    for a, b in zip(starts, stops):
        idx = order[a:b]
        p = pts[idx]
        blo = p.min(axis=0)
        bhi = p.max(axis=0)
        gx = _box_gap(blo[0], bhi[0], segs[:, 0], segs[:, 2])
        gy = _box_gap(blo[1], bhi[1], segs[:, 1], segs[:, 3])
        dmin = np.hypot(gx, gy)
        c = (blo + bhi) / 2
        half = float(np.hypot(*(bhi - blo))) / 2
        dc = _segments_distance_direct(c[None, :], segs)[0]
        keep = dmin <= dc + half
        out[idx] = _segments_distance_direct(p, segs[keep])
    return out


def _box_segments_distance(lo, hi, segs):
    """Set distance between boxes ``[lo, hi]`` (m, 2) and each segment; min over segments."""
    if len(segs) == 0:
        return np.full(len(lo), np.inf)
    out = np.full(len(lo), np.inf)
    for s in segs:
        gx = _box_gap(lo[:, 0], hi[:, 0], s[0], s[2])
        gy = _box_gap(lo[:, 1], hi[:, 1], s[1], s[3])
        np.minimum(out, np.hypot(gx, gy), out=out)
    return out


def _box_circle_distance(lo, hi, circle):
    cx, cy, r = circle
    near_x = np.clip(cx, lo[:, 0], hi[:, 0])
    near_y = np.clip(cy, lo[:, 1], hi[:, 1])
    dmin = np.hypot(near_x - cx, near_y - cy)
    far_x = np.maximum(np.abs(lo[:, 0] - cx), np.abs(hi[:, 0] - cx))
    far_y = np.maximum(np.abs(lo[:, 1] - cy), np.abs(hi[:, 1] - cy))
    dmax = np.hypot(far_x, far_y)
    return np.where(dmax < r, r - dmax, np.where(dmin > r, dmin - r, 0.0))


def _open_box_meets_segment(lo, hi, s):
    """Whether an axis-parallel closed segment meets the open boxes ``(lo, hi)``."""
    x0, y0, x1, y1 = min(s[0], s[2]), min(s[1], s[3]), max(s[0], s[2]), max(s[1], s[3])
    # a degenerate coordinate range must lie strictly inside, a proper one must overlap
    mx = np.where(x0 == x1, (lo[:, 0] < x0) & (x0 < hi[:, 0]),
                  (np.maximum(lo[:, 0], x0) < np.minimum(hi[:, 0], x1)))
    my = np.where(y0 == y1, (lo[:, 1] < y0) & (y0 < hi[:, 1]),
                  (np.maximum(lo[:, 1], y0) < np.minimum(hi[:, 1], y1)))
    return mx & my


def _open_box_meets_circle(lo, hi, circle):
    cx, cy, r = circle
    near_x = np.clip(cx, lo[:, 0], hi[:, 0])
    near_y = np.clip(cy, lo[:, 1], hi[:, 1])
    dmin = np.hypot(near_x - cx, near_y - cy)
    far_x = np.maximum(np.abs(lo[:, 0] - cx), np.abs(hi[:, 0] - cx))
    far_y = np.maximum(np.abs(lo[:, 1] - cy), np.abs(hi[:, 1] - cy))
    dmax = np.hypot(far_x, far_y)
    return (dmin < r) & (r < dmax)


# ---------------------------------------------------------------------------
# domain specs


@dataclass
class DomainSpec:
    kind: str
    params: dict = field(default_factory=dict)

    _ALLOWED = {
        "square": {"corner", "side"},
        "disk": {"center", "radius"},
        "half-plane": set(),
        "rect-union": {"rects"},
        "strips-example-1": {"count", "lengths", "schedule", "length", "gap"},
        "strips-example-2": {"count", "slopes", "gap"},
    }

    def validate(self) -> "DomainSpec":
        if self.kind not in KINDS:
            raise ValidationError("kind", f"unknown domain kind {self.kind!r}")
        unknown = set(self.params) - self._ALLOWED[self.kind]
        if unknown:
            raise ValidationError("params", f"unknown fields {sorted(unknown)} for {self.kind}")
        p = self.params
        if self.kind == "square":
            if float(p.get("side", 1.0)) <= 0:
                raise ValidationError("side", "must be positive")
        elif self.kind == "disk":
            if float(p.get("radius", 0.5)) <= 0:
                raise ValidationError("radius", "must be positive")
        elif self.kind == "rect-union":
            rects = p.get("rects")
            if not rects:
                raise ValidationError("rects", "need at least one rectangle")
            for r in rects:
                if len(r) != 4 or not (r[2] > r[0] and r[3] > r[1]):
                    raise ValidationError("rects", f"bad rectangle {r}; expected [x0, y0, x1, y1]")
        elif self.kind.startswith("strips"):
            count = int(p.get("count", 0))
            if count < 1:
                raise ValidationError("count", "must be >= 1")
            if float(p.get("gap", 1.0)) < 1.0:
                raise ValidationError("gap", "strips must be separated by gaps >= 1")
            if self.kind == "strips-example-1":
                lengths = strip_lengths(p)
                if len(lengths) != count:
                    raise ValidationError("lengths", f"expected {count} lengths, got {len(lengths)}")
                if any(not (L > 0) for L in lengths):
                    raise ValidationError("lengths", "all lengths must be positive")
            else:
                slopes = p.get("slopes")
                if slopes is not None and len(slopes) != count:
                    raise ValidationError("slopes", f"expected {count} slopes")
        return self

    @classmethod
    def from_dict(cls, doc: dict) -> "DomainSpec":
        unknown = set(doc) - {"kind", "params", "window"}
        if unknown:
            raise ValidationError("domain", f"unknown fields {sorted(unknown)}")
        if "kind" not in doc:
            raise ValidationError("kind", "missing")
        return cls(doc["kind"], dict(doc.get("params", {}))).validate()


def strip_lengths(params: dict) -> list:
    """Lengths ``L_1..L_N`` for strips-example-1.

    ``schedule="constant"`` gives ``L_n = length``; ``schedule="log"`` gives
    ``L_n = length * (1 + log n) / n``.
    """
    if "lengths" in params:
        return [float(v) for v in params["lengths"]]
    count = int(params.get("count", 0))
    length = float(params.get("length", 1.0))
    schedule = params.get("schedule", "constant")
    if schedule == "constant":
        return [length] * count
    if schedule == "log":
        return [length * (1 + math.log(n)) / n for n in range(1, count + 1)]
    raise ValidationError("schedule", f"unknown schedule {schedule!r}")


@dataclass(frozen=True)
class Strip:
    rect: tuple          # (x0, y0, x1, y1)
    group: int           # n
    member: int          # j (1 for example 1)

    @property
    def width(self) -> float:
        return self.rect[3] - self.rect[1]

    @property
    def length(self) -> float:
        return self.rect[2] - self.rect[0]


def strip_layout(spec: DomainSpec) -> list:
    """Deterministic strip rectangles for the two strip examples."""
    p = spec.params
    gap = float(p.get("gap", 1.0))
    count = int(p["count"])
    shapes = []
    if spec.kind == "strips-example-1":
        for n, L in enumerate(strip_lengths(p), start=1):
            shapes.append((n, 1, 1.0 / n, L))
    else:
        for n in range(1, count + 1):
            for j in range(1, n + 1):
                shapes.append((n, j, 1.0 / j, float(n)))
    strips = []
    base = 0.0
    for n, j, width, length in shapes:
        strips.append(Strip((0.0, base, length, base + width), n, j))
        base = math.ceil(2 * (base + width + gap)) / 2
    return strips


def _rect_union_boundary(rects):
    """Boundary segments of the interior of a union of closed rectangles."""
    rects = np.asarray(rects, dtype=float)
    segs = []
    for r in rects:
        x0, y0, x1, y1 = r
        edges = [
            ((x0, y0, x1, y0), 0, (0.0, -1.0)),
            ((x0, y1, x1, y1), 0, (0.0, 1.0)),
            ((x0, y0, x0, y1), 1, (-1.0, 0.0)),
            ((x1, y0, x1, y1), 1, (1.0, 0.0)),
        ]
        for (ax, ay, bx, by), axis, normal in edges:
            lo, hi = (ax, bx) if axis == 0 else (ay, by)
            fixed = ay if axis == 0 else ax
            cuts = {lo, hi}
            for q in rects:
                for v in ((q[0], q[2]) if axis == 0 else (q[1], q[3])):
                    if lo < v < hi:
                        cuts.add(float(v))
            cuts = sorted(cuts)
            for a, b in zip(cuts[:-1], cuts[1:]):
                mid = (a + b) / 2
                eps = 1e-9 * max(1.0, abs(fixed), abs(mid))
                if axis == 0:
                    probes = [(mid, fixed + eps), (mid, fixed - eps)]
                else:
                    probes = [(fixed + eps, mid), (fixed - eps, mid)]
                covered = all(
                    np.any((rects[:, 0] <= px) & (px <= rects[:, 2]) & (rects[:, 1] <= py) & (py <= rects[:, 3]))
                    for px, py in probes
                )
                if covered:
                    continue
                segs.append((a, fixed, b, fixed) if axis == 0 else (fixed, a, fixed, b))
    return _merge_segments(segs)


def _merge_segments(segs):
    out = []
    horiz = sorted((s for s in segs if s[1] == s[3]), key=lambda s: (s[1], s[0]))
    vert = sorted((s for s in segs if s[1] != s[3]), key=lambda s: (s[0], s[1]))
    for group, along in ((horiz, 0), (vert, 1)):
        cur = None
        for s in group:
            if cur is not None:
                same_line = cur[1] == s[1] if along == 0 else cur[0] == s[0]
                touching = s[along] <= cur[along + 2]
                if same_line and touching:
                    cur = (cur[0], cur[1], max(cur[2], s[2]), cur[3]) if along == 0 else (
                        cur[0], cur[1], cur[2], max(cur[3], s[3]))
                    continue
                out.append(cur)
            cur = s
        if cur is not None:
            out.append(cur)
    return np.asarray(out, dtype=float).reshape(-1, 4)


def _chord_integral(a, b, r):
    """``int_a^b sqrt(r^2 - u^2) du`` for ``-r <= a, b <= r`` (0 when ``b <= a``)."""
    def F(u):
        u = np.clip(u, -r, r)
        return 0.5 * (u * np.sqrt(np.maximum(r * r - u * u, 0.0)) + r * r * np.arcsin(u / r))
    return np.where(b > a, F(b) - F(a), 0.0)


def _disc_lower_left(x, y, r):
    """Area of the disc ``|p| < r`` within ``{u <= x, v <= y}``."""
    X = np.clip(x, -r, r)
    Y = np.clip(y, -r, r)
    uy = np.sqrt(np.maximum(r * r - Y * Y, 0.0))
    # horizontal extent where the line v = Y cuts the disc, intersected with u <= X
    L = np.maximum(np.minimum(X, uy) - (-uy), 0.0)
    upper = (_chord_integral(-r, X, r) + _chord_integral(-r, np.minimum(X, -uy), r)
             + _chord_integral(uy, X, r) + Y * L)
    lower = Y * L + _chord_integral(-uy, np.minimum(X, uy), r)
    return np.where(Y >= 0, upper, lower)


def disc_rect_area(cx, cy, r, x0, y0, x1, y1):
    """Exact area of ``B((cx, cy), r)`` intersected with ``[x0, x1] x [y0, y1]`` (vectorized)."""
    cx, cy, r, x0, y0, x1, y1 = np.broadcast_arrays(*(np.asarray(v, dtype=float)
                                                      for v in (cx, cy, r, x0, y0, x1, y1)))
    a, b, c, d = x0 - cx, y0 - cy, x1 - cx, y1 - cy
    out = (_disc_lower_left(c, d, r) - _disc_lower_left(a, d, r)
           - _disc_lower_left(c, b, r) + _disc_lower_left(a, b, r))
    return np.maximum(out, 0.0)


# ---------------------------------------------------------------------------
# domain model


@dataclass(frozen=True, eq=False)
class DomainModel:
    """A planar open set with exact boundary geometry.

    ``distance`` is the distance to the complement (zero outside). For the
    complement of a domain (``complement()``) the roles are swapped, which is
    how the Whitney decomposition of the exterior is obtained.
    """

    name: str
    window: Cube
    params: dict
    rects: np.ndarray           # closed rectangles whose union's interior is the domain
    circles: tuple = ()         # disks (cx, cy, r); the domain is their union's interior
    segments: np.ndarray = None
    exterior: bool = False
    nominal: dict = field(default_factory=dict)

    # -- point queries ---------------------------------------------------
    def boundary_distance(self, points):
        """Distance to the boundary, for points on either side."""
        pts, single = _as_points(points)
        d = np.full(len(pts), np.inf)
        if self.segments is not None and len(self.segments):
            d = np.minimum(d, segments_distance(pts, self.segments))
        for cx, cy, r in self.circles:
            d = np.minimum(d, np.abs(np.hypot(pts[:, 0] - cx, pts[:, 1] - cy) - r))
        return float(d[0]) if single else d

    def _in_base(self, pts):
        x, y = pts[:, 0], pts[:, 1]
        inside_open = np.zeros(len(pts), dtype=bool)
        inside_closed = np.zeros(len(pts), dtype=bool)
        for x0, y0, x1, y1 in self.rects:
            inside_open |= (x0 < x) & (x < x1) & (y0 < y) & (y < y1)
            inside_closed |= (x0 <= x) & (x <= x1) & (y0 <= y) & (y <= y1)
        for cx, cy, r in self.circles:
            rr = np.hypot(x - cx, y - cy)
            inside_open |= rr < r
        todo = inside_closed & ~inside_open
        if todo.any():
            inside_open[todo] = self.boundary_distance(pts[todo]) > 0
        return inside_open

    def inside(self, points):
        pts, single = _as_points(points)
        base = self._in_base(pts)
        if self.exterior:
            base = ~base
            edge = base.copy()
            if edge.any():
                base[edge] = self.boundary_distance(pts[edge]) > 0
        return bool(base[0]) if single else base

    def distance(self, points):
        """``d(x) = dist(x, complement)``: positive inside, zero elsewhere."""
        pts, single = _as_points(points)
        ins = self.inside(pts)
        d = np.zeros(len(pts))
        if ins.any():
            d[ins] = self.boundary_distance(pts[ins])
        return float(d[0]) if single else d

    # -- box queries -----------------------------------------------------
    def box_boundary_distance(self, corners, sides):
        """Exact set distance between closed boxes and the boundary."""
        lo = np.atleast_2d(np.asarray(corners, dtype=float))
        hi = lo + np.asarray(sides, dtype=float).reshape(-1, 1)
        d = np.full(len(lo), np.inf)
        if self.segments is not None and len(self.segments):
            d = np.minimum(d, _box_segments_distance(lo, hi, self.segments))
        for c in self.circles:
            d = np.minimum(d, _box_circle_distance(lo, hi, c))
        return d

    def contains_cubes(self, corners, sides):
        """Exact test that the open cube lies in the open set (vectorized).

        Cubes may touch the boundary; they may not cross it.
        """
        corners = np.atleast_2d(np.asarray(corners, dtype=float))
        sides = np.broadcast_to(np.asarray(sides, dtype=float), (len(corners),))
        centers = corners + sides[:, None] / 2
        ok = self.inside(centers)
        if ok.any():
            idx = np.flatnonzero(ok)
            lo = corners[idx]
            hi = lo + sides[idx, None]
            hit = np.zeros(len(idx), dtype=bool)
            if self.segments is not None:
                for s in self.segments:
                    hit |= _open_box_meets_segment(lo, hi, s)
            for c in self.circles:
                hit |= _open_box_meets_circle(lo, hi, c)
            ok[idx] = ~hit
        return ok

    def complement(self) -> "DomainModel":
        """The open complement of the closure, sharing the same boundary."""
        return DomainModel(
            name=f"complement({self.name})" if not self.exterior else self.name[11:-1],
            window=self.window,
            params=self.params,
            rects=self.rects,
            circles=self.circles,
            segments=self.segments,
            exterior=not self.exterior,
            nominal=self.nominal,
        )

    @property
    def dim(self) -> int:
        return 2


def cube_inside(Q: Cube, D: DomainModel) -> bool:
    """Whether the open cube ``Q`` lies in ``D``; touching the boundary is allowed."""
    return bool(D.contains_cubes([Q.corner], [Q.side])[0])


def build_domain(spec: DomainSpec, window: Cube) -> DomainModel:
    spec.validate()
    if window.side <= 0:
        raise ValidationError("window", "side must be positive")
    p = spec.params
    nominal = {}
    if spec.kind == "square":
        corner = tuple(p.get("corner", (0.0, 0.0)))
        side = float(p.get("side", 1.0))
        rects = np.array([[corner[0], corner[1], corner[0] + side, corner[1] + side]])
        circles = ()
        nominal = {"eps": 0.1, "delta": side * math.sqrt(2.0)}
    elif spec.kind == "disk":
        center = tuple(p.get("center", (0.0, 0.0)))
        radius = float(p.get("radius", 0.5))
        rects = np.zeros((0, 4))
        circles = ((float(center[0]), float(center[1]), radius),)
        nominal = {"eps": 0.1, "delta": 2 * radius}
    elif spec.kind == "half-plane":
        rects = np.array([[-FAR, -FAR, 0.0, FAR]])
        circles = ()
        nominal = {"eps": 0.1, "delta": math.inf}
    elif spec.kind == "rect-union":
        rects = np.asarray(p["rects"], dtype=float)
        circles = ()
    else:
        strips = strip_layout(spec)
        rects = np.array([[-FAR, -FAR, 0.0, FAR]] + [list(s.rect) for s in strips])
        circles = ()
    segments = _rect_union_boundary(rects) if len(rects) else np.zeros((0, 4))
    return DomainModel(
        name=spec.kind,
        window=window,
        params={"kind": spec.kind, **p},
        rects=rects,
        circles=circles,
        segments=segments,
        nominal=nominal,
    )


def default_window(spec: DomainSpec) -> Cube:
    """A dyadic-sided window that holds the whole (truncated) domain with margin."""
    p = spec.params
    if spec.kind == "square":
        c = p.get("corner", (0.0, 0.0))
        s = float(p.get("side", 1.0))
        return Cube((c[0] - s / 2, c[1] - s / 2), 2 * s)
    if spec.kind == "disk":
        c = p.get("center", (0.0, 0.0))
        r = float(p.get("radius", 0.5))
        return Cube((c[0] - 2 * r, c[1] - 2 * r), 4 * r)
    if spec.kind == "half-plane":
        return Cube((-4.0, -4.0), 8.0)
    if spec.kind == "rect-union":
        r = np.asarray(p["rects"], dtype=float)
        lo = r[:, :2].min(axis=0)
        hi = r[:, 2:].max(axis=0)
        side = 2.0 ** math.ceil(math.log2(float((hi - lo).max()) * 1.25))
        return Cube(tuple(np.floor(lo - (side - (hi - lo)) / 2)), side)
    strips = strip_layout(spec)
    top = max(s.rect[3] for s in strips)
    right = max(s.rect[2] for s in strips)
    side = float(2 ** math.ceil(math.log2(max(top + 2, right + 4))))
    return Cube((-2.0, -1.0), side)


def load_domain(doc) -> DomainModel:
    """Build a domain from the JSON document ``{"kind", "params", "window"}``."""
    if isinstance(doc, (str, bytes)):
        doc = json.loads(doc)
    spec = DomainSpec.from_dict(doc)
    if "window" in doc:
        w = doc["window"]
        unknown = set(w) - {"corner", "side"}
        if unknown:
            raise ValidationError("window", f"unknown fields {sorted(unknown)}")
        window = Cube(tuple(w["corner"]), float(w["side"]))
    else:
        window = default_window(spec)
    return build_domain(spec, window)


def strip_of(D: DomainModel, points):
    """Index into ``strip_layout`` of the strip holding each point, or -1."""
    spec = DomainSpec(D.params["kind"], {k: v for k, v in D.params.items() if k != "kind"})
    strips = strip_layout(spec)
    pts, single = _as_points(points)
    out = np.full(len(pts), -1)
    for i, s in enumerate(strips):
        x0, y0, x1, y1 = s.rect
        hit = (pts[:, 0] >= x0) & (pts[:, 0] <= x1) & (pts[:, 1] > y0) & (pts[:, 1] < y1) & (pts[:, 0] > 0)
        out[hit] = i
    return int(out[0]) if single else out


def domain_spec_of(D: DomainModel) -> DomainSpec:
    return DomainSpec(D.params["kind"], {k: v for k, v in D.params.items() if k != "kind"})


def strip_base(spec: DomainSpec, index: int) -> float:
    """Base ordinate of the ``index``-th listed strip (1-based)."""
    return strip_layout(spec)[index - 1].rect[1]


def any_json(obj: Any) -> Any:
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    raise TypeError(type(obj))
