"""Functions sampled at cell centers of a uniform grid over a window.

Array layout: ``values[i, j]`` is the sample at the center
``(origin[0] + (i + 1/2) h, origin[1] + (j + 1/2) h)``; axis 0 runs along x.
A cell belongs to a cube when its center does (midpoint quadrature).

Binary format (all little-endian)::

    magic   4 bytes  b"BMOG"
    version u32      1
    n       u32      dimension (2)
    h       f64
    origin  n x f64
    dims    n x u64
    nruns   u64      run-length encoding of the row-major mask,
    runs    nruns x u64   alternating runs starting with a run of False
    values  prod(dims) x f64, row-major (C order)
"""
from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import ResolutionError, ValidationError
from .geometry import Cube, DomainModel, domain_spec_of, strip_layout

MIN_CELLS_PER_SIDE = 4          # 4**n cells per cube for n = 2
TEST_FUNCTION_KINDS = (
    "constant", "coordinate", "log-distance", "example-1", "example-2",
    "random-whitney-step", "indicator-half", "distance", "sine",
)


@dataclass(frozen=True, eq=False)
class GridFunction:
    spacing: float
    origin: tuple
    values: np.ndarray
    mask: np.ndarray

    def __post_init__(self):
        if self.values.shape != self.mask.shape:
            raise ValidationError("values", "shape must match mask")
        self.values.setflags(write=False)
        self.mask.setflags(write=False)

    @property
    def shape(self):
        return self.values.shape

    @property
    def window(self) -> Cube:
        return Cube(self.origin, self.spacing * self.shape[0])

    def axis_centers(self, axis: int) -> np.ndarray:
        return self.origin[axis] + (np.arange(self.shape[axis]) + 0.5) * self.spacing

    def centers(self) -> np.ndarray:
        """All cell centers, shape ``(nx, ny, 2)``."""
        X, Y = np.meshgrid(self.axis_centers(0), self.axis_centers(1), indexing="ij")
        return np.stack([X, Y], axis=-1)

    @cached_property
    def mask_table(self) -> np.ndarray:
        """Summed-area table of the mask (exact integer counts)."""
        S = np.zeros((self.shape[0] + 1, self.shape[1] + 1), dtype=np.int64)
        S[1:, 1:] = self.mask.astype(np.int64).cumsum(0).cumsum(1)
        return S

    def masked_counts(self, i0, j0, ki, kj):
        S = self.mask_table
        i0 = np.asarray(i0)
        j0 = np.asarray(j0)
        return S[i0 + ki, j0 + kj] - S[i0, j0 + kj] - S[i0 + ki, j0] + S[i0, j0]

    def with_values(self, values, mask=None) -> "GridFunction":
        mask = self.mask if mask is None else mask
        vals = np.where(mask, np.asarray(values, dtype=float), 0.0)
        return GridFunction(self.spacing, self.origin, vals, np.array(mask, dtype=bool))

    def cell_ranges(self, corners, sides):
        """Index ranges ``[i0, i0 + ki) x [j0, j0 + kj)`` of cells centered in each cube."""
        corners = np.atleast_2d(np.asarray(corners, dtype=float))
        sides = np.broadcast_to(np.asarray(sides, dtype=float), (len(corners),))
        h = self.spacing
        lo = (corners - np.asarray(self.origin)) / h - 0.5
        hi = lo + sides[:, None] / h
        i0 = np.ceil(np.round(lo, 9)).astype(np.int64)
        i1 = np.floor(np.round(hi, 9)).astype(np.int64) + 1
        i0 = np.clip(i0, 0, np.array(self.shape))
        i1 = np.clip(i1, 0, np.array(self.shape))
        k = np.maximum(i1 - i0, 0)
        return i0[:, 0], i0[:, 1], k[:, 0], k[:, 1]

    def sup_abs(self) -> float:
        return float(np.abs(self.values[self.mask]).max()) if self.mask.any() else 0.0


# ---------------------------------------------------------------------------
# block statistics


@dataclass
class BlockStats:
    mean: np.ndarray
    abs_mean: np.ndarray
    oscillation: np.ndarray
    count: np.ndarray


def block_stats(f: GridFunction, i0, j0, ki, kj, need_oscillation=True,
                chunk_cells=4_000_000) -> BlockStats:
    """Masked mean, mean of ``|f|`` and mean oscillation over index blocks.

    Means are formed from the gathered block values (pairwise summation), not
    from summed-area differences, so a constant function yields its value to
    within a few ulps.
    """
    i0 = np.asarray(i0, dtype=np.int64)
    j0 = np.asarray(j0, dtype=np.int64)
    ki = np.broadcast_to(np.asarray(ki, dtype=np.int64), i0.shape)
    kj = np.broadcast_to(np.asarray(kj, dtype=np.int64), i0.shape)
    m = len(i0)
    mean = np.full(m, np.nan)
    absm = np.full(m, np.nan)
    osc = np.full(m, np.nan)
    count = np.zeros(m, dtype=np.int64)
    if m == 0:
        return BlockStats(mean, absm, osc, count)
    vals = f.values
    msk = f.mask
    # group blocks by shape with one stable sort on a scalar key
    key = ki * (int(kj.max()) + 1) + kj
    order = np.argsort(key, kind="stable")
    bounds = np.flatnonzero(np.diff(key[order])) + 1
    for sel in np.split(order, bounds):
        a, b = int(ki[sel[0]]), int(kj[sel[0]])
        if a == 0 or b == 0:
            continue
        vw = sliding_window_view(vals, (int(a), int(b)))
        mw = sliding_window_view(msk, (int(a), int(b)))
        step = max(1, chunk_cells // int(a * b))
        for s in range(0, len(sel), step):
            idx = sel[s:s + step]
            V = vw[i0[idx], j0[idx]].reshape(len(idx), -1)
            c = f.masked_counts(i0[idx], j0[idx], a, b)
            full = bool(np.all(c == a * b))
            if not full:
                M = mw[i0[idx], j0[idx]].reshape(len(idx), -1)
            Vm = V if full else np.where(M, V, 0.0)
            with np.errstate(invalid="ignore", divide="ignore"):
                mu = Vm.sum(axis=1) / c
                am = np.abs(Vm).sum(axis=1) / c
                if need_oscillation:
                    # V is a gathered copy, so it can be overwritten
                    np.subtract(V, mu[:, None], out=V)
                    np.abs(V, out=V)
                    if not full:
                        V[~M] = 0.0
                    osc[idx] = V.sum(axis=1) / c
            mean[idx] = mu
            absm[idx] = am
            count[idx] = c
    return BlockStats(mean, absm, osc, count)


def _cube_block(f: GridFunction, Q: Cube):
    i0, j0, ki, kj = f.cell_ranges([Q.corner], [Q.side])
    count = int(f.masked_counts(i0, j0, ki, kj)[0]) if ki[0] and kj[0] else 0
    need = MIN_CELLS_PER_SIDE ** 2
    if count < need:
        raise ResolutionError(
            f"cube of side {Q.side:g} holds {count} masked cells (< {need})",
            suggestion={"max_spacing": Q.side / MIN_CELLS_PER_SIDE},
        )
    return i0, j0, ki, kj


def cube_mean(f: GridFunction, Q: Cube) -> float:
    """Midpoint-rule average ``f_Q`` over masked cells centered in ``Q``."""
    st = block_stats(f, *_cube_block(f, Q), need_oscillation=False)
    return float(st.mean[0])


def cube_abs_mean(f: GridFunction, Q: Cube) -> float:
    st = block_stats(f, *_cube_block(f, Q), need_oscillation=False)
    return float(st.abs_mean[0])


def mean_oscillation(f: GridFunction, Q: Cube) -> float:
    """Average of ``|f - f_Q|`` over the cells of ``Q``."""
    st = block_stats(f, *_cube_block(f, Q))
    return float(st.oscillation[0])


# ---------------------------------------------------------------------------
# sampling


@dataclass
class TestFunctionSpec:
    kind: str
    params: dict = field(default_factory=dict)

    __test__ = False  # not a pytest class

    def validate(self) -> "TestFunctionSpec":
        if self.kind not in TEST_FUNCTION_KINDS:
            raise ValidationError("kind", f"unknown test function {self.kind!r}")
        p = self.params
        if self.kind == "coordinate" and int(p.get("axis", 0)) not in (0, 1):
            raise ValidationError("axis", "must be 0 or 1")
        if self.kind == "random-whitney-step" and "seed" not in p:
            raise ValidationError("seed", "random-whitney-step needs an explicit seed")
        if self.kind == "example-2":
            slopes = p.get("slopes", "sqrt")
            if not (slopes == "sqrt" or isinstance(slopes, (list, tuple))):
                raise ValidationError("slopes", "expected 'sqrt' or a list")
        return self


def grid_shape(window: Cube, h: float) -> int:
    if not h > 0:
        raise ValidationError("spacing", "must be positive")
    cells = window.side / h
    n = int(round(cells))
    if abs(cells - n) > 1e-6 * max(1.0, cells):
        raise ValidationError("spacing", f"{h} does not divide the window side {window.side}")
    if n < 8:
        raise ResolutionError(f"only {n} cells across the window (need >= 8)",
                              suggestion={"max_spacing": window.side / 8})
    return n


def domain_mask(D: DomainModel, h: float):
    """Cell-center membership mask of ``D`` over its window, plus the centers."""
    n = grid_shape(D.window, h)
    xs = D.window.corner[0] + (np.arange(n) + 0.5) * h
    ys = D.window.corner[1] + (np.arange(n) + 0.5) * h
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    pts = np.stack([X.ravel(), Y.ravel()], axis=1)
    return D.inside(pts).reshape(n, n), pts


def grid_distance(f: GridFunction, D: DomainModel) -> np.ndarray:
    """``d(x)`` at every masked cell center (zero elsewhere)."""
    pts = f.centers().reshape(-1, 2)
    out = np.zeros(len(pts))
    m = f.mask.ravel()
    out[m] = D.boundary_distance(pts[m])
    return out.reshape(f.shape)


def example2_slopes(params: dict, count: int) -> list:
    slopes = params.get("slopes", "sqrt")
    if slopes == "sqrt":
        return [math.sqrt(j) for j in range(1, count + 1)]
    return [float(c) for c in slopes]


def sample(spec: TestFunctionSpec, D: DomainModel, h: float) -> GridFunction:
    """Evaluate a closed-form test function at the masked cell centers of ``D``."""
    spec.validate()
    mask, pts = domain_mask(D, h)
    n = mask.shape[0]
    flat = mask.ravel()
    vals = np.zeros(n * n)
    p = spec.params
    P = pts[flat]
    kind = spec.kind
    if kind == "constant":
        v = np.full(len(P), float(p.get("value", 1.0)))
    elif kind == "coordinate":
        v = float(p.get("scale", 1.0)) * P[:, int(p.get("axis", 0))] + float(p.get("offset", 0.0))
    elif kind == "log-distance":
        v = np.log(1.0 / D.boundary_distance(P))
    elif kind == "distance":
        v = float(p.get("scale", 1.0)) * D.boundary_distance(P)
    elif kind == "sine":
        w = float(p.get("frequency", 2 * math.pi))
        v = np.sin(w * P[:, 0]) * np.cos(w * P[:, 1])
    elif kind == "indicator-half":
        split = float(p.get("split", D.window.center[0]))
        v = (P[:, 0] < split).astype(float)
    elif kind in ("example-1", "example-2"):
        v = _strip_function(kind, p, D, P)
    elif kind == "random-whitney-step":
        v = _whitney_step(p, D, h, P)
    else:  # pragma: no cover - validate() guards
        raise ValidationError("kind", kind)
    vals[flat] = v
    if not np.all(np.isfinite(vals)):
        raise ValidationError("values", "test function is not finite on the grid")
    return GridFunction(float(h), D.window.corner, vals.reshape(n, n), mask)


def _strip_function(kind, params, D, P):
    dspec = domain_spec_of(D)
    expected = "strips-example-1" if kind == "example-1" else "strips-example-2"
    if dspec.kind != expected:
        raise ValidationError("domain", f"{kind} needs a {expected} domain")
    strips = strip_layout(dspec)
    v = np.zeros(len(P))
    lam = params.get("lambda")
    count = int(dspec.params["count"])
    slopes = example2_slopes({**dspec.params, **params}, count) if kind == "example-2" else None
    for s in strips:
        x0, y0, x1, y1 = s.rect
        hit = (P[:, 0] > 0) & (P[:, 0] <= x1) & (P[:, 1] > y0) & (P[:, 1] < y1)
        if kind == "example-1":
            v[hit] = s.group * P[hit, 0]
        else:
            # zero on strips that hold (open) cubes of side lambda
            if lam is not None and s.width >= float(lam) and s.length >= float(lam):
                continue
            v[hit] = slopes[s.member - 1] * P[hit, 0]
    return v


def _whitney_step(params, D, h, P):
    from .whitney import whitney_decompose  # deferred: whitney imports gridfield

    rng = np.random.default_rng(np.uint64(int(params["seed"]) & (2 ** 64 - 1)))
    amp = float(params.get("amplitude", 1.0))
    level = int(params.get("level", max(0, round(-math.log2(h)))))
    W = whitney_decompose(D, D.window, level, strict=False)
    steps = amp * rng.uniform(-1.0, 1.0, size=len(W.cubes))
    idx = W.locate(P)
    return np.where(idx >= 0, steps[np.clip(idx, 0, None)], 0.0)


# ---------------------------------------------------------------------------
# binary dump / load

_MAGIC = b"BMOG"


def _rle(mask_flat):
    runs = []
    change = np.flatnonzero(np.diff(mask_flat.astype(np.int8))) + 1
    edges = np.concatenate(([0], change, [len(mask_flat)]))
    if len(mask_flat) and mask_flat[0]:
        runs.append(0)
    for a, b in zip(edges[:-1], edges[1:]):
        runs.append(int(b - a))
    return runs


def dump(f: GridFunction, path) -> None:
    n = f.values.ndim
    runs = _rle(f.mask.ravel())
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<II", 1, n))
        fh.write(struct.pack("<d", f.spacing))
        fh.write(struct.pack(f"<{n}d", *f.origin))
        fh.write(struct.pack(f"<{n}Q", *f.shape))
        fh.write(struct.pack("<Q", len(runs)))
        fh.write(np.asarray(runs, dtype="<u8").tobytes())
        fh.write(np.ascontiguousarray(f.values, dtype="<f8").tobytes())


def load(path) -> GridFunction:
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:4] != _MAGIC:
        raise ValidationError("file", "not a grid function dump")
    off = 4
    version, n = struct.unpack_from("<II", data, off)
    off += 8
    if version != 1:
        raise ValidationError("version", f"unsupported version {version}")
    (h,) = struct.unpack_from("<d", data, off)
    off += 8
    origin = struct.unpack_from(f"<{n}d", data, off)
    off += 8 * n
    dims = struct.unpack_from(f"<{n}Q", data, off)
    off += 8 * n
    (nruns,) = struct.unpack_from("<Q", data, off)
    off += 8
    runs = np.frombuffer(data, dtype="<u8", count=nruns, offset=off)
    off += 8 * nruns
    size = int(np.prod(dims))
    values = np.frombuffer(data, dtype="<f8", count=size, offset=off).astype(float).reshape(dims)
    bits = np.zeros(len(runs), dtype=bool)
    bits[1::2] = True
    mask = np.repeat(bits, runs.astype(np.int64)).reshape(dims)
    return GridFunction(h, tuple(origin), values, mask)


def grid_lipschitz(f: GridFunction, pairs: int = 0, seed: int = 0) -> float:
    """Largest difference quotient over grid edges (axis and diagonal).

    With ``pairs > 0`` random long-range pairs of masked cells are added, which
    catches jumps between distant cells that local quotients miss.
    """
    v = f.values
    m = f.mask
    h = f.spacing
    best = 0.0
    shifts = {
        1.0: [((slice(None, -1), slice(None)), (slice(1, None), slice(None))),
              ((slice(None), slice(None, -1)), (slice(None), slice(1, None)))],
        math.sqrt(2.0): [((slice(None, -1), slice(None, -1)), (slice(1, None), slice(1, None))),
                         ((slice(None, -1), slice(1, None)), (slice(1, None), slice(None, -1)))],
    }
    for length, pairs_ in shifts.items():
        for sa, sb in pairs_:
            both = m[sa] & m[sb]
            if both.any():
                q = np.abs(v[sa] - v[sb])[both].max() / (h * length)
                best = max(best, float(q))
    if pairs:
        rng = np.random.default_rng(seed)
        idx = np.argwhere(m)
        if len(idx) > 1:
            a = idx[rng.integers(0, len(idx), pairs)]
            b = idx[rng.integers(0, len(idx), pairs)]
            dist = np.hypot(*(a - b).T) * h
            ok = dist > 0
            q = np.abs(v[a[ok, 0], a[ok, 1]] - v[b[ok, 0], b[ok, 1]]) / dist[ok]
            if len(q):
                best = max(best, float(q.max()))
    return best


def disc_sums(values, cells_ij, K):
    """Sums of ``values`` over discs of cells around ``cells_ij``.

    A cell belongs to the disc of ``(i, j)`` when its index offset
    ``(di, dj)`` has ``di**2 + dj**2 <= K``. Returns ``(sums, counts)``,
    counting only cells inside the array. Work is one pass per row offset
    over prefix sums, so the cost is about ``m * (2 sqrt(K) + 1)``.
    """
    values = np.asarray(values, dtype=float)
    ni, nj = values.shape
    cells_ij = np.asarray(cells_ij, dtype=np.int64).reshape(-1, 2)
    K = np.broadcast_to(np.asarray(K, dtype=float), (len(cells_ij),))
    P = np.zeros((ni, nj + 1))
    np.cumsum(values, axis=1, out=P[:, 1:])
    r = np.floor(np.sqrt(K)).astype(np.int64)
    order = np.argsort(-r, kind="stable")
    ij = cells_ij[order]
    Ks = K[order]
    rs = r[order]
    total = np.zeros(len(order))
    count = np.zeros(len(order))
    rmax = int(rs[0]) if len(rs) else -1
    for d in range(rmax + 1):
        act = int(np.searchsorted(-rs, -d, side="right"))
        w = np.floor(np.sqrt(Ks[:act] - d * d)).astype(np.int64)
        i = ij[:act, 0]
        j = ij[:act, 1]
        lo = np.maximum(j - w, 0)
        hi = np.minimum(j + w, nj - 1) + 1
        for row in ((i + d,) if d == 0 else (i + d, i - d)):
            ok = (row >= 0) & (row < ni)
            rr = np.where(ok, row, 0)
            total[:act] += np.where(ok, P[rr, hi] - P[rr, lo], 0.0)
            count[:act] += np.where(ok, hi - lo, 0)
    sums = np.empty(len(order))
    counts = np.empty(len(order))
    sums[order] = total
    counts[order] = count
    return sums, counts
