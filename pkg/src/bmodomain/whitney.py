"""Whitney decompositions by top-down dyadic subdivision, and cube matching.

A dyadic cube ``Q`` lying in the open set ``U`` is accepted when
``diam(Q) <= dist(Q, boundary) <= 4 diam(Q)`` and split when the distance is
smaller. Cubes that still meet the boundary at the finest level are kept as
boundary residue; they never enter a sup-functional.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.spatial import cKDTree

from .errors import ResolutionError
from .geometry import Cube, DomainModel, DyadicCube

_OFF = 1 << 30


def _keys(index):
    index = np.asarray(index, dtype=np.int64)
    return ((index[..., 0] + _OFF) << 32) | (index[..., 1] + _OFF)


def start_level(window: Cube) -> int:
    """Coarsest dyadic level whose cubes tile ``window`` exactly."""
    for k in range(-40, 60):
        s = math.ldexp(1.0, -k)
        if s > window.side:
            continue
        ok = all(abs(c / s - round(c / s)) < 1e-9 for c in window.corner)
        if ok and abs(window.side / s - round(window.side / s)) < 1e-9:
            return k
    raise ResolutionError("window is not aligned with any dyadic grid")


@dataclass(eq=False)
class WhitneyDecomposition:
    levels: np.ndarray          # (m,)
    index: np.ndarray           # (m, 2)
    owner: str
    window: Cube
    max_level: int
    residue_levels: np.ndarray
    residue_index: np.ndarray
    residue_volume: float
    open_volume: float
    oversized: int = 0          # accepted top tiles with dist > 4 diam
    boundary_distances: np.ndarray = field(default=None, repr=False)

    @property
    def sides(self) -> np.ndarray:
        return np.ldexp(1.0, -self.levels)

    @property
    def corners(self) -> np.ndarray:
        return self.index * self.sides[:, None]

    @property
    def centers(self) -> np.ndarray:
        return self.corners + self.sides[:, None] / 2

    @property
    def cubes(self) -> list:
        return [DyadicCube(int(k), (int(i), int(j))) for k, (i, j) in zip(self.levels, self.index)]

    def __len__(self):
        return len(self.levels)

    @cached_property
    def _tables(self):
        tables = {}
        for k in np.unique(self.levels):
            sel = np.flatnonzero(self.levels == k)
            keys = _keys(self.index[sel])
            order = np.argsort(keys)
            tables[int(k)] = (keys[order], sel[order])
        return tables

    def lookup(self, level, index) -> np.ndarray:
        """Position in this decomposition of dyadic cubes ``(level, index)``, or -1."""
        index = np.asarray(index, dtype=np.int64)
        out = np.full(index.shape[:-1], -1, dtype=np.int64)
        table = self._tables.get(int(level))
        if table is None:
            return out
        keys, pos = table
        q = _keys(index)
        at = np.clip(np.searchsorted(keys, q), 0, len(keys) - 1)
        hit = keys[at] == q
        out[hit] = pos[at[hit]]
        return out

    def locate(self, points) -> np.ndarray:
        """Index of the accepted cube holding each point (-1 for residue/outside)."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        out = np.full(len(pts), -1, dtype=np.int64)
        for k in self._tables:
            s = math.ldexp(1.0, -k)
            idx = np.floor(pts / s).astype(np.int64)
            found = self.lookup(k, idx)
            take = (out < 0) & (found >= 0)
            out[take] = found[take]
        return out

    @cached_property
    def adjacency(self) -> list:
        """Neighbors (closures intersect) of every accepted cube."""
        nbrs = [set() for _ in range(len(self))]
        present = sorted(self._tables)
        for k in present:
            sel = np.flatnonzero(self.levels == k)
            idx = self.index[sel]
            for m in present:
                if m <= k:
                    shift = k - m
                    anc = idx >> shift
                    for dx in (-1, 0, 1):
                        for dy in (-1, 0, 1):
                            cand = anc + np.array([dx, dy])
                            found = self.lookup(m, cand)
                            scale = 1 << shift
                            lo = cand * scale
                            hi = lo + scale
                            touch = np.all((lo <= idx + 1) & (idx <= hi), axis=1)
                            for a, b in zip(sel[(found >= 0) & touch], found[(found >= 0) & touch]):
                                if a != b:
                                    nbrs[a].add(int(b))
                                    nbrs[b].add(int(a))
                elif m - k <= 3:
                    r = 1 << (m - k)
                    ring = [(u, v) for u in range(-1, r + 1) for v in range(-1, r + 1)
                            if u in (-1, r) or v in (-1, r)]
                    base = idx * r
                    for u, v in ring:
                        cand = base + np.array([u, v])
                        found = self.lookup(m, cand)
                        for a, b in zip(sel[found >= 0], found[found >= 0]):
                            nbrs[a].add(int(b))
                            nbrs[b].add(int(a))
        return [sorted(s) for s in nbrs]


def whitney_decompose(openset: DomainModel, window: Cube = None, max_level: int = 10,
                      strict: bool = True, residue_tol: float = 0.01) -> WhitneyDecomposition:
    """Whitney cubes of ``openset`` inside ``window`` down to level ``max_level``.

    ``max_level`` is the finest dyadic level (side ``2**-max_level``). With
    ``strict`` a residue above ``residue_tol`` of the open volume raises
    :class:`ResolutionError`.
    """
    window = openset.window if window is None else window
    k = start_level(window)
    s = math.ldexp(1.0, -k)
    n0 = int(round(window.side / s))
    base = np.round(np.asarray(window.corner) / s).astype(np.int64)
    ii, jj = np.meshgrid(np.arange(n0), np.arange(n0), indexing="ij")
    idx = np.stack([ii.ravel(), jj.ravel()], axis=1) + base
    acc_l, acc_i, acc_d = [], [], []
    res_l, res_i = [], []
    residue_volume = 0.0
    accepted_volume = 0.0
    oversized = 0
    top = k
    while len(idx):
        s = math.ldexp(1.0, -k)
        corners = idx * s
        centers = corners + s / 2
        bd = openset.box_boundary_distance(corners, np.full(len(idx), s))
        center_in = openset.inside(centers)
        inside = center_in & (bd > 0)
        diam = s * math.sqrt(2.0)
        accept = inside & (bd >= diam)
        if accept.any():
            acc_l.append(np.full(int(accept.sum()), k))
            acc_i.append(idx[accept])
            acc_d.append(bd[accept])
            accepted_volume += accept.sum() * s * s
            if k == top:
                oversized += int(np.sum(bd[accept] > 4 * diam))
        split = (inside & ~accept) | (~inside & (center_in | (bd == 0)))
        if k >= max_level:
            if split.any():
                res_l.append(np.full(int(split.sum()), k))
                res_i.append(idx[split])
                fr = _inside_fraction(openset, corners[split], s)
                residue_volume += float(fr.sum()) * s * s
            break
        parents = idx[split]
        kids = [parents * 2 + np.array([a, b]) for a in (0, 1) for b in (0, 1)]
        idx = np.concatenate(kids) if len(parents) else np.zeros((0, 2), dtype=np.int64)
        k += 1
    levels = np.concatenate(acc_l) if acc_l else np.zeros(0, dtype=np.int64)
    index = np.concatenate(acc_i) if acc_i else np.zeros((0, 2), dtype=np.int64)
    bdist = np.concatenate(acc_d) if acc_d else np.zeros(0)
    order = np.lexsort((index[:, 1], index[:, 0], levels)) if len(levels) else np.zeros(0, dtype=int)
    open_volume = accepted_volume + residue_volume
    W = WhitneyDecomposition(
        levels=levels[order].astype(np.int64),
        index=index[order],
        owner=openset.name,
        window=window,
        max_level=max_level,
        residue_levels=np.concatenate(res_l) if res_l else np.zeros(0, dtype=np.int64),
        residue_index=np.concatenate(res_i) if res_i else np.zeros((0, 2), dtype=np.int64),
        residue_volume=residue_volume,
        open_volume=open_volume,
        oversized=oversized,
        boundary_distances=bdist[order],
    )
    if strict and open_volume > 0 and residue_volume > residue_tol * open_volume:
        raise ResolutionError(
            f"boundary residue is {100 * residue_volume / open_volume:.2f}% of the open volume",
            suggestion={"max_level": max_level + 2},
        )
    return W


def _inside_fraction(openset, corners, s, samples=4):
    off = (np.arange(samples) + 0.5) / samples * s
    ox, oy = np.meshgrid(off, off, indexing="ij")
    pts = corners[:, None, :] + np.stack([ox.ravel(), oy.ravel()], axis=1)[None]
    ins = openset.inside(pts.reshape(-1, 2)).reshape(len(corners), -1)
    return ins.mean(axis=1)


def check_invariants(W: WhitneyDecomposition, grid_spacing: float = None, openset=None) -> dict:
    """Measured invariants of a decomposition (used by tests and the CLI)."""
    sides = W.sides
    diam = sides * math.sqrt(2.0)
    ratio = W.boundary_distances / diam
    nested = 0
    for k in np.unique(W.levels):
        sel = W.levels == k
        for m in np.unique(W.levels[W.levels < k]):
            anc = W.index[sel] >> int(k - m)
            nested += int(np.sum(W.lookup(m, anc) >= 0))
    adj_ratios = set()
    for a, nb in enumerate(W.adjacency):
        for b in nb:
            adj_ratios.add(float(sides[b] / sides[a]))
    out = {
        "cubes": len(W),
        "nested_pairs": nested,
        "min_dist_over_diam": float(ratio.min()) if len(ratio) else None,
        "max_dist_over_diam": float(ratio.max()) if len(ratio) else None,
        "oversized": W.oversized,
        "adjacent_side_ratios": sorted(adj_ratios),
        "residue_fraction": W.residue_volume / W.open_volume if W.open_volume else 0.0,
    }
    if grid_spacing is not None and openset is not None:
        n = int(round(W.window.side / grid_spacing))
        xs = W.window.corner[0] + (np.arange(n) + 0.5) * grid_spacing
        ys = W.window.corner[1] + (np.arange(n) + 0.5) * grid_spacing
        X, Y = np.meshgrid(xs, ys, indexing="ij")
        pts = np.stack([X.ravel(), Y.ravel()], axis=1)
        ins = openset.inside(pts)
        loc = W.locate(pts[ins])
        out["coverage"] = float(np.mean(loc >= 0)) if len(loc) else 1.0
    return out


@dataclass(eq=False)
class CubeMatching:
    """Partial map from small exterior Whitney cubes to interior ones."""

    source: np.ndarray          # indices into E' (eligible cubes, matched or not)
    target: np.ndarray          # indices into E, -1 when unmatched
    lam: float
    distance_constant: float
    radius_factor: float
    warnings: list = field(default_factory=list)

    @property
    def pairs(self) -> dict:
        return {int(a): int(b) for a, b in zip(self.source, self.target) if b >= 0}

    @property
    def unmatched(self) -> np.ndarray:
        return self.source[self.target < 0]


def match_cubes(Eprime: WhitneyDecomposition, E: WhitneyDecomposition, lam: float,
                radius_factor: float = 64.0) -> CubeMatching:
    """Pick for each ``Q`` in ``Eprime`` with side <= ``lam`` a cube of ``E``.

    Candidates have side in ``[l(Q), 4 l(Q)]`` and set distance at most
    ``radius_factor * l(Q)``; the nearest center wins, ties broken by
    ``(level, index)``.
    """
    if not lam > 0:
        raise ValueError("lambda must be positive")
    sides_p = Eprime.sides
    eligible = np.flatnonzero(sides_p <= lam * (1 + 1e-12))
    target = np.full(len(eligible), -1, dtype=np.int64)
    best_d = np.full(len(eligible), np.inf)
    best_key = [None] * len(eligible)
    trees = {}
    for k in np.unique(E.levels):
        sel = np.flatnonzero(E.levels == k)
        trees[int(k)] = (cKDTree(E.centers[sel]), sel)
    cp = Eprime.centers
    Ecorner = E.corners
    Eside = E.sides
    for k in np.unique(Eprime.levels[eligible]):
        grp = np.flatnonzero(Eprime.levels[eligible] == k)
        src = eligible[grp]
        s = math.ldexp(1.0, -int(k))
        for m in (int(k), int(k) - 1, int(k) - 2):
            if m not in trees:
                continue
            tree, sel = trees[m]
            sm = math.ldexp(1.0, -m)
            reach = radius_factor * s + (s + sm) * math.sqrt(2.0) / 2
            kk = min(8, len(sel))
            dist, pos = tree.query(cp[src], k=kk, distance_upper_bound=reach)
            dist = np.atleast_2d(dist.reshape(len(src), -1))
            pos = np.atleast_2d(pos.reshape(len(src), -1))
            for col in range(dist.shape[1]):
                ok = np.isfinite(dist[:, col])
                if not ok.any():
                    continue
                rows = np.flatnonzero(ok)
                cand = sel[pos[rows, col]]
                lo_a = Eprime.corners[src[rows]]
                hi_a = lo_a + s
                lo_b = Ecorner[cand]
                hi_b = lo_b + Eside[cand][:, None]
                gap = np.maximum(0.0, np.maximum(lo_b - hi_a, lo_a - hi_b))
                sd = np.hypot(gap[:, 0], gap[:, 1])
                good = sd <= radius_factor * s
                for r, c, d in zip(rows[good], cand[good], dist[rows[good], col]):
                    g = grp[r]
                    key = (int(E.levels[c]), int(E.index[c, 0]), int(E.index[c, 1]))
                    if d < best_d[g] - 1e-12 or (abs(d - best_d[g]) <= 1e-12 and key < best_key[g]):
                        best_d[g] = d
                        best_key[g] = key
                        target[g] = c
    matched = target >= 0
    const = 0.0
    if matched.any():
        src = eligible[matched]
        tgt = target[matched]
        lo_a = Eprime.corners[src]
        hi_a = lo_a + sides_p[src][:, None]
        lo_b = Ecorner[tgt]
        hi_b = lo_b + Eside[tgt][:, None]
        gap = np.maximum(0.0, np.maximum(lo_b - hi_a, lo_a - hi_b))
        const = float(np.max(np.hypot(gap[:, 0], gap[:, 1]) / sides_p[src]))
    msgs = []
    if (~matched).any():
        msgs.append(f"{int((~matched).sum())} of {len(eligible)} cubes have no matching cube "
                    f"within {radius_factor:g} side lengths")
        warnings.warn(msgs[-1], RuntimeWarning, stacklevel=2)
    return CubeMatching(eligible, target, float(lam), const, radius_factor, msgs)
