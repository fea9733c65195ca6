"""Extension of functions on a domain to the whole window.

The step extension copies ``f`` on the domain, puts the average of ``f`` over
the matched interior cube ``Q*`` on every small exterior Whitney cube ``Q``
(side at most ``lam``) and zero on the large ones. The smooth extension
replaces each exterior value by its average over the ball ``B(x, c_n d(x))``.
The step function is constant on exterior Whitney cubes, so that average is
computed exactly from disc-square intersection areas over the cube holding
``x`` and its neighbors, at any radius.
"""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .errors import ResolutionError, ValidationError
from .geometry import DomainModel, disc_rect_area
from .gridfield import GridFunction, block_stats, dump
from .oscillation import lambda_eps_delta
from .whitney import CubeMatching, WhitneyDecomposition, match_cubes, whitney_decompose


def default_cn(n: int = 2) -> float:
    return 1.0 / (16.0 * math.sqrt(n))


@dataclass(eq=False)
class ExtensionPlan:
    """Everything about an extension that does not depend on ``f``."""

    domain: DomainModel
    spacing: float
    origin: np.ndarray
    shape: tuple
    lam: float
    interior: WhitneyDecomposition
    exterior: WhitneyDecomposition
    matching: CubeMatching
    ext_cells: np.ndarray        # flat indices of cells outside the domain
    cube_of_cell: np.ndarray     # exterior Whitney cube per exterior cell, -1 on residue
    donor: np.ndarray            # residue cells: position in ext_cells whose value they copy
    target_of_cube: np.ndarray   # interior cube matched to each exterior cube, -1 if none
    warnings: list = field(default_factory=list)

    @property
    def zero_region(self) -> np.ndarray:
        """Exterior cubes on which the step extension vanishes."""
        return np.flatnonzero(self.target_of_cube < 0)


def plan_extension(D: DomainModel, grid: GridFunction, lam: float, max_level: int = None,
                   radius_factor: float = 64.0) -> ExtensionPlan:
    """Decompose both sides of the boundary and match small exterior cubes."""
    h = grid.spacing
    if not lam > 0:
        raise ValidationError("lambda", "must be positive")
    window = grid.window
    if max_level is None:
        max_level = int(round(-math.log2(h)))
    msgs = []
    nom = D.nominal
    if "eps" in nom and "delta" in nom:
        cap = lambda_eps_delta(nom["eps"], nom["delta"], 2)
        if lam > cap:
            msgs.append(f"lambda = {lam:g} exceeds lambda_eps_delta = {cap:.3g} "
                        f"for the nominal (eps, delta) of {D.name}")
            warnings.warn(msgs[-1], RuntimeWarning, stacklevel=2)
    E = whitney_decompose(D, window, max_level, strict=False)
    Ep = whitney_decompose(D.complement(), window, max_level, strict=False)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        M = match_cubes(Ep, E, lam, radius_factor)
    msgs.extend(str(w.message) for w in caught)
    target = np.full(len(Ep), -1, dtype=np.int64)
    target[M.source] = M.target

    ext_cells = np.flatnonzero(~grid.mask.ravel())
    centers = grid.centers().reshape(-1, 2)[ext_cells]
    cube = Ep.locate(centers)
    donor = np.zeros(0, dtype=np.int64)
    lost = np.flatnonzero(cube < 0)
    if len(lost):
        found = np.flatnonzero(cube >= 0)
        if not len(found):
            raise ResolutionError("no exterior cell lies in an exterior Whitney cube",
                                  suggestion={"max_level": max_level + 1})
        _, nearest = cKDTree(centers[found]).query(centers[lost])
        donor = found[nearest]
    return ExtensionPlan(D, h, np.asarray(grid.origin, float), grid.shape, float(lam), E, Ep, M,
                         ext_cells, cube, donor, target, msgs)


@dataclass(eq=False)
class ExtensionResult:
    extended: GridFunction
    matching: CubeMatching
    c_n: float
    zero_region: np.ndarray
    lam: float
    stage: str
    flags: dict = field(default_factory=dict)
    support_radius: float = None
    warnings: list = field(default_factory=list)
    plan: ExtensionPlan = field(default=None, repr=False)
    phi_cube: np.ndarray = field(default=None, repr=False)

    def sidecar(self) -> dict:
        ep = self.plan.exterior if self.plan is not None else None
        unmatched = []
        if ep is not None:
            for q in self.matching.unmatched:
                unmatched.append({"level": int(ep.levels[q]),
                                  "index": [int(v) for v in ep.index[q]]})
        return {
            "stage": self.stage,
            "lambda": self.lam,
            "c_n": self.c_n,
            "support_radius": self.support_radius,
            "distance_constant": self.matching.distance_constant,
            "radius_factor": self.matching.radius_factor,
            "zero_cubes": int(len(self.zero_region)),
            "unmatched": unmatched,
            "flags": self.flags,
            "warnings": list(self.warnings),
        }

    def dump(self, path) -> None:
        """Write the grid in the binary format and a ``.json`` sidecar next to it."""
        dump(self.extended, path)
        with open(str(path) + ".json", "w") as fh:
            json.dump(self.sidecar(), fh, indent=2, sort_keys=True)


def _support_radius(g: GridFunction):
    nz = g.values != 0
    if not nz.any():
        return 0.0
    c = g.centers()[nz]
    return float(np.hypot(c[:, 0], c[:, 1]).max() + g.spacing * math.sqrt(2.0) / 2)


def _check_plan(f: GridFunction, plan: ExtensionPlan):
    if f.shape != plan.shape or f.spacing != plan.spacing or not np.array_equal(f.origin, plan.origin):
        raise ValidationError("f", "grid does not match the extension plan")


def cube_step_values(f: GridFunction, plan: ExtensionPlan) -> np.ndarray:
    """Step value of every exterior Whitney cube: ``f_{Q*}`` if matched, else 0."""
    _check_plan(f, plan)
    E = plan.interior
    used = np.unique(plan.target_of_cube[plan.target_of_cube >= 0])
    cube_mean = np.zeros(len(E))
    if len(used):
        i0, j0, ki, kj = f.cell_ranges(E.corners[used], E.sides[used])
        st = block_stats(f, i0, j0, ki, kj, need_oscillation=False)
        empty = st.count == 0
        if empty.any():
            # cubes smaller than a cell take the value of the cell holding their center
            c = E.centers[used[empty]]
            ij = np.floor((c - plan.origin) / plan.spacing).astype(np.int64)
            st.mean[empty] = f.values[ij[:, 0], ij[:, 1]]
        cube_mean[used] = st.mean
    t = plan.target_of_cube
    return np.where(t >= 0, cube_mean[np.maximum(t, 0)], 0.0)


def step_values(f: GridFunction, plan: ExtensionPlan, phi_cube: np.ndarray = None) -> np.ndarray:
    """Flat array of step-extension values on the exterior cells."""
    phi_cube = cube_step_values(f, plan) if phi_cube is None else phi_cube
    out = np.zeros(len(plan.ext_cells))
    located = plan.cube_of_cell >= 0
    out[located] = phi_cube[plan.cube_of_cell[located]]
    out[~located] = out[plan.donor]
    return out


def extend_step(f: GridFunction, D: DomainModel, lam: float, plan: ExtensionPlan = None,
                **plan_kw) -> ExtensionResult:
    if plan is None:
        plan = plan_extension(D, f, lam, **plan_kw)
    phi_cube = cube_step_values(f, plan)
    vals = step_values(f, plan, phi_cube)
    full = f.values.copy().ravel()
    full[plan.ext_cells] = vals
    g = GridFunction(f.spacing, f.origin, full.reshape(f.shape), np.ones(f.shape, dtype=bool))
    located = plan.cube_of_cell >= 0
    cube_target = np.full(len(vals), -1, dtype=np.int64)
    cube_target[located] = plan.target_of_cube[plan.cube_of_cell[located]]
    small = np.zeros(len(plan.exterior), dtype=bool)
    small[plan.matching.source] = True
    unmatched_cells = int((located & (cube_target < 0) & small[np.maximum(plan.cube_of_cell, 0)]).sum())
    flags = {"boundary_cells": int((~located).sum()), "unmatched_cells": unmatched_cells,
             "unmatched_cubes": int(len(plan.matching.unmatched))}
    return ExtensionResult(g, plan.matching, 0.0, plan.zero_region, plan.lam, "step", flags,
                           _support_radius(g), list(plan.warnings), plan, phi_cube)


def _neighbors_csr(W: WhitneyDecomposition):
    """``(ptr, ids)``: cube ``q`` followed by its neighbors at ``ids[ptr[q]:ptr[q + 1]]``."""
    adj = W.adjacency
    ptr = np.zeros(len(adj) + 1, dtype=np.int64)
    ptr[1:] = np.cumsum([1 + len(a) for a in adj])
    ids = np.fromiter((v for q, a in enumerate(adj) for v in [q, *a]), dtype=np.int64,
                      count=int(ptr[-1]))
    return ptr, ids


def ball_average(W: WhitneyDecomposition, phi_cube, points, cubes, R, chunk=2_000_000):
    """Exact mean of a function constant on the cubes of ``W`` over ``B(x, R)``.

    Only the cube holding ``x`` and its neighbors contribute; the mean is
    taken over the part of the ball they cover. Returns ``(values,
    covered)`` with ``covered`` the covered fraction of each ball.
    """
    points = np.asarray(points, dtype=float).reshape(-1, 2)
    cubes = np.asarray(cubes, dtype=np.int64)
    R = np.broadcast_to(np.asarray(R, dtype=float), cubes.shape)
    ptr, ids = _neighbors_csr(W)
    lo = W.corners
    hi = lo + W.sides[:, None]
    deg = ptr[cubes + 1] - ptr[cubes]
    vals = np.zeros(len(cubes))
    cover = np.zeros(len(cubes))
    per = max(1, chunk // max(int(deg.max(initial=1)), 1))
    for s0 in range(0, len(cubes), per):
        sl = slice(s0, s0 + per)
        dg = deg[sl]
        owner = np.repeat(np.arange(len(dg)), dg)
        start = np.repeat(ptr[cubes[sl]], dg)
        offs = np.arange(int(dg.sum())) - np.repeat(np.cumsum(dg) - dg, dg)
        nb = ids[start + offs]
        p = points[sl][owner]
        r = R[sl][owner]
        a = disc_rect_area(p[:, 0], p[:, 1], r, lo[nb, 0], lo[nb, 1], hi[nb, 0], hi[nb, 1])
        area = np.bincount(owner, weights=a, minlength=len(dg))
        num = np.bincount(owner, weights=a * phi_cube[nb], minlength=len(dg))
        with np.errstate(invalid="ignore", divide="ignore"):
            vals[sl] = np.where(area > 0, num / area, phi_cube[cubes[sl]])
        cover[sl] = area / (np.pi * R[sl] ** 2)
    return vals, cover


def _neighborhood_violations(W: WhitneyDecomposition, cube_grid, origin, h, points, cubes, R, sample):
    """Sampled balls that meet an exterior cube other than their own and its neighbors."""
    adj = W.adjacency
    lo_all = W.corners
    hi_all = lo_all + W.sides[:, None]
    ni, nj = cube_grid.shape
    bad = 0
    for s in sample:
        x = points[s]
        own = int(cubes[s])
        a, c = np.floor((x - R[s] - origin) / h).astype(np.int64) - 1
        b, d = np.floor((x + R[s] - origin) / h).astype(np.int64) + 2
        ids = np.unique(cube_grid[max(a, 0):min(b, ni), max(c, 0):min(d, nj)])
        ids = ids[ids >= 0]
        gap = np.maximum(0.0, np.maximum(lo_all[ids] - x, x - hi_all[ids]))
        meets = ids[np.hypot(gap[:, 0], gap[:, 1]) < R[s]]
        allowed = {own, *adj[own]}
        if any(int(q) not in allowed for q in meets):
            bad += 1
    return bad


def extend_smooth(f: GridFunction, D: DomainModel, lam: float, c_n: float = None,
                  plan: ExtensionPlan = None, check_samples: int = 2000, seed: int = 0,
                  max_halvings: int = 8, **plan_kw) -> ExtensionResult:
    """Average the step extension over ``B(x, c_n d(x))`` on the exterior.

    A sampled check that each ball meets only the cube holding ``x`` and
    cubes touching it halves ``c_n`` on failure. Cells in the boundary
    residue copy the value of their donor cell.
    """
    c_n = default_cn() if c_n is None else float(c_n)
    if not c_n > 0:
        raise ValidationError("c_n", "must be positive")
    step = extend_step(f, D, lam, plan=plan, **plan_kw)
    plan = step.plan
    Ep = plan.exterior
    h = plan.spacing
    vals = step.extended.values.ravel()
    ext = plan.ext_cells
    pts = step.extended.centers().reshape(-1, 2)[ext]
    d = D.boundary_distance(pts)
    located = np.flatnonzero(plan.cube_of_cell >= 0)
    q = plan.cube_of_cell[located]
    cube_grid = np.full(plan.shape, -1, dtype=np.int64)
    cube_grid.ravel()[ext] = plan.cube_of_cell
    rng = np.random.default_rng(seed)
    if len(located) <= check_samples:
        sample = np.arange(len(located))
    else:
        sample = np.sort(rng.choice(len(located), check_samples, replace=False))
    halvings = []
    while True:
        R = c_n * d[located]
        bad = _neighborhood_violations(Ep, cube_grid, plan.origin, h, pts[located], q, R, sample)
        if bad == 0 or len(halvings) >= max_halvings:
            break
        halvings.append({"c_n": c_n, "violations": bad, "sampled": int(len(sample))})
        c_n /= 2
    out = vals.copy()
    partial = 0
    if len(located):
        m, cover = ball_average(Ep, step.phi_cube, pts[located], q, R)
        # an average cannot leave the range of the averaged values; rounding can by an ulp
        lo, hi = float(step.phi_cube.min()), float(step.phi_cube.max())
        new = np.clip(m, lo, hi)
        ev = out[ext]
        ev[located] = new
        ev[~(plan.cube_of_cell >= 0)] = ev[plan.donor]
        out[ext] = ev
        partial = int(np.sum(cover < 1 - 1e-9))
    g = GridFunction(h, step.extended.origin, out.reshape(plan.shape), np.ones(plan.shape, dtype=bool))
    flags = dict(step.flags)
    flags.update({"averaged_cells": int(len(located)), "partial_balls": partial,
                  "halvings": halvings, "neighborhood_violations": int(bad)})
    msgs = list(step.warnings)
    if bad:
        msgs.append(f"{bad} sampled balls still meet non-adjacent cubes after {len(halvings)} halvings")
    return ExtensionResult(g, plan.matching, c_n, plan.zero_region, plan.lam, "smooth", flags,
                           _support_radius(g), msgs, plan, step.phi_cube)


def average_at(result: ExtensionResult, x, D: DomainModel, c_n: float = None) -> float:
    """``A(T f)(x)`` at a single exterior point ``x`` (exact ball average)."""
    plan = result.plan
    c_n = result.c_n if c_n is None and result.c_n else (default_cn() if c_n is None else float(c_n))
    x = np.asarray(x, dtype=float).reshape(1, 2)
    q = plan.exterior.locate(x)
    if q[0] < 0:
        raise ValidationError("x", "point is not in an exterior Whitney cube")
    phi = result.phi_cube
    if phi is None:
        raise ValidationError("result", "needs a step or smooth extension result")
    R = c_n * D.boundary_distance(x)
    return float(ball_average(plan.exterior, phi, x, q, R)[0][0])


def contact_lipschitz(result: ExtensionResult, D: DomainModel, steps: int = 8) -> float:
    """Largest slope of the smooth extension across contacts of exterior cubes.

    Inside a cube far from its neighbors the ball average is constant, so
    all variation sits within ``c_n d`` of a contact between two cubes. Each
    contact is probed at its ends and midpoint along the line joining the two
    cube centers, with exact ball averages at spacing ``c_n d / steps``. This
    resolves slopes that a grid of spacing ``h > c_n d`` cannot see.
    """
    plan = result.plan
    W = plan.exterior
    phi = result.phi_cube
    if phi is None or not result.c_n:
        raise ValidationError("result", "needs a smooth extension result")
    lo = W.corners
    hi = lo + W.sides[:, None]
    pa, pb = [], []
    for a, nb in enumerate(W.adjacency):
        for b in nb:
            if b > a:
                pa.append(a)
                pb.append(b)
    if not pa:
        return 0.0
    a = np.asarray(pa)
    b = np.asarray(pb)
    clo = np.maximum(lo[a], lo[b])
    chi = np.minimum(hi[a], hi[b])
    u = W.centers[b] - W.centers[a]
    u /= np.linalg.norm(u, axis=1)[:, None]
    probes = np.concatenate([clo, (clo + chi) / 2, chi])
    dirs = np.tile(u, (3, 1))
    R = result.c_n * D.boundary_distance(probes)
    t = np.linspace(-1.25, 1.25, 2 * steps + 1)
    pts = probes[:, None, :] + (R[:, None] * t[None, :])[:, :, None] * dirs[:, None, :]
    flat = pts.reshape(-1, 2)
    q = W.locate(flat)
    ok = q >= 0
    vals = np.full(len(flat), np.nan)
    if ok.any():
        vals[ok] = ball_average(W, phi, flat[ok], q[ok], result.c_n * D.boundary_distance(flat[ok]))[0]
    vals = vals.reshape(pts.shape[:2])
    gap = np.linalg.norm(np.diff(pts, axis=1), axis=2)
    with np.errstate(invalid="ignore", divide="ignore"):
        slope = np.abs(np.diff(vals, axis=1)) / gap
    slope = slope[np.isfinite(slope)]
    return float(slope.max(initial=0.0))
