"""Discrete check of the (eps, delta) condition by constrained shortest paths.

Nodes are cell centers at pitch ``h``. A node ``z`` is admissible for the
pair ``(x, y)`` when ``d(z) >= eps |z - x| |z - y| / |x - y| - 2h``; an edge
``a -- b`` is usable when both ends are admissible and the balls
``B(a, d(a))``, ``B(b, d(b))`` cover the segment, so no edge crosses the
complement. The pair passes when the shortest admissible path (with the
endpoint hops) has length at most ``|x - y| / eps + 2h``.

Any path of length at most ``L`` lies in the ellipse with foci ``x, y`` and
major axis ``L``, so the search runs on that ellipse with ``L`` doubled from
a small start up to the bound; each stage is exact on its ellipse.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import dijkstra

from .errors import DisconnectedError, ValidationError
from .geometry import DomainModel

RESULTS = ("ok", "too-long", "no-admissible-path", "resolution-limited")


@dataclass
class CigarQuery:
    x: tuple
    y: tuple
    eps: float
    delta: float

    def validate(self, D: DomainModel = None):
        if not (0 < self.eps <= 1):
            raise ValidationError("eps", "must lie in (0, 1]")
        if not self.delta > 0:
            raise ValidationError("delta", "must be positive")
        sep = math.dist(self.x, self.y)
        if not 0 < sep < self.delta:
            raise ValidationError("y", f"need 0 < |x - y| < delta, got {sep:g}")
        if D is not None:
            ins = D.inside(np.array([self.x, self.y], dtype=float))
            if not ins.all():
                raise ValidationError("x" if not ins[0] else "y", "point is not inside the domain")
        return self


@dataclass
class CigarCertificate:
    x: tuple
    y: tuple
    eps: float
    h: float
    path: np.ndarray            # (k, 2) polyline from x to y; empty on failure
    arclength: float
    bound: float
    clearance_margin: float
    result: str = "ok"
    detail: str = ""

    @property
    def success(self) -> bool:
        return self.result == "ok"

    def row(self):
        return (self.x[0], self.x[1], self.y[0], self.y[1], self.result,
                self.arclength, self.bound, self.clearance_margin)


def polyline_length(path) -> float:
    p = np.asarray(path, dtype=float)
    if len(p) < 2:
        return 0.0
    seg = np.diff(p, axis=0)
    return float(np.sum(np.hypot(seg[:, 0], seg[:, 1])))


def clearance_margin(path, x, y, eps, D: DomainModel) -> float:
    """``min_z d(z) - eps |z - x| |z - y| / |x - y|`` over the polyline vertices."""
    p = np.asarray(path, dtype=float)
    sep = math.dist(x, y)
    need = eps * np.hypot(*(p - x).T) * np.hypot(*(p - y).T) / sep
    return float(np.min(D.distance(p) - need))


def verify_certificate(cert: CigarCertificate, D: DomainModel):
    """Recompute ``(arclength, clearance_margin)`` from the polyline alone."""
    return polyline_length(cert.path), clearance_margin(cert.path, cert.x, cert.y, cert.eps, D)


_STEPS = ((1, 0, 1.0), (0, 1, 1.0), (1, 1, math.sqrt(2.0)), (1, -1, math.sqrt(2.0)))


def _region(D, x, y, limit, h):
    """Node lattice covering the ellipse of major axis ``limit`` (cell centers of the window grid)."""
    o = np.asarray(D.window.corner, dtype=float)
    c = (x + y) / 2
    a = limit / 2
    lo = np.floor((c - a - o) / h - 0.5).astype(int)
    hi = np.ceil((c + a - o) / h - 0.5).astype(int)
    nmax = int(round(D.window.side / h))
    lo = np.clip(lo, 0, nmax - 1)
    hi = np.clip(hi, 0, nmax - 1)
    xs = o[0] + (np.arange(lo[0], hi[0] + 1) + 0.5) * h
    ys = o[1] + (np.arange(lo[1], hi[1] + 1) + 0.5) * h
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    return X, Y


def _component_enclosed(mask, start, target):
    """Whether the 8-connected component of ``start`` avoids both ``target`` and the region edge."""
    lab, _ = ndimage.label(mask, structure=np.ones((3, 3), dtype=bool))
    k = lab[start]
    if k == 0:
        return True
    if target is not None and lab[target] == k:
        return False
    comp = lab == k
    touches = comp[0, :].any() or comp[-1, :].any() or comp[:, 0].any() or comp[:, -1].any()
    return not touches


def _nearest_node(P, d, ok, p, dp):
    """Index of the nearest allowed node reachable from ``p`` by a covered hop."""
    dist = np.hypot(P[..., 0] - p[0], P[..., 1] - p[1])
    cand = ok & (d + dp >= dist)
    if not cand.any():
        return None
    flat = np.where(cand, dist, np.inf)
    return np.unravel_index(int(np.argmin(flat)), flat.shape)


def check_pair(q: CigarQuery, D: DomainModel, h: float, max_nodes: int = 6_000_000) -> CigarCertificate:
    """Shortest admissible grid path between ``q.x`` and ``q.y``.

    Raises :class:`DisconnectedError` when the endpoints are not joined by
    the unconstrained grid graph at this pitch.
    """
    q.validate(D)
    x = np.asarray(q.x, dtype=float)
    y = np.asarray(q.y, dtype=float)
    eps = float(q.eps)
    sep = float(math.dist(q.x, q.y))
    bound = sep / eps
    slack = 2 * h
    dx, dy = (float(v) for v in D.distance(np.array([x, y])))
    limit = min(bound + slack, 1.5 * sep + 8 * h)
    while True:
        X, Y = _region(D, x, y, limit, h)
        if X.size > max_nodes:
            raise ValidationError("h", f"search region of {X.size} nodes exceeds max_nodes")
        P = np.stack([X, Y], axis=-1)
        d = D.distance(P.reshape(-1, 2)).reshape(X.shape)
        inside = d > 0
        ell = np.hypot(X - x[0], Y - x[1]) + np.hypot(X - y[0], Y - y[1]) <= limit
        need = eps * np.hypot(X - x[0], Y - x[1]) * np.hypot(X - y[0], Y - y[1]) / sep
        adm_box = inside & (d >= need - slack)
        adm = adm_box & ell
        sx = _nearest_node(P, d, inside & ell, x, dx)
        sy = _nearest_node(P, d, inside & ell, y, dy)
        final = limit >= bound + slack
        if sx is None or sy is None:
            if final:
                raise DisconnectedError("an endpoint has no grid node reachable at this pitch")
            limit = min(2 * limit, bound + slack)
            continue
        if _component_enclosed(inside, sx, sy):
            raise DisconnectedError("endpoints lie in different grid components")
        adm[sx] = adm[sy] = adm_box[sx] = adm_box[sy] = True
        # enclosure is tested on the whole box, which contains the ellipse
        if _component_enclosed(adm_box, sx, sy) or _component_enclosed(adm_box, sy, sx):
            return CigarCertificate(q.x, q.y, eps, h, np.zeros((0, 2)), math.inf, bound, -math.inf,
                                    "no-admissible-path", "clearance cuts every path")
        path = _shortest(P, d, adm, sx, sy, limit, h)
        if path is not None:
            poly = np.vstack([x, path, y])
            length = polyline_length(poly)
            margin = clearance_margin(poly, q.x, q.y, eps, D)
            ok = length <= bound + slack
            return CigarCertificate(q.x, q.y, eps, h, poly, length, bound, margin,
                                    "ok" if ok else "too-long",
                                    "" if ok else "shortest admissible path exceeds the bound")
        if final:
            return CigarCertificate(q.x, q.y, eps, h, np.zeros((0, 2)), math.inf, bound, -math.inf,
                                    "too-long", f"no admissible path of length <= {bound + slack:g}")
        limit = min(2 * limit, bound + slack)


def _shortest(P, d, adm, sx, sy, limit, h):
    shape = adm.shape
    ids = np.full(shape, -1, dtype=np.int64)
    nodes = np.argwhere(adm)
    ids[adm] = np.arange(len(nodes))
    rows, cols, wts = [], [], []
    for di, dj, w in _STEPS:
        a = ids[max(0, -di):shape[0] - max(0, di), max(0, -dj):shape[1] - max(0, dj)]
        b = ids[max(0, di):shape[0] + min(0, di), max(0, dj):shape[1] + min(0, dj)]
        da = d[max(0, -di):shape[0] - max(0, di), max(0, -dj):shape[1] - max(0, dj)]
        db = d[max(0, di):shape[0] + min(0, di), max(0, dj):shape[1] + min(0, dj)]
        ok = (a >= 0) & (b >= 0) & (da + db >= w * h)
        rows.append(a[ok])
        cols.append(b[ok])
        wts.append(np.full(int(ok.sum()), w * h))
    n = len(nodes)
    G = coo_matrix((np.concatenate(wts), (np.concatenate(rows), np.concatenate(cols))),
                   shape=(n, n)).tocsr()
    s, t = ids[sx], ids[sy]
    dist, pred = dijkstra(G, directed=False, indices=s, return_predecessors=True, limit=limit)
    if not np.isfinite(dist[t]):
        return None
    chain = [t]
    while chain[-1] != s:
        chain.append(pred[chain[-1]])
    chain.reverse()
    return P[nodes[chain, 0], nodes[chain, 1]]


@dataclass
class ScanResult:
    eps: float
    delta: float
    h: float
    checked: int
    failures: int
    resolution_limited: int
    witnesses: list = field(default_factory=list)      # failed certificates, worst first
    certificates: list = field(default_factory=list, repr=False)

    @property
    def failure_rate(self) -> float:
        return self.failures / self.checked if self.checked else 0.0


def sample_pairs(D: DomainModel, delta: float, samples: int, seed: int = 0):
    """Seeded pairs of domain points with ``|x - y| < delta`` inside the window."""
    rng = np.random.default_rng(seed)
    w = D.window
    reach = min(delta, w.side * math.sqrt(2.0))
    out = []
    tries = 0
    while len(out) < samples and tries < 200 * samples:
        tries += 1
        x = np.asarray(w.corner) + rng.random(2) * w.side
        r = reach * math.sqrt(rng.random()) * (1 - 1e-9)
        t = 2 * math.pi * rng.random()
        y = x + r * np.array([math.cos(t), math.sin(t)])
        if r <= 0 or not w.contains_point(y):
            continue
        if D.inside(np.array([x, y])).all():
            out.append((tuple(map(float, x)), tuple(map(float, y))))
    return out


def _check_one(args):
    x, y, eps, delta, D, h = args
    try:
        return check_pair(CigarQuery(x, y, eps, delta), D, h)
    except DisconnectedError as exc:
        return CigarCertificate(x, y, eps, h, np.zeros((0, 2)), math.inf, math.dist(x, y) / eps,
                                -math.inf, "resolution-limited", str(exc))


def scan_domain(D: DomainModel, eps: float, delta: float, samples: int, seed: int = 0,
                h: float = 1 / 128, pairs=None, keep: int = 20, workers: int = 1) -> ScanResult:
    """Failure rate of :func:`check_pair` on sampled (or given) pairs.

    Pairs whose endpoints the grid cannot join are counted as
    resolution-limited and excluded from the failure rate. Results do not
    depend on ``workers``.
    """
    if samples < 1 and pairs is None:
        raise ValidationError("samples", "must be >= 1")
    pairs = sample_pairs(D, delta, samples, seed) if pairs is None else pairs
    jobs = [(x, y, eps, delta, D, h) for x, y in pairs]
    if workers > 1 and len(jobs) > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(max_workers=workers) as pool:
            certs = list(pool.map(_check_one, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
    else:
        certs = [_check_one(j) for j in jobs]
    limited = sum(c.result == "resolution-limited" for c in certs)
    fails = [c for c in certs if c.result not in ("ok", "resolution-limited")]
    fails.sort(key=lambda c: (c.clearance_margin, -c.arclength))
    checked = len(pairs) - limited
    return ScanResult(eps, delta, h, checked, len(fails), limited, fails[:keep], certs)
