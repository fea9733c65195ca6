"""Approximation constructions: cutoffs, truncation, smoothing, drivers.

``phi_lambda(t) = 1 + log+(lam / 4t)`` integrates in closed form,
``Phi(d) = int_d^{lam/4} dt / (t phi(t)) = log(1 + log(lam / 4d))`` for
``d < lam/4`` and 0 beyond, so the boundary cutoffs and their support
thresholds are evaluated from that formula. The adaptive quadrature below
serves as an independent check and handles the degenerate ``phi = 1``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ResolutionError, ValidationError
from .geometry import DomainModel
from .gridfield import GridFunction, MIN_CELLS_PER_SIDE, disc_sums, grid_lipschitz
from .oscillation import bmo_norm, enumerate_cubes, large_family, small_family, norm_from_families

PHI_KINDS = ("log", "one")
SCHEMES = ("boundary", "infinity", "bounded", "lipschitz", "compact")


@dataclass
class CutoffSpec:
    kind: str                  # "psi_k" or "h_j"
    index: int
    lam: float = None

    def validate(self):
        if self.kind not in ("psi_k", "h_j"):
            raise ValidationError("kind", f"unknown cutoff {self.kind!r}")
        if int(self.index) != self.index or self.index < 1:
            raise ValidationError("index", "must be a positive integer")
        if self.kind == "h_j" and not (self.lam is not None and self.lam > 0):
            raise ValidationError("lambda", "h_j needs lambda > 0")
        return self


# ---------------------------------------------------------------------------
# cutoffs


def psi_value(k: float, r):
    """Radial cutoff: 1 for ``|x| <= k``, 0 for ``|x| >= 2k``, linear between."""
    if not k >= 1:
        raise ValidationError("k", "must be >= 1")
    return np.clip(2.0 - np.asarray(r, dtype=float) / k, 0.0, 1.0)


def psi_k(k: int, template: GridFunction) -> GridFunction:
    """``psi_k`` sampled on the cells of ``template`` (same mask)."""
    CutoffSpec("psi_k", k).validate()
    c = template.centers()
    v = psi_value(k, np.hypot(c[..., 0], c[..., 1]))
    return template.with_values(np.where(template.mask, v, 0.0))


def phi_lambda(t, lam: float, kind: str = "log"):
    """``1 + log+(lam / 4t)`` (``kind="log"``) or the constant 1 (``kind="one"``)."""
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise ValidationError("t", "must be positive")
    if kind == "one":
        return np.ones_like(t)
    if kind != "log":
        raise ValidationError("kind", f"phi kind must be one of {PHI_KINDS}")
    return 1.0 + np.log(np.maximum(lam / (4.0 * t), 1.0))


def Phi_lambda(d, lam: float, kind: str = "log"):
    """``int_d^{lam/4} dt / (t phi(t))`` in closed form, 0 for ``d >= lam/4``."""
    d = np.asarray(d, dtype=float)
    with np.errstate(divide="ignore"):
        u = np.log(np.maximum(lam / (4.0 * d), 1.0))
    if kind == "one":
        return u
    if kind != "log":
        raise ValidationError("kind", f"phi kind must be one of {PHI_KINDS}")
    return np.log1p(u)


def Phi_lambda_quad(d: float, lam: float, kind: str = "log", rtol: float = 1e-8,
                    panels: int = 64, max_doublings: int = 20) -> float:
    """Adaptive midpoint rule for ``Phi`` on log-spaced panels.

    In ``u = log t`` the integrand ``1 / phi(e^u)`` is smooth, so the panel
    count is doubled until successive sums agree to ``rtol``.
    """
    top = lam / 4.0
    if d >= top:
        return 0.0
    a, b = math.log(d), math.log(top)
    prev = None
    n = panels
    for _ in range(max_doublings):
        u = a + (np.arange(n) + 0.5) * (b - a) / n
        val = float(np.sum(1.0 / phi_lambda(np.exp(u), lam, kind)) * (b - a) / n)
        if prev is not None and abs(val - prev) <= rtol * abs(val):
            return val
        prev = val
        n *= 2
    raise ArithmeticError(f"quadrature for Phi did not reach rtol {rtol} with {n // 2} panels")


def log_alpha_j(j: int, lam: float, kind: str = "log", tol: float = 1e-10) -> float:
    """``log alpha_j`` where ``Phi(alpha_j) = j``, by bisection in ``log d``.

    ``alpha_j`` itself underflows double precision for moderate ``j``
    (``alpha_20 ~ exp(-4.9e8)``), so the threshold is carried as a log.
    """
    CutoffSpec("h_j", j, lam).validate()
    top = math.log(lam / 4.0)
    # Phi(exp(top - s)) = log(1 + s) (or s), increasing in s
    g = (lambda s: math.log1p(s)) if kind == "log" else (lambda s: s)
    lo, hi = 0.0, 1.0
    while g(hi) < j:
        hi *= 2.0
    # tolerance on alpha relative to lam translates to tol on s near s = 0 only;
    # the bracket is tightened until it is below ulp level of s
    for _ in range(400):
        mid = 0.5 * (lo + hi)
        if g(mid) < j:
            lo = mid
        else:
            hi = mid
        if hi - lo <= max(tol, 4e-16 * hi):
            break
    return top - 0.5 * (lo + hi)


def alpha_j(j: int, lam: float, kind: str = "log") -> float:
    """Support threshold of ``h_j`` (may underflow to 0; see :func:`log_alpha_j`)."""
    return math.exp(log_alpha_j(j, lam, kind))


def h_j_value(d, j: int, lam: float, kind: str = "log"):
    return np.clip(1.0 - Phi_lambda(d, lam, kind) / j, 0.0, 1.0)


def h_j(D: DomainModel, j: int, lam: float, template: GridFunction, kind: str = "log"):
    """Boundary cutoff on the cells of ``template``; returns ``(grid, log alpha_j)``."""
    CutoffSpec("h_j", j, lam).validate()
    d = D.distance(template.centers().reshape(-1, 2)).reshape(template.shape)
    v = np.where(template.mask, h_j_value(np.maximum(d, 1e-300), j, lam, kind), 0.0)
    return template.with_values(v), log_alpha_j(j, lam, kind)


# ---------------------------------------------------------------------------
# truncation, smoothing, bounded approximant


def truncate(f: GridFunction, t: float) -> GridFunction:
    if not t > 0:
        raise ValidationError("t", "must be positive")
    return f.with_values(np.clip(f.values, -t, t))


def _grid_average(f: GridFunction, m: int) -> np.ndarray:
    """Masked mean of ``f`` on blocks of ``m x m`` cells anchored at the origin."""
    ni, nj = f.shape
    bi, bj = -(-ni // m), -(-nj // m)
    pad = np.zeros((bi * m, bj * m))
    pm = np.zeros((bi * m, bj * m))
    pad[:ni, :nj] = np.where(f.mask, f.values, 0.0)
    pm[:ni, :nj] = f.mask
    s = pad.reshape(bi, m, bj, m).sum(axis=(1, 3))
    c = pm.reshape(bi, m, bj, m).sum(axis=(1, 3))
    with np.errstate(invalid="ignore", divide="ignore"):
        avg = np.where(c > 0, s / np.maximum(c, 1), 0.0)
    out = np.repeat(np.repeat(avg, m, axis=0), m, axis=1)[:ni, :nj]
    return np.where(f.mask, out, 0.0)


def sarason_smooth(f: GridFunction, D: DomainModel, grid: float, mollify_radius: float,
                   restricted: bool = False) -> GridFunction:
    """Block averages on a lattice of side ``grid``, then ball averages.

    With ``restricted=True`` the support of ``f`` must stay ``grid * sqrt(2)``
    away from the boundary and the ball average is the plain convolution with
    the normalized ball indicator. Otherwise balls are renormalized by their
    part inside the domain, so the boundary layer is averaged one-sidedly.
    """
    h = f.spacing
    m = int(round(grid / h))
    if m < MIN_CELLS_PER_SIDE or abs(m * h - grid) > 1e-9 * grid:
        raise ResolutionError(f"grid {grid:g} must be a multiple of h = {h:g} and at least 4h",
                              suggestion={"min_grid": MIN_CELLS_PER_SIDE * h})
    if not mollify_radius >= 0:
        raise ValidationError("mollify_radius", "must be >= 0")
    if restricted:
        nz = (f.values != 0) & f.mask
        if nz.any():
            gap = float(D.distance(f.centers()[nz]).min())
            if gap <= grid * math.sqrt(2.0):
                raise ValidationError(
                    "f", f"support within {gap:g} of the boundary; need > {grid * math.sqrt(2.0):g}")
    step = _grid_average(f, m)
    K = (mollify_radius / h) ** 2
    ij = np.argwhere(f.mask)
    s, cnt = disc_sums(step, ij, K)
    if restricted:
        r = int(math.floor(math.sqrt(K)))
        di = np.arange(-r, r + 1)
        full = int(sum(2 * math.isqrt(int(K - a * a)) + 1 for a in di if a * a <= K))
        vals = s / full
    else:
        mc, _ = disc_sums(f.mask.astype(float), ij, K)
        vals = s / mc
    out = np.zeros(f.shape)
    out[ij[:, 0], ij[:, 1]] = vals
    return f.with_values(out)


@dataclass
class BoundedApproximant:
    g: GridFunction
    f_tilde: GridFunction
    C_ell: float
    ell_cells: int          # discrete side (2a + 1) cells of the cubes Q_x in the interior
    interior_mask: np.ndarray


def bounded_approximant(f: GridFunction, D: DomainModel, ell: float, lam: float,
                        pitch_divisor: int = 4) -> BoundedApproximant:
    """Local averages ``f~(x)`` over cubes ``Q_x`` clamped at ``+-C_ell``.

    ``Q_x`` is the cell-centered cube of side ``l(x) = min(d(x) / 2 sqrt 2, ell)``,
    realized as ``(2a + 1)^2`` cells with ``a = floor(l(x) / 2h)``. ``C_ell``
    is the largest ``|f_Q|`` over cubes with ``2Q`` in the domain and side at
    least ``ell``: the interior cubes ``Q_x`` themselves and lattice cubes of
    sides ``ell * 2^m``.
    """
    n = 2
    if not (0 < ell < lam / (8 * math.sqrt(n))):
        raise ValidationError("ell", f"need 0 < ell < lambda / (8 sqrt 2) = {lam / (8 * math.sqrt(n)):g}")
    h = f.spacing
    d = D.distance(f.centers().reshape(-1, 2)).reshape(f.shape)
    lx = np.minimum(d / (2 * math.sqrt(n)), ell)
    a = np.floor(lx / (2 * h) + 1e-9).astype(np.int64)
    a_top = int(math.floor(ell / (2 * h) + 1e-9))
    if a_top < 1:
        raise ResolutionError(f"ell = {ell:g} spans fewer than 3 cells",
                              suggestion={"max_spacing": ell / 3})
    ni, nj = f.shape
    v = np.where(f.mask, f.values, 0.0)
    S = np.zeros((ni + 1, nj + 1))
    S[1:, 1:] = v.cumsum(0).cumsum(1)
    I, J = np.indices(f.shape)
    i0 = np.clip(I - a, 0, ni)
    i1 = np.clip(I + a + 1, 0, ni)
    j0 = np.clip(J - a, 0, nj)
    j1 = np.clip(J + a + 1, 0, nj)
    sums = S[i1, j1] - S[i0, j1] - S[i1, j0] + S[i0, j0]
    ft = np.where(f.mask, sums / ((i1 - i0) * (j1 - j0)), 0.0)
    # cubes Q_x of full side whose double lies in the domain
    side = (2 * a_top + 1) * h
    core = f.mask & (a == a_top) & (d >= side * math.sqrt(n))
    cands = [np.abs(ft[core])] if core.any() else []
    big = large_family(f, _doubled(D), side, pitch_divisor, mode="geq") if side < D.window.side else None
    if big is not None and len(big):
        from .oscillation import family_stats
        st = family_stats(f, big, need_oscillation=False)
        cands.append(st.abs_mean)
    if not cands or not sum(len(c) for c in cands):
        raise ValidationError("ell", "no cube Q with 2Q inside the domain and side >= ell")
    C = float(max(float(c.max()) for c in cands if len(c)))
    g = np.clip(ft, -C, C)
    interior = f.mask & (d >= 2 * ell * math.sqrt(n))
    return BoundedApproximant(f.with_values(g), f.with_values(ft), C, 2 * a_top + 1, interior)


class _Doubled:
    """View of a domain whose cube test asks for the doubled cube."""

    def __init__(self, D):
        self._D = D
        self.window = D.window
        self.name = f"double-test({D.name})"

    def contains_cubes(self, corners, sides):
        corners = np.atleast_2d(np.asarray(corners, dtype=float))
        sides = np.broadcast_to(np.asarray(sides, dtype=float), (len(corners),))
        return self._D.contains_cubes(corners - sides[:, None] / 2, 2 * sides)


def _doubled(D):
    return _Doubled(D)


def _block_values(f: GridFunction, Q):
    from .gridfield import _cube_block
    i0, j0, ki, kj = (int(v[0]) for v in _cube_block(f, Q))
    blk = f.values[i0:i0 + ki, j0:j0 + kj]
    return blk[f.mask[i0:i0 + ki, j0:j0 + kj]]


def leibniz_bound_check(f: GridFunction, g: GridFunction, Q, g_sup: float = None):
    """``(lhs, rhs)`` with ``lhs = mean |fg - f_Q g_Q|`` over ``Q`` and
    ``rhs = |g|_inf osc_Q f + 2 |f_Q| osc_Q g``."""
    fb = _block_values(f, Q)
    gb = _block_values(g, Q)
    fq, gq = fb.mean(), gb.mean()
    lhs = float(np.mean(np.abs(fb * gb - fq * gq)))
    gs = float(np.abs(g.values[g.mask]).max()) if g_sup is None else g_sup
    rhs = gs * float(np.mean(np.abs(fb - fq))) + 2 * abs(fq) * float(np.mean(np.abs(gb - gq)))
    return lhs, rhs


# ---------------------------------------------------------------------------
# drivers


@dataclass
class ApproxCurve:
    scheme: str
    params: list
    errors: list
    sup_norms: list
    lip_consts: list
    lam: float = None
    notes: list = field(default_factory=list)

    def __post_init__(self):
        if not (len(self.params) == len(self.errors) == len(self.sup_norms) == len(self.lip_consts)):
            raise ValueError("curve columns differ in length")

    def rows(self):
        return [(self.scheme, p, e, s, l) for p, e, s, l in
                zip(self.params, self.errors, self.sup_norms, self.lip_consts)]


def default_params(scheme: str, f: GridFunction):
    h = f.spacing
    if scheme in ("boundary", "compact"):
        return [1, 2, 4, 8, 16]
    if scheme == "infinity":
        return [1, 2, 4, 8, 16]
    if scheme == "bounded":
        top = float(np.abs(f.values[f.mask]).max())
        return [top / 2 ** m for m in range(5, -1, -1)]
    if scheme == "lipschitz":
        return [MIN_CELLS_PER_SIDE * h * 2 ** m for m in range(4, -1, -1)]
    raise ValidationError("scheme", f"must be one of {SCHEMES}")


def scheme_member(f: GridFunction, D: DomainModel, lam: float, scheme: str, p):
    if scheme == "boundary":
        return f.with_values(f.values * h_j(D, int(p), lam, f)[0].values)
    if scheme == "infinity":
        return f.with_values(f.values * psi_k(int(p), f).values)
    if scheme == "compact":
        hj = h_j(D, int(p), lam, f)[0].values
        return f.with_values(f.values * hj * psi_k(int(p), f).values)
    if scheme == "bounded":
        return truncate(f, float(p))
    if scheme == "lipschitz":
        return sarason_smooth(f, D, float(p), float(p))
    raise ValidationError("scheme", f"must be one of {SCHEMES}")


def approximation_driver(f: GridFunction, D: DomainModel, lam: float, scheme: str,
                         params=None, pitch_divisor: int = 4, lip_pairs: int = 20000,
                         seed: int = 0) -> ApproxCurve:
    """``||f - f_p||_{bmo_lam}`` along the scheme's sequence ``f_p``.

    Families are enumerated once and shared by every member, so the curve
    compares like with like. Curves that fail to decrease are returned as is.
    """
    if scheme not in SCHEMES:
        raise ValidationError("scheme", f"must be one of {SCHEMES}")
    params = default_params(scheme, f) if params is None else list(params)
    small = small_family(f, D, lam, pitch_divisor, allow_empty=True)
    large = large_family(f, D, lam, pitch_divisor)
    errs, sups, lips = [], [], []
    for p in params:
        g = scheme_member(f, D, lam, scheme, p)
        diff = f.with_values(f.values - g.values)
        errs.append(norm_from_families(diff, small, large, lam).total)
        sups.append(g.sup_abs())
        lips.append(grid_lipschitz(g, pairs=lip_pairs, seed=seed))
    return ApproxCurve(scheme, [float(p) for p in params], errs, sups, lips, lam)
