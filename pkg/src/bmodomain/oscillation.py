"""Sup-type functionals over discretized cube families.

The supremum over all cubes in a domain is replaced by a family of cubes on
a lattice (dyadic side lengths, positions at pitch ``side / divisor``).
Since every family member is a genuine cube of the domain, any functional
computed here is a lower bound for the true supremum on the grid; the
oracle module measures the remaining gap.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import NotEvaluable, ValidationError
from .geometry import Cube, DomainModel
from .gridfield import MIN_CELLS_PER_SIDE, BlockStats, GridFunction, block_stats


@dataclass(eq=False)
class CubeFamily:
    corners: np.ndarray         # (m, 2)
    sides: np.ndarray           # (m,)
    generator: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.sides)

    @property
    def scale_bounds(self):
        if not len(self):
            return (math.nan, math.nan)
        return (float(self.sides.min()), float(self.sides.max()))

    @property
    def centers(self) -> np.ndarray:
        return self.corners + self.sides[:, None] / 2

    def cube(self, i: int) -> Cube:
        return Cube(tuple(self.corners[i]), float(self.sides[i]))

    def subset(self, keep, note=None) -> "CubeFamily":
        keep = np.asarray(keep)
        gen = dict(self.generator)
        if note:
            gen["restriction"] = note
        return CubeFamily(self.corners[keep], self.sides[keep], gen)

    def union(self, other: "CubeFamily") -> "CubeFamily":
        gen = {"union": [self.generator, other.generator]}
        return CubeFamily(np.concatenate([self.corners, other.corners]),
                          np.concatenate([self.sides, other.sides]), gen)

    def origin_distance(self) -> np.ndarray:
        """``dist(Q, 0)`` taken as center norm minus half diagonal (clipped at 0)."""
        c = self.centers
        return np.maximum(0.0, np.hypot(c[:, 0], c[:, 1]) - self.sides * math.sqrt(2.0) / 2)


def dyadic_sides(t_min: float, t_max: float) -> list:
    out = []
    k = math.floor(-math.log2(t_max)) - 1
    while True:
        s = math.ldexp(1.0, -k)
        if s < t_min * (1 - 1e-12):
            break
        if s <= t_max * (1 + 1e-12):
            out.append(s)
        k += 1
    return sorted(out, reverse=True)


def enumerate_cubes(D: DomainModel, t_min: float, t_max: float, pitch_divisor: int = 4,
                    grid: GridFunction = None, sides=None, allow_empty: bool = False,
                    chunk: int = 1_000_000) -> CubeFamily:
    """Cubes certified inside ``D`` with dyadic sides in ``[t_min, t_max]``.

    Positions lie on a lattice anchored at the window corner with pitch
    ``side / pitch_divisor`` (rounded to whole cells when ``grid`` is given,
    which also pre-filters candidates by the cell mask).
    """
    if not (0 < t_min <= t_max):
        raise ValidationError("t_min", f"need 0 < t_min <= t_max, got {t_min}, {t_max}")
    if pitch_divisor not in (1, 2, 4, 8):
        raise ValidationError("pitch_divisor", "must be one of 1, 2, 4, 8")
    if sides is None:
        sides = dyadic_sides(t_min, t_max)
    win = D.window
    corners_all, sides_all = [], []
    for side in sides:
        side = float(side)
        if side > win.side:
            continue
        pitch = side / pitch_divisor
        if grid is not None:
            h = grid.spacing
            pitch = max(h, round(pitch / h) * h)
        npos = int(math.floor((win.side - side) / pitch + 1e-9)) + 1
        xs = win.corner[0] + np.arange(npos) * pitch
        ys = win.corner[1] + np.arange(npos) * pitch
        rows = max(1, chunk // max(npos, 1))
        for r0 in range(0, npos, rows):
            X, Y = np.meshgrid(xs[r0:r0 + rows], ys, indexing="ij")
            c = np.stack([X.ravel(), Y.ravel()], axis=1)
            if grid is not None:
                i0, j0, ki, kj = grid.cell_ranges(c, side)
                full = (ki > 0) & (kj > 0)
                cnt = np.zeros(len(c), dtype=np.int64)
                cnt[full] = grid.masked_counts(i0[full], j0[full], ki[full], kj[full])
                c = c[full & (cnt == ki * kj)]
            if len(c):
                c = c[D.contains_cubes(c, np.full(len(c), side))]
            if len(c):
                corners_all.append(c)
                sides_all.append(np.full(len(c), side))
    gen = {"sides": [float(s) for s in sides], "pitch_divisor": pitch_divisor,
           "anchor": list(win.corner)}
    if not corners_all:
        if allow_empty:
            return CubeFamily(np.zeros((0, 2)), np.zeros(0), gen)
        raise NotEvaluable(
            f"no cube with side in [{t_min:g}, {t_max:g}] fits inside {D.name} within the window"
        )
    return CubeFamily(np.concatenate(corners_all), np.concatenate(sides_all), gen)


def family_stats(f: GridFunction, family: CubeFamily, need_oscillation=True) -> BlockStats:
    i0, j0, ki, kj = f.cell_ranges(family.corners, family.sides)
    st = block_stats(f, i0, j0, ki, kj, need_oscillation=need_oscillation)
    need = MIN_CELLS_PER_SIDE ** 2
    if len(st.count) and st.count.min() < need:
        from .errors import ResolutionError
        bad = int(np.argmin(st.count))
        raise ResolutionError(
            f"family cube of side {family.sides[bad]:g} holds {st.count[bad]} cells (< {need})",
            suggestion={"max_spacing": float(family.sides[bad]) / MIN_CELLS_PER_SIDE},
        )
    return st


def _argmax(values):
    if not len(values):
        return 0.0, None
    i = int(np.argmax(values))
    return float(values[i]), i


def mean_oscillation(f: GridFunction, Q: Cube) -> float:
    from .gridfield import mean_oscillation as _mo
    return _mo(f, Q)


def small_sides(h: float, lam: float) -> list:
    """Sides used for the oscillation part.

    Dyadic sides in ``[4h, lam)`` plus, for ``lam`` and every dyadic scale
    below it, the largest whole-cell side under that scale. The extra sides
    keep the families nested, so ``omega`` is nondecreasing over dyadic ``t``.
    """
    lo = MIN_CELLS_PER_SIDE * h
    top = lam * (1 - 1e-12)
    dyadic = [s for s in dyadic_sides(lo, top) if s < top]
    sides = list(dyadic)
    for scale in [lam] + [s for s in dyadic_sides(lo, lam) if s <= lam * (1 + 1e-12)]:
        extra = (math.ceil(scale / h - 1e-9) - 1) * h
        if extra >= lo and all(abs(extra - s) > 1e-12 for s in sides):
            sides.append(extra)
    return sorted(sides, reverse=True)


def large_sides(lam: float, window_side: float, mode: str = "geq") -> list:
    if mode == "eq":
        return [lam]
    out = []
    s = lam
    while s <= window_side * (1 + 1e-12):
        out.append(s)
        s *= 2
    return out


def small_family(f: GridFunction, D: DomainModel, t: float, pitch_divisor=4, allow_empty=False):
    sides = small_sides(f.spacing, t)
    if not sides:
        if allow_empty:
            return CubeFamily(np.zeros((0, 2)), np.zeros(0), {})
        raise ValidationError("t", f"{t} leaves no cube side in [4h, t)")
    return enumerate_cubes(D, min(sides), max(sides), pitch_divisor, grid=f, sides=sides,
                           allow_empty=allow_empty)


def large_family(f: GridFunction, D: DomainModel, lam: float, pitch_divisor=4, mode="geq",
                 allow_empty=True):
    sides = large_sides(lam, D.window.side, mode)
    if not sides:
        return CubeFamily(np.zeros((0, 2)), np.zeros(0), {})
    return enumerate_cubes(D, min(sides), max(sides), pitch_divisor, grid=f, sides=sides,
                           allow_empty=allow_empty)


def omega(f: GridFunction, D: DomainModel, t: float, family: CubeFamily = None,
          stats: BlockStats = None) -> float:
    """Discretized modulus of mean oscillation ``sup_{l(Q) < t} osc_Q f``."""
    if family is None:
        family = small_family(f, D, t)
    if not len(family):
        raise NotEvaluable("empty cube family")
    if family.scale_bounds[1] >= t:
        raise ValidationError("family", f"contains sides >= t = {t}")
    st = family_stats(f, family) if stats is None else stats
    return float(np.max(st.oscillation))


@dataclass
class NormReport:
    oscillation_part: float
    average_part: float
    total: float
    oscillation_argmax: Cube = None
    average_argmax: Cube = None
    lam: float = None
    average_mode: str = "geq"
    family_stats: dict = field(default_factory=dict)

    def rows(self):
        """CSV rows ``(part, value, argmax corner x, argmax corner y, argmax side)``."""
        out = []
        for part, val, q in (("oscillation", self.oscillation_part, self.oscillation_argmax),
                             ("average", self.average_part, self.average_argmax),
                             ("total", self.total, None)):
            if q is None:
                out.append((part, val, "", "", ""))
            else:
                out.append((part, val, q.corner[0], q.corner[1], q.side))
        return out

    def to_json(self) -> dict:
        return {
            "lambda": self.lam,
            "average_mode": self.average_mode,
            "oscillation_part": self.oscillation_part,
            "average_part": self.average_part,
            "total": self.total,
            "oscillation_argmax": None if self.oscillation_argmax is None else self.oscillation_argmax.to_json(),
            "average_argmax": None if self.average_argmax is None else self.average_argmax.to_json(),
            "families": self.family_stats,
        }


def norm_from_families(f: GridFunction, small: CubeFamily, large: CubeFamily, lam=None,
                       mode="geq", small_stats=None, large_stats=None) -> NormReport:
    if not len(small) and not len(large):
        raise NotEvaluable("both cube families are empty")
    osc, oi = 0.0, None
    avg, ai = 0.0, None
    if len(small):
        st = family_stats(f, small) if small_stats is None else small_stats
        osc, oi = _argmax(st.oscillation)
    if len(large):
        st = family_stats(f, large, need_oscillation=False) if large_stats is None else large_stats
        avg, ai = _argmax(st.abs_mean)
    return NormReport(
        oscillation_part=osc,
        average_part=avg,
        total=osc + avg,
        oscillation_argmax=None if oi is None else small.cube(oi),
        average_argmax=None if ai is None else large.cube(ai),
        lam=lam,
        average_mode=mode,
        family_stats={"small": {"count": len(small), "scale_bounds": small.scale_bounds},
                      "large": {"count": len(large), "scale_bounds": large.scale_bounds}},
    )


def bmo_norm(f: GridFunction, D: DomainModel, lam: float, pitch_divisor: int = 4,
             average_mode: str = "geq", families=None) -> NormReport:
    """``omega(f, lam) + sup_{l(Q) >= lam} |f|_Q`` over lattice families.

    ``average_mode="eq"`` restricts the average part to cubes of side exactly
    ``lam``. ``families`` may pass a precomputed ``(small, large)`` pair.
    """
    h = f.spacing
    if not (MIN_CELLS_PER_SIDE * h < lam < D.window.side):
        raise ValidationError("lambda", f"need 4h < lambda < window side, got {lam}")
    if average_mode not in ("geq", "eq"):
        raise ValidationError("average_mode", "must be 'geq' or 'eq'")
    if families is None:
        small = small_family(f, D, lam, pitch_divisor, allow_empty=True)
        large = large_family(f, D, lam, pitch_divisor, average_mode)
    else:
        small, large = families
    return norm_from_families(f, small, large, lam, average_mode)


def gamma(f: GridFunction, D: DomainModel, beta: float, lam: float, families=None,
          stats=None) -> float:
    """Oscillation on small cubes plus averages on side-``lam`` cubes, both
    restricted to cubes at distance greater than ``beta`` from the origin."""
    if beta < 0:
        raise ValidationError("beta", "must be >= 0")
    if families is None:
        small = small_family(f, D, lam, allow_empty=True)
        eq = large_family(f, D, lam, mode="eq")
    else:
        small, eq = families
    if stats is None:
        stats = (family_stats(f, small) if len(small) else None,
                 family_stats(f, eq, need_oscillation=False) if len(eq) else None)
    ks = small.origin_distance() > beta if len(small) else np.zeros(0, bool)
    ke = eq.origin_distance() > beta if len(eq) else np.zeros(0, bool)
    if not ks.any() and not ke.any():
        raise NotEvaluable(f"no cube farther than beta = {beta:g} from the origin")
    osc = float(stats[0].oscillation[ks].max()) if ks.any() else 0.0
    avg = float(stats[1].abs_mean[ke].max()) if ke.any() else 0.0
    return osc + avg


def gamma_curve(f, D, betas, lam):
    small = small_family(f, D, lam, allow_empty=True)
    eq = large_family(f, D, lam, mode="eq")
    stats = (family_stats(f, small) if len(small) else None,
             family_stats(f, eq, need_oscillation=False) if len(eq) else None)
    out = []
    for b in betas:
        try:
            out.append((float(b), gamma(f, D, b, lam, (small, eq), stats)))
        except NotEvaluable:
            out.append((float(b), None))
    return out


def _restricted_norm(f, D, lam, keep_fn, note):
    small = small_family(f, D, lam, allow_empty=True)
    large = large_family(f, D, lam)
    small = small.subset(keep_fn(small), note) if len(small) else small
    large = large.subset(keep_fn(large), note) if len(large) else large
    if not len(small) and not len(large):
        raise NotEvaluable(f"no cube satisfies {note}")
    return norm_from_families(f, small, large, lam).total


def vanishing_at_boundary_norm(f: GridFunction, D: DomainModel, t: float, lam: float) -> float:
    """bmo norm over cubes lying in the collar ``{x : d(x) < t}``.

    Membership uses ``d(center) + half diagonal < t``, an upper bound for the
    largest ``d`` on the cube, so only genuine collar cubes enter.
    """
    if not t > 0:
        raise ValidationError("t", "must be positive")

    def keep(fam):
        return D.distance(fam.centers) + fam.sides * math.sqrt(2.0) / 2 < t

    return _restricted_norm(f, D, lam, keep, f"collar t={t:g}")


def vanishing_at_infinity_norm(f: GridFunction, D: DomainModel, R: float, lam: float) -> float:
    """bmo norm over cubes outside the closed ball ``B(0, R)``."""
    if not R > 0:
        raise ValidationError("R", "must be positive")
    return _restricted_norm(f, D, lam, lambda fam: fam.origin_distance() > R, f"outside B(0,{R:g})")


def log_estimate_probe(f: GridFunction, D: DomainModel, lam: float, scales=None,
                       report: NormReport = None, pitch_divisor: int = 4):
    """Per-scale ratio ``sup_{l(Q)=l} |f|_Q / ((1 + log(lam/l)) * total)``.

    Bounded curves are what the logarithmic average estimate predicts;
    growing curves witness its failure.
    """
    report = bmo_norm(f, D, lam, pitch_divisor) if report is None else report
    if not report.total > 0:
        raise ValidationError("f", "total norm must be positive")
    if scales is None:
        scales = dyadic_sides(MIN_CELLS_PER_SIDE * f.spacing, lam * (1 - 1e-12))
    out = []
    for ell in sorted(scales, reverse=True):
        fam = enumerate_cubes(D, ell, ell, pitch_divisor, grid=f, sides=[ell], allow_empty=True)
        if not len(fam):
            out.append((float(ell), None))
            continue
        st = family_stats(f, fam, need_oscillation=False)
        sup = float(st.abs_mean.max())
        out.append((float(ell), sup / ((1 + math.log(lam / ell)) * report.total)))
    return out


def lambda_eps_delta(eps: float, delta: float, n: int) -> float:
    """The scale ``eps^2 delta / (320 n (1 + sqrt(n) eps))``."""
    if not (0 < eps <= 1):
        raise ValidationError("eps", "must lie in (0, 1]")
    if not delta > 0:
        raise ValidationError("delta", "must be positive")
    if int(n) != n or n < 1:
        raise ValidationError("n", "must be a positive integer")
    return eps * eps * delta / (320 * n * (1 + math.sqrt(n) * eps))
