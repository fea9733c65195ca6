"""End-to-end pipelines for the two strip examples."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .geometry import DomainSpec, build_domain, default_window
from .gridfield import MIN_CELLS_PER_SIDE, TestFunctionSpec, sample
from .oscillation import (bmo_norm, enumerate_cubes, family_stats, gamma_curve,
                          large_family, small_family)
from .whitney import match_cubes, whitney_decompose


@dataclass
class Example1Row:
    n: int
    ell: float
    sup_average: float
    total: float
    ratio: float
    unmatched_cubes: int

    def row(self):
        return (self.n, self.ell, self.sup_average, self.total, self.ratio, self.unmatched_cubes)


def example1_domain(n: int, schedule: str = "constant"):
    spec = DomainSpec("strips-example-1", {"count": n, "schedule": schedule})
    return spec, build_domain(spec, default_window(spec))


def example1_row(n: int, schedule: str = "constant", lam: float = 4.0, h: float = None,
                 pitch_divisor: int = 4, with_matching: bool = True,
                 match_lam: float = 0.25) -> Example1Row:
    """Log-probe ratio at ``l = 1/(2n)`` for ``f = k x`` on the strip ``S_k``.

    The ratio is ``sup_{l(Q) = l} |f|_Q / ((1 + log(lam / l)) ||f||_{bmo_lam})``.
    The default spacing puts four cells across the probe cube. Unmatched
    cubes are counted among exterior cubes of side at most ``match_lam``;
    larger cubes near the window edge have no partner only because the
    window truncates the half-plane.
    """
    ell = 1.0 / (2 * n)
    h = ell / MIN_CELLS_PER_SIDE if h is None else h
    spec, D = example1_domain(n, schedule)
    f = sample(TestFunctionSpec("example-1"), D, h)
    rep = bmo_norm(f, D, lam, pitch_divisor)
    fam = enumerate_cubes(D, ell, ell, pitch_divisor, grid=f, sides=[ell])
    sup = float(family_stats(f, fam, need_oscillation=False).abs_mean.max())
    ratio = sup / ((1 + math.log(lam / ell)) * rep.total)
    unmatched = -1
    if with_matching:
        level = int(round(-math.log2(h)))
        E = whitney_decompose(D, D.window, level, strict=False)
        Ep = whitney_decompose(D.complement(), D.window, level, strict=False)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            unmatched = len(match_cubes(Ep, E, match_lam).unmatched)
    return Example1Row(n, ell, sup, rep.total, ratio, unmatched)


def example1(counts=(4, 8, 16), schedule="constant", lam=4.0, pitch_divisor=4, with_matching=True,
             match_lam=0.25):
    return [example1_row(n, schedule, lam, None, pitch_divisor, with_matching, match_lam)
            for n in counts]


@dataclass
class Example2Row:
    n: int
    window_side: float
    total_lam: float
    average_lam: float
    total_lam_prime: float
    gamma_min: float
    gamma_max: float

    def row(self):
        return (self.n, self.window_side, self.total_lam, self.average_lam, self.total_lam_prime,
                self.gamma_min, self.gamma_max)


def example2_row(n: int, lam: float = 2.0, lam_prime: float = 0.5, h: float = 1 / 16,
                 betas=None, pitch_divisor: int = 4):
    """Norms of ``f = c_j x`` on ``S_{m,j}`` (``c_j = sqrt j``) for ``m <= n``.

    ``f`` vanishes on strips holding cubes of side ``lam``. Returns the row and
    the gamma curve ``[(beta, gamma)]``.
    """
    spec = DomainSpec("strips-example-2", {"count": n})
    D = build_domain(spec, default_window(spec))
    f = sample(TestFunctionSpec("example-2", {"lambda": lam}), D, h)
    rep = bmo_norm(f, D, lam, pitch_divisor)
    rep_p = bmo_norm(f, D, lam_prime, pitch_divisor)
    if betas is None:
        betas = [0.0] + [float(2 ** k) for k in range(0, int(math.log2(D.window.side)))]
    curve = gamma_curve(f, D, betas, lam)
    vals = [g for _, g in curve if g is not None]
    row = Example2Row(n, D.window.side, rep.total, rep.average_part, rep_p.total,
                      float(min(vals)) if vals else math.nan, float(max(vals)) if vals else math.nan)
    return row, curve


def example2(counts=(2, 4, 8), lam=2.0, lam_prime=0.5, h=1 / 16, pitch_divisor=4):
    return [example2_row(n, lam, lam_prime, h, None, pitch_divisor) for n in counts]
