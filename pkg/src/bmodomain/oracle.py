"""Exhaustive ground truth over all grid-aligned cubes.

Every cube whose corners lie on cell boundaries and which lies in the domain
is evaluated with the same block statistics as the lattice families, so the
sampled value can never exceed the oracle value.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import NotEvaluable, ValidationError
from .geometry import DomainModel
from .gridfield import MIN_CELLS_PER_SIDE, GridFunction, block_stats
from .oscillation import (CubeFamily, bmo_norm, family_stats, gamma, large_family, omega,
                          small_family)

FUNCTIONALS = ("bmo_norm", "omega", "gamma")
MAX_CUBES = 10_000_000


class BudgetExceeded(ValidationError):
    def __init__(self, count, budget, h):
        coarsen = 2 ** math.ceil(math.log2((count / budget) ** (1 / 3))) if count > budget else 1
        super().__init__("max_cells", f"{count} grid-aligned cubes exceed the budget {budget}; "
                                      f"coarsen h by a factor {coarsen} (to {h * coarsen:g})")
        self.required_factor = coarsen


@dataclass
class OracleReport:
    functional: str
    oracle_value: float
    sampled_value: float
    ratio: float
    oracle_count: int
    sampled_count: int
    params: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, doc: dict) -> "OracleReport":
        return cls(**doc)


def count_aligned_cubes(f: GridFunction, k_min: int = MIN_CELLS_PER_SIDE) -> int:
    """Number of grid-aligned candidate cubes (fully masked blocks) of at least ``k_min`` cells."""
    S = f.mask_table
    ni, nj = f.shape
    total = 0
    for k in range(k_min, min(ni, nj) + 1):
        c = S[k:, k:] - S[:-k, k:] - S[k:, :-k] + S[:-k, :-k]
        total += int((c == k * k).sum())
    return total


def aligned_family(f: GridFunction, D: DomainModel, k_min: int, k_max: int,
                   max_cubes: int = MAX_CUBES) -> CubeFamily:
    """All grid-aligned cubes of ``k_min..k_max`` cells inside ``D``."""
    S = f.mask_table
    ni, nj = f.shape
    h = f.spacing
    o = np.asarray(f.origin, dtype=float)
    k_max = min(k_max, ni, nj)
    counts = 0
    corners, sides = [], []
    for k in range(k_min, k_max + 1):
        c = S[k:, k:] - S[:-k, k:] - S[k:, :-k] + S[:-k, :-k]
        ij = np.argwhere(c == k * k)
        counts += len(ij)
        if counts > max_cubes:
            raise BudgetExceeded(counts, max_cubes, h)
        if not len(ij):
            continue
        cor = o + ij * h
        ok = D.contains_cubes(cor, np.full(len(ij), k * h))
        corners.append(cor[ok])
        sides.append(np.full(int(ok.sum()), k * h))
    if not corners:
        return CubeFamily(np.zeros((0, 2)), np.zeros(0), {"aligned": [k_min, k_max]})
    return CubeFamily(np.concatenate(corners), np.concatenate(sides), {"aligned": [k_min, k_max]})


def _cells(x, h):
    return int(math.floor(x / h + 1e-9))


def exhaustive_sup(f: GridFunction, D: DomainModel, functional: str, lam: float = None,
                   t: float = None, beta: float = None, max_cells: int = MAX_CUBES,
                   pitch_divisor: int = 4, average_mode: str = "geq") -> OracleReport:
    """Oracle and lattice-sampled values of one sup-functional.

    ``bmo_norm`` and ``gamma`` need ``lam`` (``gamma`` also ``beta``);
    ``omega`` needs ``t``. ``max_cells`` bounds the number of candidate cubes.
    """
    if functional not in FUNCTIONALS:
        raise ValidationError("functional", f"must be one of {FUNCTIONALS}")
    h = f.spacing
    n_side = min(f.shape)
    if functional == "omega":
        if t is None:
            raise ValidationError("t", "omega needs t")
        k_top = math.ceil(t / h - 1e-9) - 1
        fam = aligned_family(f, D, MIN_CELLS_PER_SIDE, k_top, max_cells)
        if not len(fam):
            raise NotEvaluable("no grid-aligned cube below t")
        ov = float(family_stats(f, fam).oscillation.max())
        sm = small_family(f, D, t, pitch_divisor)
        sv = omega(f, D, t, sm)
        params = {"t": t}
        scount = len(sm)
    else:
        if lam is None:
            raise ValidationError("lambda", f"{functional} needs lambda")
        k_lam = math.ceil(lam / h - 1e-9)
        hi = n_side if (functional == "bmo_norm" and average_mode == "geq") else k_lam
        fam = aligned_family(f, D, MIN_CELLS_PER_SIDE, hi, max_cells)
        small = fam.subset(fam.sides < k_lam * h - 1e-12 * h)
        if functional == "bmo_norm":
            if average_mode == "geq":
                big = fam.subset(fam.sides >= k_lam * h - 1e-12 * h)
            else:
                big = fam.subset(np.abs(fam.sides - lam) <= 1e-9 * h)
            ov = _norm_value(f, small, big)
            rep = bmo_norm(f, D, lam, pitch_divisor, average_mode)
            sv = rep.total
            scount = rep.family_stats["small"]["count"] + rep.family_stats["large"]["count"]
            params = {"lambda": lam, "average_mode": average_mode}
        else:
            if beta is None:
                raise ValidationError("beta", "gamma needs beta")
            big = fam.subset(np.abs(fam.sides - lam) <= 1e-9 * h)
            ov = gamma(f, D, beta, lam, families=(small, big))
            sm = small_family(f, D, lam, pitch_divisor, allow_empty=True)
            eq = large_family(f, D, lam, pitch_divisor, mode="eq")
            sv = gamma(f, D, beta, lam, families=(sm, eq))
            scount = len(sm) + len(eq)
            params = {"lambda": lam, "beta": beta}
    params.update({"h": h, "domain": D.name})
    ratio = ov / sv if sv > 0 else (1.0 if ov == 0 else math.inf)
    return OracleReport(functional, float(ov), float(sv), float(ratio), len(fam), int(scount), params)


def _norm_value(f, small, big):
    if not len(small) and not len(big):
        raise NotEvaluable("both cube families are empty")
    osc = float(family_stats(f, small).oscillation.max()) if len(small) else 0.0
    avg = float(family_stats(f, big, need_oscillation=False).abs_mean.max()) if len(big) else 0.0
    return osc + avg


def save_reports(reports, path) -> None:
    with open(path, "w") as fh:
        json.dump([r.to_json() for r in reports], fh, indent=2, sort_keys=True)


def load_reports(path) -> list:
    with open(path) as fh:
        return [OracleReport.from_json(d) for d in json.load(fh)]
