import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bmodomain.errors import NotEvaluable, ValidationError
from bmodomain.gridfield import TestFunctionSpec, sample
from bmodomain.oscillation import (bmo_norm, dyadic_sides, enumerate_cubes, family_stats, gamma,
                                   gamma_curve, lambda_eps_delta, large_family, large_sides,
                                   log_estimate_probe, norm_from_families, omega, small_family,
                                   small_sides, vanishing_at_boundary_norm)

from conftest import make_domain

H = 1 / 64


def test_dyadic_and_small_sides():
    assert dyadic_sides(0.1, 1.0) == [1.0, 0.5, 0.25, 0.125]
    s = small_sides(1 / 64, 0.3)
    assert max(s) < 0.3 and min(s) == pytest.approx(4 / 64)
    assert 19 / 64 in s  # largest whole-cell side below lambda
    assert large_sides(0.25, 2.0) == [0.25, 0.5, 1.0, 2.0]
    assert large_sides(0.25, 2.0, "eq") == [0.25]


def test_enumerated_cubes_lie_inside(disk):
    fam = enumerate_cubes(disk, 1 / 16, 1 / 4)
    assert len(fam) > 0
    assert np.all(disk.contains_cubes(fam.corners, fam.sides))


@pytest.mark.parametrize("c", [3.0, -1.25, 0.0])
def test_constant_norm_is_abs_value(square, c):
    f = sample(TestFunctionSpec("constant", {"value": c}), square, H)
    rep = bmo_norm(f, square, 0.25)
    assert rep.oscillation_part == pytest.approx(0.0, abs=1e-12)
    assert abs(rep.total - abs(c)) <= 1e-12


def test_coordinate_norm_near_seven_eighths(square):
    f = sample(TestFunctionSpec("coordinate"), square, H)
    rep = bmo_norm(f, square, 0.5)
    assert rep.total == pytest.approx(7 / 8, abs=4 * H)
    assert rep.total <= 7 / 8 + 1e-12
    rows = rep.rows()
    assert [r[0] for r in rows] == ["oscillation", "average", "total"]


def test_average_mode_eq_is_smaller(square):
    f = sample(TestFunctionSpec("coordinate"), square, H)
    assert bmo_norm(f, square, 0.5, average_mode="eq").total <= bmo_norm(f, square, 0.5).total


def test_lambda_range_is_validated(square):
    f = sample(TestFunctionSpec("constant"), square, H)
    with pytest.raises(ValidationError):
        bmo_norm(f, square, 2 * H)
    with pytest.raises(ValidationError):
        bmo_norm(f, square, 4.0)


def test_empty_families_are_not_evaluable(square):
    f = sample(TestFunctionSpec("constant"), square, H)
    with pytest.raises(NotEvaluable):
        gamma(f, square, 100.0, 0.25)
    curve = gamma_curve(f, square, [0.0, 100.0], 0.25)
    assert curve[0][1] == pytest.approx(1.0) and curve[1][1] is None


def test_omega_is_nondecreasing(square):
    f = sample(TestFunctionSpec("sine"), square, H)
    vals = [omega(f, square, t) for t in (0.125, 0.25, 0.5, 1.0)]
    assert all(a <= b + 1e-15 for a, b in zip(vals, vals[1:]))


@settings(max_examples=15, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3), st.integers(0, 1000))
def test_triangle_inequality_and_homogeneity(a, b, seed):
    D = make_domain("square")
    f = sample(TestFunctionSpec("random-whitney-step", {"seed": seed}), D, 1 / 32)
    g = sample(TestFunctionSpec("sine"), D, 1 / 32)
    small = small_family(f, D, 0.25, allow_empty=True)
    large = large_family(f, D, 0.25)
    n = lambda u: norm_from_families(u, small, large).total
    s = f.with_values(a * f.values + b * g.values)
    assert n(s) <= abs(a) * n(f) + abs(b) * n(g) + 1e-12
    assert n(f.with_values(a * f.values)) == pytest.approx(abs(a) * n(f), rel=1e-12, abs=1e-12)


@pytest.mark.parametrize("kind", ["sine", "indicator-half", "coordinate"])
def test_parts_bounded_by_sup(square, kind):
    f = sample(TestFunctionSpec(kind), square, H)
    rep = bmo_norm(f, square, 0.25)
    sup = f.sup_abs()
    assert rep.oscillation_part <= sup + 1e-12
    assert rep.average_part <= sup + 1e-12
    assert rep.total <= 2 * sup + 1e-12


def test_indicator_total_exceeds_sup(square):
    # the sum of both parts can exceed ||f||_inf
    f = sample(TestFunctionSpec("indicator-half", {"split": 0.5}), square, H)
    assert bmo_norm(f, square, 0.25).total > 1.0


def test_collar_norm_of_log_distance_decreases_slowly(square):
    f = sample(TestFunctionSpec("log-distance"), square, H)
    a = vanishing_at_boundary_norm(f, square, 0.5, 0.25)
    b = vanishing_at_boundary_norm(f, square, 0.25, 0.25)
    assert b <= a + 1e-12


def test_log_probe_bounded_for_coordinate(square):
    f = sample(TestFunctionSpec("coordinate"), square, H)
    curve = log_estimate_probe(f, square, 0.5)
    assert all(r is None or 0 < r <= 1.5 for _, r in curve)


def test_lambda_eps_delta():
    assert lambda_eps_delta(1.0, 320 * 2 * (1 + math.sqrt(2)), 2) == pytest.approx(1.0)
    with pytest.raises(ValidationError):
        lambda_eps_delta(0.0, 1.0, 2)


def test_family_stats_resolution_guard(square):
    from bmodomain.errors import ResolutionError
    f = sample(TestFunctionSpec("constant"), square, 1 / 16)
    fam = enumerate_cubes(square, 1 / 8, 1 / 8)
    with pytest.raises(ResolutionError):
        family_stats(f, fam)
