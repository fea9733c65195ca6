import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bmodomain.errors import ResolutionError, ValidationError
from bmodomain.geometry import Cube
from bmodomain.approximation import (Phi_lambda, Phi_lambda_quad, alpha_j, approximation_driver,
                                     bounded_approximant, h_j, leibniz_bound_check, log_alpha_j,
                                     phi_lambda, psi_k, psi_value, sarason_smooth, truncate)
from bmodomain.gridfield import GridFunction, TestFunctionSpec, mean_oscillation, sample

H = 1 / 64


def test_psi_values_exact():
    for k in (1, 2, 5):
        assert list(psi_value(k, [0.0, k, 1.5 * k, 2 * k, 3 * k])) == [1.0, 1.0, 0.5, 0.0, 0.0]
    with pytest.raises(ValidationError):
        psi_value(0.5, 1.0)


def test_psi_k_grid(square):
    f = sample(TestFunctionSpec("constant"), square, H)
    p = psi_k(1, f)
    assert np.all((p.values >= 0) & (p.values <= 1))
    assert np.all(p.values[~f.mask] == 0)


def test_phi_closed_form_and_quadrature():
    lam = 1.0
    assert phi_lambda(lam / 8, lam) == pytest.approx(1 + math.log(2), abs=1e-15)
    assert phi_lambda(lam, lam) == 1.0
    for d in (1e-6, 1e-3, 0.01, 0.2):
        assert Phi_lambda_quad(d, lam) == pytest.approx(float(Phi_lambda(d, lam)), rel=1e-7)
        assert Phi_lambda_quad(d, lam, "one") == pytest.approx(float(Phi_lambda(d, lam, "one")), rel=1e-7)
    assert Phi_lambda(0.3, lam) == 0.0


def test_t_phi_is_monotone():
    t = np.logspace(-12, 1, 400)
    v = t * phi_lambda(t, 1.0)
    assert np.all(np.diff(v) > 0)


def test_alpha_j_strictly_decreasing():
    la = [log_alpha_j(j, 1.0) for j in range(1, 21)]
    assert all(a > b for a, b in zip(la, la[1:]))
    assert float(Phi_lambda(alpha_j(2, 1.0), 1.0)) == pytest.approx(2.0, rel=1e-9)
    assert la[-1] == pytest.approx(math.log(0.25) - math.expm1(20), rel=1e-12)


def test_h_j_is_one_in_the_core(square):
    f = sample(TestFunctionSpec("constant"), square, H)
    lam = 0.5
    g, _ = h_j(square, 3, lam, f)
    d = square.distance(f.centers().reshape(-1, 2)).reshape(f.shape)
    assert np.all(g.values[f.mask & (d >= lam / 4)] == 1.0)
    assert np.all((g.values >= 0) & (g.values <= 1))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2 ** 31), st.floats(0.05, 3.0))
def test_truncation_never_increases_oscillation(seed, t):
    rng = np.random.default_rng(seed)
    v = rng.standard_cauchy(size=(16, 16))
    f = GridFunction(1 / 16, (0.0, 0.0), v, np.ones((16, 16), bool))
    g = truncate(f, t)
    for i0, j0, k in ((0, 0, 16), (3, 5, 4), (8, 2, 6)):
        Q = Cube((i0 / 16, j0 / 16), k / 16)
        assert mean_oscillation(g, Q) <= mean_oscillation(f, Q) + 1e-12


def test_sarason_smooth_keeps_constants(square):
    f = sample(TestFunctionSpec("constant", {"value": 2.0}), square, H)
    g = sarason_smooth(f, square, 4 * H, 4 * H)
    assert np.allclose(g.values[f.mask], 2.0, atol=1e-12)
    with pytest.raises(ResolutionError):
        sarason_smooth(f, square, 2 * H, 0.1)
    with pytest.raises(ValidationError):
        sarason_smooth(f, square, 4 * H, 0.1, restricted=True)


def test_bounded_approximant_is_bounded(square):
    f = sample(TestFunctionSpec("log-distance"), square, H)
    b = bounded_approximant(f, square, 1 / 16, 1.0)
    assert np.abs(b.g.values).max() <= b.C_ell + 1e-12
    assert b.C_ell < f.sup_abs()
    with pytest.raises(ValidationError):
        bounded_approximant(f, square, 0.5, 1.0)


def test_leibniz_bound(square):
    f = sample(TestFunctionSpec("sine"), square, H)
    g = sample(TestFunctionSpec("coordinate"), square, H)
    lhs, rhs = leibniz_bound_check(f, g, Cube((0.25, 0.25), 0.5))
    assert lhs <= rhs + 1e-12


@pytest.mark.parametrize("scheme", ["boundary", "infinity", "bounded", "compact"])
def test_driver_shapes(square, scheme):
    f = sample(TestFunctionSpec("log-distance"), square, H)
    curve = approximation_driver(f, square, 0.25, scheme, lip_pairs=100)
    rows = curve.rows()
    assert len(rows) == len(curve.params) and rows[0][0] == scheme
    assert all(e >= 0 for e in curve.errors)


def test_infinity_scheme_is_exact_on_bounded_support(square):
    f = sample(TestFunctionSpec("sine"), square, H)
    curve = approximation_driver(f, square, 0.25, "infinity", params=[2, 4], lip_pairs=0)
    assert curve.errors == [0.0, 0.0]


def test_driver_rejects_unknown_scheme(square):
    f = sample(TestFunctionSpec("constant"), square, H)
    with pytest.raises(ValidationError):
        approximation_driver(f, square, 0.25, "fourier")
