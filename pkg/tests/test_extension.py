import warnings

import numpy as np
import pytest

from bmodomain.errors import ResolutionError, ValidationError
from bmodomain.extension import (average_at, ball_average, contact_lipschitz, default_cn,
                                 extend_smooth, extend_step, plan_extension)
from bmodomain.gridfield import TestFunctionSpec, grid_lipschitz, load, sample

H = 1 / 128
LAM = 0.25

pytestmark = pytest.mark.filterwarnings("ignore::RuntimeWarning")


@pytest.fixture(scope="module")
def setup():
    from conftest import make_domain
    D = make_domain("square")
    f = sample(TestFunctionSpec("constant"), D, H)
    return D, f, plan_extension(D, f, LAM)


def test_default_cn():
    assert default_cn(2) == pytest.approx(1 / (16 * np.sqrt(2)))


def test_restriction_identity_is_bitwise(setup):
    D, _, plan = setup
    g = sample(TestFunctionSpec("sine"), D, H)
    for res in (extend_step(g, D, LAM, plan=plan), extend_smooth(g, D, LAM, plan=plan)):
        assert np.array_equal(res.extended.values[g.mask], g.values[g.mask])


def test_constant_one_extends_to_values_in_unit_interval(setup):
    D, f, plan = setup
    res = extend_smooth(f, D, LAM, plan=plan)
    v = res.extended.values
    assert v.min() >= 0.0 and v.max() <= 1.0
    d = D.boundary_distance(res.extended.centers().reshape(-1, 2)).reshape(v.shape)
    collar = ~f.mask & (d < 0.05)
    assert np.all(v[collar] == 1.0)
    assert res.flags["averaged_cells"] > 0
    assert 0 < res.support_radius < np.inf


def test_linearity(setup):
    D, _, plan = setup
    a = sample(TestFunctionSpec("sine"), D, H)
    b = sample(TestFunctionSpec("coordinate"), D, H)
    s = a.with_values(2.0 * a.values - 3.0 * b.values)
    Ta = extend_smooth(a, D, LAM, plan=plan).extended.values
    Tb = extend_smooth(b, D, LAM, plan=plan).extended.values
    Ts = extend_smooth(s, D, LAM, plan=plan).extended.values
    assert np.max(np.abs(Ts - (2.0 * Ta - 3.0 * Tb))) < 1e-12


def test_sup_norm_not_increased(setup):
    D, _, plan = setup
    g = sample(TestFunctionSpec("random-whitney-step", {"seed": 1}), D, H)
    for res in (extend_step(g, D, LAM, plan=plan), extend_smooth(g, D, LAM, plan=plan)):
        assert res.extended.sup_abs() <= g.sup_abs()


def test_lipschitz_ratio_is_moderate(setup):
    D, _, plan = setup
    g = sample(TestFunctionSpec("coordinate"), D, H)
    res = extend_smooth(g, D, LAM, plan=plan)
    assert grid_lipschitz(res.extended) / grid_lipschitz(g) < 50


def test_plan_must_match_grid(setup):
    D, _, plan = setup
    g = sample(TestFunctionSpec("constant"), D, 1 / 64)
    with pytest.raises(ValidationError):
        extend_step(g, D, LAM, plan=plan)


def test_coarse_grid_still_averages(setup):
    D, _, _ = setup
    g = sample(TestFunctionSpec("coordinate"), D, 1 / 32)
    res = extend_smooth(g, D, LAM)
    assert res.flags["averaged_cells"] > 0
    assert res.extended.sup_abs() <= g.sup_abs()


def test_too_few_cells_is_resolution_error(setup):
    D, _, _ = setup
    with pytest.raises(ResolutionError):
        sample(TestFunctionSpec("constant"), D, 1.0)


def test_dump_writes_grid_and_sidecar(setup, tmp_path):
    D, f, plan = setup
    res = extend_step(f, D, LAM, plan=plan)
    res.dump(tmp_path / "ext.bmog")
    g = load(tmp_path / "ext.bmog")
    assert np.array_equal(g.values, res.extended.values)
    import json
    side = json.loads((tmp_path / "ext.bmog.json").read_text())
    assert side["stage"] == "step" and side["lambda"] == LAM


def test_average_at(setup):
    D, f, plan = setup
    res = extend_smooth(f, D, LAM, plan=plan)
    v = average_at(res, (-0.45, -0.45), D)
    assert 0.0 <= v <= 1.0
    assert average_at(res, (1.2, 0.5), D) == 1.0
    # agrees with the cell value of the smooth extension at a cell center
    c = res.extended.centers()
    i, j = 40, 20
    assert not f.mask[i, j]
    assert average_at(res, c[i, j], D) == pytest.approx(res.extended.values[i, j], abs=1e-12)
    with pytest.raises(ValidationError):
        average_at(res, (0.5, 0.5), D)


def test_ball_average_is_exact_for_a_two_cube_step(setup):
    D, f, plan = setup
    W = plan.exterior
    lo, sd = W.corners, W.sides
    # a cube b to the right of a, with b's left edge inside a's right edge
    pair = next((a, b) for a in np.argsort(-sd) for b in W.adjacency[a]
                if lo[b][0] == lo[a][0] + sd[a] and lo[b][1] >= lo[a][1]
                and lo[b][1] + sd[b] <= lo[a][1] + sd[a])
    a, b = pair
    phi = np.zeros(len(W))
    phi[b] = 1.0
    x = np.array([lo[b][0], lo[b][1] + sd[b] / 2])
    v, cover = ball_average(W, phi, x[None], [a], 0.25 * sd[b])
    # the straight edge splits the ball in half
    assert v[0] == pytest.approx(0.5, abs=1e-9)
    assert cover[0] == pytest.approx(1.0, abs=1e-9)


def test_contact_lipschitz(setup):
    D, _, plan = setup
    g = sample(TestFunctionSpec("coordinate"), D, H)
    res = extend_smooth(g, D, LAM, plan=plan)
    lip = contact_lipschitz(res, D)
    assert 0 < lip < np.inf
    res.phi_cube = np.ones_like(res.phi_cube)
    assert contact_lipschitz(res, D) == 0.0
