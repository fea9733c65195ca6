import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bmodomain.errors import ResolutionError, ValidationError
from bmodomain.geometry import Cube, DomainSpec, strip_layout
from bmodomain.gridfield import (GridFunction, TestFunctionSpec, block_stats, cube_mean, disc_sums,
                                 dump, grid_lipschitz, load, mean_oscillation, sample)

from conftest import make_domain


def test_sample_constant_and_mask(square):
    f = sample(TestFunctionSpec("constant", {"value": 2.5}), square, 1 / 32)
    assert f.shape == (64, 64)
    assert f.mask.sum() == 32 * 32
    assert np.all(f.values[f.mask] == 2.5)
    assert np.all(f.values[~f.mask] == 0.0)


def test_sample_coordinate_midpoint_mean(square):
    f = sample(TestFunctionSpec("coordinate"), square, 1 / 64)
    assert cube_mean(f, Cube((0.0, 0.0), 1.0)) == pytest.approx(0.5, abs=1e-12)
    # mean oscillation of x over a cube of side s is s/4
    assert mean_oscillation(f, Cube((0.0, 0.0), 0.5)) == pytest.approx(0.125, abs=1e-12)


def test_spacing_must_divide_window(square):
    with pytest.raises(ValidationError):
        sample(TestFunctionSpec("constant"), square, 0.3)
    with pytest.raises(ResolutionError):
        sample(TestFunctionSpec("constant"), square, 0.5)


def test_small_cube_is_resolution_error(square):
    f = sample(TestFunctionSpec("constant"), square, 1 / 16)
    with pytest.raises(ResolutionError):
        cube_mean(f, Cube((0.0, 0.0), 1 / 8))


def test_random_step_needs_seed(square):
    with pytest.raises(ValidationError):
        sample(TestFunctionSpec("random-whitney-step"), square, 1 / 32)
    a = sample(TestFunctionSpec("random-whitney-step", {"seed": 4}), square, 1 / 32)
    b = sample(TestFunctionSpec("random-whitney-step", {"seed": 4}), square, 1 / 32)
    assert np.array_equal(a.values, b.values)


def test_strip_functions_need_strip_domains(square):
    with pytest.raises(ValidationError):
        sample(TestFunctionSpec("example-1"), square, 1 / 32)


def test_example1_function_values():
    D = make_domain("strips-example-1", count=3)
    f = sample(TestFunctionSpec("example-1"), D, 1 / 16)
    c = f.centers()
    x0, y0, x1, y1 = strip_layout(DomainSpec("strips-example-1", {"count": 3}))[2].rect
    sel = f.mask & (c[..., 0] > x0) & (c[..., 1] > y0) & (c[..., 1] < y1)
    assert sel.any()
    assert np.allclose(f.values[sel], 3 * c[..., 0][sel])


def test_example2_zero_on_wide_strips():
    D = make_domain("strips-example-2", count=2)
    f = sample(TestFunctionSpec("example-2", {"lambda": 1.0}), D, 1 / 16)
    c = f.centers()
    wide = f.mask & (c[..., 1] < 1.0)  # first strip: width 1, length 1
    assert np.all(f.values[wide] == 0.0)
    assert np.any(f.values[f.mask] != 0.0)


def test_dump_load_roundtrip(tmp_path, disk):
    f = sample(TestFunctionSpec("sine"), disk, 1 / 32)
    dump(f, tmp_path / "f.bmog")
    g = load(tmp_path / "f.bmog")
    assert g.spacing == f.spacing and g.origin == f.origin
    assert np.array_equal(g.mask, f.mask)
    assert np.array_equal(g.values, f.values)


def test_load_rejects_other_files(tmp_path):
    p = tmp_path / "x.bin"
    p.write_bytes(b"nope")
    with pytest.raises(ValidationError):
        load(p)


def test_grid_lipschitz_of_linear_function(square):
    f = sample(TestFunctionSpec("coordinate", {"scale": 3.0}), square, 1 / 32)
    assert grid_lipschitz(f) == pytest.approx(3.0, rel=1e-9)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10), st.integers(0, 10), st.integers(1, 5), st.integers(1, 5),
       st.integers(0, 2 ** 31))
def test_block_stats_match_direct_computation(i0, j0, ki, kj, seed):
    rng = np.random.default_rng(seed)
    vals = rng.normal(size=(16, 16))
    mask = rng.random((16, 16)) < 0.8
    f = GridFunction(1.0, (0.0, 0.0), np.where(mask, vals, 0.0), mask)
    st_ = block_stats(f, [i0], [j0], [ki], [kj])
    blk = vals[i0:i0 + ki, j0:j0 + kj][mask[i0:i0 + ki, j0:j0 + kj]]
    if len(blk) == 0:
        assert st_.count[0] == 0
        return
    mu = blk.mean()
    assert st_.mean[0] == pytest.approx(mu, abs=1e-12)
    assert st_.abs_mean[0] == pytest.approx(np.abs(blk).mean(), abs=1e-12)
    assert st_.oscillation[0] == pytest.approx(np.abs(blk - mu).mean(), abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2 ** 31), st.integers(0, 40))
def test_disc_sums_match_brute_force(seed, K):
    rng = np.random.default_rng(seed)
    v = rng.normal(size=(12, 10))
    cells = rng.integers(0, [12, 10], size=(5, 2))
    sums, counts = disc_sums(v, cells, K)
    I, J = np.meshgrid(np.arange(12), np.arange(10), indexing="ij")
    for (i, j), s, c in zip(cells, sums, counts):
        sel = (I - i) ** 2 + (J - j) ** 2 <= K
        assert c == sel.sum()
        assert s == pytest.approx(v[sel].sum(), abs=1e-10)
