import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bmodomain.errors import ValidationError
from bmodomain.geometry import (Cube, DomainSpec, DyadicCube, cube_inside, default_window,
                                load_domain, strip_layout, strip_lengths, strip_of)

from conftest import make_domain

coords = st.floats(-0.4, 1.4, allow_nan=False)


def test_cube_basics():
    Q = Cube((0.0, 0.0), 2.0)
    assert Q.center == (1.0, 1.0)
    assert Q.volume == 4.0
    assert Q.diam == pytest.approx(2 * math.sqrt(2))
    assert Q.contains_cube(Cube((0.5, 0.5), 1.0))
    assert not Q.contains_cube(Cube((1.5, 1.5), 1.0))
    assert Cube((3.0, 0.0), 1.0).distance_to(Q) == pytest.approx(1.0)


def test_cube_rejects_bad_side():
    with pytest.raises(ValidationError):
        Cube((0.0, 0.0), 0.0)


def test_dyadic_children_partition_parent():
    q = DyadicCube(2, (1, 3))
    kids = q.children()
    assert len(kids) == 4
    assert all(k.parent() == q and q.contains(k) for k in kids)
    assert sum(k.side ** 2 for k in kids) == pytest.approx(q.side ** 2)


@settings(max_examples=200, deadline=None)
@given(coords, coords)
def test_square_membership_and_distance(x, y):
    D = make_domain("square")
    p = np.array([[x, y]])
    inside = bool(D.inside(p)[0])
    assert inside == (0 < x < 1 and 0 < y < 1)
    d = float(D.boundary_distance(p)[0])
    if inside:
        assert d == pytest.approx(min(x, 1 - x, y, 1 - y), abs=1e-12)
        assert float(D.distance(p)[0]) == d
    else:
        assert float(D.distance(p)[0]) == 0.0


@settings(max_examples=200, deadline=None)
@given(coords, coords)
def test_disk_distance(x, y):
    D = make_domain("disk", center=[0.5, 0.5], radius=0.5)
    r = math.hypot(x - 0.5, y - 0.5)
    assert float(D.boundary_distance(np.array([[x, y]]))[0]) == pytest.approx(abs(r - 0.5), abs=1e-12)


def test_complement_swaps_inside(square):
    pts = np.random.default_rng(0).uniform(-0.5, 1.5, size=(500, 2))
    C = square.complement()
    on_bd = square.boundary_distance(pts) == 0
    assert np.all((square.inside(pts) ^ C.inside(pts)) | on_bd)


def test_cube_touching_boundary_counts_as_inside(square):
    assert cube_inside(Cube((0.0, 0.0), 1.0), square)
    assert cube_inside(Cube((0.0, 0.5), 0.5), square)
    assert not cube_inside(Cube((0.75, 0.0), 0.5), square)


def test_cube_containment_disk():
    D = make_domain("disk", center=[0.0, 0.0], radius=1.0)
    s = math.sqrt(2.0)
    assert cube_inside(Cube((-s / 2, -s / 2), s), D)
    assert not cube_inside(Cube((-s / 2, -s / 2), s * 1.001), D)


def test_rect_union_internal_edges_are_not_boundary():
    D = make_domain("rect-union", rects=[[0, 0, 1, 1], [1, 0, 2, 1]])
    assert bool(D.inside(np.array([[1.0, 0.5]]))[0])
    assert float(D.boundary_distance(np.array([[1.0, 0.5]]))[0]) == pytest.approx(0.5)


def test_strip_lengths_schedules():
    assert strip_lengths({"count": 3}) == [1.0, 1.0, 1.0]
    log = strip_lengths({"count": 4, "schedule": "log"})
    assert log[0] == 1.0
    assert log[3] == pytest.approx((1 + math.log(4)) / 4)


@pytest.mark.parametrize("kind,params", [
    ("strips-example-1", {"count": 6}),
    ("strips-example-1", {"count": 5, "schedule": "log"}),
    ("strips-example-2", {"count": 4}),
])
def test_strip_layout_is_separated_and_half_integer(kind, params):
    strips = strip_layout(DomainSpec(kind, params))
    for a, b in zip(strips[:-1], strips[1:]):
        assert b.rect[1] - a.rect[3] >= 1.0
        assert (2 * b.rect[1]) == int(2 * b.rect[1])
    D = make_domain(kind, **params)
    top = max(s.rect[3] for s in strips)
    assert D.window.upper[1] > top


def test_strip_of_locates_points():
    D = make_domain("strips-example-1", count=3)
    strips = strip_layout(DomainSpec("strips-example-1", {"count": 3}))
    pts = [((s.rect[0] + s.rect[2]) / 2, (s.rect[1] + s.rect[3]) / 2) for s in strips]
    assert list(strip_of(D, np.array(pts))) == [0, 1, 2]
    assert strip_of(D, (-1.0, 0.5)) == -1


def test_validation_errors():
    with pytest.raises(ValidationError):
        DomainSpec("ellipse").validate()
    with pytest.raises(ValidationError):
        DomainSpec("disk", {"radius": -1}).validate()
    with pytest.raises(ValidationError):
        DomainSpec("strips-example-1", {"count": 2, "gap": 0.5}).validate()
    with pytest.raises(ValidationError):
        DomainSpec("square", {"sidee": 1}).validate()


def test_load_domain_json_roundtrip():
    D = load_domain('{"kind": "disk", "params": {"radius": 0.25}, "window": {"corner": [-1, -1], "side": 2}}')
    assert D.window == Cube((-1.0, -1.0), 2.0)
    assert D.name == "disk"
    assert default_window(DomainSpec("square")).side == 2.0


def test_nominal_eps_delta():
    assert make_domain("square").nominal == {"eps": 0.1, "delta": math.sqrt(2.0)}
    assert make_domain("half-plane").nominal["delta"] == math.inf
