import math

import numpy as np
import pytest

from bmodomain.epsdelta import (CigarQuery, check_pair, polyline_length, sample_pairs,
                                scan_domain, verify_certificate)
from bmodomain.geometry import DomainSpec, strip_layout
from bmodomain.errors import DisconnectedError, ValidationError

from conftest import make_domain

H = 1 / 128


def test_query_validation(square):
    with pytest.raises(ValidationError):
        CigarQuery((0.5, 0.5), (0.6, 0.5), 0.0, 1.0).validate()
    with pytest.raises(ValidationError):
        CigarQuery((0.5, 0.5), (0.6, 0.5), 0.1, 0.05).validate()
    with pytest.raises(ValidationError):
        CigarQuery((0.5, 0.5), (1.2, 0.5), 0.1, 1.0).validate(square)


def test_polyline_length():
    assert polyline_length([(0, 0), (3, 4), (3, 5)]) == 5.0 + 1.0
    assert polyline_length([(1, 1)]) == 0.0


def test_half_plane_pair_passes_and_reverifies(half_plane):
    cert = check_pair(CigarQuery((-0.5, 0.2), (-0.5, 1.8), 0.1, math.inf), half_plane, H)
    assert cert.success
    length, margin = verify_certificate(cert, half_plane)
    assert length == cert.arclength and margin == cert.clearance_margin
    assert cert.arclength <= cert.bound + 2 * H


def test_near_boundary_pair_in_square(square):
    cert = check_pair(CigarQuery((0.02, 0.1), (0.02, 0.9), 0.1, 2.0), square, H)
    assert cert.success
    assert np.allclose(cert.path[0], (0.02, 0.1)) and np.allclose(cert.path[-1], (0.02, 0.9))


def test_eps_monotonicity(square):
    q = ((0.05, 0.05), (0.95, 0.9))
    ok = [check_pair(CigarQuery(*q, e, 2.0), square, H).success for e in (0.05, 0.1, 0.3, 0.6, 1.0)]
    # passing at eps implies passing at every smaller eps
    first_fail = ok.index(False) if False in ok else len(ok)
    assert all(ok[:first_fail]) and not any(ok[first_fail:])


def test_thin_strip_blocks_the_cigar():
    # the clearance needed halfway along exceeds the strip half-width plus 2h
    D = make_domain("strips-example-1", count=24)
    x0, y0, x1, y1 = strip_layout(DomainSpec("strips-example-1", {"count": 24}))[23].rect
    mid = (y0 + y1) / 2
    cert = check_pair(CigarQuery((0.99, mid), (-0.5, mid), 0.1, 2.0), D, H)
    assert cert.result == "no-admissible-path"
    assert not cert.success


def test_disconnected_points(square):
    D = make_domain("rect-union", rects=[[0, 0, 1, 1], [2, 0, 3, 1]])
    with pytest.raises(DisconnectedError):
        check_pair(CigarQuery((0.9, 0.5), (2.1, 0.5), 0.1, 5.0), D, 1 / 32)


def test_sample_pairs_is_seeded(disk):
    a = sample_pairs(disk, 0.5, 20, seed=3)
    b = sample_pairs(disk, 0.5, 20, seed=3)
    assert a == b and len(a) == 20
    assert all(math.dist(x, y) < 0.5 for x, y in a)


def test_scan_independent_of_workers(disk):
    a = scan_domain(disk, 0.1, 1.0, 6, seed=1, h=1 / 64, workers=1)
    b = scan_domain(disk, 0.1, 1.0, 6, seed=1, h=1 / 64, workers=2)
    assert a.failure_rate == b.failure_rate == 0.0
    assert [c.row() for c in a.certificates] == [c.row() for c in b.certificates]
