import pytest

from bmodomain.experiments import example1_row, example2_row


def test_example1_row_small():
    row = example1_row(2, "constant", with_matching=False)
    assert row.ell == 0.25
    assert row.total > 0 and row.ratio > 0
    assert row.unmatched_cubes == -1
    assert len(row.row()) == 6


def test_example1_log_schedule_has_smaller_averages():
    a = example1_row(4, "constant", with_matching=False)
    b = example1_row(4, "log", with_matching=False)
    assert b.sup_average < a.sup_average


def test_example2_row_small():
    row, curve = example2_row(2)
    assert row.average_lam == 0.0
    assert row.total_lam_prime > row.total_lam
    assert curve[0][0] == 0.0 and curve[0][1] > 0
