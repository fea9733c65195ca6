import pytest

from bmodomain.errors import NotEvaluable, ValidationError
from bmodomain.gridfield import TestFunctionSpec, sample
from bmodomain.oracle import (BudgetExceeded, OracleReport, count_aligned_cubes, exhaustive_sup,
                              load_reports, save_reports)

H = 1 / 32


def test_constant_oracle_equals_sampled(square):
    f = sample(TestFunctionSpec("constant", {"value": -2.0}), square, H)
    rep = exhaustive_sup(f, square, "bmo_norm", lam=0.25)
    assert rep.oracle_value == pytest.approx(2.0, abs=1e-12)
    assert rep.sampled_value == pytest.approx(2.0, abs=1e-12)


@pytest.mark.parametrize("kind", ["coordinate", "sine", "indicator-half"])
def test_sampled_never_exceeds_oracle(square, kind):
    f = sample(TestFunctionSpec(kind), square, H)
    for functional, kw in (("bmo_norm", {"lam": 0.25}), ("omega", {"t": 0.5}),
                           ("gamma", {"lam": 0.25, "beta": 0.5})):
        rep = exhaustive_sup(f, square, functional, **kw)
        assert rep.sampled_value <= rep.oracle_value
        assert rep.oracle_count >= rep.sampled_count or functional != "bmo_norm"


def test_oracle_nondecreasing_under_refinement(square):
    vals = []
    for h in (1 / 16, 1 / 32):
        f = sample(TestFunctionSpec("coordinate"), square, h)
        vals.append(exhaustive_sup(f, square, "bmo_norm", lam=0.5).oracle_value)
    assert vals[0] <= vals[1]


def test_budget_and_argument_errors(square):
    f = sample(TestFunctionSpec("coordinate"), square, H)
    with pytest.raises(BudgetExceeded) as exc:
        exhaustive_sup(f, square, "bmo_norm", lam=0.25, max_cells=100)
    assert exc.value.required_factor >= 2
    with pytest.raises(ValidationError):
        exhaustive_sup(f, square, "median")
    with pytest.raises(ValidationError):
        exhaustive_sup(f, square, "omega")
    with pytest.raises(NotEvaluable):
        exhaustive_sup(f, square, "gamma", lam=0.25, beta=50.0)
    assert count_aligned_cubes(f) > 0


def test_reports_roundtrip(tmp_path, square):
    f = sample(TestFunctionSpec("sine"), square, H)
    reps = [exhaustive_sup(f, square, "omega", t=0.5)]
    save_reports(reps, tmp_path / "r.json")
    back = load_reports(tmp_path / "r.json")
    assert back[0] == reps[0]
    assert OracleReport.from_json(reps[0].to_json()) == reps[0]
