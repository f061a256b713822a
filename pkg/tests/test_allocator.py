import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ecoshift.allocator import dp_allocate, dp_allocate_rolling, make_result, AppAllocation
from ecoshift.errors import DuplicateAppError, InvalidParamsError, InvariantViolation
from ecoshift.options import OptionTable, build_option_table
from ecoshift.surface import CapPair
from ecoshift import fixtures

from helpers import exhaustive_best, random_instance, random_table

SOLVERS = [dp_allocate, dp_allocate_rolling]
seeds = st.integers(0, 2**32 - 1)


@pytest.mark.parametrize("solver", SOLVERS)
def test_case_study_case_study(solver):
    tables = [build_option_table(a, fixtures.BUDGET_W) for a in fixtures.apps()]
    res = solver(tables, fixtures.BUDGET_W)
    assert res.caps_by_app() == {"raytracing": CapPair(300, 300), "cfd": CapPair(400, 200)}
    assert res.total_power_used == 200
    assert res.avg_improvement == pytest.approx(0.1696, abs=1e-12)


@pytest.mark.parametrize("solver", SOLVERS)
def test_empty_and_zero_budget(solver):
    assert solver([], 100).allocations == ()
    tables = [build_option_table(a, 200) for a in fixtures.apps()]
    res = solver(tables, 0)
    assert all(a.caps == fixtures.BASELINE for a in res.allocations)
    assert res.total_improvement == 0.0


@pytest.mark.parametrize("solver", SOLVERS)
def test_input_errors(solver):
    t = random_table(np.random.default_rng(0), "dup")
    with pytest.raises(DuplicateAppError):
        solver([t, t], 10)
    with pytest.raises(InvalidParamsError):
        solver([t], -5)


def test_budget_overrun_is_an_invariant_violation():
    with pytest.raises(InvariantViolation):
        make_result("x", 10, [AppAllocation("a", CapPair(1, 1), 11, 0.1)])


@pytest.mark.parametrize("solver", SOLVERS)
@settings(max_examples=120)
@given(seed=seeds, tie_prone=st.booleans())
def test_matches_exhaustive_search(solver, seed, tie_prone):
    tables, budget = random_instance(np.random.default_rng(seed), max_apps=5, tie_prone=tie_prone)
    total, used, combo = exhaustive_best(tables, budget)
    res = solver(tables, budget)
    assert res.total_improvement == total
    assert res.total_power_used == used
    assert tuple(t.costs.index(a.extra_power_w) for t, a in zip(tables, res.allocations)) == combo
    assert res.total_power_used <= budget


@given(seed=seeds)
def test_solvers_agree_exactly(seed):
    tables, budget = random_instance(np.random.default_rng(seed), max_apps=8, tie_prone=True)
    a, b = dp_allocate(tables, budget), dp_allocate_rolling(tables, budget)
    assert a.allocations == b.allocations
    assert a.total_improvement == b.total_improvement


@given(seed=seeds, extra=st.integers(0, 200))
def test_more_budget_never_hurts(seed, extra):
    tables, budget = random_instance(np.random.default_rng(seed))
    assert dp_allocate(tables, budget + extra).total_improvement >= dp_allocate(tables, budget).total_improvement


@given(seed=seeds)
def test_receivers_never_lose(seed):
    tables, budget = random_instance(np.random.default_rng(seed))
    res = dp_allocate(tables, budget)
    assert all(a.predicted_improvement >= 0 for a in res.allocations)
    assert res.total_improvement >= 0


@given(seed=seeds)
def test_work_is_bounded(seed):
    tables, budget = random_instance(np.random.default_rng(seed))
    bound = (budget + 1) * sum(len(t) for t in tables)
    assert dp_allocate(tables, budget).stats.transitions <= bound
    roll = dp_allocate_rolling(tables, budget)
    assert roll.stats.transitions <= bound
    assert roll.stats.peak_value_entries == 2 * (budget + 1)


def test_tie_prefers_less_power_then_earlier_receiver():
    base = CapPair(0, 0)
    t1 = OptionTable.from_entries("a", base, {0: (0.0, base), 10: (0.2, CapPair(10, 0)), 20: (0.2, CapPair(20, 0))})
    t2 = OptionTable.from_entries("b", base, {0: (0.0, base), 10: (0.2, CapPair(10, 0))})
    for solver in SOLVERS:
        res = solver([t1, t2], 10)
        assert [a.extra_power_w for a in res.allocations] == [0, 10]
        res = solver([t1, t2], 40)
        assert [a.extra_power_w for a in res.allocations] == [10, 10]
