import numpy as np
import pytest

from coverlock.core import ProblemInstance
from coverlock.exceptions import CoreInfeasible, NoFeasibleCutoff, TargetOutOfRange
from coverlock.lp import round_lp_to_feasible, solve_lp
from coverlock.analysis import misallocation_area
from coverlock.rc import rank_by_ratio, rc_greedy_skip_solve, rc_prefix_solve, rc_with_target_count

from conftest import grid_instances


def test_rank_worked_example(worked):
    r = rank_by_ratio(worked)
    assert [i + 1 for i in r.order] == [5, 3, 6, 4, 1, 2]
    assert list(r.scores) == [4.0, 3.5, 3.5, 3.25, 2.0, 2.0]
    assert r.cum_cost[4] == 12 and r.cum_value[4] == 42


def test_rank_small():
    assert list(rank_by_ratio(ProblemInstance((1, 1, 1), (2, 2, 2), 1, 0)).order) == [0, 1, 2]
    assert list(rank_by_ratio(ProblemInstance((-2, 1), (1, 1), 1, 0)).order) == [1, 0]


def test_prefix_worked_example(worked):
    r = rc_prefix_solve(worked)
    assert r.allocation.selected == (2, 3, 4, 5) and r.objective == 42 and r.budget_used == 12
    assert r.diagnostics["cutoff"] == 4


def test_prefix_examples():
    r = rc_prefix_solve(ProblemInstance((1, 5), (10, 1), 5, 1))
    assert r.diagnostics["cutoff"] == 1 and r.objective == 5
    with pytest.raises(NoFeasibleCutoff):
        rc_prefix_solve(ProblemInstance((5, 1), (10, 1), 5, 2))


def test_prefix_blocked_on_feasible_instance():
    # ranking puts the expensive unit 0 first; {1} alone is feasible
    inst = ProblemInstance((50, 1), (10, 1), 5, 1)
    with pytest.raises(NoFeasibleCutoff):
        rc_prefix_solve(inst)


def test_skip_examples(worked):
    r = rc_greedy_skip_solve(worked)
    assert r.allocation.selected == (2, 3, 4, 5) and r.objective == 42 and r.budget_used == 12
    r = rc_greedy_skip_solve(ProblemInstance((5, 1), (10, 1), 5, 1))
    assert r.allocation.selected == (1,) and r.objective == 1
    r = rc_greedy_skip_solve(ProblemInstance((3, 2, 1), (1, 2, 3), 100, 0))
    assert r.allocation.selected == (0, 1, 2)
    with pytest.raises(CoreInfeasible):
        rc_greedy_skip_solve(ProblemInstance((50, 1), (10, 1), 5, 1))


def test_target_count(worked):
    assert rc_with_target_count(worked, 4).allocation.selected == (2, 3, 4, 5)
    assert rc_with_target_count(worked, 0).allocation.count == 0
    r = rc_with_target_count(worked, 6)
    assert r.allocation.count == 6 and r.diagnostics["budget_violated"]
    with pytest.raises(TargetOutOfRange):
        rc_with_target_count(worked, 7)


def test_ranking_properties():
    rng = np.random.default_rng(1)
    for inst in grid_instances(808, 200):
        r = rank_by_ratio(inst)
        assert sorted(r.order) == list(range(inst.n))
        assert np.all(np.diff(r.scores) <= 0)
        assert np.array_equal(np.diff(r.cum_value), inst.values[r.order])
        scaled = ProblemInstance(inst.values * float(rng.integers(2, 9)), inst.costs, inst.budget,
                                 inst.coverage_floor)
        assert np.array_equal(rank_by_ratio(scaled).order, r.order)


def test_skip_dominates_prefix():
    both = 0
    for inst in grid_instances(909, 400):
        try:
            p = rc_prefix_solve(inst)
            s = rc_greedy_skip_solve(inst)
        except (NoFeasibleCutoff, CoreInfeasible):
            continue
        both += 1
        assert s.objective >= p.objective
        for rep in (p, s):
            assert rep.allocation.count >= inst.coverage_floor
            assert rep.allocation.cost <= inst.budget * (1 + 1e-9)
    assert both > 100


def test_slack_coverage_equivalence():
    rng = np.random.default_rng(21)
    checked = 0
    for _ in range(300):
        n = int(rng.integers(10, 200))
        v = rng.normal(0.3, 1, n)
        w = rng.uniform(0.5, 2, n)
        inst = ProblemInstance(v, w, 0.4 * n, int(np.ceil(0.05 * n)))
        sol = solve_lp(inst)
        if sol.prices.nu != 0:
            continue
        pi_lp = round_lp_to_feasible(sol, inst)
        pi_rc = rc_with_target_count(inst, pi_lp.count).allocation
        assert misallocation_area(pi_lp, pi_rc) <= 2 / n + 1e-12
        checked += 1
    assert checked > 200
