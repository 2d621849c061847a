import time

import numpy as np
import pytest

from coverlock.core import ProblemInstance
from coverlock.exceptions import Infeasible
from coverlock.glc import GlcConfig, glc_regret, glc_select_at_lambda, glc_solve

from conftest import grid_instances

WORKED_TRACE = """\
lambda_U0=2
t=1 lambda_L=0 lambda_U=2 lambda_M=1 core={3,1} core_B=14 core_V=34 B=14 V=34 action=raise-lambda-L
t=2 lambda_L=1 lambda_U=2 lambda_M=1.5 core={3,4} core_B=8 core_V=27 B=12 V=42 action=augment-and-stop
"""


def test_select_infeasible_core(worked):
    sel = glc_select_at_lambda(worked, 0.2)
    assert sel.core == (0, 1) and sel.core_cost == 19 and not sel.core_feasible


def test_select_iteration_two(worked):
    sel = glc_select_at_lambda(worked, 1.2)
    assert np.allclose(sel.scores, [8.0, 7.2, 9.2, 8.2, 5.6, 4.6], atol=1e-9)
    assert sel.core == (2, 3) and sel.core_cost == 8 and sel.core_value == 27
    assert sel.rejected == (0, 1) and sel.added == (4, 5)
    assert sel.allocation.selected == (2, 3, 4, 5)
    assert sel.allocation.cost == 12 and sel.allocation.value == 42


def test_select_empty():
    inst = ProblemInstance((-1, -2), (1, 1), 5, 0)
    assert glc_select_at_lambda(inst, 0.5).allocation.count == 0


def test_solve_worked_example(worked):
    t0 = time.perf_counter()
    rep, trace = glc_solve(worked, GlcConfig(eps=0.05, max_iterations=50))
    assert time.perf_counter() - t0 < 0.05
    assert list(rep.allocation.decisions) == [0, 0, 1, 1, 1, 1]
    assert rep.objective == 42 and rep.budget_used == 12
    assert trace.to_text() == WORKED_TRACE


def test_solve_infeasible():
    with pytest.raises(Infeasible):
        glc_solve(ProblemInstance((1, 1), (10, 9), 12, 2))


def test_solve_all_affordable():
    inst = ProblemInstance((3, 2, 1), (1, 1, 1), 100, 0)
    rep, _ = glc_solve(inst)
    assert list(rep.allocation.decisions) == [1, 1, 1]


def test_regret_examples(worked):
    assert glc_regret(worked) == 0
    assert glc_regret(ProblemInstance((10, 6), (4, 3), 5, 1)) == 0


def test_config_validation():
    with pytest.raises(ValueError):
        GlcConfig(eps=0)
    with pytest.raises(ValueError):
        GlcConfig(max_iterations=0)
    with pytest.raises(ValueError):
        GlcConfig(tie_break="random")


def test_properties_on_random_instances():
    for inst in grid_instances(707, 300, 3, 15):
        rep, trace = glc_solve(inst)
        a = rep.allocation
        assert a.count >= inst.coverage_floor and a.cost <= inst.budget * (1 + 1e-9)
        assert glc_regret(inst) >= 0
        its = trace.iterations
        for prev, cur in zip(its, its[1:]):
            assert cur.lam_lo >= prev.lam_lo and cur.lam_hi <= prev.lam_hi
        assert glc_select_at_lambda(inst, trace.initial_upper).core_feasible
        rep2, trace2 = glc_solve(inst)
        assert rep2.allocation == a and trace2.to_text() == trace.to_text()


def test_iterations_logarithmic():
    rng = np.random.default_rng(12)
    x = rng.standard_normal((2000, 2))
    inst = ProblemInstance.from_per_capita(x[:, 0] + 0.5 * x[:, 1], np.exp(2 * x[:, 0]), 0.6, 0.3)
    rep, trace = glc_solve(inst, GlcConfig(eps=1e-6, max_iterations=100))
    # bisection halves the bracket, so steps are bounded by the float resolution
    assert len(trace.iterations) <= 64
