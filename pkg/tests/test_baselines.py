import numpy as np
import pytest

from planrefine import baselines, env


def test_factor_one_leaves_bounds_unchanged(three_step):
    s0 = env.reset(three_step)
    s1, *_ = env.step(s0, baselines.ConstantPolicy(1.0)(s0))
    assert np.array_equal(s1.axis_bounds, s0.axis_bounds)
    assert s1.plan.makespan == pytest.approx(s0.plan.makespan, rel=1e-7)


def test_factor_out_of_range():
    with pytest.raises(ValueError):
        baselines.ConstantPolicy(1.2)


def test_baseline_reaches_feasibility(three_step):
    res = baselines.run_baseline(three_step, 0.9)
    assert res.status == "feasible"
    assert env.is_second_order_feasible(res.plan, three_step)
    assert res.makespan >= env.reset(three_step).plan.makespan


def test_finer_factor_needs_more_steps_and_gives_shorter_plans(three_step):
    results = [baselines.run_baseline(three_step, f) for f in (0.7, 0.9, 0.98)]
    steps = [r.steps for r in results]
    spans = [r.makespan for r in results]
    assert steps == sorted(steps)
    assert spans[2] <= spans[0] + 1e-9


def test_step_cap_reported(three_step):
    res = baselines.run_baseline(three_step, 0.999, max_steps=2)
    assert res.status == "step-cap" and res.plan is None and res.steps == 2
