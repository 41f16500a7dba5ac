import math

import cvxpy as cp
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from planrefine import socp
from planrefine.model import Circle, PlanInstance, Polygon, Rectangle, SkeletonStep


def reference_makespan(inst: PlanInstance, axis_bounds, norm_bounds) -> float:
    """Same program written directly in cvxpy."""
    n, ax = inst.n_segments, inst.axis_count
    p = cp.Variable((n + 1, ax))
    dt = cp.Variable(n)
    w = cp.Variable(n)
    cons = [p[0] == np.array(inst.start)]
    for i, step in enumerate(inst.skeleton):
        d = p[i + 1] - p[i]
        cons += [cp.abs(d) <= axis_bounds[i] * dt[i], dt[i] >= step.d_min, w[i] >= step.tau_low,
                 w[i] <= step.tau_high]
        if math.isfinite(step.d_max):
            cons.append(dt[i] <= step.d_max)
        if ax == 2 and math.isfinite(norm_bounds[i]):
            cons.append(cp.norm(d) <= norm_bounds[i] * dt[i])
        for r in step.regions:
            q = p[i + 1] if ax == 2 else cp.hstack([p[i + 1][0], 0.0])
            if isinstance(r, Circle):
                cons.append(cp.norm(q - np.array(r.center)) <= r.radius)
            elif isinstance(r, Rectangle):
                cons.append(cp.abs(q - np.array(r.center)) <= np.array(r.half_extents))
            else:
                A, b = r.halfspaces()
                cons.append(A @ q <= b)
    prob = cp.Problem(cp.Minimize(cp.sum(dt) + cp.sum(w)), cons)
    prob.solve(solver=cp.CLARABEL)
    return prob.value


def test_single_segment_closed_form():
    inst = PlanInstance(socp_dyn(), (0.0, 0.0), (SkeletonStep((Circle((10.0, 0.0), 0.0),)),), (5.0, 5.0))
    plan = socp.initial_plan(inst)
    assert plan.makespan == pytest.approx(2.0, rel=1e-8)
    assert plan.waypoints[1] == pytest.approx([10.0, 0.0], abs=1e-8)


def socp_dyn():
    from planrefine.model import DynamicsParams
    return DynamicsParams(10.0, 10.0, 0.05)


def test_matches_reference_solver(three_step, sailing_like):
    for inst in (three_step, sailing_like):
        axis, norm = socp.nominal_bounds(inst)
        plan = socp.initial_plan(inst)
        assert plan.makespan == pytest.approx(reference_makespan(inst, axis, norm), rel=1e-6)
        assert socp.check_plan(inst, plan) <= 1e-6


def test_norm_bound_binds(three_step):
    inst = PlanInstance(three_step.dynamics, three_step.start, three_step.skeleton, (10.0, 10.0), b_norm=6.0)
    plan = socp.initial_plan(inst)
    speeds = np.linalg.norm(np.diff(plan.waypoints, axis=0), axis=1) / plan.durations
    assert np.all(speeds <= 6.0 + 1e-6)
    axis, norm = socp.nominal_bounds(inst)
    assert plan.makespan == pytest.approx(reference_makespan(inst, axis, norm), rel=1e-6)


def test_dwell_and_duration_windows(three_step):
    plan = socp.initial_plan(three_step)
    assert plan.dwells[1] == pytest.approx(1.0, abs=1e-7)
    steps = list(three_step.skeleton)
    steps[0] = SkeletonStep(steps[0].regions, 0.0, 0.0, 9.0, 20.0)
    slow = PlanInstance(three_step.dynamics, three_step.start, tuple(steps), (10.0, 10.0))
    assert socp.initial_plan(slow).durations[0] == pytest.approx(9.0, abs=1e-7)


def test_infeasible_window_reported(three_step):
    steps = list(three_step.skeleton)
    steps[0] = SkeletonStep(steps[0].regions, 0.0, 0.0, 0.0, 0.5)  # 19 units in 0.5 s at speed 10
    inst = PlanInstance(three_step.dynamics, three_step.start, tuple(steps), (10.0, 10.0))
    result, plan = socp.solve_plan(inst, *socp.nominal_bounds(inst))
    assert plan is None and result.status == socp.INFEASIBLE
    with pytest.raises(socp.InfeasibleInstance):
        socp.initial_plan(inst)


def test_one_axis_circle_off_line_is_infeasible(dyn):
    inst = PlanInstance(dyn, (0.0,), (SkeletonStep((Circle((5.0, 3.0), 1.0),)),), (10.0,))
    result, plan = socp.solve_plan(inst, *socp.nominal_bounds(inst))
    assert plan is None


def test_one_axis_polygon_uses_line_section(sailing_like):
    plan = socp.initial_plan(sailing_like)
    # first polygon crosses y = 0 between x = 8.6 and 13.6
    assert 8.0 <= plan.waypoints[1, 0] <= 14.0
    assert sailing_like.skeleton[0].regions[0].contains((plan.waypoints[1, 0], 0.0), tol=1e-7)


def test_program_layout_and_dump(three_step):
    axis, norm = socp.nominal_bounds(three_step)
    prog = socp.build_program(three_step, axis, norm)
    assert prog.n_vars == 4 * 2 + 2 * 3
    assert prog.count(socp.ZERO) == 1
    assert prog.count(socp.SOC) == 3  # two circles plus the overlapping circle on step 3
    text = prog.dump()
    assert text.startswith("minimize 1*dt0")
    assert "wp3.region1" in text


def test_negative_bounds_rejected(three_step):
    axis, norm = socp.nominal_bounds(three_step)
    with pytest.raises(ValueError):
        socp.build_program(three_step, -axis, norm)


def test_zero_bound_axis_freezes_motion(three_step):
    axis, norm = socp.nominal_bounds(three_step)
    axis[0, 1] = 0.0
    result, plan = socp.solve_plan(three_step, axis, norm)
    assert plan is not None
    assert plan.waypoints[1, 1] == pytest.approx(0.0, abs=1e-6)


@given(st.lists(st.floats(0.05, 1.0), min_size=6, max_size=6))
def test_contraction_never_reduces_makespan(three_step, factors):
    axis, norm = socp.nominal_bounds(three_step)
    base = socp.solve_plan(three_step, axis, norm)[1]
    tight = socp.solve_plan(three_step, axis * np.reshape(factors, (3, 2)), norm)[1]
    assert tight.makespan >= base.makespan - 1e-7 * base.makespan
