"""Refinement MDP: contract per-edge velocity bounds, re-solve, validate with MTV."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from . import mtv, socp
from .graph import PlanGraph, build_graph, edge_boundaries
from .model import GroundedPlan, PlanInstance

DEFAULT_HORIZON = 8
# shortfalls below this fraction of t_min are solver round-off, not violations
GAP_RTOL = 1e-9


@dataclass(frozen=True)
class EdgeCheck:
    t_min: float
    duration: float
    gap: float
    ratio: float
    axes: tuple[mtv.MtvResult, ...]


@dataclass(frozen=True)
class EnvState:
    instance: PlanInstance
    plan: GroundedPlan
    graph: PlanGraph
    axis_bounds: np.ndarray
    norm_bounds: np.ndarray
    checks: tuple[EdgeCheck, ...]
    step_index: int
    t_planner: float
    best_plan: GroundedPlan | None = None
    terminal: bool = False

    @property
    def feasible(self) -> bool:
        return all(c.gap == 0.0 for c in self.checks)

    @property
    def n_edges(self) -> int:
        return self.graph.n_edges


def check_edges(graph: PlanGraph, dynamics) -> tuple[EdgeCheck, ...]:
    """MTV and feasibility gap for every graph edge."""
    out = []
    for i, e in enumerate(graph.edges):
        p0, p1, v0, v1 = edge_boundaries(graph, i)
        t_min, per_axis = mtv.mtv_2d(p0, p1, v0, v1, dynamics)
        gap, ratio = mtv.feasibility_gap(e.duration, t_min, rtol=GAP_RTOL)
        out.append(EdgeCheck(t_min, e.duration, gap, ratio, tuple(per_axis)))
    return tuple(out)


def evaluate_plan(plan: GroundedPlan, instance: PlanInstance) -> tuple[PlanGraph, tuple[EdgeCheck, ...]]:
    graph = build_graph(plan, instance)
    return graph, check_edges(graph, instance.dynamics)


def is_second_order_feasible(plan: GroundedPlan, instance: PlanInstance) -> bool:
    return all(c.gap == 0.0 for c in evaluate_plan(plan, instance)[1])


def reset(instance: PlanInstance) -> EnvState:
    plan = socp.initial_plan(instance)
    graph, checks = evaluate_plan(plan, instance)
    state = EnvState(instance, plan, graph, np.array(plan.axis_bounds), np.array(plan.norm_bounds),
                     checks, 0, plan.makespan)
    if state.feasible:
        state = replace(state, best_plan=plan)
    return state


def apply_action(state: EnvState, action) -> np.ndarray:
    """Scale each edge's per-axis bounds by the matching action entry."""
    a = np.asarray(action, dtype=float)
    if a.ndim == 1:
        a = a[:, None]
    if a.shape[0] != state.n_edges:
        raise ValueError(f"action has {a.shape[0]} rows for {state.n_edges} edges")
    if np.any(a < 0) or np.any(a > 1) or not np.all(np.isfinite(a)):
        raise ValueError("contraction factors must lie in [0, 1]")
    axes = state.instance.axis_count
    bounds = state.axis_bounds.copy()
    for row, edge in zip(a, state.graph.edges):
        bounds[edge.segment] *= row[:axes]
    return bounds


def makespan_reward(t_planner: float, t_socp: float) -> float:
    if t_socp <= 0:
        return 1.0
    return min(1.0, t_planner / t_socp)


def gap_reward(checks) -> float:
    return sum(c.ratio for c in checks) / len(checks)


@dataclass
class StepInfo:
    solver_status: str
    makespan: float = math.nan
    feasible: bool = False
    truncated: bool = False


def step(state: EnvState, action, horizon: int = DEFAULT_HORIZON) -> tuple[EnvState, float, bool, StepInfo]:
    if state.terminal:
        raise RuntimeError("step() called on a terminal state")
    bounds = apply_action(state, action)
    result, plan = socp.solve_plan(state.instance, bounds, state.norm_bounds)
    index = state.step_index + 1
    if plan is None:
        # numeric failure is treated like infeasibility
        nxt = replace(state, axis_bounds=bounds, step_index=index, terminal=True)
        return nxt, -1.0, True, StepInfo(result.status)
    graph, checks = evaluate_plan(plan, state.instance)
    nxt = replace(state, plan=plan, graph=graph, axis_bounds=bounds, checks=checks, step_index=index)
    if any(c.gap < 0 for c in checks):
        reward = gap_reward(checks)
    else:
        reward = makespan_reward(state.t_planner, plan.makespan)
        if state.best_plan is None or plan.makespan < state.best_plan.makespan:
            nxt = replace(nxt, best_plan=plan)
    truncated = index >= horizon
    return nxt, reward, truncated, StepInfo(result.status, plan.makespan, nxt.feasible, truncated)


@dataclass
class Transition:
    state: EnvState
    action: np.ndarray
    reward: float
    done: bool
    truncated: bool
    info: StepInfo
    extras: dict = field(default_factory=dict)


Policy = Callable[[EnvState], "np.ndarray | tuple[np.ndarray, dict]"]


def episode(instance: PlanInstance, policy: Policy, horizon: int = DEFAULT_HORIZON,
            state: EnvState | None = None) -> tuple[GroundedPlan | None, list[Transition]]:
    """Roll ``policy`` for at most ``horizon`` steps.

    The policy may return the action alone or ``(action, extras)``; extras are
    stored on the transition (the trainer keeps log-probabilities there).
    """
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    state = reset(instance) if state is None else state
    trajectory = []
    while True:
        if state.n_edges == 0:
            break
        out = policy(state)
        action, extras = out if isinstance(out, tuple) else (out, {})
        nxt, reward, done, info = step(state, action, horizon)
        trajectory.append(Transition(state, np.asarray(action), reward, nxt.terminal, info.truncated, info, extras))
        state = nxt
        if done:
            break
    return state.best_plan, trajectory
