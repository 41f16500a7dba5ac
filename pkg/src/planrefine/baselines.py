"""Constant-contraction baselines."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import env
from .model import GroundedPlan, PlanInstance


@dataclass(frozen=True)
class ConstantPolicy:
    factor: float

    def __post_init__(self):
        if not 0.0 <= self.factor <= 1.0:
            raise ValueError(f"contraction factor must lie in [0, 1], got {self.factor}")

    def __call__(self, state: env.EnvState) -> np.ndarray:
        return np.full((state.n_edges, 2), self.factor)


@dataclass
class BaselineResult:
    plan: GroundedPlan | None
    steps: int
    makespan: float
    status: str  # "feasible", "solver-infeasible" or "step-cap"


def run_baseline(instance: PlanInstance, factor: float, max_steps: int = 2000,
                 state: env.EnvState | None = None) -> BaselineResult:
    """Contract every bound by ``factor`` until the plan is second-order feasible."""
    if max_steps < 1:
        raise ValueError("max_steps must be >= 1")
    policy = ConstantPolicy(factor)
    state = env.reset(instance) if state is None else state
    if state.feasible:
        return BaselineResult(state.plan, 0, state.plan.makespan, "feasible")
    for n in range(1, max_steps + 1):
        state, _, _, info = env.step(state, policy(state), horizon=max_steps + 1)
        if state.terminal:
            return BaselineResult(None, n, float("nan"), "solver-infeasible")
        if state.feasible:
            return BaselineResult(state.plan, n, state.plan.makespan, "feasible")
    return BaselineResult(None, max_steps, float("nan"), "step-cap")
