"""Seeded instance generators for the benchmark domains and a small training toy."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import env, socp
from .model import Circle, DynamicsParams, PlanInstance, Polygon, Rectangle, SkeletonStep, ValidationError

DYNAMICS = DynamicsParams(accel_max=10.0, vel_max=10.0, drag=0.05)
NOMINAL_BOUND = 10.0
MAX_RETRIES = 50
DEFAULT_COUNTS = {"auv-2d": 20, "norm-auv-2d": 20, "onair-refuel": 10, "sailing": 10}


class GenerationError(RuntimeError):
    pass


@dataclass(frozen=True)
class DomainSpec:
    name: str
    count: int
    seed: int = 1
    # geometry knobs; defaults are documented in the README
    extent: float = 60.0
    min_steps: int = 3
    max_steps: int = 6

    def __post_init__(self):
        if self.name not in GENERATORS:
            raise ValueError(f"unknown domain {self.name!r}; choose from {sorted(GENERATORS)}")
        if self.count < 0:
            raise ValueError("count must be non-negative")
        if not 1 <= self.min_steps <= self.max_steps:
            raise ValueError("need 1 <= min_steps <= max_steps")


def _hop(rng: np.random.Generator, p: np.ndarray, lo: float, hi: float) -> np.ndarray:
    ang = rng.uniform(0.0, 2.0 * math.pi)
    return p + rng.uniform(lo, hi) * np.array([math.cos(ang), math.sin(ang)])


def _sample_dwell(rng: np.random.Generator, p_rest: float = 0.3) -> tuple[float, float]:
    if rng.random() < p_rest:
        t = float(np.round(rng.uniform(1.0, 4.0), 3))
        return t, t
    return 0.0, 0.0


def _auv(spec: DomainSpec, rng: np.random.Generator, b_norm: float | None) -> PlanInstance:
    start = np.round(rng.uniform(-spec.extent / 2, spec.extent / 2, size=2), 3)
    n = int(rng.integers(spec.min_steps, spec.max_steps + 1))
    steps, p = [], start
    for i in range(n):
        p = _hop(rng, p, 15.0, spec.extent)
        radius = float(np.round(rng.uniform(1.0, 6.0), 3))
        regions = [Circle(tuple(np.round(p, 3)), radius)]
        if rng.random() < 0.25:
            # overlapping sampling box; the waypoint must sit in both
            off = rng.uniform(-radius / 2, radius / 2, size=2)
            half = np.round(rng.uniform(radius / 2, 2 * radius, size=2), 3)
            regions.append(Rectangle(tuple(np.round(p + off, 3)), tuple(half)))
        lo, hi = _sample_dwell(rng) if i < n - 1 else (0.0, 0.0)
        steps.append(SkeletonStep(tuple(regions), lo, hi, 0.0, math.inf))
    return PlanInstance(DYNAMICS, tuple(start), tuple(steps), (NOMINAL_BOUND, NOMINAL_BOUND), b_norm)


def gen_auv(spec: DomainSpec, rng: np.random.Generator) -> PlanInstance:
    return _auv(spec, rng, None)


def gen_norm_auv(spec: DomainSpec, rng: np.random.Generator) -> PlanInstance:
    return _auv(spec, rng, NOMINAL_BOUND)


def gen_onair(spec: DomainSpec, rng: np.random.Generator) -> PlanInstance:
    """Jet takes off, meets the tanker at two fixed points on its line, lands.

    The tanker flies a straight line, so the rendezvous points are single
    points (zero-radius circles) on that line; the refuel leg has a minimum
    duration.
    """
    base = np.round(rng.uniform(-spec.extent / 2, spec.extent / 2, size=2), 3)
    ang = rng.uniform(0.0, 2.0 * math.pi)
    direction = np.array([math.cos(ang), math.sin(ang)])
    normal = np.array([-direction[1], direction[0]])
    offset = rng.uniform(20.0, spec.extent)
    a = np.round(base + offset * normal + rng.uniform(-10, 10) * direction, 3)
    b = np.round(a + rng.uniform(25.0, spec.extent) * direction, 3)
    climb = np.round(base + rng.uniform(0.3, 0.6) * offset * normal, 3)
    land = np.round(b - rng.uniform(0.4, 0.8) * offset * normal, 3)
    refuel = float(np.round(np.linalg.norm(b - a) / NOMINAL_BOUND * rng.uniform(1.0, 1.3), 3))
    box = tuple(np.round(rng.uniform(2.0, 6.0, size=2), 3))
    steps = (
        SkeletonStep((Rectangle(tuple(climb), box),)),
        SkeletonStep((Circle(tuple(a), 0.0),)),
        SkeletonStep((Circle(tuple(b), 0.0),), 0.0, 0.0, refuel, math.inf),
        SkeletonStep((Rectangle(tuple(land), box),)),
    )
    return PlanInstance(DYNAMICS, tuple(base), steps, (NOMINAL_BOUND, NOMINAL_BOUND), None)


def _polygon_around(rng: np.random.Generator, cx: float, width: float, height: float) -> Polygon:
    """Random convex polygon spanning ``y = 0`` near ``x = cx``."""
    k = int(rng.integers(3, 7))
    while True:
        angles = np.sort(rng.uniform(0.0, 2.0 * math.pi, size=k))
        # keep vertices spread so the hull is well conditioned
        angles = (angles + np.linspace(0.0, 2.0 * math.pi, k, endpoint=False)) / 2.0
        angles = np.sort(np.mod(angles, 2.0 * math.pi))
        verts = [(round(cx + width * math.cos(t), 3), round(height * math.sin(t), 3)) for t in angles]
        ys = [v[1] for v in verts]
        if min(ys) < -0.1 and max(ys) > 0.1:
            return Polygon(tuple(verts))


def gen_sailing(spec: DomainSpec, rng: np.random.Generator) -> PlanInstance:
    n = int(rng.integers(spec.min_steps, spec.max_steps + 1))
    x = float(np.round(rng.uniform(-spec.extent / 2, 0.0), 3))
    start, steps = x, []
    for i in range(n):
        x += float(rng.choice([-1.0, 1.0], p=[0.25, 0.75]) * rng.uniform(15.0, spec.extent))
        poly = _polygon_around(rng, x, rng.uniform(1.0, 5.0), rng.uniform(2.0, 6.0))
        lo, hi = _sample_dwell(rng) if i < n - 1 else (0.0, 0.0)
        steps.append(SkeletonStep((poly,), lo, hi, 0.0, math.inf))
    return PlanInstance(DYNAMICS, (start,), tuple(steps), (NOMINAL_BOUND,), None)


def gen_toy(spec: DomainSpec, rng: np.random.Generator) -> PlanInstance:
    """Two or three short hops between small discs."""
    start = np.zeros(2)
    n = int(rng.integers(2, 4))
    steps, p = [], start
    for _ in range(n):
        p = _hop(rng, p, 15.0, 35.0)
        steps.append(SkeletonStep((Circle(tuple(np.round(p, 3)), 2.0),)))
    return PlanInstance(DYNAMICS, tuple(start), tuple(steps), (NOMINAL_BOUND, NOMINAL_BOUND), None)


GENERATORS: dict[str, Callable[[DomainSpec, np.random.Generator], PlanInstance]] = {
    "auv-2d": gen_auv,
    "norm-auv-2d": gen_norm_auv,
    "onair-refuel": gen_onair,
    "sailing": gen_sailing,
    "toy": gen_toy,
}


def acceptable(instance: PlanInstance) -> bool:
    """First-order feasible, and second-order infeasible on at least one edge."""
    result, plan = socp.solve_plan(instance, *socp.nominal_bounds(instance))
    if plan is None or socp.check_plan(instance, plan) > socp.FEAS_TOL:
        return False
    return not env.is_second_order_feasible(plan, instance)


def generate(spec: DomainSpec) -> list[PlanInstance]:
    rng = np.random.default_rng([spec.seed, sorted(GENERATORS).index(spec.name)])
    out = []
    for i in range(spec.count):
        for _ in range(MAX_RETRIES):
            try:
                inst = GENERATORS[spec.name](spec, rng)
            except ValidationError:
                continue
            if acceptable(inst):
                break
        else:
            raise GenerationError(f"{spec.name}: no acceptable instance after {MAX_RETRIES} tries")
        out.append(PlanInstance(inst.dynamics, inst.start, inst.skeleton, inst.axis_bounds, inst.b_norm,
                                inst.start_velocity, f"{spec.name}-{spec.seed}-{i:03d}"))
    return out


def toy_instances(count: int = 4, seed: int = 0) -> list[PlanInstance]:
    return generate(DomainSpec("toy", count, seed))
