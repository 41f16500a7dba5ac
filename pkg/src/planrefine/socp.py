"""Makespan-minimizing second-order cone program over a fixed skeleton.

Decision variables, in order: waypoint coordinates ``p_0 .. p_n`` (``axes``
each), segment durations ``dt_0 .. dt_{n-1}`` and dwells ``w_0 .. w_{n-1}``.
Motion between events is first order: a segment of duration ``dt`` may
displace the vehicle by at most ``v_max * dt`` per axis and ``b_norm * dt`` in
Euclidean norm.

Programs are stored in the conic standard form ``A x + s = b, s in K`` and
solved with Clarabel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import clarabel
import numpy as np
import scipy.sparse as sp

from .model import Circle, GroundedPlan, PlanInstance, Polygon, Rectangle, build_plan

ZERO = "zero"
NONNEG = "nonneg"
SOC = "soc"

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
NUMERIC_FAILURE = "numeric-failure"

FEAS_TOL = 1e-6
MAX_ITER = 200


@dataclass
class ConicProgram:
    """``min c.x  s.t.  A x + s = b,  s in K`` with ``K`` a product of cones."""

    c: np.ndarray
    A: sp.csc_matrix
    b: np.ndarray
    cones: list[tuple[str, int]]
    n_waypoints: int
    axes: int
    labels: list[str] = field(default_factory=list)

    @property
    def n_vars(self) -> int:
        return self.c.size

    def count(self, kind: str) -> int:
        return sum(1 for k, _ in self.cones if k == kind)

    def pos(self, i: int, j: int) -> int:
        return i * self.axes + j

    def dur(self, i: int) -> int:
        return self.n_waypoints * self.axes + i

    def dwell(self, i: int) -> int:
        return self.n_waypoints * self.axes + (self.n_waypoints - 1) + i

    def residuals(self, x: np.ndarray) -> np.ndarray:
        """Per-cone constraint violation of ``x`` (0 where satisfied)."""
        s = self.b - self.A @ x
        out = []
        row = 0
        for kind, dim in self.cones:
            block = s[row:row + dim]
            if kind == ZERO:
                out.append(np.max(np.abs(block)))
            elif kind == NONNEG:
                out.append(max(0.0, -float(block.min())))
            else:
                out.append(max(0.0, float(np.linalg.norm(block[1:]) - block[0])))
            row += dim
        return np.array(out)

    def dump(self) -> str:
        """Human-readable listing, one constraint block per line."""
        A = self.A.tocsr()
        names = ([f"p{i}.{'xy'[j]}" for i in range(self.n_waypoints) for j in range(self.axes)]
                 + [f"dt{i}" for i in range(self.n_waypoints - 1)]
                 + [f"w{i}" for i in range(self.n_waypoints - 1)])
        lines = ["minimize " + " + ".join(f"{c:g}*{names[i]}" for i, c in enumerate(self.c) if c),
                 "# each tuple is one slack row b - A x; a block's rows must lie in its cone"]
        row = 0
        for (kind, dim), label in zip(self.cones, self.labels):
            terms = []
            for r in range(row, row + dim):
                lo, hi = A.indptr[r], A.indptr[r + 1]
                expr = " ".join(f"{-v:+g}*{names[c]}" for c, v in zip(A.indices[lo:hi], A.data[lo:hi]))
                terms.append(f"({self.b[r]:g} {expr})".replace("  ", " "))
            lines.append(f"{kind:6s} {label}: " + ", ".join(terms))
            row += dim
        return "\n".join(lines) + "\n"


@dataclass
class SolveResult:
    status: str
    x: np.ndarray | None
    objective: float
    iterations: int
    max_violation: float = math.nan


class _Builder:
    def __init__(self, n_vars: int):
        self.n_vars = n_vars
        self.rows: list[dict[int, float]] = []
        self.rhs: list[float] = []
        self.cones: list[tuple[str, int]] = []
        self.labels: list[str] = []

    def add(self, kind: str, rows: list[tuple[dict[int, float], float]], label: str) -> None:
        for coeffs, rhs in rows:
            self.rows.append(coeffs)
            self.rhs.append(rhs)
        self.cones.append((kind, len(rows)))
        self.labels.append(label)

    def le(self, coeffs: dict[int, float], rhs: float, label: str) -> None:
        """``coeffs . x <= rhs``."""
        self.add(NONNEG, [(coeffs, rhs)], label)


def build_program(instance: PlanInstance, axis_bounds, norm_bounds=None) -> ConicProgram:
    """Assemble the program for per-segment bounds ``axis_bounds`` (n, axes) and ``norm_bounds`` (n,)."""
    n = instance.n_segments
    axes = instance.axis_count
    axis_bounds = np.asarray(axis_bounds, dtype=float).reshape(n, axes)
    if norm_bounds is None:
        norm_bounds = np.full(n, math.inf if instance.b_norm is None else instance.b_norm)
    norm_bounds = np.asarray(norm_bounds, dtype=float)
    if np.any(axis_bounds < 0) or np.any(norm_bounds < 0):
        raise ValueError("velocity bounds must be non-negative")

    n_vars = (n + 1) * axes + 2 * n
    c = np.zeros(n_vars)
    prog = ConicProgram(c, None, None, [], n + 1, axes)
    c[prog.dur(0):prog.dur(0) + n] = 1.0
    c[prog.dwell(0):prog.dwell(0) + n] = 1.0
    bld = _Builder(n_vars)

    bld.add(ZERO, [({prog.pos(0, j): 1.0}, instance.start[j]) for j in range(axes)], "start")
    for i, step in enumerate(instance.skeleton):
        dt = prog.dur(i)
        for j in range(axes):
            a, b = prog.pos(i, j), prog.pos(i + 1, j)
            v = axis_bounds[i, j]
            bld.add(NONNEG, [({b: 1.0, a: -1.0, dt: -v}, 0.0), ({b: -1.0, a: 1.0, dt: -v}, 0.0)],
                    f"seg{i}.axis{j}")
        if axes == 2 and math.isfinite(norm_bounds[i]):
            rows = [({dt: -norm_bounds[i]}, 0.0)]
            rows += [({prog.pos(i + 1, j): -1.0, prog.pos(i, j): 1.0}, 0.0) for j in range(axes)]
            bld.add(SOC, rows, f"seg{i}.norm")
        rows = [({dt: -1.0}, -step.d_min)]
        if math.isfinite(step.d_max):
            rows.append(({dt: 1.0}, step.d_max))
        bld.add(NONNEG, rows, f"seg{i}.duration")
        w = prog.dwell(i)
        bld.add(NONNEG, [({w: -1.0}, -step.tau_low), ({w: 1.0}, step.tau_high)], f"seg{i}.dwell")
        for r_idx, region in enumerate(step.regions):
            _region_rows(bld, prog, i + 1, region, f"wp{i + 1}.region{r_idx}")

    data, ri, ci = [], [], []
    for r, coeffs in enumerate(bld.rows):
        for col, val in coeffs.items():
            if val != 0.0:
                ri.append(r)
                ci.append(col)
                data.append(val)
    prog.A = sp.csc_matrix((data, (ri, ci)), shape=(len(bld.rows), n_vars))
    prog.b = np.array(bld.rhs, dtype=float)
    prog.cones = bld.cones
    prog.labels = bld.labels
    return prog


def _region_rows(bld: _Builder, prog: ConicProgram, wp: int, region, label: str) -> None:
    axes = prog.axes
    px = prog.pos(wp, 0)
    if isinstance(region, Circle):
        cx, cy = region.center
        if axes == 1:
            half = math.sqrt(max(region.radius ** 2 - cy ** 2, 0.0)) if region.radius >= abs(cy) else -1.0
            bld.add(NONNEG, [({px: 1.0}, cx + half), ({px: -1.0}, -cx + half)], label)
        elif region.is_point:
            bld.add(ZERO, [({px: 1.0}, cx), ({prog.pos(wp, 1): 1.0}, cy)], label)
        else:
            bld.add(SOC, [({}, region.radius), ({px: -1.0}, -cx), ({prog.pos(wp, 1): -1.0}, -cy)], label)
    elif isinstance(region, Rectangle):
        (cx, cy), (rx, ry) = region.center, region.half_extents
        rows = [({px: 1.0}, cx + rx), ({px: -1.0}, -cx + rx)]
        if axes == 2:
            py = prog.pos(wp, 1)
            rows += [({py: 1.0}, cy + ry), ({py: -1.0}, -cy + ry)]
        elif abs(cy) > ry:
            rows.append(({}, -1.0))  # the line y = 0 misses the box
        bld.add(NONNEG, rows, label)
    elif isinstance(region, Polygon):
        A, b = region.halfspaces()
        rows = []
        for a_row, b_i in zip(A, b):
            coeffs = {px: a_row[0]}
            if axes == 2:
                coeffs[prog.pos(wp, 1)] = a_row[1]
            rows.append((coeffs, float(b_i)))
        bld.add(NONNEG, rows, label)
    else:
        raise TypeError(f"unknown region type {type(region).__name__}")


def _clarabel_cones(cones):
    out = []
    for kind, dim in cones:
        if kind == ZERO:
            cone = clarabel.ZeroConeT(dim)
        elif kind == NONNEG:
            cone = clarabel.NonnegativeConeT(dim)
        else:
            cone = clarabel.SecondOrderConeT(dim)
        out.append(cone)
    return out


def solve(program: ConicProgram, tol: float = FEAS_TOL, max_iter: int = MAX_ITER) -> SolveResult:
    settings = clarabel.DefaultSettings()
    settings.verbose = False
    settings.max_iter = max_iter
    settings.tol_feas = 1e-10
    settings.tol_gap_abs = 1e-10
    settings.tol_gap_rel = 1e-10
    settings.presolve_enable = False  # keep the row layout stable for residual checks
    P = sp.csc_matrix((program.n_vars, program.n_vars))
    try:
        solver = clarabel.DefaultSolver(P, program.c, program.A, program.b,
                                        _clarabel_cones(program.cones), settings)
        sol = solver.solve()
    except Exception:  # clarabel raises on malformed data, e.g. non-finite entries
        return SolveResult(NUMERIC_FAILURE, None, math.nan, 0)
    status = str(sol.status)
    if status in ("PrimalInfeasible", "AlmostPrimalInfeasible"):
        return SolveResult(INFEASIBLE, None, math.nan, sol.iterations)
    if status not in ("Solved", "AlmostSolved"):
        return SolveResult(NUMERIC_FAILURE, None, math.nan, sol.iterations)
    x = np.array(sol.x)
    violation = float(program.residuals(x).max(initial=0.0))
    if not np.all(np.isfinite(x)) or violation > tol:
        return SolveResult(NUMERIC_FAILURE, None, math.nan, sol.iterations, violation)
    return SolveResult(OPTIMAL, x, float(program.c @ x), sol.iterations, violation)


def extract_plan(program: ConicProgram, result: SolveResult, axis_bounds, norm_bounds) -> GroundedPlan:
    n = program.n_waypoints - 1
    x = result.x
    waypoints = x[:program.n_waypoints * program.axes].reshape(program.n_waypoints, program.axes)
    # the duration/dwell lower bounds hold to solver precision; clamp the round-off
    durations = np.maximum(x[program.dur(0):program.dur(0) + n], 0.0)
    dwells = np.maximum(x[program.dwell(0):program.dwell(0) + n], 0.0)
    return build_plan(waypoints, durations, dwells, axis_bounds, norm_bounds,
                      solver_iterations=result.iterations, max_violation=result.max_violation)


def nominal_bounds(instance: PlanInstance) -> tuple[np.ndarray, np.ndarray]:
    n = instance.n_segments
    axis = np.tile(np.asarray(instance.axis_bounds, dtype=float), (n, 1))
    norm = np.full(n, math.inf if instance.b_norm is None else instance.b_norm)
    return axis, norm


class InfeasibleInstance(RuntimeError):
    """The skeleton admits no first-order plan under the given bounds."""


def solve_plan(instance: PlanInstance, axis_bounds, norm_bounds=None) -> tuple[SolveResult, GroundedPlan | None]:
    if norm_bounds is None:
        norm_bounds = nominal_bounds(instance)[1]
    program = build_program(instance, axis_bounds, norm_bounds)
    result = solve(program)
    if result.status != OPTIMAL:
        return result, None
    return result, extract_plan(program, result, axis_bounds, norm_bounds)


def initial_plan(instance: PlanInstance) -> GroundedPlan:
    """First-order plan under the nominal bounds."""
    axis, norm = nominal_bounds(instance)
    result, plan = solve_plan(instance, axis, norm)
    if plan is None:
        raise InfeasibleInstance(f"{instance.name}: no first-order plan ({result.status})")
    return plan


def check_plan(instance: PlanInstance, plan: GroundedPlan) -> float:
    """Largest violation of any first-order constraint by ``plan``."""
    worst = 0.0
    disp = np.diff(plan.waypoints, axis=0)
    worst = max(worst, float(np.max(np.abs(plan.waypoints[0] - np.asarray(instance.start)))))
    for i, step in enumerate(instance.skeleton):
        dt = plan.durations[i]
        worst = max(worst, float(np.max(np.abs(disp[i]) - plan.axis_bounds[i] * dt)))
        if instance.axis_count == 2 and math.isfinite(plan.norm_bounds[i]):
            worst = max(worst, float(np.linalg.norm(disp[i]) - plan.norm_bounds[i] * dt))
        worst = max(worst, step.d_min - dt, dt - step.d_max,
                    step.tau_low - plan.dwells[i], plan.dwells[i] - step.tau_high)
        p = plan.waypoints[i + 1]
        for region in step.regions:
            worst = max(worst, _region_violation(region, p))
    return worst


def _region_violation(region, p) -> float:
    x, y = (p[0], 0.0) if len(p) == 1 else (p[0], p[1])
    if isinstance(region, Circle):
        if len(p) == 1:
            if region.radius < abs(region.center[1]):
                return math.inf
            half = math.sqrt(region.radius ** 2 - region.center[1] ** 2)
            return abs(x - region.center[0]) - half
        return math.hypot(x - region.center[0], y - region.center[1]) - region.radius
    if isinstance(region, Rectangle):
        (cx, cy), (rx, ry) = region.center, region.half_extents
        return max(abs(x - cx) - rx, abs(y - cy) - ry)
    A, b = region.halfspaces()
    return float(np.max(A @ np.array([x, y]) - b))
