"""Domain types for plan instances and grounded plans, plus the text file format.

File format
-----------
Both instance and plan files are line oriented.  Blank lines and lines starting
with ``#`` are ignored.  Each line is a keyword followed by ``name=value``
pairs (floats are written with ``repr`` so a round trip is exact)::

    planrefine-instance 1
    name auv-2d-000
    axes 2
    dynamics U=10.0 V=10.0 k=0.05
    start x=0.0 y=0.0 vx=0.0 vy=0.0
    bounds vx_max=10.0 vy_max=10.0 b_norm=none
    step tau_low=1.0 tau_high=5.0 d_min=0.0 d_max=1000.0
    region circle cx=40.0 cy=10.0 r=3.0
    region rectangle cx=0.0 cy=0.0 rx=2.0 ry=1.0
    region polygon 0.0,0.0 4.0,0.0 4.0,3.0

``region`` lines attach to the most recent ``step``.  For one-axis instances
the ``y``/``vy``/``vy_max`` fields are omitted and regions are intersected with
the line ``y = 0``.

Plan files::

    planrefine-plan 1
    axes 2
    makespan 12.5
    waypoint x=0.0 y=0.0 t=0.0
    segment duration=2.0 dwell=1.0 vx_max=10.0 vy_max=10.0 b_norm=none

Segment ``i`` moves from waypoint ``i`` to waypoint ``i + 1`` and is followed
by a dwell at waypoint ``i + 1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

INSTANCE_MAGIC = "planrefine-instance"
PLAN_MAGIC = "planrefine-plan"
FORMAT_VERSION = 1

# Absolute slack used for membership checks on solver output.
GEOM_TOL = 1e-6
# Relative slack on per-axis average speeds of solver output.
SPEED_TOL = 1e-6


class ParseError(ValueError):
    """Malformed instance or plan file."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class ValidationError(ValueError):
    """A value violates a type invariant; ``field`` names the offending field."""

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


def _check_finite(name: str, value: float) -> float:
    value = float(value)
    if not math.isfinite(value):
        raise ValidationError(name, f"must be finite, got {value!r}")
    return value


# ---------------------------------------------------------------------------
# Regions


@dataclass(frozen=True)
class Circle:
    """Disc of the given radius.  ``radius == 0`` denotes a single point."""

    center: tuple[float, float]
    radius: float
    kind = "circle"

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        if len(self.center) != 2:
            raise ValidationError("circle.center", "needs two coordinates")
        if not self.radius >= 0:
            raise ValidationError("circle.radius", f"must be non-negative, got {self.radius!r}")

    @property
    def is_point(self) -> bool:
        return self.radius == 0.0

    def contains(self, point: Sequence[float], tol: float = 0.0) -> bool:
        p = _as_xy(point)
        return math.hypot(p[0] - self.center[0], p[1] - self.center[1]) <= self.radius + tol

    def encoding(self) -> list[float]:
        """``[c_x, c_y, r_x, r_y, type]`` with type 1 for circles."""
        return [self.center[0], self.center[1], self.radius, self.radius, 1.0]


@dataclass(frozen=True)
class Rectangle:
    """Axis-aligned box given by center and half extents."""

    center: tuple[float, float]
    half_extents: tuple[float, float]
    kind = "rectangle"

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        object.__setattr__(self, "half_extents", tuple(float(c) for c in self.half_extents))
        if len(self.center) != 2 or len(self.half_extents) != 2:
            raise ValidationError("rectangle", "center and half_extents need two coordinates")
        if not (self.half_extents[0] > 0 and self.half_extents[1] > 0):
            raise ValidationError("rectangle.half_extents", "must be positive")

    def contains(self, point: Sequence[float], tol: float = 0.0) -> bool:
        p = _as_xy(point)
        return (abs(p[0] - self.center[0]) <= self.half_extents[0] + tol
                and abs(p[1] - self.center[1]) <= self.half_extents[1] + tol)

    def encoding(self) -> list[float]:
        return [self.center[0], self.center[1], self.half_extents[0], self.half_extents[1], 0.0]


@dataclass(frozen=True)
class Polygon:
    """Convex polygon with counter-clockwise vertices."""

    vertices: tuple[tuple[float, float], ...]
    kind = "polygon"

    def __post_init__(self):
        verts = tuple((float(x), float(y)) for x, y in self.vertices)
        object.__setattr__(self, "vertices", verts)
        if len(verts) < 3:
            raise ValidationError("polygon.vertices", f"needs at least 3 vertices, got {len(verts)}")
        n = len(verts)
        for i in range(n):
            (x0, y0), (x1, y1), (x2, y2) = verts[i], verts[(i + 1) % n], verts[(i + 2) % n]
            cross = (x1 - x0) * (y2 - y1) - (y1 - y0) * (x2 - x1)
            if cross <= 0:
                raise ValidationError(
                    "polygon.vertices",
                    f"not strictly convex and counter-clockwise at vertex {(i + 1) % n}")

    def halfspaces(self) -> tuple[np.ndarray, np.ndarray]:
        """Return ``(A, b)`` with the polygon equal to ``{p : A p <= b}``."""
        v = np.asarray(self.vertices)
        edges = np.roll(v, -1, axis=0) - v
        # outward normal of a CCW edge (dx, dy) is (dy, -dx)
        normals = np.column_stack([edges[:, 1], -edges[:, 0]])
        norms = np.linalg.norm(normals, axis=1, keepdims=True)
        A = normals / norms
        b = np.einsum("ij,ij->i", A, v)
        return A, b

    def contains(self, point: Sequence[float], tol: float = 0.0) -> bool:
        A, b = self.halfspaces()
        return bool(np.all(A @ np.asarray(_as_xy(point)) <= b + tol))


Region = Circle | Rectangle | Polygon


def _as_xy(point: Sequence[float]) -> tuple[float, float]:
    if len(point) == 1:
        return float(point[0]), 0.0
    return float(point[0]), float(point[1])


# ---------------------------------------------------------------------------
# Instances


@dataclass(frozen=True)
class DynamicsParams:
    accel_max: float
    vel_max: float
    drag: float

    def __post_init__(self):
        for name in ("accel_max", "vel_max", "drag"):
            value = _check_finite(f"dynamics.{name}", getattr(self, name))
            if value <= 0:
                raise ValidationError(f"dynamics.{name}", f"must be positive, got {value!r}")
            object.__setattr__(self, name, value)

    @property
    def terminal_speed(self) -> float:
        """Drag-limited speed ``sqrt(2U/k)`` under full thrust."""
        return math.sqrt(2.0 * self.accel_max / self.drag)


@dataclass(frozen=True)
class SkeletonStep:
    """One visit of the skeleton: the transition into it and the dwell after it."""

    regions: tuple[Region, ...]
    tau_low: float = 0.0
    tau_high: float = 0.0
    d_min: float = 0.0
    d_max: float = math.inf

    def __post_init__(self):
        object.__setattr__(self, "regions", tuple(self.regions))
        if not self.regions:
            raise ValidationError("step.regions", "at least one region required")
        for name in ("tau_low", "tau_high", "d_min", "d_max"):
            object.__setattr__(self, name, float(getattr(self, name)))
        if not 0.0 <= self.tau_low <= self.tau_high:
            raise ValidationError("step.tau", f"need 0 <= tau_low <= tau_high, got {self.tau_low}, {self.tau_high}")
        if not 0.0 <= self.d_min <= self.d_max:
            raise ValidationError("step.d", f"need 0 <= d_min <= d_max, got {self.d_min}, {self.d_max}")
        if not math.isfinite(self.tau_high):
            raise ValidationError("step.tau_high", "must be finite")

    def contains(self, point: Sequence[float], tol: float = 0.0) -> bool:
        return all(r.contains(point, tol) for r in self.regions)


@dataclass(frozen=True)
class PlanInstance:
    dynamics: DynamicsParams
    start: tuple[float, ...]
    skeleton: tuple[SkeletonStep, ...]
    axis_bounds: tuple[float, ...]
    b_norm: float | None = None
    start_velocity: tuple[float, ...] | None = None
    name: str = "instance"

    def __post_init__(self):
        start = tuple(float(s) for s in self.start)
        object.__setattr__(self, "start", start)
        object.__setattr__(self, "skeleton", tuple(self.skeleton))
        object.__setattr__(self, "axis_bounds", tuple(float(b) for b in self.axis_bounds))
        if self.start_velocity is None:
            object.__setattr__(self, "start_velocity", (0.0,) * len(start))
        else:
            object.__setattr__(self, "start_velocity", tuple(float(v) for v in self.start_velocity))
        if len(start) not in (1, 2):
            raise ValidationError("start", "axis count must be 1 or 2")
        if len(self.axis_bounds) != len(start) or len(self.start_velocity) != len(start):
            raise ValidationError("bounds", "per-axis fields must match the axis count")
        if any(v != 0.0 for v in self.start_velocity):
            raise ValidationError("start.velocity", "start velocity must be zero")
        if not self.skeleton:
            raise ValidationError("skeleton", "must contain at least one step")
        for j, bound in enumerate(self.axis_bounds):
            if not bound > 0:
                raise ValidationError(f"bounds[{j}]", "must be positive")
            if bound > self.dynamics.vel_max:
                raise ValidationError(f"bounds[{j}]", f"nominal bound {bound} exceeds V={self.dynamics.vel_max}")
        if self.b_norm is not None:
            if len(start) == 1:
                raise ValidationError("bounds.b_norm", "norm bound needs two axes")
            if not self.b_norm > 0:
                raise ValidationError("bounds.b_norm", "must be positive")
            object.__setattr__(self, "b_norm", float(self.b_norm))

    @property
    def axis_count(self) -> int:
        return len(self.start)

    @property
    def n_segments(self) -> int:
        return len(self.skeleton)


# ---------------------------------------------------------------------------
# Grounded plans


def _frozen(a, shape=None) -> np.ndarray:
    arr = np.array(a, dtype=float)
    if shape is not None:
        arr = arr.reshape(shape)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class GroundedPlan:
    """Continuous assignment for a skeleton of ``n`` steps.

    ``waypoints`` has shape ``(n + 1, axes)``; ``timestamps[i]`` is the arrival
    time at waypoint ``i``; ``durations[i]`` and ``dwells[i]`` belong to step
    ``i`` (motion into waypoint ``i + 1`` and the wait there).  ``norm_bounds``
    holds ``inf`` where no norm constraint applies.
    """

    waypoints: np.ndarray
    timestamps: np.ndarray
    durations: np.ndarray
    dwells: np.ndarray
    axis_bounds: np.ndarray
    norm_bounds: np.ndarray
    makespan: float
    extras: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        wp = np.array(self.waypoints, dtype=float)
        if wp.ndim == 1:
            wp = wp[:, None]
        object.__setattr__(self, "waypoints", _frozen(wp))
        n = wp.shape[0] - 1
        object.__setattr__(self, "timestamps", _frozen(self.timestamps))
        object.__setattr__(self, "durations", _frozen(self.durations))
        object.__setattr__(self, "dwells", _frozen(self.dwells))
        object.__setattr__(self, "axis_bounds", _frozen(self.axis_bounds, (n, wp.shape[1]) if n > 0 else (0, wp.shape[1])))
        object.__setattr__(self, "norm_bounds", _frozen(self.norm_bounds))
        object.__setattr__(self, "makespan", float(self.makespan))

    @property
    def n_segments(self) -> int:
        return self.waypoints.shape[0] - 1

    @property
    def axis_count(self) -> int:
        return self.waypoints.shape[1]

    def segment_velocities(self) -> np.ndarray:
        """Average velocity of each segment, ``(n, axes)``; zero for zero-length segments."""
        disp = np.diff(self.waypoints, axis=0)
        out = np.zeros_like(disp)
        moving = self.durations > 0
        out[moving] = disp[moving] / self.durations[moving, None]
        return out

    def validate(self, tol: float = 1e-9) -> None:
        n = self.n_segments
        if n < 1:
            raise ValidationError("plan.waypoints", "plan has an empty skeleton")
        for name, arr, size in (("timestamps", self.timestamps, n + 1), ("durations", self.durations, n),
                                ("dwells", self.dwells, n), ("norm_bounds", self.norm_bounds, n)):
            if arr.shape != (size,):
                raise ValidationError(f"plan.{name}", f"expected {size} entries, got {arr.shape}")
        if self.timestamps[0] != 0.0:
            raise ValidationError("plan.timestamps", "t_0 must be 0")
        if np.any(np.diff(self.timestamps) < 0):
            raise ValidationError("plan.timestamps", "timestamps must be non-decreasing")
        if np.any(self.durations < 0) or np.any(self.dwells < 0):
            raise ValidationError("plan.durations", "durations and dwells must be non-negative")
        if np.any(self.axis_bounds < 0) or np.any(self.norm_bounds <= 0):
            raise ValidationError("plan.bounds", "velocity bounds must be non-negative")
        prev_dwell = np.concatenate([[0.0], self.dwells[:-1]])
        steps = self.timestamps[:-1] + prev_dwell + self.durations
        scale = np.maximum(1.0, np.abs(self.timestamps[1:]))
        if np.any(np.abs(steps - self.timestamps[1:]) > tol * scale):
            raise ValidationError("plan.timestamps", "timestamps disagree with durations and dwells")
        disp = np.abs(np.diff(self.waypoints, axis=0))
        slack = SPEED_TOL * np.maximum(1.0, disp)
        if np.any(disp > self.axis_bounds * self.durations[:, None] + slack):
            raise ValidationError("plan.durations", "average speed exceeds a per-axis bound")
        expected_end = self.timestamps[-1] + self.dwells[-1]
        if abs(expected_end - self.makespan) > tol * max(1.0, abs(self.makespan)):
            raise ValidationError("plan.makespan", f"makespan {self.makespan} != t_n + w_n = {expected_end}")


def build_plan(waypoints, durations, dwells, axis_bounds, norm_bounds, **extras) -> GroundedPlan:
    """Assemble a plan, accumulating timestamps from durations and dwells."""
    durations = np.asarray(durations, dtype=float)
    dwells = np.asarray(dwells, dtype=float)
    n = durations.size
    t = np.zeros(n + 1)
    prev_dwell = 0.0
    for i in range(n):
        t[i + 1] = t[i] + prev_dwell + durations[i]
        prev_dwell = dwells[i]
    makespan = t[-1] + (dwells[-1] if n else 0.0)
    return GroundedPlan(waypoints, t, durations, dwells, axis_bounds, norm_bounds, makespan, dict(extras))


def plans_close(a: GroundedPlan, b: GroundedPlan, rtol: float = 1e-12) -> bool:
    fields = ("waypoints", "timestamps", "durations", "dwells", "axis_bounds", "norm_bounds")
    return all(getattr(a, f).shape == getattr(b, f).shape
               and np.allclose(getattr(a, f), getattr(b, f), rtol=rtol, atol=0.0) for f in fields) \
        and math.isclose(a.makespan, b.makespan, rel_tol=rtol)


# ---------------------------------------------------------------------------
# Serialization


def _fmt(x: float | None) -> str:
    if x is None or (isinstance(x, float) and math.isinf(x) and x > 0):
        return "none"
    return repr(float(x))


def _parse_float(text: str, line: int, key: str) -> float | None:
    if text in ("none", "inf"):
        return None
    try:
        return float(text)
    except ValueError:
        raise ParseError(f"field {key!r}: cannot parse {text!r} as a number", line) from None


def _kv(tokens: list[str], line: int) -> dict[str, str]:
    out = {}
    for tok in tokens:
        if "=" not in tok:
            raise ParseError(f"expected name=value, got {tok!r}", line)
        k, v = tok.split("=", 1)
        out[k] = v
    return out


def _need(fields: dict[str, str], key: str, line: int, allow_none: bool = False) -> float | None:
    if key not in fields:
        raise ParseError(f"missing field {key!r}", line)
    value = _parse_float(fields[key], line, key)
    if value is None and not allow_none:
        raise ParseError(f"field {key!r} may not be none", line)
    return value


def _lines(text: str):
    for lineno, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.split("#", 1)[0].strip()
        if stripped:
            yield lineno, stripped.split()


def _region_line(tokens: list[str], lineno: int) -> Region:
    if not tokens:
        raise ParseError("region kind missing", lineno)
    kind, rest = tokens[0], tokens[1:]
    try:
        if kind == "circle":
            f = _kv(rest, lineno)
            return Circle((_need(f, "cx", lineno), _need(f, "cy", lineno)), _need(f, "r", lineno))
        if kind == "rectangle":
            f = _kv(rest, lineno)
            return Rectangle((_need(f, "cx", lineno), _need(f, "cy", lineno)),
                             (_need(f, "rx", lineno), _need(f, "ry", lineno)))
        if kind == "polygon":
            verts = []
            for tok in rest:
                parts = tok.split(",")
                if len(parts) != 2:
                    raise ParseError(f"polygon vertex must be x,y, got {tok!r}", lineno)
                verts.append((_parse_float(parts[0], lineno, "vertex"), _parse_float(parts[1], lineno, "vertex")))
            return Polygon(tuple(verts))
    except ValidationError as exc:
        raise ValidationError(f"line {lineno}: {exc.field}", str(exc).split(": ", 1)[1]) from None
    raise ParseError(f"unknown region kind {kind!r}", lineno)


def parse_instance(text: str) -> PlanInstance:
    name = "instance"
    axes = None
    dynamics = start = bounds = None
    steps: list[dict] = []
    seen_magic = False
    for lineno, tokens in _lines(text):
        key, rest = tokens[0], tokens[1:]
        if key == INSTANCE_MAGIC:
            if rest and rest[0] != str(FORMAT_VERSION):
                raise ParseError(f"unsupported version {rest[0]}", lineno)
            seen_magic = True
        elif key == "name":
            name = " ".join(rest)
        elif key == "axes":
            if len(rest) != 1 or rest[0] not in ("1", "2"):
                raise ParseError("axes must be 1 or 2", lineno)
            axes = int(rest[0])
        elif key == "dynamics":
            f = _kv(rest, lineno)
            dynamics = (_need(f, "U", lineno), _need(f, "V", lineno), _need(f, "k", lineno), lineno)
        elif key == "start":
            start = (_kv(rest, lineno), lineno)
        elif key == "bounds":
            bounds = (_kv(rest, lineno), lineno)
        elif key == "step":
            f = _kv(rest, lineno)
            steps.append(dict(tau_low=_need(f, "tau_low", lineno), tau_high=_need(f, "tau_high", lineno),
                              d_min=_need(f, "d_min", lineno),
                              d_max=_need(f, "d_max", lineno, allow_none=True), regions=[], line=lineno))
        elif key == "region":
            if not steps:
                raise ParseError("region before any step", lineno)
            steps[-1]["regions"].append(_region_line(rest, lineno))
        else:
            raise ParseError(f"unknown keyword {key!r}", lineno)
    if not seen_magic:
        raise ParseError(f"missing {INSTANCE_MAGIC!r} header")
    for what, value in (("axes", axes), ("dynamics", dynamics), ("start", start), ("bounds", bounds)):
        if value is None:
            raise ParseError(f"missing {what!r} line")
    names = ("x", "y")[:axes]
    sf, sl = start
    bf, bl = bounds
    pos = tuple(_need(sf, n, sl) for n in names)
    vel = tuple(_need(sf, "v" + n, sl) for n in names)
    axis_bounds = tuple(_need(bf, f"v{n}_max", bl) for n in names)
    b_norm = _need(bf, "b_norm", bl, allow_none=True) if axes == 2 else None
    skeleton = []
    for s in steps:
        try:
            skeleton.append(SkeletonStep(tuple(s["regions"]), s["tau_low"], s["tau_high"], s["d_min"],
                                         math.inf if s["d_max"] is None else s["d_max"]))
        except ValidationError as exc:
            raise ValidationError(f"line {s['line']}: {exc.field}", str(exc).split(": ", 1)[1]) from None
    U, V, k, _ = dynamics
    return PlanInstance(DynamicsParams(U, V, k), pos, tuple(skeleton), axis_bounds, b_norm, vel, name)


def format_instance(inst: PlanInstance) -> str:
    names = ("x", "y")[:inst.axis_count]
    d = inst.dynamics
    out = [f"{INSTANCE_MAGIC} {FORMAT_VERSION}", f"name {inst.name}", f"axes {inst.axis_count}",
           f"dynamics U={_fmt(d.accel_max)} V={_fmt(d.vel_max)} k={_fmt(d.drag)}",
           "start " + " ".join([f"{n}={_fmt(p)}" for n, p in zip(names, inst.start)]
                               + [f"v{n}={_fmt(v)}" for n, v in zip(names, inst.start_velocity)])]
    bound_fields = [f"v{n}_max={_fmt(b)}" for n, b in zip(names, inst.axis_bounds)]
    if inst.axis_count == 2:
        bound_fields.append(f"b_norm={_fmt(inst.b_norm)}")
    out.append("bounds " + " ".join(bound_fields))
    for step in inst.skeleton:
        out.append(f"step tau_low={_fmt(step.tau_low)} tau_high={_fmt(step.tau_high)} "
                   f"d_min={_fmt(step.d_min)} d_max={_fmt(step.d_max)}")
        for r in step.regions:
            if isinstance(r, Circle):
                out.append(f"region circle cx={_fmt(r.center[0])} cy={_fmt(r.center[1])} r={_fmt(r.radius)}")
            elif isinstance(r, Rectangle):
                out.append(f"region rectangle cx={_fmt(r.center[0])} cy={_fmt(r.center[1])} "
                           f"rx={_fmt(r.half_extents[0])} ry={_fmt(r.half_extents[1])}")
            else:
                out.append("region polygon " + " ".join(f"{_fmt(x)},{_fmt(y)}" for x, y in r.vertices))
    return "\n".join(out) + "\n"


def load_instance(path: str | Path) -> PlanInstance:
    return parse_instance(Path(path).read_text())


def save_instance(inst: PlanInstance, path: str | Path) -> None:
    Path(path).write_text(format_instance(inst))


def format_plan(plan: GroundedPlan) -> str:
    plan.validate()
    names = ("x", "y")[:plan.axis_count]
    out = [f"{PLAN_MAGIC} {FORMAT_VERSION}", f"axes {plan.axis_count}", f"makespan {_fmt(plan.makespan)}"]
    for p, t in zip(plan.waypoints, plan.timestamps):
        out.append("waypoint " + " ".join(f"{n}={_fmt(v)}" for n, v in zip(names, p)) + f" t={_fmt(t)}")
    for i in range(plan.n_segments):
        fields = [f"duration={_fmt(plan.durations[i])}", f"dwell={_fmt(plan.dwells[i])}"]
        fields += [f"v{n}_max={_fmt(b)}" for n, b in zip(names, plan.axis_bounds[i])]
        fields.append(f"b_norm={_fmt(plan.norm_bounds[i])}")
        out.append("segment " + " ".join(fields))
    return "\n".join(out) + "\n"


def parse_plan(text: str) -> GroundedPlan:
    axes = makespan = None
    waypoints, times, segs = [], [], []
    seen_magic = False
    for lineno, tokens in _lines(text):
        key, rest = tokens[0], tokens[1:]
        if key == PLAN_MAGIC:
            seen_magic = True
        elif key == "axes":
            axes = int(rest[0])
        elif key == "makespan":
            makespan = _parse_float(rest[0], lineno, "makespan")
        elif key == "waypoint":
            if axes is None:
                raise ParseError("axes must precede waypoints", lineno)
            f = _kv(rest, lineno)
            waypoints.append([_need(f, n, lineno) for n in ("x", "y")[:axes]])
            times.append(_need(f, "t", lineno))
        elif key == "segment":
            f = _kv(rest, lineno)
            nb = _need(f, "b_norm", lineno, allow_none=True)
            segs.append((_need(f, "duration", lineno), _need(f, "dwell", lineno),
                         [_need(f, f"v{n}_max", lineno) for n in ("x", "y")[:axes]],
                         math.inf if nb is None else nb))
        else:
            raise ParseError(f"unknown keyword {key!r}", lineno)
    if not seen_magic:
        raise ParseError(f"missing {PLAN_MAGIC!r} header")
    if makespan is None:
        raise ParseError("missing makespan line")
    plan = GroundedPlan(np.array(waypoints, dtype=float).reshape(-1, axes), times,
                        [s[0] for s in segs], [s[1] for s in segs],
                        np.array([s[2] for s in segs], dtype=float).reshape(-1, axes),
                        [s[3] for s in segs], makespan)
    plan.validate()
    return plan


def save_plan(plan: GroundedPlan, path: str | Path) -> None:
    text = format_plan(plan)  # validates before anything touches the disk
    Path(path).write_text(text)


def load_plan(path: str | Path) -> GroundedPlan:
    return parse_plan(Path(path).read_text())
