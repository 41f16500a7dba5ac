"""Closed-form minimum-time validation (MTV) under bounded thrust, speed and drag.

One axis obeys ``x1' = x2``, ``x2' = u - k/2 * x2**2`` with ``|u| <= U`` and
``|x2| <= V``.  For forward motion the time-optimal control either reaches the
speed bound (bang-constant-bang, BCB) or switches at a lower peak velocity
(bang-bang, BB).  Segments whose boundary velocities oppose the displacement,
or which need to overshoot, are handed to the numerical oracle.

The phase expressions below are the textbook ones rewritten with ``log1p`` and
``atanh`` so that they stay accurate as ``k -> 0``; :func:`literal_phase_terms`
keeps the unsimplified expressions for cross-checking.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

from . import oracle
from .model import DynamicsParams

BCB = "BCB"
BB = "BB"
FALLBACK = "numeric-fallback"
INFEASIBLE = "infeasible"

PEAK_TOL = 1e-10


class MtvDomainError(ValueError):
    """Boundary velocities outside the domain of the closed forms."""


@dataclass(frozen=True)
class SegmentBoundary:
    x10: float
    x1f: float
    x20: float
    x2f: float
    dynamics: DynamicsParams

    @property
    def distance(self) -> float:
        return self.x1f - self.x10


@dataclass(frozen=True)
class MtvResult:
    t_min: float
    profile: str
    phases: tuple[float, float, float] | None = None
    peak_velocity: float | None = None
    mirrored: bool = False


def mirror_canonicalize(seg: SegmentBoundary) -> tuple[SegmentBoundary, bool]:
    """Reflect a backward segment so that its displacement is non-negative."""
    if seg.x1f < seg.x10:
        return SegmentBoundary(-seg.x10, -seg.x1f, -seg.x20, -seg.x2f, seg.dynamics), True
    return seg, False


# ---------------------------------------------------------------------------
# Phase primitives (forward motion, velocities in [0, min(V, vT)))


def _params(dyn: DynamicsParams):
    return dyn.accel_max, dyn.vel_max, dyn.drag, dyn.terminal_speed


def accel_distance(v0: float, v1: float, dyn: DynamicsParams) -> float:
    """Distance covered while thrusting from ``v0`` up to ``v1``."""
    U, _, k, vT = _params(dyn)
    if not (v0 < vT and v1 < vT):
        raise MtvDomainError(f"thrust phase needs speeds below the drag limit {vT}, got {v0}, {v1}")
    return math.log1p(k * (v1 * v1 - v0 * v0) / (2.0 * U - k * v1 * v1)) / k


def decel_distance(v0: float, v1: float, dyn: DynamicsParams) -> float:
    """Distance covered while braking from ``v0`` down to ``v1``."""
    U, _, k, _ = _params(dyn)
    return math.log1p(k * (v0 * v0 - v1 * v1) / (2.0 * U + k * v1 * v1)) / k


def accel_time(v0: float, v1: float, dyn: DynamicsParams) -> float:
    U, _, k, vT = _params(dyn)
    if not (v0 < vT and v1 < vT):
        raise MtvDomainError(f"thrust phase needs speeds below the drag limit {vT}, got {v0}, {v1}")
    return 2.0 / math.sqrt(2.0 * k * U) * (math.atanh(v1 / vT) - math.atanh(v0 / vT))


def decel_time(v0: float, v1: float, dyn: DynamicsParams) -> float:
    U, _, k, _ = _params(dyn)
    arg = math.sqrt(2.0 * k * U) * (v0 - v1) / (2.0 * U + k * v1 * v0)
    return math.sqrt(2.0 / (k * U)) * math.atan(arg)


def literal_phase_terms(seg: SegmentBoundary, peak: float) -> dict[str, float]:
    """Unsimplified thrust/brake distances and times for a peak velocity ``peak``."""
    U, _, k, _ = _params(seg.dynamics)
    x20, x2f, s = seg.x20, seg.x2f, math.sqrt(2 * k * U)
    dxa_arg = (2 * k * U - (x20 * k) ** 2) / (2 * k * U - (peak * k) ** 2)
    dxd_arg = (2 * k * U + (peak * k) ** 2) / math.sqrt(
        (2 * k * U + k * k * peak * x2f) ** 2 + 2 * k ** 3 * U * (peak - x2f) ** 2)
    t1_arg = (s - x20 * k) / (s + x20 * k) * (s + peak * k) / (s - peak * k)
    t3_arg = math.sqrt(2 * k ** 3 * U) * (peak - x2f) / (2 * k * U + x2f * k * k * peak)
    for name, arg in (("dx_a", dxa_arg), ("dx_d", dxd_arg), ("t1", t1_arg)):
        if not arg > 0:
            raise MtvDomainError(f"logarithm argument of {name} is {arg}")
    return {
        "dx_a": math.log(dxa_arg) / k,
        "dx_d": 2.0 / k * math.log(dxd_arg),
        "t1": math.log(t1_arg) / s,
        "t3": math.sqrt(2.0 / (k * U)) * math.atan(t3_arg),
    }


def _check_canonical(seg: SegmentBoundary) -> None:
    if seg.distance < 0 or seg.x20 < 0 or seg.x2f < 0:
        raise MtvDomainError("closed forms need non-negative displacement and boundary velocities")
    vT = seg.dynamics.terminal_speed
    limit = min(seg.dynamics.vel_max, vT)
    for name, v in (("x20", seg.x20), ("x2f", seg.x2f)):
        if v > limit or v >= vT:
            raise MtvDomainError(f"{name}={v} exceeds the reachable speed {limit}")


# ---------------------------------------------------------------------------
# Profiles


def profile_select(seg: SegmentBoundary) -> str:
    """BCB when the speed bound is reachable within the displacement, else BB."""
    _check_canonical(seg)
    U, V, k, vT = _params(seg.dynamics)
    if not V < vT:
        return BB
    dxa = accel_distance(seg.x20, V, seg.dynamics)
    dxd = decel_distance(V, seg.x2f, seg.dynamics)
    # equality counts as BCB with an empty cruise phase
    return BCB if dxa + dxd <= seg.distance else BB


def mtv_bcb(seg: SegmentBoundary) -> MtvResult:
    _check_canonical(seg)
    dyn = seg.dynamics
    V = dyn.vel_max
    if not V < dyn.terminal_speed:
        raise MtvDomainError("speed bound is not below the drag-limited speed")
    dt1 = accel_time(seg.x20, V, dyn)
    dt3 = decel_time(V, seg.x2f, dyn)
    cruise = seg.distance - accel_distance(seg.x20, V, dyn) - decel_distance(V, seg.x2f, dyn)
    if cruise < -1e-9 * max(1.0, seg.distance):
        raise MtvDomainError(f"segment too short for BCB (cruise distance {cruise})")
    dt2 = max(cruise, 0.0) / V
    return MtvResult(dt1 + dt2 + dt3, BCB, (dt1, dt2, dt3), V)


class NotForwardReachable(MtvDomainError):
    """Even the slowest forward peak overshoots; the segment needs reversal."""


def bb_peak(seg: SegmentBoundary) -> float:
    """Peak velocity matching the displacement, found by bisection from below."""
    dyn = seg.dynamics
    vT = dyn.terminal_speed
    lo = max(seg.x20, seg.x2f)
    hi = min(dyn.vel_max, vT)
    d = seg.distance

    def disp(p):
        if p >= vT:
            return math.inf
        return accel_distance(seg.x20, p, dyn) + decel_distance(p, seg.x2f, dyn)

    d_lo = disp(lo)
    if d_lo > d + 1e-12 * max(1.0, d):
        raise NotForwardReachable(f"minimum forward displacement {d_lo} exceeds {d}")
    if d_lo >= d:
        return lo
    if disp(hi) < d:
        raise MtvDomainError("displacement exceeds what a BB profile covers; BCB expected")
    for _ in range(200):
        if hi - lo <= PEAK_TOL:
            break
        mid = 0.5 * (lo + hi)
        if disp(mid) < d:
            lo = mid
        else:
            hi = mid
    # ``lo`` never overshoots; near the drag limit ``hi`` can by a wide margin
    return lo


def mtv_bb(seg: SegmentBoundary) -> MtvResult:
    _check_canonical(seg)
    peak = bb_peak(seg)
    dyn = seg.dynamics
    t = accel_time(seg.x20, peak, dyn) + decel_time(peak, seg.x2f, dyn)
    # Without a reachable speed bound the peak tends to the drag-limited
    # speed, and long segments need a peak closer to it than a double can
    # resolve.  The distance the bisected peak leaves uncovered is then
    # travelled at that peak, with full thrust just balancing drag.
    shortfall = seg.distance - accel_distance(seg.x20, peak, dyn) - decel_distance(peak, seg.x2f, dyn)
    if shortfall > 0.0 and peak > 0.0:
        t += shortfall / peak
    return MtvResult(t, BB, None, peak)


def oracle_min_time(seg: SegmentBoundary, dt: float = oracle.DEFAULT_DT) -> float:
    """Numerical minimum time from :mod:`planrefine.oracle`."""
    dyn = seg.dynamics
    return oracle.min_time(seg.x10, seg.x1f, seg.x20, seg.x2f, dyn.accel_max, dyn.vel_max, dyn.drag, dt)


def min_time_1d(seg: SegmentBoundary) -> MtvResult:
    """Minimum transfer time for one axis, closed form where it applies."""
    canon, mirrored = mirror_canonicalize(seg)
    if canon.x20 >= 0 and canon.x2f >= 0:
        try:
            profile = profile_select(canon)
            result = mtv_bcb(canon) if profile == BCB else mtv_bb(canon)
            return replace(result, mirrored=mirrored)
        except NotForwardReachable:
            pass
        except MtvDomainError:
            limit = min(canon.dynamics.vel_max, canon.dynamics.terminal_speed)
            if max(canon.x20, canon.x2f) > limit:
                return MtvResult(math.inf, INFEASIBLE, mirrored=mirrored)
            raise
    try:
        return MtvResult(oracle_min_time(canon), FALLBACK, mirrored=mirrored)
    except oracle.InfeasibleBoundary:
        return MtvResult(math.inf, INFEASIBLE, mirrored=mirrored)


def mtv_2d(p0: Sequence[float], p1: Sequence[float], v0: Sequence[float], v1: Sequence[float],
           dynamics: DynamicsParams) -> tuple[float, list[MtvResult]]:
    """Per-axis MTV; the segment takes as long as its slowest axis."""
    results = [min_time_1d(SegmentBoundary(a, b, va, vb, dynamics))
               for a, b, va, vb in zip(p0, p1, v0, v1)]
    return max(r.t_min for r in results), results


def feasibility_gap(duration: float, t_min: float, rtol: float = 0.0) -> tuple[float, float]:
    """Gap ``min(0, duration - t_min)`` and its ratio to ``t_min``.

    ``rtol`` absorbs solver round-off: shortfalls within ``rtol * t_min`` count
    as zero.  The ratio is floored at -1.
    """
    if not t_min > 0:
        return 0.0, 0.0
    gap = min(0.0, duration - t_min)
    if gap >= -rtol * t_min:
        return 0.0, 0.0
    if math.isinf(t_min):
        return -math.inf, -1.0
    return gap, max(gap / t_min, -1.0)
