"""Numerical minimum-time oracle for the drag-affected double integrator.

Independent of the closed forms in :mod:`planrefine.mtv`: the thrust and
braking phases are obtained by fixed-step RK4 integration of

    x1' = x2,   x2' = u - k/2 * |x2| * x2,   |u| <= U,

and the switching (peak) velocity is found by bisection on the accumulated
displacement.  For forward motion the drag term equals ``k/2 * x2**2``; the
``|x2|`` form keeps drag dissipative when the velocity changes sign, which the
oracle needs for boundary velocities that oppose the displacement.

Two profile families are searched: thrust-then-brake (peak ``p``, optional
cruise at ``+V``) and its mirror image (trough, cruise at ``-V``).  The
faster feasible one is returned.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

DEFAULT_DT = 1e-4


class InfeasibleBoundary(ValueError):
    """No bang-bang profile connects the two boundary states."""


@njit(cache=True)
def _accel(v, U, k):
    return U - 0.5 * k * abs(v) * v


@njit(cache=True)
def _phase_table(v0, U, k, vcap, x_stop, dt, max_steps):
    """Integrate ``v' = U - k/2|v|v`` from ``v0`` until ``v >= vcap`` or ``x >= x_stop``.

    Used for both phases: the thrust phase forward in time, and the braking
    phase backward in time from its final velocity (under time reversal the
    braking dynamics ``v' = -U - k/2|v|v`` become ``U + k/2|v|v``, which is
    ``_accel`` with the drag sign flipped; ``k`` is passed negated for that).
    Returns arrays ``(t, v, x)`` of equal length, ``v`` strictly increasing.
    """
    cap = 1024
    ts = np.empty(cap)
    vs = np.empty(cap)
    xs = np.empty(cap)
    ts[0] = 0.0
    vs[0] = v0
    xs[0] = 0.0
    n = 1
    v = v0
    x = 0.0
    t = 0.0
    # x only grows once v >= 0, so the displacement stop applies from there on
    while v < vcap and (x < x_stop or v < 0.0) and n < max_steps:
        k1v = _accel(v, U, k)
        k1x = v
        v2 = v + 0.5 * dt * k1v
        k2v = _accel(v2, U, k)
        k2x = v2
        v3 = v + 0.5 * dt * k2v
        k3v = _accel(v3, U, k)
        k3x = v3
        v4 = v + dt * k3v
        k4v = _accel(v4, U, k)
        k4x = v4
        v_new = v + dt / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)
        x = x + dt / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
        if v_new <= v:
            break  # stalled at the drag-limited speed
        v = v_new
        t += dt
        if n == cap:
            cap *= 2
            ts2 = np.empty(cap)
            vs2 = np.empty(cap)
            xs2 = np.empty(cap)
            ts2[:n] = ts[:n]
            vs2[:n] = vs[:n]
            xs2[:n] = xs[:n]
            ts, vs, xs = ts2, vs2, xs2
        ts[n] = t
        vs[n] = v
        xs[n] = x
        n += 1
    return ts[:n], vs[:n], xs[:n]


class _Table:
    """Monotone velocity table of one phase with Hermite interpolation."""

    def __init__(self, t, v, x, U, k):
        self.t, self.v, self.x = t, v, x
        self.U, self.k = U, k
        self.v_max = float(v[-1])

    def _slope(self, v):
        return self.U - 0.5 * self.k * abs(v) * v

    def at(self, p: float) -> tuple[float, float]:
        """(time, displacement) accumulated when the velocity reaches ``p``."""
        v = self.v
        if p <= v[0]:
            return 0.0, 0.0
        i = int(np.searchsorted(v, p)) - 1
        i = min(max(i, 0), len(v) - 2)
        h = self.t[i + 1] - self.t[i]
        # invert the cubic Hermite model of v(t) on the step
        a0, a1 = v[i], v[i + 1]
        d0, d1 = self._slope(a0) * h, self._slope(a1) * h
        s = (p - a0) / (a1 - a0) if a1 > a0 else 0.0
        for _ in range(30):
            s2, s3 = s * s, s * s * s
            val = (2 * s3 - 3 * s2 + 1) * a0 + (s3 - 2 * s2 + s) * d0 + (-2 * s3 + 3 * s2) * a1 + (s3 - s2) * d1
            der = (6 * s2 - 6 * s) * a0 + (3 * s2 - 4 * s + 1) * d0 + (-6 * s2 + 6 * s) * a1 + (3 * s2 - 2 * s) * d1
            if der == 0.0:
                break
            step = (val - p) / der
            s -= step
            if abs(step) < 1e-15:
                break
        s = min(max(s, 0.0), 1.0)
        # x(t) Hermite with x' = v
        x0, x1 = self.x[i], self.x[i + 1]
        s2, s3 = s * s, s * s * s
        xv = ((2 * s3 - 3 * s2 + 1) * x0 + (s3 - 2 * s2 + s) * a0 * h
              + (-2 * s3 + 3 * s2) * x1 + (s3 - s2) * a1 * h)
        return self.t[i] + s * h, xv


def _bisect(f, lo, hi, increasing, iters=200):
    """Root of a monotone function on [lo, hi] by bisection."""
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if (f(mid) < 0) == increasing:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _family(d, x20, x2f, U, V, k, dt, max_steps):
    """Fastest thrust-then-brake profile covering displacement ``d``; ``inf`` if none."""
    vT = math.sqrt(2.0 * U / k)
    cap = min(V, vT)
    lower = max(x20, x2f)
    if lower > cap:
        return math.inf, None
    # braking phase, reversed in time: v' = U + k/2|v|v
    bt, bv, bx = _phase_table(x2f, U, -k, cap, math.inf, dt, max_steps)
    brake = _Table(bt, bv, bx, U, -k)
    slack = max(0.0, -float(bx.min()))
    at, av, ax = _phase_table(x20, U, k, cap, d + slack + 1e-9 * (1.0 + abs(d)), dt, max_steps)
    thrust = _Table(at, av, ax, U, k)
    p_hi = min(thrust.v_max, brake.v_max, cap)

    def disp(p):
        return thrust.at(p)[1] + brake.at(p)[1]

    def total_time(p):
        return thrust.at(p)[0] + brake.at(p)[0]

    if lower < 0.0:
        top = min(0.0, p_hi)
        if disp(lower) >= d >= disp(top):
            p = _bisect(lambda q: disp(q) - d, lower, top, increasing=False)
            return total_time(p), p
    p0 = max(lower, 0.0)
    if p0 > p_hi or disp(p0) > d + 1e-12 * (1.0 + abs(d)):
        return math.inf, None
    if disp(p_hi) <= d:
        # near the terminal speed RK4 stalls a few ulps short of it
        if p_hi >= cap * (1.0 - 1e-9) and cap > 0.0:
            return total_time(p_hi) + (d - disp(p_hi)) / p_hi, p_hi
        return math.inf, None
    p = _bisect(lambda q: disp(q) - d, p0, p_hi, increasing=True)
    return total_time(p), p


def min_time(x10: float, x1f: float, x20: float, x2f: float,
             U: float, V: float, k: float, dt: float = DEFAULT_DT,
             max_steps: int = 50_000_000) -> float:
    """Minimum transfer time between two 1-D states; raises :class:`InfeasibleBoundary`."""
    if dt > DEFAULT_DT:
        raise ValueError(f"integration step must be <= {DEFAULT_DT}")
    d = x1f - x10
    if d == 0.0 and x20 == 0.0 and x2f == 0.0:
        return 0.0
    t_fwd, _ = _family(d, x20, x2f, U, V, k, dt, max_steps)
    t_rev, _ = _family(-d, -x20, -x2f, U, V, k, dt, max_steps)
    t = min(t_fwd, t_rev)
    if not math.isfinite(t):
        raise InfeasibleBoundary(
            f"no bang-bang profile from (x={x10}, v={x20}) to (x={x1f}, v={x2f}) with U={U}, V={V}, k={k}")
    return t
