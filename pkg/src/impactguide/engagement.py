"""Planar engagement kinematics against a stationary target.

The relative state is kept in polar form (range, line-of-sight angle, lead
angle) together with the interceptor's inertial position.  Heading is not
stored; it is reconstructed as ``sigma + theta_L``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence


class IntegrationError(FloatingPointError):
    """Raised when the state or a derivative stops being finite."""


@dataclass(frozen=True)
class EngagementState:
    r: float
    theta_L: float
    sigma: float
    x: float = 0.0
    y: float = 0.0
    t: float = 0.0

    @property
    def gamma_M(self) -> float:
        return self.sigma + self.theta_L

    def as_vector(self) -> list[float]:
        return [self.r, self.theta_L, self.sigma, self.x, self.y]

    @classmethod
    def from_vector(cls, y: Sequence[float], t: float) -> "EngagementState":
        return cls(y[0], y[1], y[2], y[3], y[4], t)


@dataclass(frozen=True)
class StateDerivative:
    r_dot: float
    theta_L_dot: float
    sigma_dot: float
    x_dot: float
    y_dot: float


def kinematics(r: float, theta_L: float, sigma: float, a_M: float, V_M: float):
    """Raw tuple form of the kinematics, used inside the integration loop."""
    s = math.sin(sigma)
    # on the sight line the LOS does not rotate, even at r = 0
    theta_dot = 0.0 if s == 0.0 else -V_M * s / r
    gamma = sigma + theta_L
    return (
        -V_M * math.cos(sigma),
        theta_dot,
        a_M / V_M - theta_dot,
        V_M * math.cos(gamma),
        V_M * math.sin(gamma),
    )


def dynamics_rhs(state: EngagementState, a_M: float, V_M: float) -> StateDerivative:
    fields = (state.r, state.theta_L, state.sigma, state.x, state.y, state.t, a_M, V_M)
    if not all(math.isfinite(v) for v in fields):
        raise IntegrationError(f"non-finite input to dynamics: state={state}, a_M={a_M}, V_M={V_M}")
    if state.r <= 0.0:
        raise ValueError(f"range must be positive, got {state.r}")
    if V_M <= 0.0:
        raise ValueError(f"speed must be positive, got {V_M}")
    return StateDerivative(*kinematics(state.r, state.theta_L, state.sigma, a_M, V_M))


Rhs = Callable[[float, Sequence[float]], Sequence[float]]


def _check(stage: str, values: Sequence[float], t: float) -> None:
    for i, v in enumerate(values):
        if not math.isfinite(v):
            raise IntegrationError(f"non-finite value at RK4 {stage}, component {i}, t={t:.6f}: {list(values)}")


def _stage(name, rhs, t, y):
    try:
        k = rhs(t, y)
    except ArithmeticError as exc:  # overflow or a zero range inside the stage
        raise IntegrationError(f"stage {name} at t={t:.6g}: {exc}") from exc
    _check(name, k, t)
    return k


def rk4_step(y: Sequence[float], rhs: Rhs, t: float, dt: float) -> list[float]:
    """Advance ``y`` by one classical Runge-Kutta step of size ``dt``."""
    if not dt > 0.0:
        raise ValueError(f"dt must be positive, got {dt}")
    h2 = 0.5 * dt
    k1 = _stage("k1", rhs, t, y)
    y2 = [a + h2 * b for a, b in zip(y, k1)]
    k2 = _stage("k2", rhs, t + h2, y2)
    y3 = [a + h2 * b for a, b in zip(y, k2)]
    k3 = _stage("k3", rhs, t + h2, y3)
    y4 = [a + dt * b for a, b in zip(y, k3)]
    k4 = _stage("k4", rhs, t + dt, y4)
    h6 = dt / 6.0
    out = [a + h6 * (b + 2.0 * c + 2.0 * d + e) for a, b, c, d, e in zip(y, k1, k2, k3, k4)]
    _check("result", out, t + dt)
    return out


def _parabola_vertex(t0, f0, t1, f1, t2, f2):
    # Lagrange form; returns (t_v, f_v) or None if not convex.
    d0 = (t0 - t1) * (t0 - t2)
    d1 = (t1 - t0) * (t1 - t2)
    d2 = (t2 - t0) * (t2 - t1)
    a = f0 / d0 + f1 / d1 + f2 / d2
    if a <= 0.0:
        return None
    b = -(f0 * (t1 + t2) / d0 + f1 * (t0 + t2) / d1 + f2 * (t0 + t1) / d2)
    tv = -b / (2.0 * a)
    if not (t0 <= tv <= t2):
        return None
    c = f0 * t1 * t2 / d0 + f1 * t0 * t2 / d1 + f2 * t0 * t1 / d2
    return tv, a * tv * tv + b * tv + c


def miss_distance(trajectory) -> float:
    """Closest approach over a run.

    ``trajectory`` holds records with ``t`` and ``r`` attributes, or
    ``(t, r)`` pairs.  An interior discrete minimum is refined with a
    parabola through r**2, which is exact for straight-line fly-bys.
    """
    pts = [(p[0], p[1]) if isinstance(p, (tuple, list)) else (p.t, p.r) for p in trajectory]
    if not pts:
        raise ValueError("empty trajectory")
    k = min(range(len(pts)), key=lambda i: pts[i][1])
    best = pts[k][1]
    if 0 < k < len(pts) - 1:
        (ta, ra), (tb, rb), (tc, rc) = pts[k - 1], pts[k], pts[k + 1]
        vertex = _parabola_vertex(ta, ra * ra, tb, rb * rb, tc, rc * rc)
        if vertex is not None:
            best = min(best, math.sqrt(max(vertex[1], 0.0)))
    return best
