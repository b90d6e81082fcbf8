"""Time-to-go estimate, impact-time error and its barrier bounds."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .engagement import EngagementState


@dataclass(frozen=True)
class TimingGains:
    N: float = 3.0
    kappa: float = field(init=False)

    def __post_init__(self):
        if not self.N > 1.0:
            raise ValueError(f"navigation constant must exceed 1, got {self.N}")
        object.__setattr__(self, "kappa", 2.0 * (2.0 * self.N - 1.0))


@dataclass(frozen=True)
class ErrorTerms:
    rho: float
    rho1: float
    rho2: float
    rho1_dot: float
    rho2_dot: float
    t_go: float
    t_go_d: float

    @property
    def t_go_max(self) -> float:
        return self.rho1 + self.t_go_d

    @property
    def t_go_min(self) -> float:
        return self.rho2 + self.t_go_d


def time_to_go(r: float, sigma: float, V_M: float, gains: TimingGains) -> float:
    """PN-based time-to-go valid for large lead angles."""
    return r / V_M * (1.0 + math.sin(sigma) ** 2 / gains.kappa)


def error_terms(state: EngagementState, t: float, t_d: float, sigma_max: float,
                V_M: float, gains: TimingGains) -> ErrorTerms:
    kappa = gains.kappa
    r, sigma = state.r, state.sigma
    t_go_d = t_d - t
    stretch_max = math.sin(sigma_max) ** 2 / kappa
    t_go = time_to_go(r, sigma, V_M, gains)
    t_go_M = r / V_M * (1.0 + stretch_max)
    t_go_m = r / V_M
    c = math.cos(sigma)
    return ErrorTerms(
        rho=t_go - t_go_d,
        rho1=t_go_M - t_go_d,
        rho2=t_go_m - t_go_d,
        rho1_dot=1.0 - c - c * stretch_max,
        rho2_dot=1.0 - c,
        t_go=t_go,
        t_go_d=t_go_d,
    )


def feasibility_window(r0: float, V_M: float, sigma_max: float, gains: TimingGains) -> tuple[float, float]:
    """Range of impact times reachable by the single-stage law."""
    if not r0 > 0.0:
        raise ValueError(f"initial range must be positive, got {r0}")
    t_min = r0 / V_M
    return t_min, t_min * (1.0 + math.sin(sigma_max) ** 2 / gains.kappa)


def max_achievable_impact_time(r0: float, V_M: float, sigma_max: float) -> float:
    if not abs(sigma_max) < math.pi / 2:
        raise ValueError(f"sigma_max must be below 90 deg, got {math.degrees(sigma_max):.3f} deg")
    return r0 / (V_M * math.cos(sigma_max))


def barrier_envelope(rho1: float, rho2: float, V_bar_0: float, kappa_p: float, p: int, t: float) -> tuple[float, float]:
    """Guaranteed (lower, upper) envelope on the impact-time error."""
    if p < 1 or int(p) != p:
        raise ValueError(f"p must be a positive integer, got {p}")
    if not kappa_p > 0.0:
        raise ValueError(f"kappa_p must be positive, got {kappa_p}")
    shrink = 1.0 - math.exp(-2.0 * p * V_bar_0 * math.exp(-2.0 * kappa_p * t))
    return rho2 * shrink, rho1 * shrink


def lyapunov_value(errors: ErrorTerms, z2: float, p: int = 1) -> float:
    """Composite barrier/quadratic Lyapunov value used to seed the envelope."""
    if errors.rho > 0.0:
        ratio = errors.rho / errors.rho1
    else:
        ratio = errors.rho / errors.rho2 if errors.rho2 != 0.0 else 0.0
    x = ratio ** (2 * p)
    if x >= 1.0:
        return math.inf
    return -math.log1p(-x) / (2.0 * p) + 0.5 * z2 * z2
