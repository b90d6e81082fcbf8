"""Guidance laws producing the commanded lateral acceleration.

``blf``
    Barrier-Lyapunov backstepping law that drives the impact-time error to
    zero while keeping it between the time-varying bounds set by the
    field-of-view limit; the command is shaped through the saturation model.
``multi_stage``
    Sliding-mode lead-angle capture plus deviated pursuit, handing over to
    ``blf`` once the desired time-to-go drops to the maximum achievable one.
``png`` / ``deviated_pursuit``
    Baselines applied directly as achieved acceleration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

from .actuator import ActuatorConfig, clamp_command
from .engagement import EngagementState
from .timing import ErrorTerms

LAWS = ("blf", "multi_stage", "png", "deviated_pursuit")
DIRECT_LAWS = ("png", "deviated_pursuit")

DEGENERATE_RHO = 1e-9
DENOMINATOR_FLOOR = 1e-6
HOLD_SIGMA_E = math.radians(0.1)


def _odd_positive(v) -> bool:
    return int(v) == v and v > 0 and int(v) % 2 == 1


@dataclass(frozen=True)
class GuidanceGains:
    kappa1_bar: float = 1.0
    kappa3_bar: float = 1.0
    beta_bar: float = 1.0
    p: int = 1
    N: float = 3.0
    sigma_max: float = math.radians(80.0)
    xi: float = 1.0
    p_f: int = 11
    q_f: int = 9
    c: float = 1000.0
    sigma_d: float = math.radians(65.0)
    epsilon_t1: float = 0.01
    boundary_layer: float = 0.01
    singular_sin2sigma: float = 1e-4
    singular_G: float = 1e-9
    # hand over to terminal homing once |rho| and the remaining lead-angle
    # stretch both drop below this many seconds; None lets the runner decide
    terminal_margin: Optional[float] = None

    def __post_init__(self):
        for name in ("kappa1_bar", "kappa3_bar", "beta_bar", "xi", "c", "epsilon_t1"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if int(self.p) != self.p or self.p < 1:
            raise ValueError(f"p must be a positive integer, got {self.p}")
        if not self.N > 1.0:
            raise ValueError(f"N must exceed 1, got {self.N}")
        if not 0.0 < self.sigma_max < math.pi / 2:
            raise ValueError(f"sigma_max must lie in (0, 90) deg, got {math.degrees(self.sigma_max):.4f}")
        if not (_odd_positive(self.p_f) and _odd_positive(self.q_f)):
            raise ValueError(f"p_f and q_f must be odd positive integers, got p_f={self.p_f}, q_f={self.q_f}")
        if not 1.0 < self.p_f / self.q_f < 2.0:
            raise ValueError(f"p_f/q_f must lie in (1, 2), got {self.p_f}/{self.q_f}")
        if not abs(self.sigma_d) < self.sigma_max:
            raise ValueError("sigma_d must be smaller than sigma_max")
        if self.boundary_layer < 0.0:
            raise ValueError("boundary_layer must be non-negative")
        if self.terminal_margin is not None and self.terminal_margin < 0.0:
            raise ValueError("terminal_margin must be non-negative")

    @property
    def kappa(self) -> float:
        return 2.0 * (2.0 * self.N - 1.0)


@dataclass
class GuidanceDiagnostics:
    alpha1: float = 0.0
    alpha1_dot: float = 0.0
    mu: float = 0.0
    kappa2_bar: float = 0.0
    z2_bar: float = 0.0
    s_surface: float = 0.0
    active_stage: str = "blf"
    F_p: float = 0.0
    G_p: float = 0.0
    clamped: bool = False


# -- building blocks -------------------------------------------------------

def error_dynamics_terms(state: EngagementState, V_M: float, kappa: float) -> tuple[float, float]:
    """(F_p, G_p) such that the impact-time error evolves as F_p + G_p * a_M."""
    s, c = math.sin(state.sigma), math.cos(state.sigma)
    F = 1.0 - c * (1.0 - s * s / kappa)
    G = state.r * math.sin(2.0 * state.sigma) / (kappa * V_M * V_M)
    return F, G


def barrier_ratios(errors: ErrorTerms, fallback=(0.0, 0.0)) -> tuple[float, float, bool]:
    """Rate-to-bound ratios of both barriers, falling back on degenerate bounds."""
    degenerate = False
    if abs(errors.rho1) < DEGENERATE_RHO:
        q1, degenerate = fallback[0], True
    else:
        q1 = errors.rho1_dot / errors.rho1
    if abs(errors.rho2) < DEGENERATE_RHO:
        q2, degenerate = fallback[1], True
    else:
        q2 = errors.rho2_dot / errors.rho2
    return q1, q2, degenerate


def kappa2_bar(errors: ErrorTerms, beta_bar: float, fallback=(0.0, 0.0)) -> float:
    q1, q2, _ = barrier_ratios(errors, fallback)
    return math.sqrt(beta_bar + q1 * q1 + q2 * q2)


def alpha1(F_p: float, G_p: float, rho: float, kappa1_bar: float, kappa2: float) -> float:
    return (-F_p - (kappa1_bar + kappa2) * rho) / G_p


def q_selector(rho: float) -> int:
    return 1 if rho > 0.0 else 0


def mu(rho: float, rho1: float, rho2: float, p: int, q: Optional[int] = None) -> float:
    """Barrier weight; clamped to its value at 99.9 % of a violated bound."""
    if q is None:
        q = q_selector(rho)
    bound = rho1 if q else rho2
    b2p = bound ** (2 * p)
    inside = (rho < rho1) if q else (rho > rho2)
    if not inside or b2p - rho ** (2 * p) <= 0.0:
        if bound == 0.0:
            return math.inf
        return 1.0 / (b2p * (1.0 - 0.999 ** (2 * p)))
    return 1.0 / (b2p - rho ** (2 * p))


def barrier_violated(errors: ErrorTerms, tol: float = 1e-9) -> bool:
    return errors.rho > errors.rho1 + tol or errors.rho < errors.rho2 - tol


def _is_singular(sigma: float, G_p: float, gains: GuidanceGains) -> bool:
    return abs(math.sin(2.0 * sigma)) < gains.singular_sin2sigma or abs(G_p) < gains.singular_G


def alpha1_dot(state: EngagementState, errors: ErrorTerms, gains: GuidanceGains, a_M: float,
               V_M: float, kappa2: float, kappa2_dot: float,
               rates: Optional[tuple[float, float]] = None) -> float:
    """Total derivative of the stabilizing function along the closed loop.

    Chain rule through sigma, r, rho and kappa2_bar.  ``rates`` optionally
    overrides (r_dot, theta_L_dot); otherwise they come from the kinematics.
    """
    kappa = gains.kappa
    r, sg = state.r, state.sigma
    s, c = math.sin(sg), math.cos(sg)
    F = 1.0 - c * (1.0 - s * s / kappa)
    G = r * math.sin(2.0 * sg) / (kappa * V_M * V_M)
    if _is_singular(sg, G, gains):
        return 0.0
    if rates is None:
        r_dot, th_dot = -V_M * c, -V_M * s / r
    else:
        r_dot, th_dot = rates
    sigma_dot = a_M / V_M - th_dot
    K = gains.kappa1_bar + kappa2
    rho_dot = F + G * a_M
    dF_dsigma = s + (2.0 * s * c * c - s ** 3) / kappa
    dG_dsigma = 2.0 * r * math.cos(2.0 * sg) / (kappa * V_M * V_M)
    dG_dr = math.sin(2.0 * sg) / (kappa * V_M * V_M)
    num = -F - K * errors.rho
    num_dot = -dF_dsigma * sigma_dot - kappa2_dot * errors.rho - K * rho_dot
    G_dot = dG_dsigma * sigma_dot + dG_dr * r_dot
    return (num_dot * G - num * G_dot) / (G * G)


def saturation_denominator(a_M: float, cfg: ActuatorConfig) -> float:
    return 1.0 - (a_M / cfg.a_max) ** cfg.n


def spow(x: float, a: float) -> float:
    """Odd real power sign(x)|x|**a."""
    if x == 0.0:
        return 0.0
    return math.copysign(abs(x) ** a, x)


def sliding_surface(sigma_e: float, sigma_e_dot: float, xi: float, p_f: int, q_f: int) -> float:
    return sigma_e + spow(sigma_e_dot, p_f / q_f) / xi


def sgn_smooth(s: float, width: float) -> float:
    if width <= 0.0:
        return (s > 0.0) - (s < 0.0)
    return max(-1.0, min(1.0, s / width))


def theta_L_ddot(r: float, r_dot: float, theta_L_dot: float, sigma: float, a_M: float) -> float:
    return -2.0 * r_dot * theta_L_dot / r - math.cos(sigma) / r * a_M


def png_command(state: EngagementState, V_M: float, N: float) -> float:
    return N * V_M * (-V_M * math.sin(state.sigma) / state.r)


def deviated_pursuit_command(state: EngagementState, V_M: float) -> float:
    return V_M * (-V_M * math.sin(state.sigma) / state.r)


def homing_reference(state: EngagementState, a_M: float, V_M: float, N: float,
                     rates: Optional[tuple[float, float]] = None) -> tuple[float, float]:
    """PNG acceleration and its time derivative along the current motion.

    This is the limit of the stabilizing function at zero impact-time error.
    """
    r, sg = state.r, state.sigma
    if rates is None:
        r_dot, th_dot = -V_M * math.cos(sg), -V_M * math.sin(sg) / r
    else:
        r_dot, th_dot = rates
    ref = -N * V_M * V_M * math.sin(sg) / r
    sigma_dot = a_M / V_M - th_dot
    ref_dot = -N * V_M * V_M * (math.cos(sg) * sigma_dot / r - math.sin(sg) * r_dot / (r * r))
    return ref, ref_dot


def stage1_terms(state: EngagementState, gains: GuidanceGains, a_M: float, V_M: float,
                 rates: Optional[tuple[float, float]] = None) -> tuple[float, float, float, float]:
    """(numerator, s, sigma_e, sigma_e_dot) of the lead-angle capture law."""
    r, sg = state.r, state.sigma
    if rates is None:
        r_dot, th_dot = -V_M * math.cos(sg), -V_M * math.sin(sg) / r
    else:
        r_dot, th_dot = rates
    sigma_e = sg - gains.sigma_d
    sigma_e_dot = a_M / V_M - th_dot
    ratio = gains.p_f / gains.q_f
    s = sigma_e + spow(sigma_e_dot, ratio) / gains.xi
    th_dd = theta_L_ddot(r, r_dot, th_dot, sg, a_M)
    num = (V_M * th_dd
           - V_M * gains.xi * (gains.q_f / gains.p_f) * spow(sigma_e_dot, 2.0 - ratio)
           - gains.c * sgn_smooth(s, gains.boundary_layer))
    return num, s, sigma_e, sigma_e_dot


def stage1_command(state: EngagementState, gains: GuidanceGains, act: ActuatorConfig, a_M: float,
                   V_M: float, rates: Optional[tuple[float, float]] = None) -> float:
    num, _, _, _ = stage1_terms(state, gains, a_M, V_M, rates)
    return (act.rho * a_M + num) / saturation_denominator(a_M, act)


def switching_time_t1(r0: float, sigma_d: float, V_M: float, t_d: float, kappa: float,
                      epsilon_t1: float = 0.01) -> float:
    """Analytic hand-over instant for the multi-stage law (diagnostic only)."""
    lam = 1.0 + math.sin(sigma_d) ** 2 / kappa
    den = 1.0 - lam * math.cos(sigma_d)
    if den <= 0.0:
        raise ValueError(f"deviated pursuit at sigma_d={math.degrees(sigma_d):.2f} deg cannot stretch the flight time")
    return max(0.0, (V_M * (t_d + epsilon_t1) - lam * r0) / (V_M * den))


# -- stateful per-scenario evaluation -----------------------------------------

@dataclass
class GuidanceContext:
    """Per-scenario guidance memory: stage flag, backward differences, flags."""

    law: str
    gains: GuidanceGains
    actuator: ActuatorConfig
    V_M: float
    stage: int = 1
    switch_time: Optional[float] = None
    terminal_margin: float = 0.0
    terminal_time: Optional[float] = None
    last_command: float = 0.0
    barrier_violated: bool = False
    degenerate_events: int = 0
    saturation_events: int = 0
    clamp_events: int = 0
    _k2_prev: Optional[tuple[float, float]] = None
    _ratios: tuple[float, float] = (0.0, 0.0)
    diagnostics: GuidanceDiagnostics = field(default_factory=GuidanceDiagnostics)

    def __post_init__(self):
        if self.law not in LAWS:
            raise ValueError(f"unknown law {self.law!r}; expected one of {LAWS}")
        if self.law == "blf":
            self.stage = 2

    def kappa2(self, errors: ErrorTerms, t: float) -> tuple[float, float]:
        q1, q2, degenerate = barrier_ratios(errors, self._ratios)
        if degenerate:
            self.degenerate_events += 1
        self._ratios = (q1, q2)
        k2 = math.sqrt(self.gains.beta_bar + q1 * q1 + q2 * q2)
        k2_dot = 0.0
        if self._k2_prev is not None and t > self._k2_prev[0]:
            k2_dot = (k2 - self._k2_prev[1]) / (t - self._k2_prev[0])
        self._k2_prev = (t, k2)
        return k2, k2_dot

    def _finish(self, a_c: float, den: float) -> float:
        if den < DENOMINATOR_FLOOR:
            self.saturation_events += 1
            return self.last_command
        a_c, clamped = clamp_command(a_c / den, self.actuator)
        if clamped:
            self.clamp_events += 1
        self.diagnostics.clamped = clamped
        self.last_command = a_c
        return a_c

    def blf(self, state: EngagementState, errors: ErrorTerms, a_M: float, t: float,
            rates: Optional[tuple[float, float]] = None) -> float:
        g, act, V = self.gains, self.actuator, self.V_M
        if barrier_violated(errors):
            self.barrier_violated = True
        k2, k2_dot = self.kappa2(errors, t)
        F, G = error_dynamics_terms(state, V, g.kappa)
        if _is_singular(state.sigma, G, g):
            a1 = a1_dot = 0.0
        else:
            a1 = alpha1(F, G, errors.rho, g.kappa1_bar, k2)
            a1_dot = alpha1_dot(state, errors, g, a_M, V, k2, k2_dot, rates)
        weight = mu(errors.rho, errors.rho1, errors.rho2, g.p)
        barrier_term = 0.0 if errors.rho == 0.0 else weight * G * errors.rho ** (2 * g.p - 1)
        z2 = a_M - a1
        num = act.rho * a_M + a1_dot - barrier_term - g.kappa3_bar * z2
        d = self.diagnostics
        d.alpha1, d.alpha1_dot, d.mu, d.kappa2_bar, d.z2_bar = a1, a1_dot, weight, k2, z2
        d.F_p, d.G_p, d.active_stage, d.s_surface = F, G, "blf", 0.0
        return self._finish(num, saturation_denominator(a_M, act))

    def sliding(self, state: EngagementState, a_M: float,
                rates: Optional[tuple[float, float]] = None) -> float:
        g, act = self.gains, self.actuator
        num, s, sigma_e, _ = stage1_terms(state, g, a_M, self.V_M, rates)
        d = self.diagnostics
        d.s_surface = s
        d.active_stage = "sliding"
        return self._finish(act.rho * a_M + num, saturation_denominator(a_M, act))

    def terminal(self, state: EngagementState, a_M: float,
                 rates: Optional[tuple[float, float]] = None) -> float:
        g, act = self.gains, self.actuator
        ref, ref_dot = homing_reference(state, a_M, self.V_M, g.N, rates)
        z2 = a_M - ref
        d = self.diagnostics
        d.alpha1, d.alpha1_dot, d.z2_bar = ref, ref_dot, z2
        d.mu, d.s_surface, d.active_stage = 0.0, 0.0, "terminal"
        num = act.rho * a_M + ref_dot - g.kappa3_bar * z2
        return self._finish(num, saturation_denominator(a_M, act))

    def command(self, state: EngagementState, errors: ErrorTerms, a_M: float, t: float,
                rates: Optional[tuple[float, float]] = None) -> float:
        """Commanded acceleration for the configured law at time ``t``."""
        if self.law == "png":
            return png_command(state, self.V_M, self.gains.N)
        if self.law == "deviated_pursuit":
            return deviated_pursuit_command(state, self.V_M)
        if self.law == "multi_stage" and self.stage == 1:
            if errors.t_go_d <= errors.t_go_max:
                self.stage = 2
                self.switch_time = t
            else:
                return self.sliding(state, a_M, rates)
        if self.terminal_time is None and self.terminal_margin > 0.0:
            m = self.terminal_margin
            if abs(errors.rho) < m and errors.rho - errors.rho2 < m:
                self.terminal_time = t
        if self.terminal_time is not None:
            return self.terminal(state, a_M, rates)
        return self.blf(state, errors, a_M, t, rates)


def multi_stage_command(state: EngagementState, errors: ErrorTerms, ctx: GuidanceContext,
                        a_M: float, t: float) -> float:
    """Composite law; ``ctx`` carries the one-way stage flag."""
    if ctx.law != "multi_stage":
        raise ValueError("context is not configured for the multi-stage law")
    return ctx.command(state, errors, a_M, t)


def blf_command(state: EngagementState, errors: ErrorTerms, gains: GuidanceGains,
                act: ActuatorConfig, a_M: float, V_M: float,
                kappa2_dot: float = 0.0) -> float:
    """Stateless single evaluation of the barrier-Lyapunov command."""
    F, G = error_dynamics_terms(state, V_M, gains.kappa)
    k2 = kappa2_bar(errors, gains.beta_bar)
    if _is_singular(state.sigma, G, gains):
        a1 = a1_dot = 0.0
    else:
        a1 = alpha1(F, G, errors.rho, gains.kappa1_bar, k2)
        a1_dot = alpha1_dot(state, errors, gains, a_M, V_M, k2, kappa2_dot)
    weight = mu(errors.rho, errors.rho1, errors.rho2, gains.p)
    barrier_term = 0.0 if errors.rho == 0.0 else weight * G * errors.rho ** (2 * gains.p - 1)
    num = act.rho * a_M + a1_dot - barrier_term - gains.kappa3_bar * (a_M - a1)
    den = saturation_denominator(a_M, act)
    if den < DENOMINATOR_FLOOR:
        raise ValueError("saturation denominator vanished; command undefined")
    return clamp_command(num / den, act)[0]
