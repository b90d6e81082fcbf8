"""Input saturation model and autopilot lag chain.

Signal path: commanded acceleration -> saturation model (state ``a_M``) ->
optional autopilot lag -> kinematics.
"""

from __future__ import annotations

from dataclasses import dataclass

G0 = 9.81

AUTOPILOTS = ("none", "first", "second")


@dataclass(frozen=True)
class ActuatorConfig:
    a_max: float = 20 * G0
    n: int = 2
    rho: float = 0.1
    autopilot: str = "none"
    tau1: float = 0.56
    tau2: float = 0.1
    command_clamp: float = 50.0  # multiples of a_max

    def __post_init__(self):
        if not self.a_max > 0.0:
            raise ValueError(f"a_max must be positive, got {self.a_max}")
        if int(self.n) != self.n or self.n < 2 or self.n % 2:
            raise ValueError(f"n must be an even integer >= 2, got {self.n}")
        if not self.rho > 0.0:
            raise ValueError(f"rho must be positive, got {self.rho}")
        if self.autopilot not in AUTOPILOTS:
            raise ValueError(f"autopilot must be one of {AUTOPILOTS}, got {self.autopilot!r}")
        if self.autopilot != "none" and not self.tau1 > 0.0:
            raise ValueError(f"autopilot time constant tau1 must be positive, got {self.tau1}")
        if self.autopilot == "second" and not self.tau2 > 0.0:
            raise ValueError(f"autopilot time constant tau2 must be positive, got {self.tau2}")
        if not self.command_clamp > 0.0:
            raise ValueError("command_clamp must be positive")

    @property
    def command_limit(self) -> float:
        return self.command_clamp * self.a_max


@dataclass(frozen=True)
class ActuatorChainState:
    a_M: float = 0.0
    ap1: float = 0.0
    ap2: float = 0.0
    config: ActuatorConfig = ActuatorConfig()


def saturation_rhs(a_M: float, a_M_c: float, a_max: float, n: int, rho: float) -> float:
    return (1.0 - (a_M / a_max) ** n) * a_M_c - rho * a_M


def delta_M(U_M: float, a_max: float, rho: float, n: int) -> float:
    """Bound that |a_M| cannot exceed when |a_M^c| <= U_M."""
    if not U_M > 0.0:
        raise ValueError(f"U_M must be positive, got {U_M}")
    return a_max * (U_M / (U_M + rho * a_max)) ** (1.0 / n)


def _lag_rates(cfg: ActuatorConfig, a_d: float, ap1: float, ap2: float) -> tuple[float, float]:
    if cfg.autopilot == "first":
        return (a_d - ap1) / cfg.tau1, 0.0
    if cfg.autopilot == "second":
        return (a_d - ap1) / cfg.tau1, (ap1 - ap2) / cfg.tau2
    return 0.0, 0.0


def autopilot_rhs(chain: ActuatorChainState, a_M_d: float) -> tuple[float, float]:
    """Derivatives of the two lag states; the unused ones stay at zero."""
    if chain.config.autopilot == "none":
        raise ValueError("no autopilot configured")
    return _lag_rates(chain.config, a_M_d, chain.ap1, chain.ap2)


def achieved_output(cfg: ActuatorConfig, a_M: float, ap1: float, ap2: float) -> float:
    if cfg.autopilot == "first":
        return ap1
    if cfg.autopilot == "second":
        return ap2
    return a_M


def achieved_acceleration(chain: ActuatorChainState) -> float:
    return achieved_output(chain.config, chain.a_M, chain.ap1, chain.ap2)


def clamp_command(a_c: float, cfg: ActuatorConfig) -> tuple[float, bool]:
    lim = cfg.command_limit
    if a_c > lim:
        return lim, True
    if a_c < -lim:
        return -lim, True
    return a_c, False

