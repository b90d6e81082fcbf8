"""Seeker measurement noise and alpha-beta filtering."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .engagement import EngagementState

CHANNELS = ("r", "theta_L", "gamma_M")


@dataclass(frozen=True)
class NoiseConfig:
    angle_sigma: float = 0.015
    range_rel_bound: float = 0.01
    sample_rate: float = 100.0
    seed: int = 0
    alpha: float = 0.7
    beta: float = 0.1
    # per-channel (alpha, beta) overrides keyed by channel name
    channel_gains: tuple = ()

    def __post_init__(self):
        if self.angle_sigma < 0.0:
            raise ValueError("angle_sigma must be non-negative")
        if not 0.0 <= self.range_rel_bound < 1.0:
            raise ValueError("range_rel_bound must lie in [0, 1)")
        if not self.sample_rate > 0.0:
            raise ValueError("sample_rate must be positive")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        for name, a, b in self.gain_table():
            check_gains(a, b, name)

    def gain_table(self):
        overrides = dict((c, (a, b)) for c, a, b in self.channel_gains)
        unknown = set(overrides) - set(CHANNELS)
        if unknown:
            raise ValueError(f"unknown filter channels {sorted(unknown)}")
        return [(c, *overrides.get(c, (self.alpha, self.beta))) for c in CHANNELS]


def check_gains(alpha: float, beta: float, name: str = "filter") -> None:
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"{name}: alpha must lie in (0, 1), got {alpha}")
    if not 0.0 < beta <= 2.0 - alpha:
        raise ValueError(f"{name}: beta must lie in (0, 2 - alpha], got {beta}")


@dataclass(frozen=True)
class AlphaBetaState:
    x_hat: float
    v_hat: float
    alpha: float
    beta: float
    dt_s: float

    def __post_init__(self):
        check_gains(self.alpha, self.beta)
        if not self.dt_s > 0.0:
            raise ValueError("dt_s must be positive")


def alpha_beta_update(f: AlphaBetaState, z: float) -> AlphaBetaState:
    x_p = f.x_hat + f.v_hat * f.dt_s
    e = z - x_p
    return replace(f, x_hat=x_p + f.alpha * e, v_hat=f.v_hat + f.beta / f.dt_s * e)


@dataclass(frozen=True)
class Measurement:
    r: float
    theta_L: float
    gamma_M: float


def make_rng(cfg: NoiseConfig) -> np.random.Generator:
    return np.random.default_rng(int(cfg.seed))


def corrupt(state: EngagementState, cfg: NoiseConfig, rng: np.random.Generator) -> Measurement:
    n_theta, n_gamma = rng.normal(0.0, 1.0, 2)
    u = rng.uniform(-1.0, 1.0)
    return Measurement(
        r=state.r * (1.0 + cfg.range_rel_bound * u),
        theta_L=state.theta_L + cfg.angle_sigma * n_theta,
        gamma_M=state.gamma_M + cfg.angle_sigma * n_gamma,
    )


@dataclass(frozen=True)
class FilteredState:
    """Filtered stand-in for the true state, as seen by guidance."""

    r: float
    theta_L: float
    gamma_M: float
    r_dot: float
    theta_L_dot: float
    t: float
    measurement: Measurement

    @property
    def sigma(self) -> float:
        return self.gamma_M - self.theta_L

    def as_engagement(self) -> EngagementState:
        return EngagementState(self.r, self.theta_L, self.sigma, 0.0, 0.0, self.t)


def sensor_pipeline(truth: EngagementState, filters: Optional[dict], cfg: NoiseConfig,
                    rng: np.random.Generator) -> tuple[FilteredState, dict]:
    """One sample: corrupt, filter each channel, rebuild the lead angle.

    ``filters`` is None before the first sample; filters then start at the
    first measurement with zero rate.
    """
    z = corrupt(truth, cfg, rng)
    dt_s = 1.0 / cfg.sample_rate
    if filters is None:
        filters = {
            name: AlphaBetaState(getattr(z, name), 0.0, a, b, dt_s)
            for name, a, b in cfg.gain_table()
        }
    else:
        filters = {name: alpha_beta_update(f, getattr(z, name)) for name, f in filters.items()}
    out = FilteredState(
        r=filters["r"].x_hat,
        theta_L=filters["theta_L"].x_hat,
        gamma_M=filters["gamma_M"].x_hat,
        r_dot=filters["r"].v_hat,
        theta_L_dot=filters["theta_L"].v_hat,
        t=truth.t,
        measurement=z,
    )
    return out, filters
