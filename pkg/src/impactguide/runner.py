"""Scenario orchestration: guidance -> saturation -> autopilot -> kinematics."""

from __future__ import annotations

import csv
import io
import logging
import math
from collections import deque
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Callable, Optional

from .actuator import ActuatorConfig, achieved_output, saturation_rhs
from .engagement import EngagementState, IntegrationError, kinematics, miss_distance, rk4_step
from .guidance import DIRECT_LAWS, HOLD_SIGMA_E, LAWS, GuidanceContext, GuidanceGains, switching_time_t1
from .sensing import NoiseConfig, make_rng, sensor_pipeline
from .timing import (TimingGains, barrier_envelope, error_terms, feasibility_window,
                     lyapunov_value)

log = logging.getLogger(__name__)

RHO_SETTLE_TOL = 0.01  # s
TERMINAL_WINDOW = 0.5  # s
FILTER_TRANSIENT = 5.0  # s
PASS_BY_RANGE = 50.0  # m
# terminal-homing margin used in noisy runs when the gains leave it unset;
# a few times the time-to-go scatter left after filtering 1 % range noise
NOISY_TERMINAL_MARGIN = 0.05  # s


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ScenarioConfig:
    label: str = "scenario"
    r0: float = 10000.0
    theta_L0: float = 0.0
    gamma_M0: float = math.radians(60.0)
    V_M: float = 250.0
    t_d: float = 42.0
    law: str = "blf"
    gains: GuidanceGains = GuidanceGains()
    actuator: ActuatorConfig = ActuatorConfig()
    noise: Optional[NoiseConfig] = None
    dt: float = 1e-3
    t_max: Optional[float] = None
    r_lethal: float = 1.0
    log_every: int = 100

    def __post_init__(self):
        for name in ("r0", "V_M", "dt", "r_lethal", "t_d"):
            if not getattr(self, name) > 0.0:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")
        if self.law not in LAWS:
            raise ConfigError(f"law must be one of {LAWS}, got {self.law!r}")
        if self.t_max is not None and not self.t_max > self.t_d:
            raise ConfigError(f"t_max ({self.t_max}) must exceed t_d ({self.t_d})")
        if int(self.log_every) != self.log_every or self.log_every < 1:
            raise ConfigError("log_every must be a positive integer")

    @property
    def sigma0(self) -> float:
        return self.gamma_M0 - self.theta_L0

    @property
    def horizon(self) -> float:
        return self.t_max if self.t_max is not None else self.t_d + 10.0


@dataclass
class RunMetrics:
    label: str = ""
    law: str = ""
    success: bool = False
    status: str = ""
    t_d: float = 0.0
    impact_time: Optional[float] = None
    miss_distance: float = math.inf
    control_effort: float = 0.0
    peak_abs_a_M: float = 0.0
    peak_abs_a_M_c: float = 0.0
    peak_abs_sigma: float = 0.0
    barrier_violated: bool = False
    fov_violated: bool = False
    actuator_violated: bool = False
    realized_switch_time: Optional[float] = None
    switch_gap: Optional[float] = None
    analytic_switch_time: Optional[float] = None
    stage1_reach_time: Optional[float] = None
    stage1_hold_error: Optional[float] = None
    terminal_sigma: float = 0.0
    terminal_a_M: float = 0.0
    final_window_peak_sigma: float = 0.0
    final_window_peak_a_M: float = 0.0
    rho_settle_time: float = 0.0
    filtered_angle_rms: Optional[float] = None
    clamp_events: int = 0
    degenerate_events: int = 0
    saturation_events: int = 0


@dataclass
class TrajectoryRecord:
    t: float
    r: float
    theta_L: float
    sigma: float
    x: float
    y: float
    a_M_c: float
    a_M: float
    a_M_achieved: float
    rho: float
    rho1: float
    rho2: float
    t_go: float
    s_surface: float
    stage: str


TRAJECTORY_COLUMNS = [f.name for f in fields(TrajectoryRecord)]
METRICS_COLUMNS = [f.name for f in fields(RunMetrics)]

Trace = Callable[[str, dict], None]


def check_feasible(cfg: ScenarioConfig) -> None:
    t_min, t_max = feasibility_window(cfg.r0, cfg.V_M, cfg.gains.sigma_max, TimingGains(cfg.gains.N))
    if cfg.law == "blf" and not t_min < cfg.t_d < t_max:
        raise ConfigError(
            f"t_d={cfg.t_d} s lies outside the single-stage window ({t_min:.4f}, {t_max:.4f}) s; "
            "use law = multi_stage for larger impact times")
    if cfg.law == "multi_stage" and not cfg.t_d > t_min:
        raise ConfigError(f"t_d={cfg.t_d} s is below the minimum flight time {t_min:.4f} s")


def _impact_time(ts, rs, r_lethal):
    # Quadratic through the last three samples, solved for r = r_lethal.
    (t0, r0), (t1, r1), (t2, r2) = zip(ts, rs)
    lin = t1 + (r1 - r_lethal) / (r1 - r2) * (t2 - t1)
    d0, d1, d2 = (t0 - t1) * (t0 - t2), (t1 - t0) * (t1 - t2), (t2 - t0) * (t2 - t1)
    a = r0 / d0 + r1 / d1 + r2 / d2
    b = -(r0 * (t1 + t2) / d0 + r1 * (t0 + t2) / d1 + r2 * (t0 + t1) / d2)
    c = r0 * t1 * t2 / d0 + r1 * t0 * t2 / d1 + r2 * t0 * t1 / d2 - r_lethal
    if abs(a) < 1e-12:
        return lin
    disc = b * b - 4.0 * a * c
    if disc < 0.0:
        return lin
    roots = [(-b - math.sqrt(disc)) / (2 * a), (-b + math.sqrt(disc)) / (2 * a)]
    inside = [x for x in roots if t1 <= x <= t2]
    return min(inside, key=lambda x: abs(x - lin)) if inside else lin


def run_scenario(cfg: ScenarioConfig, trace: Optional[Trace] = None):
    """Integrate one engagement; returns (RunMetrics, list of TrajectoryRecord)."""
    check_feasible(cfg)
    g, act, V, dt = cfg.gains, cfg.actuator, cfg.V_M, cfg.dt
    tg = TimingGains(g.N)
    ctx = GuidanceContext(cfg.law, g, act, V)
    if g.terminal_margin is not None:
        ctx.terminal_margin = g.terminal_margin
    elif cfg.noise is not None:
        ctx.terminal_margin = NOISY_TERMINAL_MARGIN
    direct = cfg.law in DIRECT_LAWS
    m = RunMetrics(label=cfg.label, law=cfg.law, t_d=cfg.t_d)
    if cfg.law == "multi_stage":
        try:
            m.analytic_switch_time = switching_time_t1(cfg.r0, g.sigma_d, V, cfg.t_d, g.kappa, g.epsilon_t1)
        except ValueError as exc:
            log.info("analytic switch time unavailable: %s", exc)

    y = [cfg.r0, cfg.theta_L0, cfg.sigma0, 0.0, 0.0, 0.0, 0.0, 0.0]
    n_act = act.n
    a_max = act.a_max
    rho_act = act.rho

    def direct_accel(yy):
        s = math.sin(yy[2])
        th_dot = 0.0 if s == 0.0 else -V * s / yy[0]
        return (g.N if cfg.law == "png" else 1.0) * V * th_dot

    a_c = 0.0

    def rhs(_t, yy):
        a_M = direct_accel(yy) if direct else yy[5]
        if act.autopilot == "first":
            d1, d2 = (a_M - yy[6]) / act.tau1, 0.0
            a_k = yy[6]
        elif act.autopilot == "second":
            d1, d2 = (a_M - yy[6]) / act.tau1, (yy[6] - yy[7]) / act.tau2
            a_k = yy[7]
        else:
            d1 = d2 = 0.0
            a_k = a_M
        dr, dth, dsg, dx, dy = kinematics(yy[0], yy[1], yy[2], a_k, V)
        da = 0.0 if direct else saturation_rhs(yy[5], a_c, a_max, n_act, rho_act)
        return (dr, dth, dsg, dx, dy, da, d1, d2)

    if direct:
        y[5] = direct_accel(y)

    noisy = cfg.noise is not None
    rng = make_rng(cfg.noise) if noisy else None
    filters = None
    proxy = None
    sample_every = max(1, int(round(1.0 / (cfg.noise.sample_rate * dt)))) if noisy else 1
    angle_err_sq, angle_err_n = 0.0, 0

    records: list[TrajectoryRecord] = []
    ts = deque([0.0], maxlen=3)
    rs = deque([cfg.r0], maxlen=3)
    window = deque()
    closest = [(0.0, cfg.r0)]
    t = 0.0
    step = 0
    effort = 0.0
    rho_settle = 0.0
    envelope_seed = None
    reached_sigma_d = False
    stage_name = "png" if cfg.law == "png" else "dp" if cfg.law == "deviated_pursuit" else "blf"
    s_surface = 0.0
    horizon = cfg.horizon
    impact = None
    status = "timeout"

    def record(state, errs, a_cmd, a_M, a_ach):
        return TrajectoryRecord(state.t, state.r, state.theta_L, state.sigma, state.x, state.y,
                                a_cmd, a_M, a_ach, errs.rho, errs.rho1, errs.rho2, errs.t_go,
                                s_surface, stage_name)

    try:
        while True:
            state = EngagementState(y[0], y[1], y[2], y[3], y[4], t)
            # (1) sensors
            due = True
            if noisy:
                due = step % sample_every == 0
                if due:
                    proxy, filters = sensor_pipeline(state, filters, cfg.noise, rng)
                    if t > FILTER_TRANSIENT:
                        angle_err_sq += (proxy.theta_L - state.theta_L) ** 2
                        angle_err_n += 1
                    if trace:
                        trace("sample", {"t": t, "step": step, "proxy": proxy})
            # (2) timing errors (truth for logging, view for guidance)
            errs = error_terms(state, t, cfg.t_d, g.sigma_max, V, tg)
            if due:
                if noisy:
                    view = proxy.as_engagement()
                    view_errs = error_terms(view, t, cfg.t_d, g.sigma_max, V, tg)
                    rates = (proxy.r_dot, proxy.theta_L_dot)
                else:
                    view, view_errs, rates = state, errs, None
                if trace:
                    trace("errors", {"t": t, "step": step, "errors": view_errs})
                # (3) command
                if not direct:
                    a_c = ctx.command(view, view_errs, y[5], t, rates)
                    if envelope_seed is None and ctx.diagnostics.active_stage == "blf":
                        envelope_seed = (t, lyapunov_value(view_errs, ctx.diagnostics.z2_bar, g.p))
                    if ctx.switch_time == t and m.switch_gap is None:
                        m.switch_gap = abs(errs.t_go_d - errs.t_go_max)
                    if ctx.diagnostics.active_stage in ("blf", "terminal"):
                        stage_name, s_surface = ctx.diagnostics.active_stage, 0.0
                    else:
                        stage_name, s_surface = "sliding", ctx.diagnostics.s_surface
                else:
                    a_c = y[5]
                if trace:
                    trace("command", {"t": t, "step": step, "a_c": a_c, "state": state,
                                      "diag": asdict(ctx.diagnostics) if not direct else None})

            a_M = y[5]
            a_ach = achieved_output(act, y[5], y[6], y[7])
            # per-step invariants on the true state
            if abs(state.sigma) > g.sigma_max:
                m.fov_violated = True
            if abs(a_M) >= a_max and not direct:
                m.actuator_violated = True
            if errs.rho > errs.rho1 + 1e-9 or errs.rho < errs.rho2 - 1e-9:
                m.barrier_violated = True
            m.peak_abs_a_M = max(m.peak_abs_a_M, abs(a_M))
            m.peak_abs_a_M_c = max(m.peak_abs_a_M_c, abs(a_c))
            m.peak_abs_sigma = max(m.peak_abs_sigma, abs(state.sigma))
            if abs(errs.rho) > RHO_SETTLE_TOL:
                rho_settle = t
            if cfg.law == "multi_stage" and stage_name == "sliding":
                sigma_e = abs(state.sigma - g.sigma_d)
                if not reached_sigma_d and sigma_e < HOLD_SIGMA_E:
                    reached_sigma_d = True
                    m.stage1_reach_time = t
                    m.stage1_hold_error = sigma_e
                elif reached_sigma_d:
                    m.stage1_hold_error = max(m.stage1_hold_error, sigma_e)
            window.append((t, abs(state.sigma), abs(a_M)))
            while window and window[0][0] < t - TERMINAL_WINDOW:
                window.popleft()

            # (4) integrate
            y_new = rk4_step(y, rhs, t, dt)
            if direct:
                y_new[5] = direct_accel(y_new)
            t_new = (step + 1) * dt
            if trace:
                trace("step", {"t": t, "step": step})

            # (5) log
            if step % cfg.log_every == 0:
                records.append(record(state, errs, a_c, a_M, a_ach))
                if trace:
                    trace("log", {"t": t, "step": step})

            a_new = y_new[5]
            ts.append(t_new)
            rs.append(y_new[0])
            closest.append((t_new, y_new[0]))
            if len(closest) > 3:
                closest.pop(0)
            if y_new[0] <= cfg.r_lethal:
                t_hit = _impact_time(ts, rs, cfg.r_lethal) if len(ts) == 3 else t_new
                frac = min(max((t_hit - t) / dt, 0.0), 1.0)
                a_hit = a_M + frac * (a_new - a_M)
                effort += 0.5 * (a_M * a_M + a_hit * a_hit) * frac * dt
                impact = t_hit
                status = "intercepted"
                y, t = y_new, t_new
                break
            effort += 0.5 * (a_M * a_M + a_new * a_new) * dt
            if y_new[0] > y[0] and y[0] < PASS_BY_RANGE:
                y, t = y_new, t_new
                status = "passed closest approach"
                break
            y, t = y_new, t_new
            step += 1
            if t >= horizon:
                break
    except IntegrationError as exc:
        status = f"aborted: {exc}"
        log.warning("%s: %s", cfg.label, status)
    except ArithmeticError as exc:  # guidance blew up before the integrator saw it
        status = f"aborted: t={t:.6g}: {type(exc).__name__}: {exc}"
        log.warning("%s: %s", cfg.label, status)

    final = EngagementState(y[0], y[1], y[2], y[3], y[4], t)
    errs = error_terms(final, t, cfg.t_d, g.sigma_max, V, tg) if final.r > 0 else errs
    records.append(record(final, errs, a_c, y[5], achieved_output(act, y[5], y[6], y[7])))
    window.append((t, abs(final.sigma), abs(y[5])))

    m.status = status
    m.success = status == "intercepted"
    m.impact_time = impact
    m.miss_distance = miss_distance(list(closest)) if status != "timeout" else min(r for _, r in closest)
    if m.success:
        m.miss_distance = min(m.miss_distance, cfg.r_lethal)
    m.control_effort = effort
    m.terminal_sigma = final.sigma
    m.terminal_a_M = y[5]
    t_end = impact if impact is not None else t
    m.final_window_peak_sigma = max(s for tt, s, _ in window if tt >= t_end - TERMINAL_WINDOW)
    m.final_window_peak_a_M = max(a for tt, _, a in window if tt >= t_end - TERMINAL_WINDOW)
    m.peak_abs_sigma = max(m.peak_abs_sigma, abs(final.sigma))
    m.peak_abs_a_M = max(m.peak_abs_a_M, abs(y[5]))
    m.rho_settle_time = rho_settle
    m.realized_switch_time = ctx.switch_time if cfg.law == "multi_stage" else None
    m.clamp_events = ctx.clamp_events
    m.degenerate_events = ctx.degenerate_events
    m.saturation_events = ctx.saturation_events
    if angle_err_n:
        m.filtered_angle_rms = math.sqrt(angle_err_sq / angle_err_n)
    if envelope_seed is not None and log.isEnabledFor(logging.DEBUG):
        kappa_p = min(g.p * g.kappa1_bar, g.kappa3_bar)
        lo, hi = barrier_envelope(errs.rho1, errs.rho2, envelope_seed[1], kappa_p, g.p, t - envelope_seed[0])
        log.debug("%s: envelope at end (%.4g, %.4g), exponents 2*kappa_p=%.3g, 2p*kappa1=%.3g",
                  cfg.label, lo, hi, 2 * kappa_p, 2 * g.p * g.kappa1_bar)
    return m, records


def _safe_run(cfg: ScenarioConfig, with_trajectory: bool = False):
    try:
        m, traj = run_scenario(cfg)
    except Exception as exc:  # isolate per-scenario failures in a batch
        m, traj = RunMetrics(label=cfg.label, law=cfg.law, t_d=cfg.t_d, status=f"error: {exc}"), []
    return (m, traj) if with_trajectory else m


def run_batch(cfgs, workers: int = 1, with_trajectories: bool = False):
    """Run scenarios independently; results come back in input order."""
    cfgs = list(cfgs)
    labels = [c.label for c in cfgs]
    if len(set(labels)) != len(labels):
        raise ConfigError(f"scenario labels must be unique: {labels}")
    if not cfgs:
        return []
    if workers <= 1 or len(cfgs) == 1:
        return [_safe_run(c, with_trajectories) for c in cfgs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_safe_run, cfgs, [with_trajectories] * len(cfgs)))


# -- tables and CSV ----------------------------------------------------------

def effort_table(metrics) -> tuple[str, str]:
    """Comparison table as (csv_text, aligned_text)."""
    rows = []
    for m in metrics:
        imp = f"{m.impact_time:.4f}" if m.success and m.impact_time is not None else f"FAILED ({m.status})"
        rows.append((m.label, imp, f"{m.miss_distance:.4f}", f"{m.control_effort:.1f}"))
    header = ("scenario", "impact_time_s", "miss_m", "control_effort_m2_s3")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    widths = [max(len(str(r[i])) for r in [header, *rows]) for i in range(4)]
    lines = ["  ".join(str(v).ljust(widths[i]) if i == 0 else str(v).rjust(widths[i]) for i, v in enumerate(r))
             for r in [header, *rows]]
    return buf.getvalue(), "\n".join(lines) + "\n"


def _fmt(v):
    if v is None:
        return ""
    return repr(v) if isinstance(v, float) else str(v)


def write_trajectory_csv(path, records) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRAJECTORY_COLUMNS)
        for rec in records:
            w.writerow([_fmt(getattr(rec, c)) for c in TRAJECTORY_COLUMNS])


def read_trajectory_csv(path) -> list[TrajectoryRecord]:
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != TRAJECTORY_COLUMNS:
            raise ValueError(f"unexpected trajectory header {reader.fieldnames}")
        for row in reader:
            out.append(TrajectoryRecord(**{c: (row[c] if c == "stage" else float(row[c]))
                                           for c in TRAJECTORY_COLUMNS}))
    return out


_METRIC_TYPES = {f.name: f.type for f in fields(RunMetrics)}


def _parse_metric(name, text):
    kind = _METRIC_TYPES[name]
    if text == "" and "Optional" in kind:
        return None
    if kind == "bool":
        if text not in ("True", "False"):
            raise ValueError(f"{name}: bad boolean {text!r}")
        return text == "True"
    if kind == "int":
        return int(text)
    if kind == "str":
        return text
    return float(text)


def write_metrics_csv(path, metrics) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(METRICS_COLUMNS)
        for m in metrics:
            w.writerow([_fmt(getattr(m, c)) for c in METRICS_COLUMNS])


def read_metrics_csv(path) -> list[RunMetrics]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        return [RunMetrics(**{c: _parse_metric(c, row[c]) for c in METRICS_COLUMNS}) for row in reader]


def ensure_dir(path) -> Path:
    p = Path(path)
    p.mkdir(parents=True, exist_ok=True)
    return p
