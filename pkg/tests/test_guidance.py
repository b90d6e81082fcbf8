import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from impactguide.actuator import ActuatorConfig
from impactguide.engagement import EngagementState
from impactguide.guidance import (GuidanceContext, GuidanceGains, alpha1, alpha1_dot, blf_command,
                                  deviated_pursuit_command, error_dynamics_terms, homing_reference,
                                  kappa2_bar, mu, multi_stage_command, png_command, q_selector,
                                  sgn_smooth, sliding_surface, spow, stage1_command, stage1_terms,
                                  switching_time_t1, theta_L_ddot)
from impactguide.runner import ScenarioConfig, run_scenario
from impactguide.timing import ErrorTerms, TimingGains, error_terms

V = 250.0
GAINS = GuidanceGains()
ACT = ActuatorConfig()
S60 = math.radians(60)
LAUNCH = EngagementState(10000.0, 0.0, S60)
LAUNCH_ERR = error_terms(LAUNCH, 0.0, 42.0, GAINS.sigma_max, V, TimingGains(3.0))


def test_gain_validation():
    with pytest.raises(ValueError, match="odd positive integers"):
        GuidanceGains(q_f=10)
    with pytest.raises(ValueError):
        GuidanceGains(p_f=9, q_f=11)
    with pytest.raises(ValueError):
        GuidanceGains(kappa1_bar=0.0)
    with pytest.raises(ValueError):
        GuidanceGains(sigma_d=math.radians(85))
    with pytest.raises(ValueError):
        GuidanceGains(p=0)
    assert GAINS.kappa == 10.0


def test_error_dynamics_terms():
    assert error_dynamics_terms(EngagementState(5000.0, 0.0, 0.0), V, 10.0) == (0.0, 0.0)
    F, G = error_dynamics_terms(LAUNCH, V, 10.0)
    assert F == pytest.approx(0.5375, abs=1e-12)
    assert G == pytest.approx(0.0138564064605510, abs=1e-15)


def test_kappa2_bar():
    flat = ErrorTerms(0.0, 1.0, -1.0, 0.0, 0.0, 1.0, 1.0)
    assert kappa2_bar(flat, 1.0) == 1.0
    assert kappa2_bar(LAUNCH_ERR, 1.0) == pytest.approx(1.05840272332097, abs=1e-12)
    scaled = ErrorTerms(0.0, 3 * LAUNCH_ERR.rho1, 3 * LAUNCH_ERR.rho2, 3 * LAUNCH_ERR.rho1_dot,
                        3 * LAUNCH_ERR.rho2_dot, 0.0, 0.0)
    assert kappa2_bar(scaled, 1.0) == pytest.approx(kappa2_bar(LAUNCH_ERR, 1.0), rel=1e-14)


def test_kappa2_bar_degenerate_bound_uses_fallback():
    e = ErrorTerms(0.0, 0.0, -1.0, 0.3, 0.5, 0.0, 0.0)
    assert kappa2_bar(e, 1.0, fallback=(0.4, 0.0)) == pytest.approx(math.sqrt(1 + 0.16 + 0.25))


def test_alpha1_launch_value():
    F, G = error_dynamics_terms(LAUNCH, V, 10.0)
    a1 = alpha1(F, G, 1.0, 1.0, kappa2_bar(LAUNCH_ERR, 1.0))
    assert a1 == pytest.approx(-187.343142012431, abs=1e-9)


@given(sg=st.floats(0.01, 1.5), rho=st.floats(1e-6, 5.0), r=st.floats(100.0, 1e4))
def test_alpha1_sign(sg, rho, r):
    F, G = error_dynamics_terms(EngagementState(r, 0.0, sg), V, 10.0)
    assert alpha1(F, G, rho, 1.0, 1.0) < 0.0


def test_alpha1_vanishes_on_time_at_zero_lead():
    for sg in (1e-2, 1e-4, 1e-6):
        F, G = error_dynamics_terms(EngagementState(500.0, 0.0, sg), V, 10.0)
        assert abs(alpha1(F, G, 0.0, 1.0, 1.0)) < 2e3 * sg


def test_mu():
    assert mu(1.0, 1.87938524157182, -2.0, 1) == pytest.approx(0.394930843634698, abs=1e-12)
    assert q_selector(0.0) == 0 and q_selector(1e-12) == 1
    assert mu(0.0, 1.5, -2.0, 1) == pytest.approx(1 / 4.0)
    assert mu(0.0, 1.5, -2.0, 1, q=1) == pytest.approx(1 / 2.25)
    assert mu(1.5 * (1 - 1e-9), 1.5, -2.0, 1) > 1e8
    # outside the barrier the weight freezes at its 99.9 % value
    clamp = 1.0 / (1.5 ** 2 * (1 - 0.999 ** 2))
    assert mu(1.6, 1.5, -2.0, 1) == pytest.approx(clamp)
    assert mu(-2.5, 1.5, -2.0, 1) == pytest.approx(1.0 / (4.0 * (1 - 0.999 ** 2)))


def test_alpha1_dot_frozen_state_is_zero():
    # lead angle of 90 deg leaves r constant; with a_M = V theta_dot and rho = 0 nothing moves
    st_ = EngagementState(1000.0, 0.0, math.radians(45))
    errs = ErrorTerms(0.0, 1.0, -1.0, 0.0, 0.0, 0.0, 0.0)
    th = -V * math.sin(st_.sigma) / st_.r
    F, G = error_dynamics_terms(st_, V, 10.0)
    a_hold = V * th
    val = alpha1_dot(st_, errs, GAINS, a_hold, V, 1.0, 0.0, rates=(0.0, th))
    # only the F_p and rho terms remain: dF/dsigma * 0 and K * rho_dot
    expected = -(1.0 + 1.0) * (F + G * a_hold) / G
    assert val == pytest.approx(expected, rel=1e-12)


def test_alpha1_dot_launch_value():
    # sympy total derivative of alpha1 along the launch flow with a_M = 0, kappa2 frozen
    k2 = kappa2_bar(LAUNCH_ERR, 1.0)
    assert alpha1_dot(LAUNCH, LAUNCH_ERR, GAINS, 0.0, V, k2, 0.0) == pytest.approx(-88.1916295822173, abs=1e-9)


def test_blf_command_launch_value():
    a_c = blf_command(LAUNCH, LAUNCH_ERR, GAINS, ACT, 0.0, V)
    assert a_c == pytest.approx(-275.540243916941, abs=1e-9)


def test_blf_command_zero_when_settled():
    st_ = EngagementState(3000.0, 0.0, 0.0)
    errs = ErrorTerms(0.0, 0.5, -0.5, 0.0, 0.0, 12.0, 12.0)
    assert blf_command(st_, errs, GAINS, ActuatorConfig(rho=1e-300), 0.0, V) == 0.0


def test_blf_command_singular_band():
    st_ = EngagementState(3000.0, 0.0, 1e-6)
    errs = error_terms(st_, 30.0, 42.0, GAINS.sigma_max, V, TimingGains(3.0))
    a_c = blf_command(st_, errs, GAINS, ACT, 10.0, V)
    assert math.isfinite(a_c)


def test_png_and_deviated_pursuit():
    assert png_command(EngagementState(1e4, 0.0, 0.0), V, 3.0) == 0.0
    assert png_command(LAUNCH, V, 3.0) == pytest.approx(-16.2379763209582, abs=1e-12)
    assert deviated_pursuit_command(EngagementState(1e4, 0.0, 0.0), V) == 0.0
    assert deviated_pursuit_command(EngagementState(1e4, 0.0, math.radians(65)), V) == pytest.approx(
        -5.66442366897906, abs=1e-12)


@given(sg=st.floats(-1.5, 1.5).filter(lambda s: abs(s) > 1e-9), r=st.floats(1.0, 1e5))
def test_png_turns_toward_collision(sg, r):
    assert math.copysign(1.0, png_command(EngagementState(r, 0.0, sg), V, 3.0)) == -math.copysign(1.0, sg)


def test_homing_reference_is_png():
    ref, _ = homing_reference(LAUNCH, 0.0, V, 3.0)
    assert ref == png_command(LAUNCH, V, 3.0)


def test_spow_and_surface():
    assert spow(-8.0, 1 / 3) == pytest.approx(-2.0)
    assert spow(0.5, 11 / 9) == pytest.approx(0.428621991426536, abs=1e-14)
    assert spow(0.0, 1.5) == 0.0
    assert sliding_surface(0.0, 0.0, 1.0, 11, 9) == 0.0
    assert sliding_surface(0.1, 0.05, 1.0, 11, 9) == pytest.approx(0.125695213320055, abs=1e-14)


@given(x=st.floats(-1e3, 1e3), a=st.floats(0.1, 3.0))
def test_spow_is_odd(x, a):
    assert spow(-x, a) == -spow(x, a)


@given(se_dot=st.floats(-2.0, 2.0).filter(lambda v: abs(v) > 1e-6))
def test_on_surface_signs_oppose(se_dot):
    se = -spow(se_dot, 11 / 9)
    assert sliding_surface(se, se_dot, 1.0, 11, 9) == pytest.approx(0.0, abs=1e-15)
    assert se * se_dot < 0


def test_sgn_smooth():
    assert sgn_smooth(0.5, 0.01) == 1.0 and sgn_smooth(-0.02, 0.01) == -1.0
    assert sgn_smooth(0.005, 0.01) == pytest.approx(0.5)
    assert sgn_smooth(0.0, 0.01) == 0.0
    assert sgn_smooth(1e-9, 0.0) == 1.0


def test_theta_l_ddot():
    sg = math.radians(65)
    r_dot, th = -V * math.cos(sg), -V * math.sin(sg) / 1e4
    assert r_dot == pytest.approx(-105.654565435175, abs=1e-9)
    assert th == pytest.approx(-0.0226576946759162, abs=1e-13)
    assert theta_L_ddot(1e4, r_dot, th, sg, 0.0) == pytest.approx(-4.78777776949361e-4, abs=1e-15)


def test_stage1_on_surface_tracks_los_rate():
    g = GuidanceGains(sigma_d=math.radians(65))
    st_ = EngagementState(1e4, 0.0, g.sigma_d)
    th = -V * math.sin(st_.sigma) / st_.r
    a_M = V * th  # sigma_e_dot = 0
    num, s, se, se_dot = stage1_terms(st_, g, a_M, V)
    assert (s, se, se_dot) == (0.0, 0.0, 0.0)
    a_c = stage1_command(st_, g, ACT, a_M, V)
    th_dd = theta_L_ddot(st_.r, -V * math.cos(st_.sigma), th, st_.sigma, a_M)
    assert a_c == pytest.approx((ACT.rho * a_M + V * th_dd) / (1 - (a_M / ACT.a_max) ** 2), rel=1e-12)


def test_switching_time():
    sd = math.radians(65)
    assert switching_time_t1(1e4, sd, V, 55.0, 10.0, 0.0) == pytest.approx(21.5867194003867, abs=1e-9)
    assert switching_time_t1(1e4, sd, V, 55.0, 10.0, 0.01) == pytest.approx(21.6051468689177, abs=1e-9)
    assert switching_time_t1(1e4, sd, V, 42.0, 10.0) == 0.0
    lam = 1 + math.sin(sd) ** 2 / 10
    slope = switching_time_t1(1e4, sd, V, 56.0, 10.0) - switching_time_t1(1e4, sd, V, 55.0, 10.0)
    assert slope == pytest.approx(1 / (1 - lam * math.cos(sd)))
    assert slope > 1.0
    with pytest.raises(ValueError):
        switching_time_t1(1e4, math.radians(5), V, 55.0, 0.05)


def test_multi_stage_switches_once():
    ctx = GuidanceContext("multi_stage", GAINS, ACT, V)
    tg = TimingGains(3.0)
    early = error_terms(LAUNCH, 0.0, 60.0, GAINS.sigma_max, V, tg)
    multi_stage_command(LAUNCH, early, ctx, 0.0, 0.0)
    assert ctx.stage == 1 and ctx.switch_time is None
    late = error_terms(LAUNCH, 17.0, 60.0, GAINS.sigma_max, V, tg)
    multi_stage_command(LAUNCH, late, ctx, 0.0, 17.0)
    assert ctx.stage == 2 and ctx.switch_time == 17.0
    multi_stage_command(LAUNCH, early, ctx, 0.0, 17.001)
    assert ctx.stage == 2 and ctx.switch_time == 17.0
    with pytest.raises(ValueError):
        multi_stage_command(LAUNCH, early, GuidanceContext("blf", GAINS, ACT, V), 0.0, 0.0)


def test_context_holds_command_near_saturation():
    ctx = GuidanceContext("blf", GAINS, ACT, V)
    first = ctx.command(LAUNCH, LAUNCH_ERR, 0.0, 0.0)
    held = ctx.command(LAUNCH, LAUNCH_ERR, ACT.a_max * (1 - 1e-9), 0.001)
    assert held == first and ctx.saturation_events == 1


def test_terminal_handover_is_one_way():
    ctx = GuidanceContext("blf", GAINS, ACT, V, terminal_margin=0.05)
    near = EngagementState(800.0, 0.0, math.radians(1.0))
    errs = error_terms(near, 38.8, 42.0, GAINS.sigma_max, V, TimingGains(3.0))
    assert abs(errs.rho) < 0.05
    ctx.command(near, errs, 0.0, 38.8)
    assert ctx.terminal_time == 38.8 and ctx.diagnostics.active_stage == "terminal"
    ctx.command(LAUNCH, LAUNCH_ERR, 0.0, 38.81)
    assert ctx.diagnostics.active_stage == "terminal"


class _Stop(Exception):
    pass


def test_alpha1_dot_matches_finite_difference_along_flow():
    dt = 1e-4
    cfg = ScenarioConfig(label="fd", dt=dt, log_every=10000)
    rows = []

    def trace(kind, d):
        if kind == "command":
            rows.append((d["t"], d["diag"]["alpha1"], d["diag"]["alpha1_dot"], d["state"].sigma))
            if d["t"] > 3.0:
                raise _Stop

    with pytest.raises(_Stop):
        run_scenario(cfg, trace=trace)
    checked = 0
    for k in range(1, len(rows) - 1, 997):
        t, _, a_dot, sg = rows[k]
        if abs(math.sin(2 * sg)) < 1e-2:
            continue
        fd = (rows[k + 1][1] - rows[k - 1][1]) / (2 * dt)
        assert abs(a_dot - fd) < 1e-3 * (1 + abs(a_dot)), (t, a_dot, fd)
        checked += 1
    assert checked >= 25
