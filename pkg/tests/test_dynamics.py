from __future__ import annotations

import math

import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from glfield.dynamics import (
    AutonomousDynamics,
    blow_up_time,
    flow,
    hitting_time,
    integrated_intensity,
    invert_integrated_intensity,
)
from glfield.errors import BlowUpExceeded, DomainError, KindError

LEAKY = AutonomousDynamics("leaky", 1.0, 1.0)
QUAD = AutonomousDynamics("quadratic", 1.0, 1.0)

pos = st.floats(0.05, 20.0)
lam0s = st.floats(0.0, 50.0)
areas = st.floats(0.0, 40.0)
kinds = st.sampled_from(["leaky", "quadratic"])


# --- flow -----------------------------------------------------------------


def test_leaky_fixed_point_is_stationary():
    assert flow(LEAKY, 1.0, 7.0) == pytest.approx(1.0, abs=1e-15)


def test_quadratic_flow_tan():
    assert flow(QUAD, 0.0, math.pi / 4) == pytest.approx(1.0, rel=1e-12)


def test_leaky_flow_closed_form():
    dyn = AutonomousDynamics("leaky", 2.0, 1.0)
    assert flow(dyn, 0.0, math.log(2)) == pytest.approx(1.0, rel=1e-12)


@pytest.mark.parametrize("b,tau", [(0.0, 1.0), (-1.0, 1.0), (1.0, 0.0), (1.0, -2.0), (math.inf, 1.0)])
def test_invalid_parameters_rejected(b, tau):
    with pytest.raises(DomainError):
        AutonomousDynamics("leaky", b, tau)


def test_unknown_kind_rejected():
    with pytest.raises(KindError):
        AutonomousDynamics("cubic", 1.0, 1.0)


def test_flow_domain_errors():
    with pytest.raises(DomainError):
        flow(LEAKY, 1.0, -0.1)
    with pytest.raises(DomainError):
        flow(LEAKY, -1.0, 0.1)
    with pytest.raises(BlowUpExceeded):
        flow(QUAD, 0.0, math.pi / 2)
    with pytest.raises(BlowUpExceeded):
        flow(QUAD, 0.0, 2.0)


def test_blow_up_is_a_domain_error():
    assert issubclass(BlowUpExceeded, DomainError)


# --- integrated intensity --------------------------------------------------


@pytest.mark.parametrize("dyn", [LEAKY, QUAD])
def test_integrated_zero(dyn):
    assert integrated_intensity(dyn, 0.7, 0.0) == 0.0


def test_integrated_constant_leaky():
    dyn = AutonomousDynamics("leaky", 2.5, 0.7)
    assert integrated_intensity(dyn, 2.5, 3.0) == pytest.approx(7.5, rel=1e-13)


def test_integrated_quadratic_log2():
    assert integrated_intensity(QUAD, 0.0, math.pi / 3) == pytest.approx(math.log(2), rel=1e-12)


def test_integrated_infinite_at_blow_up():
    assert math.isinf(integrated_intensity(QUAD, 0.0, math.pi / 2))


@settings(max_examples=60, deadline=None)
@given(kind=kinds, b=pos, tau=pos, lam0=lam0s, frac=st.floats(0.0, 0.95))
def test_integrated_matches_quadrature(kind, b, tau, lam0, frac):
    dyn = AutonomousDynamics(kind, b, tau)
    horizon = blow_up_time(dyn, lam0) if kind == "quadratic" else 5 * tau
    dt = frac * horizon
    exact, _ = quad(lambda s: flow(dyn, lam0, s), 0.0, dt, epsabs=1e-12, epsrel=1e-11, limit=200)
    assert integrated_intensity(dyn, lam0, dt) == pytest.approx(exact, rel=1e-8, abs=1e-10)


# --- inverse ----------------------------------------------------------------


def test_inverse_examples():
    assert invert_integrated_intensity(QUAD, 0.0, 0.0) == 0.0
    assert invert_integrated_intensity(LEAKY, 0.3, 0.0) == 0.0
    assert invert_integrated_intensity(QUAD, 0.0, math.log(2)) == pytest.approx(math.pi / 3, rel=1e-12)
    dyn = AutonomousDynamics("leaky", 2.0, 1.0)
    assert invert_integrated_intensity(dyn, 2.0, 5.0) == pytest.approx(2.5, rel=1e-12)


def test_inverse_negative_area():
    with pytest.raises(DomainError):
        invert_integrated_intensity(LEAKY, 1.0, -1e-3)


@settings(max_examples=300, deadline=None)
@given(kind=kinds, b=pos, tau=pos, lam0=lam0s, area=areas)
def test_round_trip(kind, b, tau, lam0, area):
    dyn = AutonomousDynamics(kind, b, tau)
    if kind == "quadratic":
        # beyond E/tau ~ 15 the spike intensity exceeds ~1e6 sqrt(b) and one ulp of dt
        # moves the compensator by more than 1e-9 (see test_round_trip_conditioning)
        area = min(area, 15.0 * tau)
    dt = invert_integrated_intensity(dyn, lam0, area)
    assert math.isfinite(dt) and dt >= 0
    if kind == "quadratic":
        assert dt <= blow_up_time(dyn, lam0)
    assert abs(integrated_intensity(dyn, lam0, dt) - area) <= 1e-9 * max(1.0, area)


@settings(max_examples=200, deadline=None)
@given(b=pos, tau=pos, lam0=lam0s, area=st.floats(0.0, 200.0))
def test_round_trip_conditioning(b, tau, lam0, area):
    """Full range: error bounded by the compensator slope times the spacing of doubles at dt."""
    dyn = AutonomousDynamics("quadratic", b, tau)
    dt = invert_integrated_intensity(dyn, lam0, area)
    t_star = blow_up_time(dyn, lam0)
    assert 0 <= dt <= t_star
    got = integrated_intensity(dyn, lam0, dt)
    if math.isinf(got):
        # dt rounded onto the blow-up time itself
        assert t_star - dt <= 4 * math.ulp(t_star)
        return
    # intensity at the target, sqrt(b) cot(phi1) with sin(phi1) = sin(phi0) exp(-area/tau);
    # taken in closed form because flow() floors the co-phase
    s0 = math.sqrt(b) / math.hypot(math.sqrt(b), lam0)
    slope = math.sqrt(b) * math.exp(area / tau) / s0 if area / tau < 700 else math.inf
    assert abs(got - area) <= 1e-9 * max(1.0, area) + 4 * slope * (math.ulp(dt) + math.ulp(t_star))


# --- semigroup, derivative, monotonicity ----------------------------------


@settings(max_examples=150, deadline=None)
@given(kind=kinds, b=pos, tau=pos, lam0=lam0s, s=st.floats(0.0, 1.0), t=st.floats(0.0, 1.0))
def test_semigroup(kind, b, tau, lam0, s, t):
    dyn = AutonomousDynamics(kind, b, tau)
    if kind == "quadratic":
        t_star = blow_up_time(dyn, lam0)
        s, t = s * 0.45 * t_star, t * 0.45 * t_star
    else:
        s, t = 3 * tau * s, 3 * tau * t
    lhs = flow(dyn, flow(dyn, lam0, s), t)
    rhs = flow(dyn, lam0, s + t)
    assert lhs == pytest.approx(rhs, rel=1e-10, abs=1e-12)


@settings(max_examples=80, deadline=None)
@given(kind=kinds, b=st.floats(0.2, 5.0), tau=st.floats(0.2, 5.0), lam0=st.floats(0.0, 5.0),
       frac=st.floats(0.05, 0.8))
def test_derivative_of_compensator(kind, b, tau, lam0, frac):
    dyn = AutonomousDynamics(kind, b, tau)
    horizon = blow_up_time(dyn, lam0) if kind == "quadratic" else 3 * tau
    dt = frac * horizon
    errs = []
    for h in (1e-3, 5e-4):
        h = h * horizon
        fd = (integrated_intensity(dyn, lam0, dt + h) - integrated_intensity(dyn, lam0, dt - h)) / (2 * h)
        errs.append(abs(fd - flow(dyn, lam0, dt)))
    # second-order convergence (or already at round-off)
    assert errs[1] <= errs[0] / 3 or errs[1] < 1e-8 * max(1.0, flow(dyn, lam0, dt))


@settings(max_examples=100, deadline=None)
@given(b=pos, tau=pos, lam0=lam0s, dt=st.floats(0.0, 100.0))
def test_leaky_flow_bounded(b, tau, lam0, dt):
    dyn = AutonomousDynamics("leaky", b, tau)
    v = flow(dyn, lam0, dt)
    assert min(lam0, b) - 1e-12 <= v <= max(lam0, b) + 1e-12


@settings(max_examples=100, deadline=None)
@given(b=pos, tau=pos, lam0=lam0s, f1=st.floats(0.0, 0.99), f2=st.floats(0.0, 0.99))
def test_quadratic_flow_increasing(b, tau, lam0, f1, f2):
    assume(abs(f1 - f2) > 1e-6)
    dyn = AutonomousDynamics("quadratic", b, tau)
    t_star = blow_up_time(dyn, lam0)
    lo, hi = sorted((f1, f2))
    assert flow(dyn, lam0, lo * t_star) < flow(dyn, lam0, hi * t_star)


@pytest.mark.parametrize("L", [10.0, 1e3, 1e6])
def test_quadratic_exceeds_any_level_before_blow_up(L):
    t_hit = hitting_time(QUAD, 0.0, L)
    assert t_hit < blow_up_time(QUAD, 0.0)
    assert flow(QUAD, 0.0, t_hit) == pytest.approx(L, rel=1e-9)


# --- blow-up and hitting times ---------------------------------------------


def test_blow_up_examples():
    assert abs(blow_up_time(QUAD, 0.0) - math.pi / 2) <= 1e-12
    assert blow_up_time(AutonomousDynamics("quadratic", 4.0, 1.0), 0.0) == pytest.approx(math.pi / 4, rel=1e-12)
    assert blow_up_time(QUAD, 1e12) < 1e-11


def test_blow_up_leaky_is_kind_error():
    with pytest.raises(KindError):
        blow_up_time(LEAKY, 0.0)


def test_hitting_examples():
    assert hitting_time(QUAD, 0.0, 1.0) == pytest.approx(math.pi / 4, rel=1e-12)
    assert hitting_time(LEAKY, 0.5, 2.0) is None
    dyn = AutonomousDynamics("leaky", 2.0, 1.0)
    assert hitting_time(dyn, 0.0, 1.0) == pytest.approx(math.log(2), rel=1e-12)


def test_hitting_requires_level_above_start():
    with pytest.raises(DomainError):
        hitting_time(QUAD, 1.0, 1.0)


@settings(max_examples=100, deadline=None)
@given(b=pos, tau=pos, lam0=lam0s, gap=st.floats(1e-6, 1e8))
def test_hitting_precedes_blow_up(b, tau, lam0, gap):
    dyn = AutonomousDynamics("quadratic", b, tau)
    t = hitting_time(dyn, lam0, lam0 + gap)
    assert t is not None and t <= blow_up_time(dyn, lam0)
