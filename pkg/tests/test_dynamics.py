"""Vector field, integrator, variational flow and natural-period tests.

Expected values marked as oracle-derived are computed with independent
references (scipy's solve_ivp, finite differences, closed-form limits), never
with the code path under test.
"""

import math

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from resokit import (
    Model,
    ModelParams,
    OscState,
    energy,
    integrate,
    integrate_with_variations,
    natural_period,
    sample_trajectory,
    vector_field,
)
from resokit.dynamics import flow_with_variations

TWO_PI = 2.0 * math.pi


def duffing(A=3.0, omega=0.82, gamma=0.01):
    return ModelParams(Model.DUFFING, A=A, omega=omega, gamma=gamma)


def dvdp(A=0.0, omega=1.0, gamma=0.01):
    return ModelParams(Model.DUFFING_VAN_DER_POL, A=A, omega=omega, gamma=gamma)


class TestVectorField:
    def test_origin_feels_only_forcing(self):
        p = duffing(A=3.0, omega=0.82, gamma=0.01)
        dx, dv = vector_field(p, OscState(0.0, 0.0), 0.0)
        assert dx == 0.0
        assert dv == 3.0

    def test_restoring_force_at_unit_displacement(self):
        # cos(omega*t) = 0 at a quarter forcing period
        p = duffing(A=5.0, omega=1.3, gamma=0.0)
        t = 0.25 * p.forcing_period
        dx, dv = vector_field(p, OscState(1.0, 0.0), t)
        assert dx == 0.0
        assert dv == pytest.approx(-2.0, abs=1e-12)

    def test_self_sustained_damping_pumps_small_amplitudes(self):
        # |x| < 1 must feed energy in: acceleration has the sign of v
        p = dvdp(A=0.0, gamma=0.01)
        _, dv = vector_field(p, OscState(0.0, 1.0), 0.0)
        assert dv == pytest.approx(0.01, abs=1e-15)
        # and |x| > 1 dissipates
        _, dv = vector_field(p, OscState(2.0, 1.0), 0.25 * p.forcing_period)
        assert dv < -2.0 - 2.0**3

    def test_parameter_validation(self):
        with pytest.raises(ValueError):
            ModelParams(Model.DUFFING, A=-1.0, omega=1.0, gamma=0.0)
        with pytest.raises(ValueError):
            ModelParams(Model.DUFFING, A=1.0, omega=0.0, gamma=0.0)
        with pytest.raises(ValueError):
            ModelParams(Model.DUFFING, A=1.0, omega=1.0, gamma=-0.1)
        with pytest.raises(ValueError):
            ModelParams(Model.DUFFING_VAN_DER_POL, A=1.0, omega=1.0, gamma=0.0)
        with pytest.raises(ValueError):
            ModelParams(Model.DUFFING, beta=2.0)


class TestIntegrate:
    def test_unforced_damped_decay(self):
        p = duffing(A=0.0, omega=1.0, gamma=0.01)
        s = integrate(p, OscState(0.1, 0.0), 0.0, 100.0 * TWO_PI)
        assert abs(s.x) < 0.1
        assert math.hypot(s.x, s.v) < 0.1

    def test_against_scipy_reference(self):
        p = duffing(A=3.0, omega=0.82, gamma=0.01)

        def rhs(t, y):
            return [y[1], -0.01 * y[1] - y[0] - y[0] ** 3 + 3.0 * np.cos(0.82 * t)]

        ref = solve_ivp(rhs, (0.0, 40.0), [0.3, -0.2], rtol=1e-12, atol=1e-14)
        s = integrate(p, OscState(0.3, -0.2), 0.0, 40.0)
        assert s.x == pytest.approx(ref.y[0, -1], abs=2e-8)
        assert s.v == pytest.approx(ref.y[1, -1], abs=2e-8)

    def test_conservative_orbit_returns_after_one_natural_period(self):
        x_max = 1.0
        p = duffing(A=0.0, omega=1.0, gamma=0.0)
        T = natural_period(x_max)
        s = integrate(p, OscState(x_max, 0.0), 0.0, T, rtol=1e-10, atol=1e-12)
        assert abs(s.x - x_max) < 10.0 * 1e-10 * 10
        assert abs(s.v) < 1e-8

    def test_energy_conservation_over_100_periods(self):
        p = duffing(A=0.0, omega=1.0, gamma=0.0)
        s0 = OscState(1.0, 0.0)
        e0 = energy(s0)
        T = natural_period(1.0)
        rtol = 1e-10
        s = integrate(p, s0, 0.0, 100.0 * T, rtol=rtol, atol=1e-12)
        assert abs(energy(s) - e0) / e0 < 10.0 * rtol

    def test_equivariance_under_half_period_flip(self):
        # the flow commutes with (x, v, t) -> (-x, -v, t + pi/omega)
        p = duffing(A=3.0, omega=0.82, gamma=0.01)
        tau = 13.7
        shift = math.pi / p.omega
        s0 = OscState(0.4, -0.9)
        a = integrate(p, s0, 0.0, tau)
        b = integrate(p, OscState(-s0.x, -s0.v), shift, shift + tau)
        assert abs(a.x + b.x) < 1e-8
        assert abs(a.v + b.v) < 1e-8

    def test_determinism(self):
        p = duffing()
        r1 = integrate(p, OscState(0.0, 0.0), 0.0, 500.0)
        r2 = integrate(p, OscState(0.0, 0.0), 0.0, 500.0)
        assert r1 == r2

    def test_rejects_bad_spans_and_tolerances(self):
        p = duffing()
        with pytest.raises(ValueError):
            integrate(p, OscState(0.0, 0.0), 1.0, 1.0)
        with pytest.raises(ValueError):
            integrate(p, OscState(0.0, 0.0), 0.0, 1.0, rtol=0.0)


class TestVariations:
    def test_linear_center_monodromy_is_identity(self):
        # A=0, gamma=0 linearization about the origin is a rotation of period
        # 2*pi, so the fundamental matrix over 2*pi is the identity
        p = duffing(A=0.0, omega=1.0, gamma=0.0)
        _, M = integrate_with_variations(p, OscState(1e-9, 0.0), 0.0, TWO_PI)
        assert np.allclose(M, np.eye(2), atol=1e-7)

    @pytest.mark.parametrize("gamma,tau", [(0.01, 7.0), (0.2, 11.0), (0.0, 5.0)])
    def test_liouville_determinant(self, gamma, tau):
        p = duffing(A=3.0, omega=0.82, gamma=gamma)
        _, M = integrate_with_variations(p, OscState(0.3, 0.1), 0.0, tau)
        det = M[0, 0] * M[1, 1] - M[0, 1] * M[1, 0]
        assert det == pytest.approx(math.exp(-gamma * tau), rel=1e-8)

    def test_dvdp_determinant_tracks_damping_integral(self):
        p = dvdp(A=2.0, omega=1.9, gamma=0.01)
        _, M, w, _, _ = flow_with_variations(p, OscState(1.5, 0.0), 0.0, 9.0)
        det = M[0, 0] * M[1, 1] - M[0, 1] * M[1, 0]
        assert det == pytest.approx(math.exp(-w), rel=1e-8)

    def test_matches_finite_differences(self):
        p = duffing(A=3.0, omega=0.82, gamma=0.01)
        s0 = np.array([0.3, -0.2])
        tau = 2.0 * p.forcing_period
        _, M = integrate_with_variations(p, OscState(*s0), 0.0, tau)
        h = 1e-6
        fd = np.zeros((2, 2))
        for j in range(2):
            dp = s0.copy()
            dm = s0.copy()
            dp[j] += h
            dm[j] -= h
            sp = integrate(p, OscState(*dp), 0.0, tau, rtol=1e-12, atol=1e-14)
            sm = integrate(p, OscState(*dm), 0.0, tau, rtol=1e-12, atol=1e-14)
            fd[0, j] = (sp.x - sm.x) / (2.0 * h)
            fd[1, j] = (sp.v - sm.v) / (2.0 * h)
        assert np.max(np.abs(M - fd)) < 1e-5

    def test_variations_ride_the_base_step_sequence(self):
        # base state from the augmented run must match the plain run exactly
        p = duffing(A=3.0, omega=0.82, gamma=0.01)
        s_plain = integrate(p, OscState(0.3, -0.2), 0.0, 25.0)
        s_aug, _ = integrate_with_variations(p, OscState(0.3, -0.2), 0.0, 25.0)
        assert s_plain == s_aug


def _oracle_period(x_max: float) -> float:
    """Independent brute-force period: integrate the conservative system from
    (x_max, 0) with scipy until v crosses zero upward at the opposite turning
    point; the full period is twice that time."""

    def rhs(t, y):
        return [y[1], -y[0] - y[0] ** 3]

    def upward_v(t, y):
        return y[1]

    upward_v.terminal = True
    upward_v.direction = 1.0
    t_guess = 4.0 * TWO_PI
    sol = solve_ivp(
        rhs, (0.0, t_guess), [x_max, 0.0], rtol=1e-12, atol=1e-14, events=upward_v
    )
    assert sol.t_events[0].size == 1
    return 2.0 * float(sol.t_events[0][0])


class TestNaturalPeriod:
    def test_small_amplitude_limit_is_2pi(self):
        assert natural_period(1e-6) == pytest.approx(TWO_PI, rel=1e-6)

    @pytest.mark.parametrize("x_max", [0.5, 1.0, 2.0, 5.0])
    def test_quadrature_matches_time_integration_oracle(self, x_max):
        assert natural_period(x_max) == pytest.approx(
            _oracle_period(x_max), rel=1e-8
        )

    def test_monotone_decreasing(self):
        assert natural_period(2.0) < natural_period(1.0) < TWO_PI

    def test_rejects_nonpositive_amplitude(self):
        with pytest.raises(ValueError):
            natural_period(0.0)
        with pytest.raises(ValueError):
            natural_period(-1.0)


class TestSampling:
    def test_samples_lie_on_the_solution(self):
        p = duffing(A=3.0, omega=0.82, gamma=0.01)
        traj = sample_trajectory(p, OscState(0.0, 0.0), 0.0, 3.0 * p.forcing_period, 96)
        assert len(traj) == 97
        mid = traj.state(48)
        direct = integrate(p, OscState(0.0, 0.0), 0.0, float(traj.t[48]))
        assert abs(mid.x - direct.x) < 1e-9
        assert abs(mid.v - direct.v) < 1e-9
