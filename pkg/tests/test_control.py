import logging

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from hcdpr.control import (
    STRATEGY_A_ARM_GAINS,
    STRATEGY_A_CABLE_GAINS,
    STRATEGY_B_GAINS,
    ControllerState,
    GainSet,
    StrategyAStates,
    error_vector,
    nominal_unstretched,
    pid_step,
    strategy_A_controller,
    strategy_B_controller,
    winch_limits,
)
from hcdpr.dynamics import gravity_vector
from hcdpr.kinematics import GeneralizedState, cable_lengths
from hcdpr.params import default_params
from hcdpr.tension import optimal_tensions

P = default_params()


def _run(gains, errors, dt=0.1, limits=None):
    state = ControllerState.fresh(np.shape(errors[0])[0])
    out = []
    for k, e in enumerate(errors, start=1):
        u, state = pid_step(state, e, k * dt, gains, limits)
        out.append(u)
    return np.array(out), state


class TestErrorVector:
    def test_equal_is_zero(self):
        assert not error_vector("B_joint", np.ones(5), np.ones(5)).any()

    def test_cables(self):
        np.testing.assert_allclose(error_vector("A_cables", (1.35, 1.35), (1.30, 1.40)), (0.05, -0.05))

    @given(arrays(np.float64, 5, elements=st.floats(-10, 10)), arrays(np.float64, 5, elements=st.floats(-10, 10)))
    def test_joint(self, d, a):
        np.testing.assert_array_equal(error_vector("B_joint", d, a), d - a)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            error_vector("A_arm", np.zeros(3), np.zeros(3))
        with pytest.raises(ValueError):
            error_vector("C", np.zeros(2), np.zeros(2))


class TestPID:
    def test_zero_error(self):
        out, _ = _run(GainSet(1, 2, 3), [np.zeros(2)] * 5)
        assert not out.any()

    def test_pure_proportional(self):
        out, _ = _run(GainSet(2, 0, 0), [np.ones(1)] * 5)
        np.testing.assert_array_equal(out, 2.0)

    def test_trapezoid_of_constant(self):
        out, _ = _run(GainSet(0, 10, 0), [np.ones(1)] * 5)
        assert out[-1, 0] == pytest.approx(5.0, abs=1e-12)

    def test_first_sample_has_no_derivative_kick(self):
        out, _ = _run(GainSet(0, 0, 7), [np.ones(1), 3 * np.ones(1)])
        assert out[0, 0] == 0.0
        assert out[1, 0] == pytest.approx(7 * 2 / 0.1)

    def test_time_must_increase(self):
        _, state = _run(GainSet(1, 1, 1), [np.ones(1)] * 2)
        with pytest.raises(ValueError):
            pid_step(state, np.ones(1), state.prev_time, GainSet(1, 1, 1))

    def test_negative_gain_rejected(self):
        with pytest.raises(ValueError):
            GainSet(-1.0, 0.0, 0.0)

    @given(
        st.lists(arrays(np.float64, 3, elements=st.floats(-1e3, 1e3)), min_size=1, max_size=10),
        st.sampled_from([-3.0, -0.5, 0.25, 2.0, 8.0]),
    )
    def test_linearity(self, errors, alpha):
        gains = GainSet(3.0, 0.5, 0.25)
        base, _ = _run(gains, errors)
        scaled, _ = _run(gains, [alpha * e for e in errors])
        np.testing.assert_allclose(scaled, alpha * base, rtol=1e-12, atol=1e-9)

    def test_anti_windup(self):
        gains = GainSet(1.0, 50.0, 0.0)
        out, state = _run(gains, [np.ones(1)] * 100, limits=(-2.0, 2.0))
        assert np.all(out <= 2.0)
        # the integral stops once P + I reaches the limit
        assert state.integral[0] <= 1.0 / 50.0 + 0.1 + 1e-12
        # and recovers on the first sample of opposite error
        u, _ = pid_step(state, -np.ones(1), state.prev_time + 0.1, gains, (-2.0, 2.0))
        assert u[0] < 2.0

    def test_freeze_holds_integral(self):
        state = ControllerState(np.array([0.3, 0.3]), np.ones(2), 0.1)
        _, new = pid_step(state, np.ones(2), 0.2, GainSet(0, 1, 0), freeze=[True, False])
        assert new.integral[0] == 0.3 and new.integral[1] > 0.3

    def test_replay_is_bit_identical(self):
        rng = np.random.default_rng(31)
        errors = list(rng.normal(size=(50, 5)))
        a, sa = _run(GainSet(*STRATEGY_B_GAINS), errors, dt=1e-5)
        b, sb = _run(GainSet(*STRATEGY_B_GAINS), errors, dt=1e-5)
        np.testing.assert_array_equal(a, b)
        np.testing.assert_array_equal(sa.integral, sb.integral)

    def test_reset(self):
        _, state = _run(GainSet(1, 1, 1), [np.ones(2)] * 3)
        state.reset()
        assert state.prev_error is None and not state.integral.any() and state.prev_time == 0.0


class TestStrategyA:
    gains = (GainSet(*STRATEGY_A_CABLE_GAINS), GainSet(*STRATEGY_A_ARM_GAINS))

    def test_reference_gains(self):
        assert STRATEGY_A_CABLE_GAINS == (2e2, 10, 0) and STRATEGY_A_ARM_GAINS == (6e2, 20, 1e2)

    def _call(self, desired, q, t=1e-4):
        L0 = nominal_unstretched(np.zeros(5), P)
        fb = GeneralizedState.at_rest(q)
        return strategy_A_controller(desired, fb, t, *self.gains, StrategyAStates(), P, L0), L0

    def test_zero_error_holds_rest_lengths(self):
        q = np.zeros(5)
        L = cable_lengths(q, P)
        (cmd, _, e), L0 = self._call((L[0], L[5], 0.0, 0.0), q)
        assert not e.any()
        assert cmd.tension_inputs == (L0[0], P.T_min, P.T_min, L0[1])
        assert not cmd.u_a.any()

    def test_arm_step_is_proportional(self):
        q = np.zeros(5)
        L = cable_lengths(q, P)
        (cmd, _, _), _ = self._call((L[0], L[5], 0.01, -0.02), q, t=0.0)
        np.testing.assert_allclose(cmd.u_a, [6e2 * 0.01, -6e2 * 0.02])

    def test_nominal_holds_platform(self):
        L01, L06 = nominal_unstretched(np.zeros(5), P)
        L = cable_lengths(np.zeros(5), P)
        T1 = P.K_s / L01 * (L[0] - L01)
        assert L01 == pytest.approx(L06)
        assert P.T_min < T1 < P.T_max

    def test_winch_command_saturates(self):
        q = np.zeros(5)
        L = cable_lengths(q, P)
        (cmd, _, _), _ = self._call((L[0] - 0.5, L[5] + 0.5, 0.0, 0.0), q, t=0.1)
        lo, hi = winch_limits(L[[0, 5]], P)
        L01, L06 = cmd.tension_inputs[0], cmd.tension_inputs[3]
        assert lo[0] <= L01 <= hi[0] and lo[1] <= L06 <= hi[1]
        assert L01 == pytest.approx(lo[0]) and L06 == pytest.approx(hi[1])


class TestStrategyB:
    gains = GainSet(*STRATEGY_B_GAINS)

    def test_reference_gains(self):
        assert STRATEGY_B_GAINS == (5e5, 3.5e7, 1.1e4)

    def test_zero_error_gives_static_distribution(self):
        q = np.array([0.05, -0.05, 0.0, 0.3, -0.4])
        cmd, _, e = strategy_B_controller(q, GeneralizedState.at_rest(q), 1e-5, self.gains, ControllerState.fresh(5), P)
        sol = optimal_tensions(q, P)
        L = cable_lengths(q, P)
        assert not e.any() and not cmd.saturated
        np.testing.assert_allclose(cmd.tension_inputs[1:3], sol.T[2:4], rtol=1e-10)
        np.testing.assert_allclose(cmd.tension_inputs[0], L[0] * P.K_s / (P.K_s + sol.T[0]), rtol=1e-12)
        np.testing.assert_allclose(gravity_vector(q, P.as_array())[:3], sol.W_m)

    @given(arrays(np.float64, 5, elements=st.floats(-0.05, 0.05)))
    def test_lower_tensions_in_bounds(self, dq):
        cmd, _, _ = strategy_B_controller(dq, GeneralizedState.at_rest(np.zeros(5)), 1e-5, self.gains, ControllerState.fresh(5), P)
        T3, T4 = cmd.tension_inputs[1:3]
        assert P.T_min <= T3 <= P.T_max and P.T_min <= T4 <= P.T_max

    def test_saturation_warns(self, caplog):
        with caplog.at_level(logging.WARNING, logger="hcdpr"):
            cmd, _, _ = strategy_B_controller(
                [0, -0.5, 0, 0, 0], GeneralizedState.at_rest(np.zeros(5)), 1e-5, self.gains, ControllerState.fresh(5), P
            )
        assert cmd.saturated
        assert "saturated" in caplog.text
