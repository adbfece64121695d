import math

import numpy as np
import pytest

from hcdpr.control import ControlCommand, nominal_unstretched
from hcdpr.dynamics import gravity_vector
from hcdpr.errors import ConfigError, DivergenceError
from hcdpr.kinematics import GeneralizedState, cable_lengths
from hcdpr.params import default_params
from hcdpr.sim import (
    AffineTrajectory,
    ScenarioSpec,
    builtin_scenarios,
    cable_energy_rollout,
    integrate_step,
    oscillation_ratio,
    run_scenario,
    scenario_from_dict,
    settling_time,
    summarize,
)
from hcdpr.tension import distribute, optimal_tensions

P = default_params()
SCEN = builtin_scenarios()


class TestScenarios:
    def test_catalog(self):
        assert sorted(SCEN) == ["case1", "case2", "case3a", "case3b", "case4a", "case4b"]
        assert {s.strategy for n, s in SCEN.items() if n in ("case1", "case3a", "case3b")} == {"A"}

    def test_case3b_ramp(self):
        np.testing.assert_allclose(SCEN["case3b"].sample(2.0).q_d[:2], (1.33, 1.37))

    def test_case3a_ramp(self):
        np.testing.assert_allclose(SCEN["case3a"].trajectory(3.0), (1.35, 1.35, 0.3, 0.3))

    def test_case4a_ramp(self):
        np.testing.assert_allclose(SCEN["case4a"].trajectory(0.5), (0, 0, 0, 0.5, -0.5))

    def test_case4b_ramp(self):
        np.testing.assert_allclose(SCEN["case4b"].trajectory(1.0)[:2], (-0.1, -0.05))

    def test_case2_step_and_gains(self):
        s = SCEN["case2"]
        np.testing.assert_allclose(s.trajectory(0.7), (2e-3, 4e-3, 0, 0, 0))
        g = s.gains[0]
        assert (g.K_p, g.K_i, g.K_d) == (5e5, 3.5e7, 1.1e4)

    def test_validation(self):
        with pytest.raises(ValueError):
            ScenarioSpec("x", "C", (), AffineTrajectory((0,) * 5, (0,) * 5))
        with pytest.raises(ValueError):
            SCEN["case2"].replace(trajectory=AffineTrajectory((0,) * 4, (0,) * 4))
        with pytest.raises(ValueError):
            SCEN["case2"].replace(dt=-1.0)

    def test_from_dict(self):
        s = scenario_from_dict({"base": "case2", "name": "mine", "duration": 0.1, "offset": [0, 1e-3, 0, 0, 0]})
        assert s.name == "mine" and s.duration == 0.1 and s.strategy == "B"
        np.testing.assert_allclose(s.trajectory(1.0), (0, 1e-3, 0, 0, 0))

    def test_from_dict_errors(self):
        with pytest.raises(ConfigError):
            scenario_from_dict({"base": "case9"})
        with pytest.raises(ConfigError):
            scenario_from_dict({"base": "case1", "speed": 2})
        with pytest.raises(ConfigError):
            scenario_from_dict({"base": "case1", "offset": [1, 2]})


class TestIntegrateStep:
    def test_equilibrium_is_fixed_point(self):
        q = np.zeros(5)
        T = optimal_tensions(q, P).T
        L = cable_lengths(q, P)
        L0 = L * P.K_s / (P.K_s + T)
        G = gravity_vector(q, P.as_array())
        cmd = ControlCommand(np.zeros(3), G[3:], (L0[0], T[2], T[3], L0[5]))
        state = GeneralizedState.at_rest(q)
        for _ in range(10):
            state = integrate_step(state, cmd, P, 1e-4)
        assert np.abs(state.as_vector()).max() < 1e-12

    def test_free_fall(self):
        cmd = ControlCommand(np.zeros(3), np.zeros(2), (10.0, 0.0, 0.0, 10.0))
        state = GeneralizedState.at_rest()
        for k in range(1000):
            state = integrate_step(state, cmd, P, 1e-4, t=k * 1e-4)
        assert abs(state.q[1] + 0.5 * P.g * 0.1**2) < 1e-8
        assert np.abs(state.q[[0, 2, 3, 4]]).max() < 1e-12

    def test_fourth_order_against_fine_reference(self):
        state = GeneralizedState([0.01, -0.005, 0.01, 0.3, -0.2], [0.05, 0.0, 0.0, 0.5, 0.0])
        L01, L06 = nominal_unstretched(np.zeros(5), P)
        u = (L01, P.T_min, P.T_min, L06)
        ref = cable_energy_rollout(P, state, u, 0.5, 1e-6)[2]
        err = [np.abs(cable_energy_rollout(P, state, u, 0.5, dt)[2] - ref).max() for dt in (2e-4, 1e-4)]
        assert 12 < err[0] / err[1] < 20

    def test_bad_step(self):
        cmd = ControlCommand(np.zeros(3), np.zeros(2), (1.3, 40.0, 40.0, 1.3))
        with pytest.raises(ValueError):
            integrate_step(GeneralizedState.at_rest(), cmd, P, 0.0)

    def test_divergence(self):
        cmd = ControlCommand(np.zeros(3), np.array([1e12, 0.0]), (1.3, 40.0, 40.0, 1.3))
        with pytest.raises(DivergenceError) as exc:
            integrate_step(GeneralizedState.at_rest(), cmd, P, 1e-3)
        assert exc.value.channel.startswith("q")


class TestRollout:
    def test_records(self):
        res = run_scenario(SCEN["case2"].replace(duration=0.01), P)
        assert len(res) == 1001
        first = res[0]
        assert first.t == 0.0 and not first.q.any()
        assert first.energy[0] == 0.0
        assert first.p_e.z_e == pytest.approx(0.662)
        np.testing.assert_allclose(res.e[0], (2e-3, 4e-3, 0, 0, 0))
        assert sum(1 for _ in res) == len(res)

    @pytest.mark.parametrize("name,duration", [("case1", 0.3), ("case3b", 0.3), ("case2", 0.02), ("case4a", 0.02)])
    def test_engines_agree(self, name, duration):
        spec = SCEN[name].replace(duration=duration)
        fast = run_scenario(spec, P)
        slow = run_scenario(spec, P, engine="python")
        np.testing.assert_allclose(fast.q, slow.q, rtol=0, atol=1e-10)
        np.testing.assert_allclose(fast.qdot, slow.qdot, rtol=0, atol=1e-8)
        np.testing.assert_allclose(fast.T, slow.T, rtol=1e-8, atol=1e-6)
        np.testing.assert_allclose(fast.e, slow.e, rtol=0, atol=1e-10)
        np.testing.assert_array_equal(fast.saturated, slow.saturated)

    def test_unknown_engine(self):
        with pytest.raises(ValueError):
            run_scenario(SCEN["case1"], P, engine="gpu")

    def test_deterministic(self):
        spec = SCEN["case3a"].replace(duration=0.2)
        a, b = run_scenario(spec, P), run_scenario(spec, P)
        for name in ("q", "qdot", "T", "e", "tau", "energy"):
            np.testing.assert_array_equal(getattr(a, name), getattr(b, name))

    def test_divergence_keeps_partial_records(self):
        spec = SCEN["case2"].replace(dt=2e-4, duration=0.5)
        with pytest.raises(DivergenceError) as exc:
            run_scenario(spec, P)
        rec = exc.value.records
        assert 0 < len(rec) < spec.steps + 1
        assert np.all(np.isfinite(rec.q))
        assert exc.value.t == pytest.approx(len(rec) * spec.dt)

    def test_strategy_b_lower_tensions_admissible(self):
        res = run_scenario(SCEN["case4b"].replace(duration=0.2), P)
        assert res.T[:, 2:4].min() >= P.T_min and res.T[:, 2:4].max() <= P.T_max

    def test_case4a_tensions_track_quasi_static_optimum(self):
        res = run_scenario(SCEN["case4a"].replace(duration=1.0), P)
        p = P.as_array()
        for k in range(50000, len(res), 500):
            q = res.q[k]
            T_opt, _, status = distribute(q, P, gravity_vector(q, p)[:3])
            assert status == 0
            upper = [0, 1, 4, 5]
            np.testing.assert_allclose(res.T[k, upper], T_opt[upper], rtol=0.02)


class TestMetrics:
    t = np.linspace(0, 1, 1001)

    def test_settling_time(self):
        e = np.exp(-10 * self.t)[:, None]
        assert settling_time(self.t, e, 0.05) == pytest.approx(-math.log(0.05) / 10, abs=1e-3)

    def test_never_settles(self):
        e = np.sin(20 * self.t)[:, None]
        assert math.isinf(settling_time(self.t, e, 0.05))

    def test_oscillation_ratio(self):
        assert oscillation_ratio(self.t, np.sin(40 * self.t)[:, None]) == pytest.approx(1.0, abs=1e-3)
        decaying = (np.exp(-20 * self.t) * np.sin(40 * self.t))[:, None]
        assert oscillation_ratio(self.t, decaying) < 0.01

    def test_summary_case2(self):
        s = summarize(run_scenario(SCEN["case2"].replace(duration=0.6), P))
        assert s.settling_time <= 0.5 and not s.sustained
        assert "settling time" in s.line("case2")
