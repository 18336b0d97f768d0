import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pairsafe.dynamics import AIR_TAXI_PARAMS, DEFAULT_THRESHOLDS, DynamicsKind, step
from pairsafe.grid import GridSpec, interpolate
from pairsafe.hj_solver import solve_time_to_reach
from pairsafe.policies import DipoleGuidance, Observation, TimeToReachGreedy, Waypoint, dipole_direction, make_policy

AT = DynamicsKind.AIR_TAXI
DI = DynamicsKind.DOUBLE_INTEGRATOR
finite = dict(allow_nan=False, allow_infinity=False)
V_NOM = AIR_TAXI_PARAMS.v_nominal


def obs_for(ego, wp, kind):
    return Observation(0.0, 1, np.asarray(ego, float), [], wp, 0, kind)


class TestWaypoint:
    def test_frame_alignment(self):
        wp = Waypoint((1000.0, 500.0), V_NOM, DEFAULT_THRESHOLDS[AT], np.pi / 2)
        q = wp.to_frame((1000.0, 0.0, np.pi / 2, 50.0))
        np.testing.assert_allclose(q, [-500.0, 0.0, 0.0, 50.0], atol=1e-9)

    def test_headingless_frame_points_at_waypoint(self):
        wp = Waypoint((0.0, 0.0), V_NOM, DEFAULT_THRESHOLDS[AT])
        q = wp.to_frame((0.0, 800.0, -np.pi / 2, 50.0))
        np.testing.assert_allclose(q, [-800.0, 0.0, 0.0, 50.0], atol=1e-9)

    def test_reached_needs_all_thresholds(self):
        wp = Waypoint((0.0, 0.0), V_NOM, DEFAULT_THRESHOLDS[AT], 0.0)
        assert wp.reached((100.0, 0.0, 0.3, V_NOM), AT)
        assert not wp.reached((400.0, 0.0, 0.0, V_NOM), AT)
        assert not wp.reached((100.0, 0.0, 1.0, V_NOM), AT)
        assert not wp.reached((100.0, 0.0, 0.0, V_NOM + 25.0), AT)

    def test_reached_double_integrator(self):
        wp = Waypoint((1.0, 1.0), 0.5, DEFAULT_THRESHOLDS[DI])
        assert wp.reached((1.1, 1.0, 0.45, 0.0), DI)
        assert not wp.reached((1.1, 1.0, 0.0, 0.0), DI)


class TestDipole:
    @given(st.floats(-3, 3, **finite), st.floats(-3, 3, **finite), st.floats(-np.pi, np.pi, **finite))
    def test_unit_and_tangent_to_circle(self, x, y, psi):
        r = np.array([x, y])
        if np.hypot(x, y) < 1e-3:
            return
        m = np.array([np.cos(psi), np.sin(psi)])
        e = dipole_direction(r, m)
        assert np.hypot(*e) == pytest.approx(1.0)
        # the field is the reflection of -m in the radial direction
        rh = r / np.hypot(x, y)
        assert float(e @ rh) == pytest.approx(float(m @ rh), abs=1e-9)

    def test_behind_waypoint_points_forward(self):
        e = dipole_direction((-1.0, 0.0), (1.0, 0.0))
        np.testing.assert_allclose(e, [1.0, 0.0])

    def test_guidance_converges_to_waypoint(self):
        pol = DipoleGuidance()
        wp = Waypoint((2.0, 1.0), 0.5, DEFAULT_THRESHOLDS[DI], 0.0)
        s = np.array([-2.0, -1.0, 0.0, 0.0])
        for k in range(400):
            if wp.reached(s, DI):
                break
            s = step(s, pol(obs_for(s, wp, DI)), 0.1, DI)
        assert wp.reached(s, DI), s

    def test_action_within_bounds(self):
        a = DipoleGuidance()(obs_for((3.0, 3.0, -1.0, 1.0), Waypoint((0, 0), 0.5, DEFAULT_THRESHOLDS[DI], 0.0), DI))
        assert np.all(np.abs(a) <= 0.5)


@pytest.fixture(scope="module")
def small_ttr():
    p = AIR_TAXI_PARAMS
    grid = GridSpec.from_lists((41, 41, 24, 5), (-3000, -3000, -np.pi, p.v_min), (3000, 3000, np.pi, p.v_max), periodic=(2,))
    return solve_time_to_reach(grid=grid)


class TestTimeToReachGreedy:
    def test_aligned_flies_straight(self, small_ttr):
        pol = TimeToReachGreedy(small_ttr)
        wp = Waypoint((0.0, 0.0), V_NOM, DEFAULT_THRESHOLDS[AT], 0.0)
        s = np.array([-2000.0, 0.0, 0.0, V_NOM])
        a = pol(obs_for(s, wp, AT))
        assert pol.last_flag == "greedy"
        assert a[0] == 0.0
        before = interpolate(small_ttr, wp.to_frame(s))
        after = interpolate(small_ttr, wp.to_frame(step(s, a, 1.0, AT)))
        assert after < before

    def test_waypoint_behind_turns_hard(self, small_ttr):
        pol = TimeToReachGreedy(small_ttr)
        wp = Waypoint((0.0, 0.0), V_NOM, DEFAULT_THRESHOLDS[AT], 0.0)
        s = np.array([-1500.0, 0.0, np.pi, V_NOM])
        turns = []
        for _ in range(10):
            a = pol(obs_for(s, wp, AT))
            turns.append(a[0])
            s = step(s, a, 1.0, AT)
        assert all(abs(w) == pytest.approx(0.1) for w in turns)
        assert len(set(np.sign(turns))) == 1

    def test_outside_grid_pursues(self, small_ttr):
        pol = TimeToReachGreedy(small_ttr)
        wp = Waypoint((0.0, 0.0), V_NOM, DEFAULT_THRESHOLDS[AT], 0.0)
        a = pol(obs_for((-9000.0, 2000.0, 0.0, V_NOM), wp, AT))
        assert pol.last_flag == "pursuit"
        assert a[0] < 0

    def test_reaches_waypoint(self, small_ttr):
        pol = TimeToReachGreedy(small_ttr)
        wp = Waypoint((0.0, 0.0), V_NOM, DEFAULT_THRESHOLDS[AT], 0.0)
        s = np.array([-2000.0, 1200.0, 0.0, V_NOM])
        for _ in range(200):
            if wp.reached(s, AT):
                break
            s = step(s, pol(obs_for(s, wp, AT)), 1.0, AT)
        assert wp.reached(s, AT), s

    def test_deterministic(self, small_ttr):
        wp = Waypoint((0.0, 0.0), V_NOM, DEFAULT_THRESHOLDS[AT], 0.0)
        o = obs_for((-1000.0, 300.0, 0.5, 50.0), wp, AT)
        assert np.array_equal(TimeToReachGreedy(small_ttr)(o), TimeToReachGreedy(small_ttr)(o))

    def test_factory(self, small_ttr):
        assert isinstance(make_policy(AT, small_ttr), TimeToReachGreedy)
        assert isinstance(make_policy(DI), DipoleGuidance)
        with pytest.raises(ValueError):
            make_policy(AT)
